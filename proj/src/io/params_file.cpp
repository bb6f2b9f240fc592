#include "fcn/params_file.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

namespace fcn {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct LineContext {
  std::string_view source;
  std::size_t line;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(std::string(source) + ":" + std::to_string(line) + ": " + msg, line);
  }

  std::uint64_t u64(std::string_view key, std::string_view v) const {
    v = trim(v);
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || p != v.data() + v.size()) {
      fail(std::string(key) + ": expected an unsigned integer, got '" + std::string(v) + "'");
    }
    return out;
  }

  double real(std::string_view key, std::string_view v) const {
    v = trim(v);
    double out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || p != v.data() + v.size()) {
      fail(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
    }
    return out;
  }

  std::vector<std::uint64_t> list(std::string_view key, std::string_view v) const {
    std::vector<std::uint64_t> out;
    while (true) {
      const auto comma = v.find(',');
      out.push_back(u64(key, v.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      v.remove_prefix(comma + 1);
    }
    return out;
  }
};

}  // namespace

ParamsFile parse_params(std::string_view text, std::string_view source) {
  ParamsFile pf;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const LineContext at{source, line_no};
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) at.fail("expected 'name = value'");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (value.empty()) at.fail(std::string(key) + ": missing value");
    if (!seen.insert(std::string(key)).second) at.fail("duplicate key '" + std::string(key) + "'");

    if (key == "n") {
      pf.params.n = at.u64(key, value);
    } else if (key == "limbs") {
      pf.params.limbs = at.list(key, value);
    } else if (key == "t_lanes") {
      pf.params.t_lanes = at.list(key, value);
    } else if (key == "beta") {
      pf.params.beta = at.u64(key, value);
    } else if (key == "precision_bits") {
      const auto p = at.u64(key, value);
      if (p < 1 || p > 60) at.fail("precision_bits must lie in [1, 60]");
      pf.precision_bits = static_cast<int>(p);
    } else if (key == "noise_stddev") {
      pf.params.noise_stddev = at.real(key, value);
    } else if (key == "seed") {
      pf.seed = at.u64(key, value);
    } else {
      at.fail("unknown key '" + std::string(key) + "'");
    }
  }
  try {
    pf.params.validate();
    pf.fixed_point().validate();
  } catch (const std::exception& e) {
    throw ParseError(std::string(source) + ": invalid parameters: " + e.what(), 0);
  }
  return pf;
}

ParamsFile load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open parameter file", 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_params(ss.str(), path);
}

std::string format_params(const ParamsFile& p) {
  std::ostringstream os;
  auto join = [&](const std::vector<std::uint64_t>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  };
  os << "n = " << p.params.n << "\nlimbs = ";
  join(p.params.limbs);
  os << "\nt_lanes = ";
  join(p.params.t_lanes);
  os.precision(17);
  os << "\nbeta = " << p.params.beta << "\nprecision_bits = " << p.precision_bits
     << "\nnoise_stddev = " << p.params.noise_stddev << '\n';
  if (p.seed) os << "seed = " << *p.seed << '\n';
  return os.str();
}

}  // namespace fcn
