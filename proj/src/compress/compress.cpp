#include "fcn/compress.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace fcn {

namespace {

// ceil(f * n), tolerant of f*n landing a hair above an integer.
std::size_t ceil_count(double f, std::size_t n) {
  const double x = f * static_cast<double>(n);
  const double r = std::round(x);
  if (std::fabs(x - r) < 1e-9 * std::max(1.0, x)) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::ceil(x));
}

// Indices ordered by decreasing |value|, ties by index.
std::vector<std::size_t> by_magnitude(const std::vector<double>& v,
                                      const std::vector<std::size_t>& idx_in) {
  std::vector<std::size_t> idx = idx_in;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::fabs(v[a]) > std::fabs(v[b]);
  });
  return idx;
}

int exact_log2(double v) {
  int e = 0;
  const double m = std::frexp(std::fabs(v), &e);
  return m == 0.5 ? e - 1 : INT32_MIN;
}

}  // namespace

WeightTensor prune_mask(const WeightTensor& w, double target) {
  w.validate();
  if (w.size() == 0) throw ModelError("cannot prune an empty tensor");
  if (!(target > 0 && target <= 1)) throw ModelError("target sparsity must lie in (0, 1]");
  const std::size_t keep = ceil_count(target, w.size());
  std::vector<std::size_t> all(w.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<double> eff(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) eff[i] = w.effective(i);
  const auto order = by_magnitude(eff, all);
  WeightTensor out = w;
  std::fill(out.mask.begin(), out.mask.end(), 0);
  for (std::size_t i = 0; i < keep; ++i) out.mask[order[i]] = 1;
  return out;
}

std::vector<double> QuantSpec::codebook() const {
  std::vector<double> p;
  for (int e = n1; e >= n2; --e) p.push_back(-std::ldexp(1.0, e));
  p.push_back(0.0);
  for (int e = n2; e <= n1; ++e) p.push_back(std::ldexp(1.0, e));
  return p;
}

QuantSpec quant_bounds(const WeightTensor& w, int k, N2Rule rule) {
  w.validate();
  if (k < 2 || k > 16) throw ModelError("quantization bit-width k must lie in [2, 16]");
  double s = 0;
  for (std::size_t i = 0; i < w.size(); ++i) s = std::max(s, std::fabs(w.effective(i)));
  if (s == 0) throw ModelError("cannot derive quantization bounds from an all-zero tensor");
  QuantSpec q;
  q.k = k;
  q.n1 = static_cast<int>(std::floor(std::log2(4.0 * s / 3.0)));
  // log2 can land just below an exact power of two.
  if (std::ldexp(1.0, q.n1 + 1) <= 4.0 * s / 3.0) ++q.n1;
  if (rule == N2Rule::Inq) {
    q.n2 = q.n1 + 1 - (1 << (k - 1)) / 2;
  } else {
    if ((k - 1) % 2 != 0) {
      throw ModelError("the literal n2 rule 2^((k-1)/2) is not an integer for even k");
    }
    q.n2 = q.n1 + 1 - (1 << ((k - 1) / 2));
  }
  if (q.n2 > q.n1) q.n2 = q.n1;
  return q;
}

double snap_pow2(double v, const QuantSpec& spec) {
  const double a = std::fabs(v);
  if (a < 0.75 * std::ldexp(1.0, spec.n2)) return 0.0;
  int e = spec.n2;
  // Move up while |v| is at or past the midpoint 1.5 * 2^e.
  while (e < spec.n1 && a >= 1.5 * std::ldexp(1.0, e)) ++e;
  return std::copysign(std::ldexp(1.0, e), v);
}

WeightTensor quantize_to_pow2(const WeightTensor& w, const QuantSpec& spec,
                              double fraction) {
  w.validate();
  if (!(fraction > 0 && fraction <= 1)) throw ModelError("fraction must lie in (0, 1]");
  std::vector<std::size_t> alive;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w.effective(i) != 0) alive.push_back(i);
  }
  const auto order = by_magnitude(w.values, alive);
  const std::size_t count = ceil_count(fraction, alive.size());
  WeightTensor out = w;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = order[i];
    out.values[j] = snap_pow2(w.values[j], spec);
  }
  return out;
}

bool is_monomial_weight(double v, int precision_bits) {
  if (v == 0) return true;
  const int e = exact_log2(v);
  return e != INT32_MIN && e + precision_bits >= 0;
}

std::vector<LayerSparsity> sparsity_report(const NetworkSpec& net, int precision_bits) {
  std::vector<LayerSparsity> out;
  const auto names = net.layer_names();
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const WeightTensor* w = nullptr;
    if (auto* c = std::get_if<Conv2d>(&net.layers[i])) w = &c->weights;
    if (auto* d = std::get_if<Dense>(&net.layers[i])) w = &d->weights;
    if (!w) continue;
    LayerSparsity r;
    r.layer = names[i];
    r.total = w->size();
    for (std::size_t j = 0; j < w->size(); ++j) {
      const double v = w->effective(j);
      if (v == 0) continue;
      ++r.surviving;
      const int e = exact_log2(v);
      if (e != INT32_MIN) ++r.exponent_counts[e];
      if (!is_monomial_weight(v, precision_bits)) r.monomial_encodable = false;
    }
    r.fraction = r.total ? static_cast<double>(r.surviving) / static_cast<double>(r.total) : 0;
    out.push_back(std::move(r));
  }
  return out;
}

std::string sparsity_csv(const std::vector<LayerSparsity>& report) {
  std::ostringstream os;
  os << "layer,total,surviving,fraction,monomial_encodable,exponents\n";
  for (const auto& r : report) {
    os << r.layer << ',' << r.total << ',' << r.surviving << ',' << r.fraction << ','
       << (r.monomial_encodable ? "true" : "false") << ',';
    bool first = true;
    for (const auto& [e, n] : r.exponent_counts) {
      os << (first ? "" : ";") << e << ':' << n;
      first = false;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace fcn
