// fcn: key generation, local and remote encrypted inference, and the
// activation / compression / HOP analysis tools.

#include <unistd.h>

#include <CLI11.hpp>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <optional>

#include "common.hpp"
#include "fcn/approx.hpp"
#include "fcn/client.hpp"
#include "fcn/compress.hpp"
#include "fcn/decryptor.hpp"
#include "fcn/engine.hpp"
#include "fcn/server.hpp"

using namespace fcn;
using namespace fcn::cli;

namespace {

std::string hex(std::span<const std::uint8_t> bytes) {
  std::ostringstream os;
  for (auto b : bytes) os << std::hex << std::setw(2) << std::setfill('0') << int(b);
  return os.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + p.string());
}

template <class F>
void write_binary(const fs::path& p, F&& body) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  body(out);
  if (!out) throw std::runtime_error("write failed for " + p.string());
}

// Key directory as written by keygen.
struct KeyDir {
  ParamsFile pf;
  FvContextPtr ctx;
  SecretKey sk;
  PublicKey pk;

  explicit KeyDir(const fs::path& dir, const std::string& params_override = {}) {
    pf = load_params((dir / kParamsName).string());
    if (!params_override.empty()) {
      const auto other = load_params(params_override);
      if (!(other.params == pf.params)) {
        throw UsageError(params_override + " does not match the parameters the keys were made with");
      }
      pf.precision_bits = other.precision_bits;
    }
    ctx = FvContext::make(pf.params);
    auto in = open_in(dir / kSecretName);
    sk = read_secret_key(in, ctx);
    pk = load_public_key(dir / kPublicName, ctx);
  }
};

std::vector<double> checked_input(const std::string& path, std::size_t want, double bound) {
  const auto x = read_input_csv(path);
  if (x.size() != want) {
    throw UsageError(path + ": expected " + std::to_string(want) + " values, found " + std::to_string(x.size()));
  }
  for (double v : x) {
    if (!std::isfinite(v) || std::fabs(v) > bound) {
      throw UsageError(path + ": value " + std::to_string(v) + " lies outside [-" + std::to_string(bound) + ", " +
                       std::to_string(bound) + "]");
    }
  }
  return x;
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

void print_scores(const std::vector<double>& scores, const std::vector<double>* plain) {
  std::cout << std::setprecision(17) << (plain ? "class,score,plain\n" : "class,score\n");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    std::cout << i << ',' << scores[i];
    if (plain) std::cout << ',' << (*plain)[i];
    std::cout << '\n';
  }
  std::cout << "argmax," << argmax(scores) << '\n';
  if (plain) std::cout << "plain_argmax," << argmax(*plain) << '\n';
}

// ---- subcommands -----------------------------------------------------------

struct KeygenArgs {
  std::string params, out;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

int cmd_keygen(const KeygenArgs& a) {
  ParamsFile pf = a.params.empty() ? ParamsFile{} : load_params(a.params);
  if (a.seed) pf.seed = a.seed;
  pf.seed = seed_or_random(pf.seed);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  for (const char* name : {kParamsName, kSecretName, kPublicName, kEvalName}) {
    if (fs::exists(dir / name) && !a.force) {
      throw std::runtime_error((dir / name).string() + " exists; pass --force to overwrite");
    }
  }
  const auto ctx = FvContext::make(pf.params);
  const auto keys = keygen(ctx, *pf.seed);
  write_text(dir / kParamsName, format_params(pf));
  write_binary(dir / kSecretName, [&](std::ostream& o) { write_secret_key(o, ctx, keys.secret); });
  write_binary(dir / kPublicName, [&](std::ostream& o) { write_public_key(o, ctx, keys.pub); });
  write_binary(dir / kEvalName, [&](std::ostream& o) { write_eval_keys(o, ctx, keys.eval); });
  fs::permissions(dir / kSecretName, fs::perms::owner_read | fs::perms::owner_write);
  std::cout << "n," << ctx->degree() << "\nlimbs," << pf.params.limbs.size() << "\nlanes," << ctx->lane_count()
            << "\nlog2_q," << std::setprecision(6) << ctx->log2_q() << "\ndigest," << hex(ctx->digest())
            << "\ndir," << dir.string() << '\n';
  return kOk;
}

struct InferArgs {
  std::string model, keys, input, hops_report, params;
  std::optional<std::uint64_t> seed;
  double input_bound = 1.0;
};

int cmd_infer(const InferArgs& a) {
  const KeyDir kd(a.keys, a.params);
  const auto net = fold_batchnorm(load_weights(a.model));
  const auto cfg = kd.pf.fixed_point();
  const auto x = checked_input(a.input, net.input.size(), a.input_bound);
  capacity_check(net, cfg, kd.ctx->degree(), a.input_bound);

  auto ek_in = open_in(fs::path(a.keys) / kEvalName);
  const auto ek = read_eval_keys(ek_in, kd.ctx);
  Sampler rng(seed_or_random(a.seed ? a.seed : kd.pf.seed));
  const auto enc = encrypt_input(kd.ctx, kd.pk, cfg, net.input, x, rng);
  const auto result = eval_encrypted(net, enc, kd.ctx, ek, cfg, a.input_bound);
  const auto scores = decrypt_output(kd.ctx, kd.sk, cfg, result.output);
  const auto plain = eval_plain(net, x);

  print_scores(scores, &plain);
  const auto projected = project_hops(net, cfg).totals();
  const auto measured = result.hops.totals();
  std::cout << "hops_total," << measured.total() << "\nprojected_total," << projected.total()
            << "\nhops_match_projection," << (measured.same_counts(projected) ? "true" : "false")
            << "\nnoise_budget_min," << std::setprecision(4) << min_noise_budget(kd.ctx, kd.sk, result.output)
            << "\neval_ms," << measured.wall_ms << '\n';
  if (!a.hops_report.empty()) write_text(a.hops_report, result.hops.csv());
  return kOk;
}

struct ClientArgs {
  std::string keys, input, connect, params;
  std::optional<std::uint64_t> seed;
  std::uint64_t cap = kDefaultPayloadCap;
};

int cmd_client(const ClientArgs& a) {
  const KeyDir kd(a.keys, a.params);
  const auto cfg = kd.pf.fixed_point();
  const auto x = read_input_csv(a.input);
  Sampler rng(seed_or_random(a.seed ? a.seed : kd.pf.seed));
  const auto enc = encrypt_input(kd.ctx, kd.pk, cfg, {x.size(), 1, 1}, x, rng);
  std::cerr << "sending " << request_frame_bytes(*kd.ctx, x.size() * kd.ctx->lane_count()) << " bytes\n";
  const auto out = request_inference(a.connect, kd.ctx, enc, a.cap);
  print_scores(decrypt_output(kd.ctx, kd.sk, cfg, out), nullptr);
  return kOk;
}

struct ApproxArgs {
  std::string fn = "swish";
  int degree = 2;
  double interval = kDefaultInterval;
  int grid = kDefaultGridPoints;
  int window = 3;
};

void print_poly(const char* label, const PolyApprox& p) {
  std::cout << label;
  for (std::size_t j = p.coeffs.size(); j-- > 0;) std::cout << ',' << p.coeffs[j];
  std::cout << "\n" << label << "_delta," << p.delta << '\n';
}

// Exponents, then signs (+, - or 0 for a zero coefficient).
void print_exponents(const std::string& label, const PolyApprox& p) {
  std::cout << label << "_exponents";
  for (std::size_t j = p.pow2.size(); j-- > 0;) {
    std::cout << ',';
    if (p.pow2[j].sign != 0) std::cout << p.pow2[j].exponent;
  }
  std::cout << '\n' << label << "_signs";
  for (std::size_t j = p.pow2.size(); j-- > 0;) {
    std::cout << ',' << (p.pow2[j].sign > 0 ? "+" : p.pow2[j].sign < 0 ? "-" : "0");
  }
  std::cout << '\n';
}

int cmd_approx(const ApproxArgs& a) {
  const auto f = ActivationFn::parse(a.fn);
  const auto fit = remez_minimax(f, a.degree, a.interval, 100, a.grid);
  if (!fit.converged) std::cerr << "warning: Remez exchange did not converge\n";
  const auto rounded = round_coeffs_pow2(f, fit.approx);
  const auto star = scan_optimal_pow2(f, rounded, {a.window, std::nullopt});
  std::cout << std::setprecision(10) << "fn," << f.name() << "\ninterval," << a.interval << "\ndegree," << a.degree
            << '\n';
  std::cout << "# coefficients highest degree first\n";
  print_poly("real", fit.approx);
  print_poly("rounded", rounded);
  print_exponents("rounded", rounded);
  print_poly("optimal", star);
  print_exponents("optimal", star);
  std::cout << "optimal_form," << format_pow2(star) << '\n';
  return kOk;
}

struct CompressArgs {
  std::string model, out, csv;
  std::optional<double> prune, quantize;
  int k = 5;
  int precision = 15;
};

int cmd_compress(const CompressArgs& a) {
  auto net = load_weights(a.model);
  auto apply = [&](WeightTensor& w) {
    if (a.prune) w = prune_mask(w, *a.prune);
    if (a.quantize) w = quantize_to_pow2(w, quant_bounds(w, a.k), *a.quantize);
  };
  for (auto& layer : net.layers) {
    if (auto* c = std::get_if<Conv2d>(&layer)) apply(c->weights);
    if (auto* d = std::get_if<Dense>(&layer)) apply(d->weights);
  }
  const auto report = sparsity_report(net, a.precision);
  const auto csv = sparsity_csv(report);
  std::cout << csv;
  const bool all = std::all_of(report.begin(), report.end(), [](const auto& r) { return r.monomial_encodable; });
  std::cout << "monomial_encodable," << (all ? "true" : "false") << '\n';
  if (!a.csv.empty()) write_text(a.csv, csv);
  if (!a.out.empty()) save_weights(a.out, net);
  return kOk;
}

struct HopsArgs {
  std::string config = "compare", csv;
  std::size_t maps = 5;
  std::uint64_t seed = 1;
  int precision = 15;
};

int cmd_hops(const HopsArgs& a) {
  const auto cfgs = build_mnist_configs(a.maps, a.seed);
  FixedPointConfig fp;
  fp.precision_bits = a.precision;
  if (a.config == "compare") {
    const auto c = project_hops(cfgs.cryptonets, fp).totals();
    const auto f = project_hops(cfgs.faster, fp).totals();
    std::cout << "config,pt_ct_add,ct_ct_add,pt_ct_mul,ct_ct_mul,total\n";
    for (auto [name, h] : {std::pair{"cryptonets", c}, {"faster", f}}) {
      std::cout << name << ',' << h.pt_ct_add << ',' << h.ct_ct_add << ',' << h.pt_ct_mul << ',' << h.ct_ct_mul << ','
                << h.total() << '\n';
    }
    std::cout << "ratio," << std::setprecision(4) << double(c.total()) / double(f.total()) << '\n';
    return kOk;
  }
  const auto& net = a.config == "cryptonets" ? cfgs.cryptonets : cfgs.faster;
  const auto h = project_hops(net, fp);
  std::cout << h.csv();
  if (!a.csv.empty()) write_text(a.csv, h.csv());
  return kOk;
}

struct DemoArgs {
  std::string kind = "tiny", out;
  std::size_t maps = 5;
  std::uint64_t seed = 1;
};

// input 1x4x4 -> conv 2x2 (2 maps) -> Swish p* -> pool 2 -> dense 8->3, with
// pruned power-of-two weights.
NetworkSpec tiny_demo(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto weights = [&](std::vector<std::size_t> shape, std::size_t fan_in) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    std::normal_distribution<double> nd(0, std::sqrt(2.0 / double(fan_in)));
    std::vector<double> v(n);
    for (auto& x : v) x = nd(rng);
    auto w = WeightTensor::dense(std::move(shape), std::move(v));
    return quantize_to_pow2(prune_mask(w, 0.5), quant_bounds(w), 1.0);
  };
  NetworkSpec net;
  net.input = {1, 4, 4};
  net.layers.push_back(Conv2d{2, 1, 2, 2, 1, 0, weights({2, 1, 2, 2}, 4), {0.125, -0.0625}});
  net.layers.push_back(PolyActivation{swish_pow2_activation()});
  net.layers.push_back(ScaledAvgPool{2, 1, 0, false});
  net.layers.push_back(Dense{3, 8, weights({3, 8}, 8), {0.25, 0, -0.25}});
  return net;
}

int cmd_demo(const DemoArgs& a) {
  NetworkSpec net;
  if (a.kind == "tiny") {
    net = tiny_demo(a.seed);
  } else {
    const auto cfgs = build_mnist_configs(a.maps, a.seed);
    net = a.kind == "cryptonets" ? cfgs.cryptonets : cfgs.faster;
  }
  save_weights(a.out, net);
  const auto s = net.input;
  std::cout << "wrote " << a.out << " (input " << s.c << "x" << s.h << "x" << s.w << ", " << net.layers.size()
            << " layers)\n";
  return kOk;
}

// `fcn serve` runs the separate server binary so that no process holding a
// decrypt path ever touches requests.
int exec_server(int argc, char** argv) {
  std::error_code ec;
  auto self = fs::read_symlink("/proc/self/exe", ec);
  const auto server = (ec ? fs::path(argv[0]) : self).parent_path() / "fcn-server";
  std::vector<char*> args;
  std::string name = server.string();
  args.push_back(name.data());
  for (int i = 2; i < argc; ++i) args.push_back(argv[i]);
  args.push_back(nullptr);
  ::execv(name.c_str(), args.data());
  std::cerr << "error: cannot run " << name << ": " << std::strerror(errno) << '\n';
  return kRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc >= 2 && std::string_view(argv[1]) == "serve") return exec_server(argc, argv);

  CLI::App app{"fcn: oblivious neural-network inference over FV ciphertexts"};
  app.require_subcommand(1);
  app.add_subcommand("serve", "Run fcn-server (same options; see fcn-server --help)");

  KeygenArgs kg;
  auto* keygen_cmd = app.add_subcommand("keygen", "Generate secret, public and evaluation keys");
  keygen_cmd->add_option("--params", kg.params, "Parameter file (defaults if omitted)");
  keygen_cmd->add_option("--out", kg.out, "Output directory")->required();
  keygen_cmd->add_option("--seed", kg.seed, "Key-generation seed");
  keygen_cmd->add_flag("--force", kg.force, "Overwrite existing key files");

  InferArgs in;
  auto* infer_cmd = app.add_subcommand("infer", "Encrypt, evaluate, decrypt and decode locally");
  infer_cmd->add_option("--model", in.model, "Weights file")->required();
  infer_cmd->add_option("--keys", in.keys, "Key directory from keygen")->required();
  infer_cmd->add_option("--input", in.input, "Input values (CSV)")->required();
  infer_cmd->add_option("--hops-report", in.hops_report, "Per-layer HOP CSV output");
  infer_cmd->add_option("--params", in.params, "Parameter file (must match the keys)");
  infer_cmd->add_option("--seed", in.seed, "Encryption seed");
  infer_cmd->add_option("--input-bound", in.input_bound, "Bound on |input| for the capacity check");

  ClientArgs cl;
  auto* client_cmd = app.add_subcommand("client", "Encrypt locally, evaluate on a server, decrypt");
  client_cmd->add_option("--keys", cl.keys, "Key directory from keygen")->required();
  client_cmd->add_option("--input", cl.input, "Input values (CSV)")->required();
  client_cmd->add_option("--connect", cl.connect, "Server host:port")->required();
  client_cmd->add_option("--params", cl.params, "Parameter file (must match the keys)");
  client_cmd->add_option("--seed", cl.seed, "Encryption seed");
  client_cmd->add_option("--payload-cap", cl.cap, "Largest accepted response payload in bytes");

  ApproxArgs ap;
  auto* approx_cmd = app.add_subcommand("approx", "Minimax and power-of-two activation fits");
  approx_cmd->add_option("--fn", ap.fn, "relu, swish, softplus, square or abs");
  approx_cmd->add_option("--degree", ap.degree, "Polynomial degree")->check(CLI::Range(1, 8));
  approx_cmd->add_option("--interval", ap.interval, "Fit on [-a, a]")->check(CLI::PositiveNumber);
  approx_cmd->add_option("--grid", ap.grid, "Error grid points")->check(CLI::Range(3, 10000001));
  approx_cmd->add_option("--window", ap.window, "Exponent search window")->check(CLI::Range(0, 20));

  CompressArgs cp;
  auto* compress_cmd = app.add_subcommand("compress", "Prune and quantize weights; report sparsity");
  compress_cmd->add_option("--model", cp.model, "Weights file")->required();
  compress_cmd->add_option("--prune", cp.prune, "Surviving fraction per layer")->check(CLI::Range(0.0, 1.0));
  compress_cmd->add_option("--quantize", cp.quantize, "Fraction of surviving weights snapped to powers of two")
      ->check(CLI::Range(0.0, 1.0));
  compress_cmd->add_option("--bits", cp.k, "Quantization bit width k")->check(CLI::Range(2, 16));
  compress_cmd->add_option("--precision", cp.precision, "Fixed-point precision bits");
  compress_cmd->add_option("--out", cp.out, "Write the compressed weights here");
  compress_cmd->add_option("--csv", cp.csv, "Write the sparsity report here");

  HopsArgs hp;
  auto* hops_cmd = app.add_subcommand("hops", "Static HOP counts of the MNIST configurations");
  hops_cmd->add_option("--config", hp.config, "cryptonets, faster or compare")
      ->check(CLI::IsMember({"cryptonets", "faster", "compare"}));
  hops_cmd->add_option("--maps", hp.maps, "First-layer kernel count")->check(CLI::Range(1, 1000));
  hops_cmd->add_option("--seed", hp.seed, "Weight seed");
  hops_cmd->add_option("--precision", hp.precision, "Fixed-point precision bits");
  hops_cmd->add_option("--csv", hp.csv, "Write the per-layer CSV here");

  DemoArgs dm;
  auto* demo_cmd = app.add_subcommand("demo-model", "Write a random demonstration model");
  demo_cmd->add_option("--kind", dm.kind, "tiny, cryptonets or faster")
      ->check(CLI::IsMember({"tiny", "cryptonets", "faster"}));
  demo_cmd->add_option("--out", dm.out, "Output weights file")->required();
  demo_cmd->add_option("--maps", dm.maps, "First-layer kernel count (MNIST kinds)");
  demo_cmd->add_option("--seed", dm.seed, "Weight seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*keygen_cmd) return cmd_keygen(kg);
    if (*infer_cmd) return cmd_infer(in);
    if (*client_cmd) return cmd_client(cl);
    if (*approx_cmd) return cmd_approx(ap);
    if (*compress_cmd) return cmd_compress(cp);
    if (*hops_cmd) return cmd_hops(hp);
    if (*demo_cmd) return cmd_demo(dm);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const WeightsFormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
