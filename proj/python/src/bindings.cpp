#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fcn/approx.hpp"
#include "fcn/client.hpp"
#include "fcn/compress.hpp"
#include "fcn/engine.hpp"
#include "fcn/params_file.hpp"
#include "fcn/weights_file.hpp"

namespace py = pybind11;
using namespace fcn;

namespace {

py::dict hop_dict(const HopCounts& h) {
  py::dict d;
  d["pt_ct_add"] = h.pt_ct_add;
  d["ct_ct_add"] = h.ct_ct_add;
  d["pt_ct_mul"] = h.pt_ct_mul;
  d["ct_ct_mul"] = h.ct_ct_mul;
  d["fast_path_hits"] = h.fast_path_hits;
  d["total"] = h.total();
  return d;
}

py::dict hop_report(const HopCounter& c) {
  py::dict d;
  py::list layers;
  for (const auto& l : c.layers) {
    auto row = hop_dict(l.counts);
    row["layer"] = l.layer;
    layers.append(row);
  }
  d["layers"] = layers;
  d["totals"] = hop_dict(c.totals());
  d["csv"] = c.csv();
  return d;
}

std::vector<int> exponents_high_first(const PolyApprox& p) {
  std::vector<int> e;
  for (std::size_t j = p.pow2.size(); j-- > 0;) e.push_back(p.pow2[j].sign == 0 ? 0 : p.pow2[j].exponent);
  return e;
}

std::string layer_kind(const Layer& l) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Conv2d>) return "conv";
        else if constexpr (std::is_same_v<T, ScaledAvgPool>) return "pool";
        else if constexpr (std::is_same_v<T, Dense>) return "dense";
        else if constexpr (std::is_same_v<T, BatchNormAffine>) return "batchnorm";
        else return "activation";
      },
      l);
}

// Everything one local inference needs, built once.
struct Session {
  FvContextPtr ctx;
  KeySet keys;
  FixedPointConfig cfg;

  Session(const ParamsFile& pf, std::uint64_t seed)
      : ctx(FvContext::make(pf.params)), keys(keygen(ctx, seed)), cfg(pf.fixed_point()) {}

  py::dict infer(const NetworkSpec& raw, const std::vector<double>& x, std::uint64_t seed) const {
    const auto net = fold_batchnorm(raw);
    Sampler rng(seed);
    const auto enc = encrypt_input(ctx, keys.pub, cfg, net.input, x, rng);
    const auto r = eval_encrypted(net, enc, ctx, keys.eval, cfg);
    py::dict d;
    d["scores"] = decrypt_output(ctx, keys.secret, cfg, r.output);
    d["hops"] = hop_report(r.hops);
    d["noise_budget"] = min_noise_budget(ctx, keys.secret, r.output);
    return d;
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Oblivious neural-network inference over FV ciphertexts";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<WeightsFormatError>(m, "WeightsFormatError", PyExc_ValueError);
  py::register_exception<CapacityError>(m, "CapacityError", PyExc_RuntimeError);
  py::register_exception<ModelError>(m, "ModelError", PyExc_ValueError);

  py::class_<ParamsFile>(m, "Params")
      .def(py::init<>())
      .def_property_readonly("n", [](const ParamsFile& p) { return p.params.n; })
      .def_property_readonly("limbs", [](const ParamsFile& p) { return p.params.limbs; })
      .def_property_readonly("t_lanes", [](const ParamsFile& p) { return p.params.t_lanes; })
      .def_property_readonly("beta", [](const ParamsFile& p) { return p.params.beta; })
      .def_property_readonly("noise_stddev", [](const ParamsFile& p) { return p.params.noise_stddev; })
      .def_readonly("precision_bits", &ParamsFile::precision_bits)
      .def_readonly("seed", &ParamsFile::seed)
      .def("digest", [](const ParamsFile& p) {
        const auto d = FvContext::make(p.params)->digest();
        return py::bytes(reinterpret_cast<const char*>(d.data()), d.size());
      })
      .def("__str__", &format_params);
  m.def("parse_params", [](const std::string& text) { return parse_params(text); });
  m.def("load_params", &load_params);

  py::class_<NetworkSpec>(m, "Network")
      .def_property_readonly("input_shape",
                             [](const NetworkSpec& n) { return py::make_tuple(n.input.c, n.input.h, n.input.w); })
      .def_property_readonly("output_shape",
                             [](const NetworkSpec& n) {
                               const auto s = n.output_shape();
                               return py::make_tuple(s.c, s.h, s.w);
                             })
      .def_property_readonly("layers",
                             [](const NetworkSpec& n) {
                               std::vector<std::string> k;
                               for (const auto& l : n.layers) k.push_back(layer_kind(l));
                               return k;
                             })
      .def("to_bytes", [](const NetworkSpec& n) {
        const auto b = weights_bytes(n);
        return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
      })
      .def(py::self == py::self);
  m.def("load_weights", &load_weights);
  m.def("save_weights", &save_weights);
  m.def("weights_from_bytes", [](const py::bytes& b) {
    const std::string s = b;
    return weights_from_bytes({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
  });
  m.def("mnist_configs", [](std::size_t maps, std::uint64_t seed) {
    auto c = build_mnist_configs(maps, seed);
    return py::make_tuple(std::move(c.cryptonets), std::move(c.faster));
  }, py::arg("maps") = 5, py::arg("seed") = 1);

  m.def("eval_plain", [](const NetworkSpec& n, const std::vector<double>& x) { return eval_plain(n, x); });
  m.def("project_hops", [](const NetworkSpec& n, int precision_bits) {
    FixedPointConfig cfg;
    cfg.precision_bits = precision_bits;
    return hop_report(project_hops(fold_batchnorm(n), cfg));
  }, py::arg("net"), py::arg("precision_bits") = 15);

  m.def("fit_activation", [](const std::string& fn, int degree, double interval) {
    const auto f = ActivationFn::parse(fn);
    const auto fit = remez_minimax(f, degree, interval);
    const auto rounded = round_coeffs_pow2(f, fit.approx);
    const auto star = scan_optimal_pow2(f, rounded);
    py::dict d;
    d["real"] = fit.approx.coeffs;
    d["real_delta"] = fit.approx.delta;
    d["rounded_exponents"] = exponents_high_first(rounded);
    d["rounded_delta"] = rounded.delta;
    d["optimal_exponents"] = exponents_high_first(star);
    d["optimal_delta"] = star.delta;
    d["optimal"] = format_pow2(star);
    return d;
  }, py::arg("fn"), py::arg("degree") = 2, py::arg("interval") = kDefaultInterval);

  m.def("sparsity", [](const NetworkSpec& n, int precision_bits) {
    py::list out;
    for (const auto& r : sparsity_report(n, precision_bits)) {
      py::dict d;
      d["layer"] = r.layer;
      d["total"] = r.total;
      d["surviving"] = r.surviving;
      d["fraction"] = r.fraction;
      d["monomial_encodable"] = r.monomial_encodable;
      out.append(d);
    }
    return out;
  }, py::arg("net"), py::arg("precision_bits") = 15);

  py::class_<Session>(m, "Session", "Keys plus context for local encrypted inference")
      .def(py::init<const ParamsFile&, std::uint64_t>(), py::arg("params"), py::arg("seed"))
      .def("infer", &Session::infer, py::arg("net"), py::arg("input"), py::arg("seed") = 0);
}
