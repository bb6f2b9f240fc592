#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include "fcn/engine.hpp"

namespace fcn {

bool HopCounts::same_counts(const HopCounts& o) const {
  return pt_ct_add == o.pt_ct_add && ct_ct_add == o.ct_ct_add && pt_ct_mul == o.pt_ct_mul &&
         ct_ct_mul == o.ct_ct_mul && fast_path_hits == o.fast_path_hits;
}

HopCounts& HopCounts::operator+=(const HopCounts& o) {
  pt_ct_add += o.pt_ct_add;
  ct_ct_add += o.ct_ct_add;
  pt_ct_mul += o.pt_ct_mul;
  ct_ct_mul += o.ct_ct_mul;
  fast_path_hits += o.fast_path_hits;
  wall_ms += o.wall_ms;
  return *this;
}

HopCounts HopCounter::totals() const {
  HopCounts t;
  for (const auto& l : layers) t += l.counts;
  return t;
}

bool HopCounter::same_counts(const HopCounter& o) const {
  if (layers.size() != o.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].layer != o.layers[i].layer) return false;
    if (!layers[i].counts.same_counts(o.layers[i].counts)) return false;
  }
  return true;
}

std::string HopCounter::csv() const {
  std::ostringstream os;
  os << "layer,pt_ct_add,ct_ct_add,pt_ct_mul,ct_ct_mul,wall_ms,fast_path_hits\n";
  os.setf(std::ios::fixed);
  os.precision(3);
  auto row = [&](const std::string& name, const HopCounts& c) {
    os << name << ',' << c.pt_ct_add << ',' << c.ct_ct_add << ',' << c.pt_ct_mul << ','
       << c.ct_ct_mul << ',' << c.wall_ms << ',' << c.fast_path_hits << '\n';
  };
  for (const auto& l : layers) row(l.layer, l.counts);
  row("total", totals());
  return os.str();
}

namespace {

std::ptrdiff_t source(std::size_t o, std::size_t k, std::size_t stride,
                      std::size_t pad, std::size_t extent) {
  const auto i = static_cast<std::ptrdiff_t>(o * stride + k) - static_cast<std::ptrdiff_t>(pad);
  return i >= 0 && i < static_cast<std::ptrdiff_t>(extent) ? i : -1;
}

// How a quadratic activation is evaluated at input scale s. Coefficients that
// are exactly 1 cost nothing; ones that encode to zero are dropped.
struct ActPlan {
  bool square = false;
  bool square_mul = false;  // a2 != 1: one pt_ct_mul at scale p
  bool linear = false;
  bool linear_mul = false;  // otherwise x is used as is
  bool constant = false;
  double a0 = 0, a1 = 0, a2 = 0;
  std::int64_t linear_scale = 0;  // scale a1 is encoded at
  std::int64_t out_scale = 0;
};

ActPlan plan_activation(const PolyApprox& poly, std::int64_t s, int p) {
  if (poly.degree() > 2) {
    throw ModelError("encrypted activations are limited to degree 2");
  }
  ActPlan a;
  a.a0 = poly.coeffs[0];
  a.a1 = poly.coeffs.size() > 1 ? poly.coeffs[1] : 0.0;
  a.a2 = poly.coeffs.size() > 2 ? poly.coeffs[2] : 0.0;
  a.square = a.a2 == 1.0 || !encodes_to_zero(a.a2, p);
  a.square_mul = a.square && a.a2 != 1.0;
  if (a.square) {
    a.out_scale = 2 * s + (a.square_mul ? p : 0);
  } else {
    a.out_scale = s + (a.a1 == 1.0 || encodes_to_zero(a.a1, p) ? 0 : p);
  }
  a.linear_scale = a.out_scale - s;
  a.linear = a.a1 == 1.0 ? true : !encodes_to_zero(a.a1, a.linear_scale);
  a.linear_mul = a.linear && !(a.a1 == 1.0 && a.linear_scale == 0);
  a.constant = !encodes_to_zero(a.a0, a.out_scale);
  return a;
}

// ---------------------------------------------------------------------------
// The evaluator. Every homomorphic operation goes through the backend, which
// counts it; the walk below decides which operations happen.

template <class B>
std::vector<typename B::Value> run_network(const NetworkSpec& net,
                                           std::vector<typename B::Value> x,
                                           std::int64_t& scale, int p, B& b,
                                           HopCounter& hops) {
  using Value = typename B::Value;
  const auto shapes = net.shapes();
  const auto names = net.layer_names();
  Shape3 in = net.input;
  hops.layers.clear();

  auto finish = [&](std::optional<Value>& acc, const std::vector<double>& bias,
                    std::size_t o, std::int64_t s) {
    if (!acc) acc = b.zero(s);
    if (!bias.empty() && !encodes_to_zero(bias[o], s)) acc = b.add_pt(*acc, bias[o]);
  };

  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const Shape3 out = shapes[li];
    HopCounts counts;
    b.counts = &counts;
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Value> y;
    y.reserve(out.size());

    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, Conv2d>) {
            const std::int64_t s = scale + p;
            for (std::size_t oc = 0; oc < out.c; ++oc) {
              for (std::size_t oy = 0; oy < out.h; ++oy) {
                for (std::size_t ox = 0; ox < out.w; ++ox) {
                  std::optional<Value> acc;
                  for (std::size_t ic = 0; ic < l.in_maps; ++ic) {
                    for (std::size_t ky = 0; ky < l.kh; ++ky) {
                      const auto iy = source(oy, ky, l.stride, l.padding, in.h);
                      if (iy < 0) continue;
                      for (std::size_t kx = 0; kx < l.kw; ++kx) {
                        const auto ix = source(ox, kx, l.stride, l.padding, in.w);
                        if (ix < 0) continue;
                        const double w = l.weights.effective(
                            ((oc * l.in_maps + ic) * l.kh + ky) * l.kw + kx);
                        if (encodes_to_zero(w, p)) continue;
                        Value t = b.mul_pt(x[(ic * in.h + iy) * in.w + ix], w, p);
                        acc = acc ? b.add(*acc, t) : std::move(t);
                      }
                    }
                  }
                  finish(acc, l.bias, oc, s);
                  y.push_back(std::move(*acc));
                }
              }
            }
            scale = s;
          } else if constexpr (std::is_same_v<T, ScaledAvgPool>) {
            const double recip = 1.0 / static_cast<double>(l.window * l.window);
            for (std::size_t c = 0; c < out.c; ++c) {
              for (std::size_t oy = 0; oy < out.h; ++oy) {
                for (std::size_t ox = 0; ox < out.w; ++ox) {
                  std::optional<Value> acc;
                  for (std::size_t ky = 0; ky < l.window; ++ky) {
                    const auto iy = source(oy, ky, l.stride, l.padding, in.h);
                    if (iy < 0) continue;
                    for (std::size_t kx = 0; kx < l.window; ++kx) {
                      const auto ix = source(ox, kx, l.stride, l.padding, in.w);
                      if (ix < 0) continue;
                      const Value& v = x[(c * in.h + iy) * in.w + ix];
                      acc = acc ? b.add(*acc, v) : v;
                    }
                  }
                  if (l.reciprocal) acc = b.mul_pt(*acc, recip, p);
                  y.push_back(std::move(*acc));
                }
              }
            }
            if (l.reciprocal) scale += p;
          } else if constexpr (std::is_same_v<T, Dense>) {
            const std::int64_t s = scale + p;
            for (std::size_t o = 0; o < l.out; ++o) {
              std::optional<Value> acc;
              for (std::size_t i = 0; i < l.in; ++i) {
                const double w = l.weights.effective(o * l.in + i);
                if (encodes_to_zero(w, p)) continue;
                Value t = b.mul_pt(x[i], w, p);
                acc = acc ? b.add(*acc, t) : std::move(t);
              }
              finish(acc, l.bias, o, s);
              y.push_back(std::move(*acc));
            }
            scale = s;
          } else if constexpr (std::is_same_v<T, BatchNormAffine>) {
            throw ModelError("fold batch-norm layers before encrypted evaluation");
          } else {
            const ActPlan a = plan_activation(l.poly, scale, p);
            for (const Value& v : x) {
              std::optional<Value> r;
              if (a.square) {
                r = b.mul(v, v);
                if (a.square_mul) r = b.mul_pt(*r, a.a2, p);
              }
              if (a.linear) {
                Value t = a.linear_mul ? b.mul_pt(v, a.a1, a.linear_scale) : v;
                r = r ? b.add(*r, t) : std::move(t);
              }
              if (!r) r = b.zero(a.out_scale);
              if (a.constant) r = b.add_pt(*r, a.a0);
              y.push_back(std::move(*r));
            }
            scale = a.out_scale;
          }
        },
        net.layers[li]);

    counts.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    hops.layers.push_back({names[li], counts});
    x = std::move(y);
    in = out;
  }
  b.counts = nullptr;
  return x;
}

// ---------------------------------------------------------------------------
// Symbolic backend: tracks a bound on plaintext coefficients and the degree
// range of every value, which is all the capacity check needs.

struct Symbol {
  std::int64_t scale = 0;
  double coeff = 0;  // bound on |coefficient|
  double terms = 0;  // bound on the number of nonzero coefficients
  std::int64_t lo = std::numeric_limits<std::int64_t>::max();
  std::int64_t hi = -1;  // hi < lo: the zero polynomial
  double magnitude = 0;  // bound on the represented real value

  bool empty() const { return hi < lo; }
  double width() const { return empty() ? 0 : static_cast<double>(hi - lo + 1); }
};

Symbol constant_symbol(double c, std::int64_t scale) {
  Symbol s;
  s.scale = scale;
  s.magnitude = std::fabs(c);
  const mpz_class z = abs(scaled_integer(c, scale));
  if (z == 0) return s;
  s.coeff = 1;
  s.terms = static_cast<double>(mpz_popcount(z.get_mpz_t()));
  s.lo = static_cast<std::int64_t>(mpz_scan1(z.get_mpz_t(), 0));
  s.hi = static_cast<std::int64_t>(mpz_sizeinbase(z.get_mpz_t(), 2)) - 1;
  return s;
}

// Any input with |v| <= bound: every bit up to the bound's may be set.
Symbol input_symbol(double bound, int p) {
  Symbol s = constant_symbol(bound, p);
  s.lo = 0;
  s.hi = std::max<std::int64_t>(s.hi, 0);
  s.coeff = 1;
  s.terms = s.width();
  return s;
}

class TraceBackend {
 public:
  using Value = Symbol;
  HopCounts* counts = nullptr;
  double max_coeff = 0;
  std::int64_t max_degree = 0;

  Value mul_pt(const Value& x, double c, std::int64_t scale) {
    ++counts->pt_ct_mul;
    if (encodes_to_monomial(c, scale)) ++counts->fast_path_hits;
    return product(x, constant_symbol(c, scale));
  }
  Value add(const Value& a, const Value& b) {
    ++counts->ct_ct_add;
    return sum(a, b);
  }
  Value add_pt(const Value& x, double c) {
    ++counts->pt_ct_add;
    return sum(x, constant_symbol(c, x.scale));
  }
  Value mul(const Value& a, const Value& b) {
    ++counts->ct_ct_mul;
    return product(a, b);
  }
  Value zero(std::int64_t scale) {
    Symbol s;
    s.scale = scale;
    return s;
  }

 private:
  Value note(Value v) {
    max_coeff = std::max(max_coeff, v.coeff);
    if (!v.empty()) max_degree = std::max(max_degree, v.hi);
    return v;
  }
  Value sum(const Value& a, const Value& b) {
    if (a.scale != b.scale) throw FvError("scale mismatch in addition");
    Symbol r;
    r.scale = a.scale;
    r.coeff = a.coeff + b.coeff;
    r.lo = std::min(a.lo, b.lo);
    r.hi = std::max(a.hi, b.hi);
    r.terms = std::min(r.width(), a.terms + b.terms);
    r.magnitude = a.magnitude + b.magnitude;
    return note(r);
  }
  // A product coefficient sums at most min(terms) products of coefficients.
  Value product(const Value& a, const Value& b) {
    Symbol r;
    r.scale = a.scale + b.scale;
    r.magnitude = a.magnitude * b.magnitude;
    if (!a.empty() && !b.empty()) {
      r.coeff = a.coeff * b.coeff * std::min(a.terms, b.terms);
      r.lo = a.lo + b.lo;
      r.hi = a.hi + b.hi;
      r.terms = std::min(r.width(), a.terms * b.terms);
    }
    return note(r);
  }
};

// ---------------------------------------------------------------------------
// Ciphertext backend: one ciphertext per plaintext lane. A logical operation
// is counted once however many lanes it touches.

class FvBackend {
 public:
  using Value = std::vector<Ciphertext>;
  HopCounts* counts = nullptr;

  FvBackend(FvContextPtr ctx, const EvalKeys& ek, const FixedPointConfig& cfg)
      : ctx_(std::move(ctx)), ek_(ek), cfg_(cfg) {}

  Value mul_pt(const Value& x, double c, std::int64_t scale) {
    const EncodedValue& e = encoded(c, scale);
    ++counts->pt_ct_mul;
    if (e.lanes[0].nonzero_count() == 1) ++counts->fast_path_hits;
    Value r;
    r.reserve(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) r.push_back(fcn::mul_pt(ctx_, x[j], e.lanes[j], scale));
    return r;
  }
  Value add(const Value& a, const Value& b) {
    ++counts->ct_ct_add;
    Value r;
    r.reserve(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) r.push_back(add_ct(ctx_, a[j], b[j]));
    return r;
  }
  Value add_pt(const Value& x, double c) {
    const std::int64_t scale = x[0].scale_exponent;
    const EncodedValue& e = encoded(c, scale);
    ++counts->pt_ct_add;
    Value r;
    r.reserve(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) r.push_back(fcn::add_pt(ctx_, x[j], e.lanes[j], scale));
    return r;
  }
  Value mul(const Value& a, const Value& b) {
    ++counts->ct_ct_mul;
    Value r;
    r.reserve(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) r.push_back(mul_ct(ctx_, a[j], b[j], ek_));
    return r;
  }
  Value zero(std::int64_t scale) {
    Value r;
    for (std::size_t j = 0; j < cfg_.t_lanes.size(); ++j) {
      Plaintext z{std::vector<std::uint64_t>(ctx_->degree(), 0), j};
      r.push_back(trivial_encrypt(ctx_, z, scale));
    }
    return r;
  }

 private:
  const EncodedValue& encoded(double c, std::int64_t scale) {
    std::uint64_t bits;
    std::memcpy(&bits, &c, sizeof bits);
    const auto key = std::make_pair(bits, scale);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      it = cache_.emplace(key, encode_at_scale(c, scale, cfg_, ctx_->degree())).first;
    }
    return it->second;
  }

  FvContextPtr ctx_;
  const EvalKeys& ek_;
  const FixedPointConfig& cfg_;
  std::map<std::pair<std::uint64_t, std::int64_t>, EncodedValue> cache_;
};

}  // namespace

HopCounter trace_hops(const NetworkSpec& net, const FixedPointConfig& cfg) {
  cfg.validate();
  TraceBackend b;
  HopCounter hops;
  std::int64_t scale = cfg.precision_bits;
  std::vector<Symbol> x(net.input.size(), input_symbol(1.0, cfg.precision_bits));
  run_network(net, std::move(x), scale, cfg.precision_bits, b, hops);
  return hops;
}

CapacityReport analyze_capacity(const NetworkSpec& net, const FixedPointConfig& cfg,
                                std::size_t n, double input_bound) {
  cfg.validate();
  if (!(input_bound >= 0) || !std::isfinite(input_bound)) {
    throw CapacityError("input bound must be finite and non-negative");
  }
  TraceBackend b;
  HopCounter hops;
  std::int64_t scale = cfg.precision_bits;
  const Symbol in = input_symbol(input_bound, cfg.precision_bits);
  b.max_coeff = in.coeff;
  b.max_degree = in.hi;
  std::vector<Symbol> x(net.input.size(), in);
  const auto y = run_network(net, std::move(x), scale, cfg.precision_bits, b, hops);

  CapacityReport r;
  r.output_scale = scale;
  r.max_degree = static_cast<std::size_t>(std::max<std::int64_t>(b.max_degree, 0));
  r.log2_coeff_bound = b.max_coeff > 0 ? std::log2(b.max_coeff) : -INFINITY;
  r.log2_capacity = std::log2(cfg.crt_modulus().get_d()) - 1;
  for (const auto& v : y) r.output_bound = std::max(r.output_bound, v.magnitude);
  if (!(r.log2_coeff_bound < r.log2_capacity)) {
    r.ok = false;
    std::ostringstream os;
    os.precision(4);
    os << "plaintext coefficients may reach 2^" << r.log2_coeff_bound
       << ", beyond the lane capacity 2^" << r.log2_capacity
       << "; add a plaintext lane or reduce the precision";
    r.reason = os.str();
  } else if (r.max_degree >= n) {
    r.ok = false;
    r.reason = "plaintext degree may reach " + std::to_string(r.max_degree) +
               ", beyond the ring degree " + std::to_string(n);
  }
  return r;
}

CapacityReport capacity_check(const NetworkSpec& net, const FixedPointConfig& cfg,
                              std::size_t n, double input_bound) {
  auto r = analyze_capacity(net, cfg, n, input_bound);
  if (!r.ok) throw CapacityError(r.reason);
  return r;
}

CipherTensor encrypt_input(const FvContextPtr& ctx, const PublicKey& pk,
                           const FixedPointConfig& cfg, Shape3 shape,
                           std::span<const double> input, Sampler& rng) {
  cfg.validate();
  if (cfg.t_lanes != ctx->params().t_lanes) {
    throw EncodeError("fixed-point lanes differ from the encryption parameters");
  }
  if (input.size() != shape.size()) throw ModelError("input size does not match its shape");
  CipherTensor t;
  t.shape = shape;
  t.scale_exponent = cfg.precision_bits;
  t.values.reserve(input.size());
  for (double v : input) {
    const EncodedValue e = encode_fixed(v, cfg, ctx->degree());
    std::vector<Ciphertext> lanes;
    for (const auto& pt : e.lanes) lanes.push_back(encrypt(ctx, pk, pt, e.scale_exponent, rng));
    t.values.push_back(std::move(lanes));
  }
  return t;
}

EncryptedResult eval_encrypted(const NetworkSpec& net, const CipherTensor& input,
                               const FvContextPtr& ctx, const EvalKeys& ek,
                               const FixedPointConfig& cfg, double input_bound) {
  if (cfg.t_lanes != ctx->params().t_lanes) {
    throw EncodeError("fixed-point lanes differ from the encryption parameters");
  }
  if (!(input.shape == net.input) || input.values.size() != net.input.size()) {
    throw ModelError("ciphertext tensor does not match the network input");
  }
  if (input.scale_exponent != cfg.precision_bits) {
    throw FvError("input ciphertexts are not at the fixed-point scale");
  }
  for (const auto& lanes : input.values) {
    if (lanes.size() != cfg.t_lanes.size()) throw FvError("ciphertext lane count mismatch");
    for (std::size_t j = 0; j < lanes.size(); ++j) {
      if (lanes[j].lane != j || lanes[j].scale_exponent != input.scale_exponent) {
        throw FvError("ciphertext lanes or scales are inconsistent");
      }
    }
  }
  capacity_check(net, cfg, ctx->degree(), input_bound);

  FvBackend b(ctx, ek, cfg);
  EncryptedResult r;
  std::int64_t scale = input.scale_exponent;
  auto y = run_network(net, input.values, scale, cfg.precision_bits, b, r.hops);
  r.output.shape = net.output_shape();
  r.output.scale_exponent = scale;
  r.output.values = std::move(y);
  return r;
}

// ---------------------------------------------------------------------------
// Static projection: closed-form counts per layer, sharing nothing with the
// evaluator but the activation plan.

HopCounter project_hops(const NetworkSpec& net, const FixedPointConfig& cfg) {
  cfg.validate();
  const int p = cfg.precision_bits;
  const auto shapes = net.shapes();
  const auto names = net.layer_names();
  HopCounter hops;
  Shape3 in = net.input;
  std::int64_t scale = p;

  // An output with f applied weights costs f mults, f-1 adds (none when f is
  // 0) and one bias add.
  auto linear_output = [](HopCounts& c, std::uint64_t f, std::uint64_t mono, bool bias) {
    c.pt_ct_mul += f;
    c.fast_path_hits += mono;
    c.ct_ct_add += f > 0 ? f - 1 : 0;
    c.pt_ct_add += bias ? 1 : 0;
  };

  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const Shape3 out = shapes[li];
    HopCounts c;
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, Conv2d>) {
            // Per-axis counts of in-bounds kernel taps for each output index.
            auto valid = [](std::size_t outs, std::size_t k, std::size_t stride,
                            std::size_t pad, std::size_t extent) {
              std::vector<std::vector<std::uint8_t>> v(outs, std::vector<std::uint8_t>(k));
              for (std::size_t o = 0; o < outs; ++o) {
                for (std::size_t j = 0; j < k; ++j) {
                  const auto i = static_cast<std::ptrdiff_t>(o * stride + j) -
                                 static_cast<std::ptrdiff_t>(pad);
                  v[o][j] = i >= 0 && i < static_cast<std::ptrdiff_t>(extent);
                }
              }
              return v;
            };
            const auto vy = valid(out.h, l.kh, l.stride, l.padding, in.h);
            const auto vx = valid(out.w, l.kw, l.stride, l.padding, in.w);
            const std::int64_t s = scale + p;
            for (std::size_t oc = 0; oc < out.c; ++oc) {
              // Nonzero taps of this kernel as (ky, kx, monomial).
              std::vector<std::tuple<std::size_t, std::size_t, bool>> taps;
              for (std::size_t ic = 0; ic < l.in_maps; ++ic) {
                for (std::size_t ky = 0; ky < l.kh; ++ky) {
                  for (std::size_t kx = 0; kx < l.kw; ++kx) {
                    const double w =
                        l.weights.effective(((oc * l.in_maps + ic) * l.kh + ky) * l.kw + kx);
                    if (!encodes_to_zero(w, p)) taps.emplace_back(ky, kx, encodes_to_monomial(w, p));
                  }
                }
              }
              const bool bias = !l.bias.empty() && !encodes_to_zero(l.bias[oc], s);
              for (std::size_t oy = 0; oy < out.h; ++oy) {
                for (std::size_t ox = 0; ox < out.w; ++ox) {
                  std::uint64_t f = 0, mono = 0;
                  for (const auto& [ky, kx, m] : taps) {
                    if (vy[oy][ky] && vx[ox][kx]) {
                      ++f;
                      mono += m;
                    }
                  }
                  linear_output(c, f, mono, bias);
                }
              }
            }
            scale = s;
          } else if constexpr (std::is_same_v<T, ScaledAvgPool>) {
            auto taps = [&](std::size_t o, std::size_t extent) {
              std::uint64_t k = 0;
              for (std::size_t j = 0; j < l.window; ++j) {
                k += source(o, j, l.stride, l.padding, extent) >= 0;
              }
              return k;
            };
            const bool mono = encodes_to_monomial(1.0 / static_cast<double>(l.window * l.window), p);
            for (std::size_t oy = 0; oy < out.h; ++oy) {
              for (std::size_t ox = 0; ox < out.w; ++ox) {
                const std::uint64_t k = taps(oy, in.h) * taps(ox, in.w);
                c.ct_ct_add += out.c * (k - 1);
                if (l.reciprocal) {
                  c.pt_ct_mul += out.c;
                  c.fast_path_hits += mono ? out.c : 0;
                }
              }
            }
            if (l.reciprocal) scale += p;
          } else if constexpr (std::is_same_v<T, Dense>) {
            const std::int64_t s = scale + p;
            for (std::size_t o = 0; o < l.out; ++o) {
              std::uint64_t f = 0, mono = 0;
              for (std::size_t i = 0; i < l.in; ++i) {
                const double w = l.weights.effective(o * l.in + i);
                if (encodes_to_zero(w, p)) continue;
                ++f;
                mono += encodes_to_monomial(w, p);
              }
              linear_output(c, f, mono, !l.bias.empty() && !encodes_to_zero(l.bias[o], s));
            }
            scale = s;
          } else if constexpr (std::is_same_v<T, BatchNormAffine>) {
            throw ModelError("fold batch-norm layers before projecting HOPs");
          } else {
            const ActPlan a = plan_activation(l.poly, scale, p);
            const std::uint64_t nodes = out.size();
            const std::uint64_t muls = (a.square_mul ? 1 : 0) + (a.linear_mul ? 1 : 0);
            const std::uint64_t mono = (a.square_mul && encodes_to_monomial(a.a2, p) ? 1 : 0) +
                                       (a.linear_mul && encodes_to_monomial(a.a1, a.linear_scale) ? 1 : 0);
            c.ct_ct_mul += a.square ? nodes : 0;
            c.pt_ct_mul += muls * nodes;
            c.fast_path_hits += mono * nodes;
            c.ct_ct_add += a.square && a.linear ? nodes : 0;
            c.pt_ct_add += a.constant ? nodes : 0;
            scale = a.out_scale;
          }
        },
        net.layers[li]);
    hops.layers.push_back({names[li], c});
    in = out;
  }
  return hops;
}

}  // namespace fcn
