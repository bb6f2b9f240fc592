#include <algorithm>
#include <cmath>

#include "fcn/fv.hpp"

namespace fcn {

namespace {

void check_plaintext(const FvContextPtr& ctx, const Plaintext& m) {
  const std::uint64_t t = ctx->t(m.lane);
  if (m.coeffs.size() != ctx->degree()) {
    throw FvError("plaintext must have exactly n coefficients");
  }
  for (auto c : m.coeffs) {
    if (c >= t) throw FvError("plaintext coefficient out of range for its lane");
  }
}

void check_ciphertext(const FvContextPtr& ctx, const Ciphertext& ct) {
  if (!ct.c0.context() || !ct.c1.context() ||
      !ct.c0.context()->same_as(*ctx->ring()) ||
      !ct.c1.context()->same_as(*ctx->ring())) {
    throw FvError("ciphertext does not belong to these parameters");
  }
  if (ct.lane >= ctx->lane_count()) throw FvError("ciphertext lane out of range");
}

std::int64_t centered(std::uint64_t c, std::uint64_t t) {
  return c > t / 2 ? -static_cast<std::int64_t>(t - c) : static_cast<std::int64_t>(c);
}

// Delta * m over Q, with m read as its canonical representative in [0, t).
RingPoly scaled_plaintext(const FvContextPtr& ctx, const Plaintext& m) {
  RingPoly r(ctx->ring());
  const auto delta = ctx->delta_residues(m.lane);
  for (std::size_t l = 0; l < r.limb_count(); ++l) {
    const Modulus& mod = ctx->ring()->limb(l).modulus();
    const std::uint64_t d = delta[l];
    const std::uint64_t ds = mod.shoup(d);
    auto dst = r.limb(l);
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (m.coeffs[i] != 0) dst[i] = mod.mul_shoup(mod.reduce(m.coeffs[i]), d, ds);
    }
  }
  return r;
}

// Copies a Q-basis polynomial into the extended basis using its centered
// representative, so the tensor product below is exact over the integers.
RingPoly extend_basis(const FvContextPtr& ctx, const RingPoly& p) {
  RingPoly e(ctx->extended_ring());
  const std::size_t n = ctx->degree();
  const std::size_t nq = ctx->ring()->limb_count();
  auto dst = e.mutable_data();
  const auto src = p.data();
  std::copy(src.begin(), src.end(), dst.begin());
  mpz_class x;
  const auto& ext = *ctx->extended_ring();
  for (std::size_t i = 0; i < n; ++i) {
    ctx->reconstruct(p, i, x);
    for (std::size_t l = nq; l < ext.limb_count(); ++l) {
      dst[l * n + i] = mpz_fdiv_ui(x.get_mpz_t(), ext.limb(l).value());
    }
  }
  return e;
}

// Reads bits [pos, pos + width) of a non-negative integer.
std::uint64_t bit_field(const mpz_class& v, std::size_t pos, int width) {
  constexpr std::size_t kLimbBits = sizeof(mp_limb_t) * 8;
  const std::size_t word = pos / kLimbBits;
  const std::size_t off = pos % kLimbBits;
  const std::size_t used = mpz_size(v.get_mpz_t());
  auto limb_at = [&](std::size_t w) -> std::uint64_t {
    return w < used ? mpz_getlimbn(v.get_mpz_t(), w) : 0;
  };
  u128 window = static_cast<u128>(limb_at(word)) |
                (static_cast<u128>(limb_at(word + 1)) << kLimbBits);
  window >>= off;
  const u128 mask = (static_cast<u128>(1) << width) - 1;
  return static_cast<std::uint64_t>(window & mask);
}

}  // namespace

EvalKeys::EvalKeys(std::vector<RingPoly> a, std::vector<RingPoly> g)
    : a_(std::move(a)), g_(std::move(g)) {
  if (a_.size() != g_.size() || a_.empty()) {
    throw FvError("evaluation keys need matching non-empty a/g lists");
  }
  for (std::size_t i = 0; i < a_.size(); ++i) {
    a_ntt_.push_back(ntt_forward(a_[i]));
    g_ntt_.push_back(ntt_forward(g_[i]));
  }
}

RingPoly Sampler::uniform(const RingContextPtr& ring) {
  RingPoly p(ring);
  for (std::size_t l = 0; l < ring->limb_count(); ++l) {
    std::uniform_int_distribution<std::uint64_t> dist(0, ring->limb(l).value() - 1);
    for (auto& v : p.limb(l)) v = dist(rng_);
  }
  return p;
}

RingPoly Sampler::ternary(const RingContextPtr& ring) {
  std::uniform_int_distribution<int> dist(-1, 1);
  std::vector<std::int64_t> v(ring->degree());
  for (auto& x : v) x = dist(rng_);
  return RingPoly::from_signed(ring, v);
}

RingPoly Sampler::gaussian(const RingContextPtr& ring, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  const double bound = 6.0 * stddev;
  std::vector<std::int64_t> v(ring->degree());
  for (auto& x : v) {
    double s;
    do {
      s = std::round(dist(rng_));
    } while (std::abs(s) > bound);
    x = static_cast<std::int64_t>(s);
  }
  return RingPoly::from_signed(ring, v);
}

KeySet keygen(const FvContextPtr& ctx, std::uint64_t seed) {
  Sampler rng(seed);
  const auto& ring = ctx->ring();
  const double sigma = ctx->params().noise_stddev;

  KeySet keys;
  keys.secret.s = rng.ternary(ring);
  const RingPoly s_ntt = ntt_forward(keys.secret.s);

  keys.pub.p0 = rng.uniform(ring);
  const RingPoly e = rng.gaussian(ring, sigma);
  keys.pub.p1 = poly_negate(poly_add(poly_mul_ntt(s_ntt, keys.pub.p0), e));

  const RingPoly s2 = ntt_inverse(poly_mul_pointwise(s_ntt, s_ntt));
  std::vector<RingPoly> a, g;
  for (std::size_t i = 0; i <= ctx->ell(); ++i) {
    RingPoly ai = rng.uniform(ring);
    const RingPoly ei = rng.gaussian(ring, sigma);
    // beta^i * s^2, limb by limb.
    RingPoly shifted = s2;
    for (std::size_t l = 0; l < ring->limb_count(); ++l) {
      const Modulus& m = ring->limb(l).modulus();
      const std::uint64_t bi = m.pow(ctx->params().beta % m.value(), i);
      const std::uint64_t bs = m.shoup(bi);
      for (auto& v : shifted.limb(l)) v = m.mul_shoup(v, bi, bs);
    }
    RingPoly gi = poly_sub(shifted, poly_add(poly_mul_ntt(ai, s_ntt), ei));
    a.push_back(std::move(ai));
    g.push_back(std::move(gi));
  }
  keys.eval = EvalKeys(std::move(a), std::move(g));
  return keys;
}

Ciphertext encrypt(const FvContextPtr& ctx, const PublicKey& pk,
                   const Plaintext& m, std::int64_t scale_exponent,
                   Sampler& rng) {
  check_plaintext(ctx, m);
  const auto& ring = ctx->ring();
  const double sigma = ctx->params().noise_stddev;
  const RingPoly u = ntt_forward(rng.ternary(ring));
  const RingPoly e1 = rng.gaussian(ring, sigma);
  const RingPoly e2 = rng.gaussian(ring, sigma);

  Ciphertext ct;
  // p1 = -(s p0 + e) is the masked half, so it pairs with Delta*m.
  ct.c0 = poly_add(poly_add(scaled_plaintext(ctx, m), poly_mul_ntt(pk.p1, u)), e1);
  ct.c1 = poly_add(poly_mul_ntt(pk.p0, u), e2);
  ct.scale_exponent = scale_exponent;
  ct.lane = m.lane;
  ct.mul_depth = 0;
  return ct;
}

Ciphertext trivial_encrypt(const FvContextPtr& ctx, const Plaintext& m,
                           std::int64_t scale_exponent) {
  check_plaintext(ctx, m);
  Ciphertext ct;
  ct.c0 = scaled_plaintext(ctx, m);
  ct.c1 = RingPoly(ctx->ring());
  ct.scale_exponent = scale_exponent;
  ct.lane = m.lane;
  return ct;
}

Ciphertext add_ct(const FvContextPtr& ctx, const Ciphertext& a,
                  const Ciphertext& b) {
  check_ciphertext(ctx, a);
  check_ciphertext(ctx, b);
  if (a.lane != b.lane) throw FvError("add_ct: lane mismatch");
  if (a.scale_exponent != b.scale_exponent) throw FvError("add_ct: scale mismatch");
  Ciphertext r;
  r.c0 = poly_add(a.c0, b.c0);
  r.c1 = poly_add(a.c1, b.c1);
  r.scale_exponent = a.scale_exponent;
  r.lane = a.lane;
  r.mul_depth = std::max(a.mul_depth, b.mul_depth);
  return r;
}

Ciphertext mul_ct(const FvContextPtr& ctx, const Ciphertext& a,
                  const Ciphertext& b, const EvalKeys& ek) {
  check_ciphertext(ctx, a);
  check_ciphertext(ctx, b);
  if (a.lane != b.lane) throw FvError("mul_ct: lane mismatch");
  if (ek.size() != ctx->ell() + 1) throw FvError("mul_ct: evaluation key size mismatch");

  const RingPoly a0 = ntt_forward(extend_basis(ctx, a.c0));
  const RingPoly a1 = ntt_forward(extend_basis(ctx, a.c1));
  const RingPoly b0 = ntt_forward(extend_basis(ctx, b.c0));
  const RingPoly b1 = ntt_forward(extend_basis(ctx, b.c1));
  const RingPoly d0 = ntt_inverse(poly_mul_pointwise(a0, b0));
  const RingPoly d1 = ntt_inverse(
      poly_add(poly_mul_pointwise(a0, b1), poly_mul_pointwise(a1, b0)));
  const RingPoly d2 = ntt_inverse(poly_mul_pointwise(a1, b1));

  const std::size_t n = ctx->degree();
  const std::size_t digits = ctx->ell() + 1;
  const int width = ctx->beta_bits();
  const mpz_class two_t = mpz_class(2) * mpz_class(static_cast<unsigned long>(ctx->t(a.lane)));
  const mpz_class two_q = 2 * ctx->q();

  RingPoly c0(ctx->ring()), c1(ctx->ring());
  std::vector<RingPoly> digit_polys(digits, RingPoly(ctx->ring()));
  mpz_class x;
  auto scale_down = [&](const RingPoly& d, std::size_t i) {
    ctx->reconstruct_extended(d, i, x);
    x *= two_t;
    x += ctx->q();
    mpz_fdiv_q(x.get_mpz_t(), x.get_mpz_t(), two_q.get_mpz_t());
  };
  for (std::size_t i = 0; i < n; ++i) {
    scale_down(d0, i);
    ctx->scatter(x, c0, i);
    scale_down(d1, i);
    ctx->scatter(x, c1, i);
    scale_down(d2, i);
    mpz_mod(x.get_mpz_t(), x.get_mpz_t(), ctx->q().get_mpz_t());
    for (std::size_t j = 0; j < digits; ++j) {
      const std::uint64_t digit = bit_field(x, j * width, width);
      auto data = digit_polys[j].mutable_data();
      for (std::size_t l = 0; l < ctx->ring()->limb_count(); ++l) data[l * n + i] = digit;
    }
  }

  // Relinearize: (c0 + sum g_i D_i, c1 + sum a_i D_i).
  RingPoly acc0(ctx->ring(), Domain::Ntt), acc1(ctx->ring(), Domain::Ntt);
  for (std::size_t j = 0; j < digits; ++j) {
    const RingPoly dj = ntt_forward(digit_polys[j]);
    acc0 = poly_add(acc0, poly_mul_pointwise(ek.g_ntt(j), dj));
    acc1 = poly_add(acc1, poly_mul_pointwise(ek.a_ntt(j), dj));
  }

  Ciphertext r;
  r.c0 = poly_add(c0, ntt_inverse(acc0));
  r.c1 = poly_add(c1, ntt_inverse(acc1));
  r.scale_exponent = a.scale_exponent + b.scale_exponent;
  r.lane = a.lane;
  r.mul_depth = std::max(a.mul_depth, b.mul_depth) + 1;
  return r;
}

Ciphertext add_pt(const FvContextPtr& ctx, const Ciphertext& ct,
                  const Plaintext& m, std::int64_t plaintext_scale) {
  check_ciphertext(ctx, ct);
  check_plaintext(ctx, m);
  if (m.lane != ct.lane) throw FvError("add_pt: lane mismatch");
  if (plaintext_scale != ct.scale_exponent) throw FvError("add_pt: scale mismatch");
  Ciphertext r = ct;
  r.c0 = poly_add(ct.c0, scaled_plaintext(ctx, m));
  return r;
}

RingPoly lift_centered(const FvContextPtr& ctx, const Plaintext& m) {
  check_plaintext(ctx, m);
  const std::uint64_t t = ctx->t(m.lane);
  std::vector<std::int64_t> v(m.coeffs.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = centered(m.coeffs[i], t);
  return RingPoly::from_signed(ctx->ring(), v);
}

Ciphertext mul_pt_general(const FvContextPtr& ctx, const Ciphertext& ct,
                          const Plaintext& m, std::int64_t plaintext_scale) {
  check_ciphertext(ctx, ct);
  if (m.lane != ct.lane) throw FvError("mul_pt: lane mismatch");
  if (m.nonzero_count() == 0) {
    throw FvError("mul_pt: zero plaintext; elide the multiplication instead");
  }
  const RingPoly mp = ntt_forward(lift_centered(ctx, m));
  Ciphertext r = ct;
  r.c0 = poly_mul_ntt(ct.c0, mp);
  r.c1 = poly_mul_ntt(ct.c1, mp);
  r.scale_exponent = ct.scale_exponent + plaintext_scale;
  return r;
}

Ciphertext mul_pt(const FvContextPtr& ctx, const Ciphertext& ct,
                  const Plaintext& m, std::int64_t plaintext_scale) {
  if (m.nonzero_count() != 1) return mul_pt_general(ctx, ct, m, plaintext_scale);
  check_ciphertext(ctx, ct);
  check_plaintext(ctx, m);
  if (m.lane != ct.lane) throw FvError("mul_pt: lane mismatch");
  const auto it = std::find_if(m.coeffs.begin(), m.coeffs.end(),
                               [](auto c) { return c != 0; });
  const auto k = static_cast<std::size_t>(it - m.coeffs.begin());
  const std::int64_t coeff = centered(*it, ctx->t(m.lane));
  Ciphertext r = ct;
  r.c0 = poly_mul_monomial(ct.c0, k, coeff);
  r.c1 = poly_mul_monomial(ct.c1, k, coeff);
  r.scale_exponent = ct.scale_exponent + plaintext_scale;
  return r;
}

Plaintext make_plaintext(const FvContextPtr& ctx, std::size_t lane,
                         std::span<const std::int64_t> coeffs) {
  const std::uint64_t t = ctx->t(lane);
  if (coeffs.size() > ctx->degree()) throw FvError("too many plaintext coefficients");
  Plaintext m;
  m.lane = lane;
  m.coeffs.assign(ctx->degree(), 0);
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    const std::int64_t r = coeffs[i] % static_cast<std::int64_t>(t);
    m.coeffs[i] = r < 0 ? static_cast<std::uint64_t>(r + static_cast<std::int64_t>(t))
                        : static_cast<std::uint64_t>(r);
  }
  return m;
}

}  // namespace fcn
