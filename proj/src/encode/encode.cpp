#include "fcn/encode.hpp"

#include <cmath>
#include <numeric>

namespace fcn {

namespace {

mpz_class mpz_u64(std::uint64_t v) {
  mpz_class r;
  mpz_import(r.get_mpz_t(), 1, -1, sizeof v, 0, 0, &v);
  return r;
}

// Coefficient c of a lane read as a signed value in (-t/2, t/2].
mpz_class centered(std::uint64_t c, std::uint64_t t) {
  return c > t / 2 ? -mpz_u64(t - c) : mpz_u64(c);
}

mpz_class scaled_integer_impl(double v, std::int64_t scale) {
  if (!std::isfinite(v)) throw EncodeError("cannot encode a non-finite value");
  if (scale > 900 || scale < -900) throw EncodeError("scale exponent out of range");
  const double x = std::round(std::ldexp(v, static_cast<int>(scale)));
  if (!std::isfinite(x)) throw EncodeError("scaled value overflows");
  return mpz_class(x);
}

}  // namespace

void FixedPointConfig::validate() const {
  if (precision_bits < 1 || precision_bits > 60) {
    throw EncodeError("precision_bits must lie in [1, 60]");
  }
  if (t_lanes.empty()) throw EncodeError("at least one plaintext lane is required");
  for (std::size_t i = 0; i < t_lanes.size(); ++i) {
    if (t_lanes[i] < 3) throw EncodeError("plaintext moduli must be at least 3");
    for (std::size_t j = 0; j < i; ++j) {
      if (std::gcd(t_lanes[i], t_lanes[j]) != 1) {
        throw EncodeError("plaintext moduli must be pairwise coprime");
      }
    }
  }
}

mpz_class FixedPointConfig::crt_modulus() const {
  mpz_class m = 1;
  for (auto t : t_lanes) m *= mpz_u64(t);
  return m;
}

Plaintext encode_integer(const mpz_class& z, std::uint64_t t, std::size_t n,
                         std::size_t lane) {
  Plaintext p;
  p.lane = lane;
  p.coeffs.assign(n, 0);
  if (z == 0) return p;
  mpz_class mag = abs(z);
  const std::size_t bits = mpz_sizeinbase(mag.get_mpz_t(), 2);
  if (bits > n) throw EncodeError("integer has more bits than the ring degree");
  const std::uint64_t one = z > 0 ? 1 : t - 1;
  for (std::size_t i = 0; i < bits; ++i) {
    if (mpz_tstbit(mag.get_mpz_t(), i)) p.coeffs[i] = one;
  }
  return p;
}

Plaintext encode_integer(std::int64_t z, std::uint64_t t, std::size_t n,
                         std::size_t lane) {
  return encode_integer(mpz_class(static_cast<long>(z)), t, n, lane);
}

mpz_class decode_integer_mp(const Plaintext& p, std::uint64_t t) {
  mpz_class v = 0;
  mpz_class term;
  for (std::size_t i = 0; i < p.coeffs.size(); ++i) {
    if (p.coeffs[i] == 0) continue;
    if (p.coeffs[i] >= t) throw EncodeError("plaintext coefficient not reduced mod t");
    term = centered(p.coeffs[i], t);
    mpz_mul_2exp(term.get_mpz_t(), term.get_mpz_t(), i);
    v += term;
  }
  return v;
}

std::int64_t decode_integer(const Plaintext& p, std::uint64_t t) {
  const mpz_class v = decode_integer_mp(p, t);
  if (mpz_sizeinbase(v.get_mpz_t(), 2) > 62 && v != 0) {
    throw EncodeError("decoded integer exceeds 62 bits");
  }
  return v.get_si();
}

EncodedValue encode_at_scale(double v, std::int64_t scale,
                             const FixedPointConfig& cfg, std::size_t n) {
  const mpz_class z = scaled_integer_impl(v, scale);
  EncodedValue e;
  e.scale_exponent = scale;
  for (std::size_t j = 0; j < cfg.t_lanes.size(); ++j) {
    e.lanes.push_back(encode_integer(z, cfg.t_lanes[j], n, j));
  }
  return e;
}

EncodedValue encode_fixed(double v, const FixedPointConfig& cfg, std::size_t n) {
  if (!(std::fabs(v) < std::ldexp(1.0, 62 - cfg.precision_bits))) {
    throw EncodeError("value too large for the fixed-point precision");
  }
  return encode_at_scale(v, cfg.precision_bits, cfg, n);
}

mpz_class decode_fixed_integer(std::span<const Plaintext> lanes,
                               const FixedPointConfig& cfg) {
  const std::size_t k = cfg.t_lanes.size();
  if (lanes.size() != k) {
    throw EncodeError("expected " + std::to_string(k) + " lanes, got " +
                      std::to_string(lanes.size()));
  }
  const std::size_t n = lanes[0].coeffs.size();
  for (std::size_t j = 0; j < k; ++j) {
    if (lanes[j].lane != j) throw EncodeError("lanes out of order or duplicated");
    if (lanes[j].coeffs.size() != n) throw EncodeError("lanes disagree on ring degree");
  }
  if (k == 1) return decode_integer_mp(lanes[0], cfg.t_lanes[0]);

  // Garner-free CRT: sum r_j * w_j mod M with precomputed weights.
  const mpz_class m = cfg.crt_modulus();
  const mpz_class half = m / 2;
  std::vector<mpz_class> w(k);
  for (std::size_t j = 0; j < k; ++j) {
    const mpz_class tj = mpz_u64(cfg.t_lanes[j]);
    const mpz_class cof = m / tj;
    mpz_class inv, r = cof % tj;
    mpz_invert(inv.get_mpz_t(), r.get_mpz_t(), tj.get_mpz_t());
    w[j] = cof * inv;
  }
  mpz_class v = 0, c;
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    c = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const std::uint64_t r = lanes[j].coeffs[i];
      if (r >= cfg.t_lanes[j]) throw EncodeError("plaintext coefficient not reduced mod t");
      if (r == 0) continue;
      any = true;
      mpz_addmul_ui(c.get_mpz_t(), w[j].get_mpz_t(), r);
    }
    if (!any) continue;
    mpz_mod(c.get_mpz_t(), c.get_mpz_t(), m.get_mpz_t());
    if (c > half) c -= m;
    mpz_mul_2exp(c.get_mpz_t(), c.get_mpz_t(), i);
    v += c;
  }
  return v;
}

mpz_class scaled_integer(double v, std::int64_t scale) {
  return scaled_integer_impl(v, scale);
}

bool encodes_to_zero(double v, std::int64_t scale) {
  return scaled_integer_impl(v, scale) == 0;
}

bool encodes_to_monomial(double v, std::int64_t scale) {
  const mpz_class z = abs(scaled_integer_impl(v, scale));
  return z != 0 && mpz_popcount(z.get_mpz_t()) == 1;
}

double scaled_to_double(const mpz_class& z, std::int64_t scale) {
  if (z == 0) return 0.0;
  long exp = 0;
  const double mant = mpz_get_d_2exp(&exp, z.get_mpz_t());
  return std::ldexp(mant, static_cast<int>(exp - scale));
}

double decode_fixed(std::span<const Plaintext> lanes, std::int64_t scale_exponent,
                    const FixedPointConfig& cfg) {
  return scaled_to_double(decode_fixed_integer(lanes, cfg), scale_exponent);
}

}  // namespace fcn
