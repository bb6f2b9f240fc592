#include "fcn/decryptor.hpp"

#include <cmath>

#include "fcn/serialize.hpp"

namespace fcn {

namespace {

RingPoly phase(const FvContextPtr& ctx, const SecretKey& sk, const Ciphertext& ct) {
  if (!sk.s.context() || !sk.s.context()->same_as(*ctx->ring())) {
    throw FvError("secret key does not belong to these parameters");
  }
  if (!ct.c0.context() || !ct.c0.context()->same_as(*ctx->ring()) ||
      !ct.c1.context() || !ct.c1.context()->same_as(*ctx->ring())) {
    throw FvError("ciphertext does not belong to these parameters");
  }
  return poly_add(ct.c0, poly_mul_ntt(ct.c1, sk.s));
}

struct Decoded {
  Plaintext m;
  double budget;
};

Decoded decode_phase(const FvContextPtr& ctx, const RingPoly& x_poly, std::size_t lane) {
  const std::uint64_t t = ctx->t(lane);
  const mpz_class tz(static_cast<unsigned long>(t));
  const mpz_class& q = ctx->q();
  const mpz_class two_q = 2 * q;

  Decoded d;
  d.m.lane = lane;
  d.m.coeffs.resize(ctx->degree());
  mpz_class x, tx, y, err, worst = 0;
  for (std::size_t i = 0; i < ctx->degree(); ++i) {
    ctx->reconstruct(x_poly, i, x);
    tx = tz * x;
    // y = floor((2 t x + q) / 2q) = round(t x / q)
    y = 2 * tx + q;
    mpz_fdiv_q(y.get_mpz_t(), y.get_mpz_t(), two_q.get_mpz_t());
    err = tx - q * y;
    mpz_abs(err.get_mpz_t(), err.get_mpz_t());
    if (err > worst) worst = err;
    d.m.coeffs[i] = mpz_fdiv_ui(y.get_mpz_t(), t);
  }
  if (worst == 0) {
    d.budget = ctx->log2_q() - 1;
  } else {
    long exp = 0;
    const double mant = mpz_get_d_2exp(&exp, worst.get_mpz_t());
    d.budget = ctx->log2_q() - 1 - (std::log2(mant) + static_cast<double>(exp));
    // The measured error can never exceed q/2, so a wrapped-around noise term
    // reads as a budget just above zero. Below one bit the measurement cannot
    // tell a valid ciphertext from a corrupted one; call it exhausted.
    if (d.budget < 1.0) d.budget = 0.0;
  }
  return d;
}

}  // namespace

Plaintext decrypt(const FvContextPtr& ctx, const SecretKey& sk,
                  const Ciphertext& ct, bool diagnostic) {
  Decoded d = decode_phase(ctx, phase(ctx, sk, ct), ct.lane);
  if (diagnostic && d.budget <= 0) {
    throw NoiseBudgetExhausted("noise budget exhausted (" + std::to_string(d.budget) +
                               " bits); the decrypted value is unreliable");
  }
  return std::move(d.m);
}

double noise_budget(const FvContextPtr& ctx, const SecretKey& sk,
                    const Ciphertext& ct) {
  return decode_phase(ctx, phase(ctx, sk, ct), ct.lane).budget;
}

void write_secret_key(std::ostream& out, const FvContextPtr& ctx,
                      const SecretKey& sk) {
  write_key_polys(out, ctx, kSecretKeyMagic, {&sk.s});
}

SecretKey read_secret_key(std::istream& in, const FvContextPtr& ctx) {
  auto polys = read_key_polys(in, ctx, kSecretKeyMagic);
  if (polys.size() != 1) throw FvError("secret key file must hold one polynomial");
  return SecretKey{std::move(polys[0])};
}

}  // namespace fcn
