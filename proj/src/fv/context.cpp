#include <openssl/sha.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "fcn/fv.hpp"

namespace fcn {

namespace {

constexpr std::uint64_t kAuxStep = std::uint64_t{1} << 17;

// Auxiliary primes k*2^17 + 1 just below 2^60, skipping any limb of Q.
std::vector<std::uint64_t> auxiliary_primes(
    std::span<const std::uint64_t> q_limbs, double bits_needed) {
  std::vector<std::uint64_t> out;
  double bits = 0;
  std::uint64_t k = ((std::uint64_t{1} << 60) - 1) / kAuxStep;
  while (bits < bits_needed) {
    const std::uint64_t p = k * kAuxStep + 1;
    --k;
    if (!is_prime(p)) continue;
    if (std::find(q_limbs.begin(), q_limbs.end(), p) != q_limbs.end()) continue;
    out.push_back(p);
    bits += std::log2(static_cast<double>(p));
  }
  return out;
}

mpz_class from_u64(std::uint64_t v) {
  mpz_class r;
  mpz_import(r.get_mpz_t(), 1, -1, sizeof(v), 0, 0, &v);
  return r;
}

}  // namespace

void EncryptionParams::validate() const {
  if (n < 1024 || n > 32768 || !std::has_single_bit(n)) {
    throw FvError("n must be a power of two in [1024, 32768]");
  }
  if (limbs.empty()) throw FvError("at least one limb prime is required");
  for (auto q : limbs) {
    if (q >= (std::uint64_t{1} << 61)) throw FvError("limb primes must be below 2^61");
    if (!is_prime(q)) throw FvError("limb " + std::to_string(q) + " is not prime");
    if ((q - 1) % (2 * n) != 0) {
      throw FvError("limb " + std::to_string(q) + " is not 1 mod 2n");
    }
  }
  if (t_lanes.empty()) throw FvError("at least one plaintext modulus is required");
  double log_q = 0;
  std::uint64_t min_limb = limbs.front();
  for (auto q : limbs) {
    log_q += std::log2(static_cast<double>(q));
    min_limb = std::min(min_limb, q);
  }
  for (auto t : t_lanes) {
    if (t < 2 || t >= (std::uint64_t{1} << 62)) {
      throw FvError("plaintext modulus must lie in [2, 2^62)");
    }
    if (log_q < std::log2(static_cast<double>(t)) + 20) {
      throw FvError("q must exceed every plaintext modulus by at least 2^20");
    }
  }
  if (beta < 2 || !std::has_single_bit(beta)) {
    throw FvError("decomposition base must be a power of two");
  }
  if (beta >= min_limb) throw FvError("decomposition base must be below every limb");
  if (!(noise_stddev > 0) || !std::isfinite(noise_stddev)) {
    throw FvError("noise standard deviation must be positive");
  }
}

std::string EncryptionParams::canonical_string() const {
  std::ostringstream os;
  os << "n=" << n << ";limbs=";
  for (std::size_t i = 0; i < limbs.size(); ++i) os << (i ? "," : "") << limbs[i];
  os << ";t=";
  for (std::size_t i = 0; i < t_lanes.size(); ++i) os << (i ? "," : "") << t_lanes[i];
  os.precision(17);
  os << ";beta=" << beta << ";sigma=" << noise_stddev;
  return os.str();
}

FvContext::CrtBase FvContext::make_crt(std::span<const std::uint64_t> moduli) {
  CrtBase base;
  base.product = 1;
  for (auto m : moduli) base.product *= from_u64(m);
  base.half = base.product / 2;
  for (auto m : moduli) {
    const mpz_class mm = from_u64(m);
    const mpz_class cofactor = base.product / mm;
    mpz_class inv;
    mpz_class cof_mod = cofactor % mm;
    if (mpz_invert(inv.get_mpz_t(), cof_mod.get_mpz_t(), mm.get_mpz_t()) == 0) {
      throw FvError("CRT moduli are not coprime");
    }
    base.weights.push_back(cofactor * inv);
  }
  return base;
}

FvContext::FvContext(EncryptionParams params) : params_(std::move(params)) {
  params_.validate();
  ring_ = RingContext::make(params_.n, params_.limbs);
  q_ = 1;
  for (auto q : params_.limbs) q_ *= from_u64(q);

  // Tensor coefficients reach n * q^2 / 2 in magnitude; Q*P must cover twice
  // that, so P needs about log q + log n + 1 bits. Keep a few bits of slack.
  const double log_q = log2_q();
  const auto aux = auxiliary_primes(params_.limbs,
                                    log_q + std::log2(static_cast<double>(params_.n)) + 4);
  std::vector<std::uint64_t> ext = params_.limbs;
  ext.insert(ext.end(), aux.begin(), aux.end());
  ext_ring_ = RingContext::make(params_.n, ext);
  crt_q_ = make_crt(params_.limbs);
  crt_ext_ = make_crt(ext);

  for (auto t : params_.t_lanes) {
    mpz_class d = q_ / from_u64(t);
    std::vector<std::uint64_t> res;
    for (auto q : params_.limbs) res.push_back(mpz_fdiv_ui(d.get_mpz_t(), q));
    delta_.push_back(d);
    delta_residues_.push_back(std::move(res));
  }

  beta_bits_ = std::countr_zero(params_.beta);
  ell_ = (mpz_sizeinbase(q_.get_mpz_t(), 2) - 1) / beta_bits_;
}

double FvContext::log2_q() const {
  double r = 0;
  for (auto q : params_.limbs) r += std::log2(static_cast<double>(q));
  return r;
}

std::uint64_t FvContext::t(std::size_t lane) const {
  if (lane >= params_.t_lanes.size()) throw FvError("plaintext lane out of range");
  return params_.t_lanes[lane];
}

const mpz_class& FvContext::delta(std::size_t lane) const {
  if (lane >= delta_.size()) throw FvError("plaintext lane out of range");
  return delta_[lane];
}

std::span<const std::uint64_t> FvContext::delta_residues(std::size_t lane) const {
  if (lane >= delta_residues_.size()) throw FvError("plaintext lane out of range");
  return delta_residues_[lane];
}

void FvContext::reconstruct_with(const CrtBase& base, const RingPoly& p,
                                 std::size_t i, mpz_class& out) const {
  out = 0;
  const std::size_t n = p.degree();
  const auto data = p.data();
  for (std::size_t l = 0; l < base.weights.size(); ++l) {
    mpz_addmul_ui(out.get_mpz_t(), base.weights[l].get_mpz_t(), data[l * n + i]);
  }
  mpz_mod(out.get_mpz_t(), out.get_mpz_t(), base.product.get_mpz_t());
  if (out > base.half) out -= base.product;
}

void FvContext::reconstruct(const RingPoly& p, std::size_t i,
                            mpz_class& out) const {
  reconstruct_with(crt_q_, p, i, out);
}

void FvContext::reconstruct_extended(const RingPoly& p, std::size_t i,
                                     mpz_class& out) const {
  reconstruct_with(crt_ext_, p, i, out);
}

void FvContext::scatter(const mpz_class& value, RingPoly& p,
                        std::size_t i) const {
  const std::size_t n = p.degree();
  auto data = p.mutable_data();
  const auto& ring = *p.context();
  for (std::size_t l = 0; l < ring.limb_count(); ++l) {
    data[l * n + i] = mpz_fdiv_ui(value.get_mpz_t(), ring.limb(l).value());
  }
}

std::array<std::uint8_t, 32> FvContext::digest() const {
  const std::string text = params_.canonical_string();
  std::array<std::uint8_t, 32> out{};
  SHA256(reinterpret_cast<const unsigned char*>(text.data()), text.size(),
         out.data());
  return out;
}

std::size_t Plaintext::nonzero_count() const {
  return static_cast<std::size_t>(
      std::count_if(coeffs.begin(), coeffs.end(), [](auto c) { return c != 0; }));
}

}  // namespace fcn
