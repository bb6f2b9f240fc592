#pragma once

// Leveled FV encryption over RNS limbs: parameters, keys, ciphertexts and
// the public-key side of the scheme (encryption and homomorphic evaluation).
// Everything that needs the secret key lives in fcn/decryptor.hpp.

#include <gmpxx.h>

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fcn/ring.hpp"

namespace fcn {

class FvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a ciphertext's noise has grown past the decryption bound.
class NoiseBudgetExhausted : public FvError {
 public:
  using FvError::FvError;
};

inline constexpr std::array<std::uint64_t, 4> kDefaultLimbPrimes = {
    30296486258802689ULL, 30296486253035521ULL, 30296486245826561ULL,
    30296486245564417ULL};
inline constexpr std::uint64_t kMnistPlainModulus1 = 1099511922689ULL;
inline constexpr std::uint64_t kMnistPlainModulus2 = 1099512004609ULL;

struct EncryptionParams {
  std::size_t n = 8192;
  std::vector<std::uint64_t> limbs{kDefaultLimbPrimes.begin(),
                                   kDefaultLimbPrimes.end()};
  std::vector<std::uint64_t> t_lanes{kMnistPlainModulus1};
  std::uint64_t beta = std::uint64_t{1} << 32;
  double noise_stddev = 3.2;

  /// Throws FvError naming the first violated constraint.
  void validate() const;
  /// Canonical single-line text form; the digest is computed over it.
  std::string canonical_string() const;

  friend bool operator==(const EncryptionParams&,
                         const EncryptionParams&) = default;
};

/// Immutable per-parameter-set state: ring contexts, the auxiliary RNS base
/// used for exact tensoring, and the CRT constants for both bases.
class FvContext {
 public:
  explicit FvContext(EncryptionParams params);
  static std::shared_ptr<const FvContext> make(EncryptionParams params) {
    return std::make_shared<const FvContext>(std::move(params));
  }

  const EncryptionParams& params() const { return params_; }
  std::size_t degree() const { return params_.n; }
  const RingContextPtr& ring() const { return ring_; }
  /// Q followed by the auxiliary primes P.
  const RingContextPtr& extended_ring() const { return ext_ring_; }

  const mpz_class& q() const { return q_; }
  double log2_q() const;
  std::size_t lane_count() const { return params_.t_lanes.size(); }
  std::uint64_t t(std::size_t lane) const;
  /// floor(q / t) for the lane.
  const mpz_class& delta(std::size_t lane) const;
  std::span<const std::uint64_t> delta_residues(std::size_t lane) const;

  int beta_bits() const { return beta_bits_; }
  /// ell = floor(log_beta q); relinearization uses ell + 1 digits.
  std::size_t ell() const { return ell_; }

  /// Centered CRT lift of coefficient i of a Q-basis polynomial.
  void reconstruct(const RingPoly& p, std::size_t i, mpz_class& out) const;
  /// Same for a polynomial over the extended basis Q*P.
  void reconstruct_extended(const RingPoly& p, std::size_t i,
                            mpz_class& out) const;
  /// Writes a signed integer's residues into coefficient i of p.
  void scatter(const mpz_class& value, RingPoly& p, std::size_t i) const;

  std::array<std::uint8_t, 32> digest() const;

 private:
  struct CrtBase {
    mpz_class product;
    mpz_class half;
    std::vector<mpz_class> weights;  // (M/m_i) * ((M/m_i)^-1 mod m_i)
  };
  static CrtBase make_crt(std::span<const std::uint64_t> moduli);
  void reconstruct_with(const CrtBase& base, const RingPoly& p, std::size_t i,
                        mpz_class& out) const;

  EncryptionParams params_;
  RingContextPtr ring_;
  RingContextPtr ext_ring_;
  mpz_class q_;
  std::vector<mpz_class> delta_;
  std::vector<std::vector<std::uint64_t>> delta_residues_;
  CrtBase crt_q_;
  CrtBase crt_ext_;
  int beta_bits_ = 0;
  std::size_t ell_ = 0;
};

using FvContextPtr = std::shared_ptr<const FvContext>;

/// Element of R_t: n coefficients in [0, t) for one plaintext lane.
struct Plaintext {
  std::vector<std::uint64_t> coeffs;
  std::size_t lane = 0;

  std::size_t nonzero_count() const;
  friend bool operator==(const Plaintext&, const Plaintext&) = default;
};

struct Ciphertext {
  RingPoly c0;
  RingPoly c1;
  std::int64_t scale_exponent = 0;
  std::size_t lane = 0;
  std::uint32_t mul_depth = 0;

  friend bool operator==(const Ciphertext&, const Ciphertext&) = default;
};

struct SecretKey {
  RingPoly s;
};

struct PublicKey {
  RingPoly p0;
  RingPoly p1;
};

/// Relinearization keys, one (a_i, g_i) pair per base-beta digit, with
/// g_i = -(a_i s + e_i) + beta^i s^2.
class EvalKeys {
 public:
  EvalKeys() = default;
  EvalKeys(std::vector<RingPoly> a, std::vector<RingPoly> g);

  std::size_t size() const { return a_.size(); }
  const RingPoly& a(std::size_t i) const { return a_[i]; }
  const RingPoly& g(std::size_t i) const { return g_[i]; }
  const RingPoly& a_ntt(std::size_t i) const { return a_ntt_[i]; }
  const RingPoly& g_ntt(std::size_t i) const { return g_ntt_[i]; }

 private:
  std::vector<RingPoly> a_, g_;
  std::vector<RingPoly> a_ntt_, g_ntt_;
};

struct KeySet {
  SecretKey secret;
  PublicKey pub;
  EvalKeys eval;
};

/// Seeded randomness for key generation and encryption.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  RingPoly uniform(const RingContextPtr& ring);
  RingPoly ternary(const RingContextPtr& ring);
  /// Rounded Gaussian with the given deviation, truncated at 6 sigma.
  RingPoly gaussian(const RingContextPtr& ring, double stddev);

 private:
  std::mt19937_64 rng_;
};

KeySet keygen(const FvContextPtr& ctx, std::uint64_t seed);

Ciphertext encrypt(const FvContextPtr& ctx, const PublicKey& pk,
                   const Plaintext& m, std::int64_t scale_exponent,
                   Sampler& rng);

/// The noiseless encryption (Delta*m, 0); needs no key material.
Ciphertext trivial_encrypt(const FvContextPtr& ctx, const Plaintext& m,
                           std::int64_t scale_exponent);

Ciphertext add_ct(const FvContextPtr& ctx, const Ciphertext& a,
                  const Ciphertext& b);
Ciphertext mul_ct(const FvContextPtr& ctx, const Ciphertext& a,
                  const Ciphertext& b, const EvalKeys& ek);
/// (c0 + Delta*m, c1). The plaintext must already be at ct's scale.
Ciphertext add_pt(const FvContextPtr& ctx, const Ciphertext& ct,
                  const Plaintext& m, std::int64_t plaintext_scale);
/// (m*c0, m*c1); plaintext_scale is added to the ciphertext's exponent.
/// A plaintext with one nonzero coefficient takes the monomial fast path.
Ciphertext mul_pt(const FvContextPtr& ctx, const Ciphertext& ct,
                  const Plaintext& m, std::int64_t plaintext_scale);
/// Always uses the NTT product; reference for the fast path.
Ciphertext mul_pt_general(const FvContextPtr& ctx, const Ciphertext& ct,
                          const Plaintext& m, std::int64_t plaintext_scale);

/// Centered lift of a plaintext into R_q (coefficients above t/2 become
/// negative).
RingPoly lift_centered(const FvContextPtr& ctx, const Plaintext& m);

Plaintext make_plaintext(const FvContextPtr& ctx, std::size_t lane,
                         std::span<const std::int64_t> coeffs);

}  // namespace fcn
