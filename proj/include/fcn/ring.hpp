#pragma once

// Negacyclic polynomial arithmetic in Z_q[x]/(x^n + 1), with q held as a
// product of word-sized primes (one "limb" per prime).

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "fcn/modarith.hpp"

namespace fcn {

class RingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One prime q_i = 1 (mod 2n) together with its negacyclic NTT tables.
class ModulusLimb {
 public:
  ModulusLimb(std::uint64_t q, std::size_t n);

  const Modulus& modulus() const { return mod_; }
  std::uint64_t value() const { return mod_.value(); }
  std::size_t degree() const { return n_; }
  /// Primitive 2n-th root of unity used for the transform.
  std::uint64_t root() const { return root_; }

  void forward(std::span<std::uint64_t> a) const;
  void inverse(std::span<std::uint64_t> a) const;

 private:
  Modulus mod_;
  std::size_t n_;
  std::uint64_t root_;
  // Powers of root (forward) and root^-1 (inverse) in bit-reversed order.
  std::vector<std::uint64_t> fwd_, fwd_shoup_;
  std::vector<std::uint64_t> inv_, inv_shoup_;
  std::uint64_t n_inv_, n_inv_shoup_;
};

/// Ring degree plus an ordered list of limbs. Built once and shared.
class RingContext {
 public:
  RingContext(std::size_t n, std::span<const std::uint64_t> primes);

  static std::shared_ptr<const RingContext> make(
      std::size_t n, std::span<const std::uint64_t> primes) {
    return std::make_shared<const RingContext>(n, primes);
  }

  std::size_t degree() const { return n_; }
  std::size_t limb_count() const { return limbs_.size(); }
  const ModulusLimb& limb(std::size_t i) const { return limbs_[i]; }
  std::vector<std::uint64_t> primes() const;

  bool same_as(const RingContext& other) const;

 private:
  std::size_t n_;
  std::vector<ModulusLimb> limbs_;
};

using RingContextPtr = std::shared_ptr<const RingContext>;

enum class Domain : std::uint8_t { Coefficient, Ntt };

/// Element of R_q in RNS form. Limb-major storage: limb i occupies
/// coefficients [i*n, (i+1)*n).
class RingPoly {
 public:
  RingPoly() = default;
  RingPoly(RingContextPtr ctx, Domain domain = Domain::Coefficient);

  static RingPoly zero(RingContextPtr ctx,
                       Domain domain = Domain::Coefficient) {
    return RingPoly(std::move(ctx), domain);
  }
  /// Reduces each signed coefficient into every limb.
  static RingPoly from_signed(RingContextPtr ctx,
                              std::span<const std::int64_t> coeffs);
  /// Builds from per-limb residue vectors; each must be canonical.
  static RingPoly from_limbs(RingContextPtr ctx,
                             std::vector<std::uint64_t> data,
                             Domain domain = Domain::Coefficient);

  const RingContextPtr& context() const { return ctx_; }
  std::size_t degree() const { return ctx_->degree(); }
  std::size_t limb_count() const { return ctx_->limb_count(); }
  Domain domain() const { return domain_; }

  std::span<std::uint64_t> limb(std::size_t i) {
    return {data_.data() + i * degree(), degree()};
  }
  std::span<const std::uint64_t> limb(std::size_t i) const {
    return {data_.data() + i * degree(), degree()};
  }
  std::span<const std::uint64_t> data() const { return data_; }
  std::span<std::uint64_t> mutable_data() { return data_; }

  bool is_zero() const;

  friend bool operator==(const RingPoly& a, const RingPoly& b);

 private:
  friend RingPoly ntt_forward(const RingPoly& p);
  friend RingPoly ntt_inverse(const RingPoly& p);

  RingContextPtr ctx_;
  Domain domain_ = Domain::Coefficient;
  std::vector<std::uint64_t> data_;
};

RingPoly ntt_forward(const RingPoly& p);
RingPoly ntt_inverse(const RingPoly& p);

RingPoly poly_add(const RingPoly& a, const RingPoly& b);
RingPoly poly_sub(const RingPoly& a, const RingPoly& b);
RingPoly poly_negate(const RingPoly& a);
RingPoly scalar_mul(const RingPoly& a, std::int64_t scalar);

/// Negacyclic product via the NTT. Inputs may be in either domain; the
/// result is returned in the coefficient domain.
RingPoly poly_mul_ntt(const RingPoly& a, const RingPoly& b);
/// Pointwise product of two NTT-domain polynomials.
RingPoly poly_mul_pointwise(const RingPoly& a, const RingPoly& b);
/// Schoolbook O(n^2) negacyclic product; the reference for the others.
RingPoly poly_mul_naive(const RingPoly& a, const RingPoly& b);

/// Multiplies c by the monomial coeff * x^k in O(n) per limb. Coefficients
/// that wrap past x^(n-1) are negated, since x^n = -1.
RingPoly poly_mul_monomial(const RingPoly& c, std::size_t k,
                           std::int64_t coeff);
/// Same, with the monomial coefficient given as a residue per limb.
RingPoly poly_mul_monomial(const RingPoly& c, std::size_t k,
                           std::span<const std::uint64_t> coeff_residues);

}  // namespace fcn
