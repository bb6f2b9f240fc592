#pragma once

// Base-2 integer encoder and fixed-point scaling. A value z is stored as the
// polynomial whose evaluation at x = 2 is z, with each set bit of |z|
// contributing +1 (or t-1, i.e. -1, for negative z).

#include <gmpxx.h>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "fcn/fv.hpp"

namespace fcn {

class EncodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FixedPointConfig {
  int precision_bits = 15;
  std::vector<std::uint64_t> t_lanes{kMnistPlainModulus1};

  void validate() const;
  /// Product of the lane moduli; values are recovered in (-M/2, M/2].
  mpz_class crt_modulus() const;
};

struct EncodedValue {
  std::vector<Plaintext> lanes;  // one per t in the config, same polynomial
  std::int64_t scale_exponent = 0;
};

Plaintext encode_integer(std::int64_t z, std::uint64_t t, std::size_t n,
                         std::size_t lane = 0);
Plaintext encode_integer(const mpz_class& z, std::uint64_t t, std::size_t n,
                         std::size_t lane = 0);

/// Centered coefficients evaluated at x = 2. Throws EncodeError if the
/// result needs more than 62 bits.
std::int64_t decode_integer(const Plaintext& p, std::uint64_t t);
/// Same without the range limit.
mpz_class decode_integer_mp(const Plaintext& p, std::uint64_t t);

/// round(v * 2^precision_bits), half away from zero, at scale precision_bits.
EncodedValue encode_fixed(double v, const FixedPointConfig& cfg, std::size_t n);
/// round(v * 2^scale) at an arbitrary scale; used to line plaintext
/// operands up with a ciphertext's accumulated scale.
EncodedValue encode_at_scale(double v, std::int64_t scale,
                             const FixedPointConfig& cfg, std::size_t n);

/// Recombines the lanes coefficient by coefficient (centered CRT), evaluates
/// at x = 2 exactly and divides by 2^scale_exponent.
double decode_fixed(std::span<const Plaintext> lanes, std::int64_t scale_exponent,
                    const FixedPointConfig& cfg);
/// The exact integer before the division.
mpz_class decode_fixed_integer(std::span<const Plaintext> lanes,
                               const FixedPointConfig& cfg);

/// round(v * 2^scale), half away from zero: the integer a plaintext
/// constant is encoded from.
mpz_class scaled_integer(double v, std::int64_t scale);
/// The encoding of v at this scale is the zero polynomial (the operation
/// using it can be elided) / a single monomial (fast path).
bool encodes_to_zero(double v, std::int64_t scale);
bool encodes_to_monomial(double v, std::int64_t scale);

/// mpz -> double times 2^-scale without intermediate overflow.
double scaled_to_double(const mpz_class& z, std::int64_t scale);

}  // namespace fcn
