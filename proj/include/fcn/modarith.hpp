#pragma once

#include <cstdint>
#include <stdexcept>

namespace fcn {

using u128 = unsigned __int128;

/// An odd modulus below 2^62 with precomputed Barrett constants.
class Modulus {
 public:
  Modulus() = default;
  explicit Modulus(std::uint64_t value);

  std::uint64_t value() const { return value_; }
  int bit_count() const;

  // Reduces a 128-bit value (less than value()^2) to [0, value()).
  std::uint64_t reduce(u128 z) const {
    const auto z0 = static_cast<std::uint64_t>(z);
    const auto z1 = static_cast<std::uint64_t>(z >> 64);
    const u128 t0 = static_cast<u128>(z0) * ratio_lo_;
    const u128 t1 = static_cast<u128>(z0) * ratio_hi_;
    const u128 t2 = static_cast<u128>(z1) * ratio_lo_;
    const u128 mid = (t0 >> 64) + static_cast<std::uint64_t>(t1) +
                     static_cast<std::uint64_t>(t2);
    const std::uint64_t q_hat = static_cast<std::uint64_t>(t1 >> 64) +
                                static_cast<std::uint64_t>(t2 >> 64) +
                                static_cast<std::uint64_t>(mid >> 64) +
                                z1 * ratio_hi_;
    std::uint64_t r = z0 - q_hat * value_;
    if (r >= value_) r -= value_;
    return r;
  }

  std::uint64_t reduce(std::uint64_t a) const { return a % value_; }

  std::uint64_t add(std::uint64_t a, std::uint64_t b) const {
    std::uint64_t s = a + b;
    return s >= value_ ? s - value_ : s;
  }
  std::uint64_t sub(std::uint64_t a, std::uint64_t b) const {
    return a >= b ? a - b : a + value_ - b;
  }
  std::uint64_t neg(std::uint64_t a) const { return a == 0 ? 0 : value_ - a; }
  std::uint64_t mul(std::uint64_t a, std::uint64_t b) const {
    return reduce(static_cast<u128>(a) * b);
  }

  // Shoup precomputation for a fixed multiplicand w: floor(w * 2^64 / q).
  std::uint64_t shoup(std::uint64_t w) const {
    return static_cast<std::uint64_t>((static_cast<u128>(w) << 64) / value_);
  }
  std::uint64_t mul_shoup(std::uint64_t a, std::uint64_t w,
                          std::uint64_t w_shoup) const {
    const auto q_hat =
        static_cast<std::uint64_t>((static_cast<u128>(a) * w_shoup) >> 64);
    std::uint64_t r = a * w - q_hat * value_;
    return r >= value_ ? r - value_ : r;
  }

  std::uint64_t pow(std::uint64_t base, std::uint64_t exp) const;
  // Inverse of a nonzero residue; value() must be prime.
  std::uint64_t inv(std::uint64_t a) const;

  // Maps a signed integer to its canonical residue.
  std::uint64_t from_signed(std::int64_t v) const {
    if (v >= 0) return static_cast<std::uint64_t>(v) % value_;
    const std::uint64_t m = (0 - static_cast<std::uint64_t>(v)) % value_;
    return neg(m);
  }

  friend bool operator==(const Modulus& a, const Modulus& b) {
    return a.value_ == b.value_;
  }

 private:
  std::uint64_t value_ = 0;
  std::uint64_t ratio_lo_ = 0;
  std::uint64_t ratio_hi_ = 0;
};

bool is_prime(std::uint64_t n);

}  // namespace fcn
