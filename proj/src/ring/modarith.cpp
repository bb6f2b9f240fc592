#include "fcn/modarith.hpp"

#include <array>
#include <bit>

namespace fcn {

Modulus::Modulus(std::uint64_t value) : value_(value) {
  if (value < 2 || value >= (std::uint64_t{1} << 62)) {
    throw std::invalid_argument("modulus must lie in [2, 2^62)");
  }
  // floor(2^128 / q) as two words.
  const u128 all_ones = ~static_cast<u128>(0);
  u128 ratio = all_ones / value;
  if (all_ones % value == value - 1) ratio += 1;
  ratio_lo_ = static_cast<std::uint64_t>(ratio);
  ratio_hi_ = static_cast<std::uint64_t>(ratio >> 64);
}

int Modulus::bit_count() const { return std::bit_width(value_); }

std::uint64_t Modulus::pow(std::uint64_t base, std::uint64_t exp) const {
  std::uint64_t result = 1 % value_;
  base %= value_;
  while (exp != 0) {
    if (exp & 1) result = mul(result, base);
    base = mul(base, base);
    exp >>= 1;
  }
  return result;
}

std::uint64_t Modulus::inv(std::uint64_t a) const {
  a %= value_;
  if (a == 0) throw std::domain_error("zero has no modular inverse");
  return pow(a, value_ - 2);
}

namespace {

std::uint64_t mulmod_slow(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>(static_cast<u128>(a) * b % m);
}

std::uint64_t powmod_slow(std::uint64_t b, std::uint64_t e, std::uint64_t m) {
  std::uint64_t r = 1;
  b %= m;
  while (e) {
    if (e & 1) r = mulmod_slow(r, b, m);
    b = mulmod_slow(b, b, m);
    e >>= 1;
  }
  return r;
}

}  // namespace

// Deterministic Miller-Rabin; these bases are exact for all 64-bit inputs.
bool is_prime(std::uint64_t n) {
  if (n < 2) return false;
  constexpr std::array<std::uint64_t, 12> kBases = {2,  3,  5,  7,  11, 13,
                                                    17, 19, 23, 29, 31, 37};
  for (auto p : kBases) {
    if (n % p == 0) return n == p;
  }
  std::uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  for (auto a : kBases) {
    std::uint64_t x = powmod_slow(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int r = 1; r < s; ++r) {
      x = mulmod_slow(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

}  // namespace fcn
