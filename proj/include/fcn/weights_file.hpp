#pragma once

// Binary model container. All integers little-endian.
//
//   "FCNW"  u16 version (1)  u16 record count
//   record 0 is the input:  u8 tag 0, u32 c, u32 h, u32 w
//   then one record per layer, u8 tag first:
//     1 Conv2d   u32 out, in, kh, kw, stride, padding; weights
//     2 Pool     u32 window, stride, padding; u8 reciprocal
//     3 Dense    u32 out, in; weights
//     4 BatchNorm  u32 channels; f64 scale[c]; f64 shift[c]
//     5 PolyActivation  u32 count; f64 coeffs[count] (ascending);
//                f64 interval; f64 delta; u8 pow2 flag; if set, per coeff i8 sign, i16 exponent
//   weights = f64 values[N] row-major; mask bitset ceil(N/8) bytes, LSB first;
//             u8 has_bias; f64 bias[out] if set;
//             u8 quantized; if set, i16 exponent[N] (INT16_MIN for zero)
//
// The exponent array is present exactly when every effective weight is 0 or
// +-2^e; the loader re-derives it and rejects any disagreement.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fcn/network.hpp"

namespace fcn {

class WeightsFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint16_t kWeightsVersion = 1;

std::vector<std::uint8_t> weights_bytes(const NetworkSpec& net);
NetworkSpec weights_from_bytes(std::span<const std::uint8_t> bytes);

void save_weights(const std::string& path, const NetworkSpec& net);
NetworkSpec load_weights(const std::string& path);

}  // namespace fcn
