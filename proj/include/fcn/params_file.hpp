#pragma once

// Text parameter files: one `name = value` per line, `#` starts a comment.
//
//   n = 8192
//   limbs = 30296486258802689, 30296486253035521, ...
//   t_lanes = 1099511922689, 1099512004609
//   beta = 4294967296
//   precision_bits = 15
//   noise_stddev = 3.2
//   seed = 7            # optional
//
// Omitted keys keep their defaults; unknown or repeated keys are errors.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "fcn/encode.hpp"
#include "fcn/fv.hpp"

namespace fcn {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::size_t line)
      : std::runtime_error(msg), line_(line) {}
  /// 1-based; 0 when the error is not tied to a line.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct ParamsFile {
  EncryptionParams params;
  int precision_bits = 15;
  std::optional<std::uint64_t> seed;

  FixedPointConfig fixed_point() const { return {precision_bits, params.t_lanes}; }
};

/// Messages read "<source>:<line>: <problem>".
ParamsFile parse_params(std::string_view text, std::string_view source = "params");
ParamsFile load_params(const std::string& path);
std::string format_params(const ParamsFile& p);

}  // namespace fcn
