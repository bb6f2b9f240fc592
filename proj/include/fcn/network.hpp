#pragma once

// Layer graph of a (possibly pruned and quantized) convolutional network.
// Tensors are C x H x W, row-major; dense layers see the flattened tensor.

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "fcn/approx.hpp"

namespace fcn {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Shape3 {
  std::size_t c = 0, h = 0, w = 0;
  std::size_t size() const { return c * h * w; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

/// Values plus a binary pruning mask; the weight actually applied is
/// value * mask.
struct WeightTensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<std::uint8_t> mask;  // 0/1, same length as values

  static WeightTensor dense(std::vector<std::size_t> shape, std::vector<double> values);

  std::size_t size() const { return values.size(); }
  double effective(std::size_t i) const { return mask[i] ? values[i] : 0.0; }
  std::size_t surviving() const;  // nonzero effective entries
  void validate() const;
  friend bool operator==(const WeightTensor&, const WeightTensor&) = default;
};

struct Conv2d {
  std::size_t out_maps = 0, in_maps = 0, kh = 0, kw = 0, stride = 1, padding = 0;
  WeightTensor weights;       // out x in x kh x kw
  std::vector<double> bias;   // empty or out_maps entries
  friend bool operator==(const Conv2d&, const Conv2d&) = default;
};

/// Window sum without the division; zero padding contributes nothing.
/// With reciprocal set, the sum is multiplied by 1/(window^2).
struct ScaledAvgPool {
  std::size_t window = 0, stride = 1, padding = 0;
  bool reciprocal = false;
  friend bool operator==(const ScaledAvgPool&, const ScaledAvgPool&) = default;
};

struct Dense {
  std::size_t out = 0, in = 0;
  WeightTensor weights;  // out x in
  std::vector<double> bias;
  friend bool operator==(const Dense&, const Dense&) = default;
};

/// y = scale[c] * x + shift[c]; must be folded into a neighbour before
/// encrypted evaluation.
struct BatchNormAffine {
  std::vector<double> scale, shift;
  friend bool operator==(const BatchNormAffine&, const BatchNormAffine&) = default;
};

struct PolyActivation {
  PolyApprox poly;
  friend bool operator==(const PolyActivation& a, const PolyActivation& b) {
    return a.poly.coeffs == b.poly.coeffs && a.poly.pow2 == b.poly.pow2 &&
           a.poly.interval_a == b.poly.interval_a && a.poly.delta == b.poly.delta;
  }
};

using Layer = std::variant<Conv2d, ScaledAvgPool, Dense, BatchNormAffine, PolyActivation>;

inline constexpr std::size_t kMaxActivations = 3;

struct NetworkSpec {
  Shape3 input;
  std::vector<Layer> layers;

  /// Output shape of every layer; throws ModelError on any inconsistency.
  std::vector<Shape3> shapes() const;
  Shape3 output_shape() const;
  std::size_t activation_count() const;
  /// Table-style names: Conv-1, Pool-1, Act-1, FC-1, BN-1 ...
  std::vector<std::string> layer_names() const;
  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

std::size_t conv_output(std::size_t in, std::size_t k, std::size_t stride,
                        std::size_t padding);

}  // namespace fcn
