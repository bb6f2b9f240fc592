#pragma once

// Magnitude pruning and power-of-two (INQ-style) weight quantization, applied
// to already-trained weights.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fcn/network.hpp"

namespace fcn {

/// Keeps the ceil(target * N) largest-magnitude entries (target is the
/// surviving fraction). Ties keep the lower index.
WeightTensor prune_mask(const WeightTensor& w, double target);

enum class N2Rule {
  Inq,                // n2 = n1 + 1 - 2^(k-1) / 2
  HalfPowerExponent,  // n2 = n1 + 1 - 2^((k-1)/2); integral only for odd k
};

struct QuantSpec {
  int k = 5;
  int n1 = 0;
  int n2 = 0;
  /// Ascending: -2^n1 ... -2^n2, 0, 2^n2 ... 2^n1.
  std::vector<double> codebook() const;
};

QuantSpec quant_bounds(const WeightTensor& w, int k = 5, N2Rule rule = N2Rule::Inq);

/// Nearest codebook element; exact midpoints go to the larger magnitude and
/// anything under 0.75 * 2^n2 goes to zero. Magnitudes beyond 2^n1 clip.
double snap_pow2(double v, const QuantSpec& spec);

/// Snaps the `fraction` largest-magnitude surviving weights (ceil of the
/// count). Codebook members are fixed points, so schedules can be replayed.
WeightTensor quantize_to_pow2(const WeightTensor& w, const QuantSpec& spec,
                              double fraction);

/// True when v is 0 or +-2^e with e + precision_bits >= 0, i.e. its
/// fixed-point encoding is a single monomial.
bool is_monomial_weight(double v, int precision_bits);

struct LayerSparsity {
  std::string layer;
  std::size_t total = 0;
  std::size_t surviving = 0;
  double fraction = 0;
  std::map<int, std::size_t> exponent_counts;  // by e for +-2^e weights
  bool monomial_encodable = true;
};

std::vector<LayerSparsity> sparsity_report(const NetworkSpec& net, int precision_bits = 15);
std::string sparsity_csv(const std::vector<LayerSparsity>& report);

}  // namespace fcn
