#pragma once

// Network evaluation: the exact plaintext reference, encrypted evaluation
// over one ciphertext per scalar, the HOP counter and its static projection,
// and a conservative plaintext-capacity check.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fcn/encode.hpp"
#include "fcn/fv.hpp"
#include "fcn/network.hpp"

namespace fcn {

class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HopCounts {
  std::uint64_t pt_ct_add = 0;
  std::uint64_t ct_ct_add = 0;
  std::uint64_t pt_ct_mul = 0;
  std::uint64_t ct_ct_mul = 0;
  std::uint64_t fast_path_hits = 0;  // pt_ct_mul served by the monomial kernel
  double wall_ms = 0;

  std::uint64_t total() const { return pt_ct_add + ct_ct_add + pt_ct_mul + ct_ct_mul; }
  /// Equal in every counted quantity (wall time ignored).
  bool same_counts(const HopCounts& o) const;
  HopCounts& operator+=(const HopCounts& o);
};

struct LayerHops {
  std::string layer;
  HopCounts counts;
};

struct HopCounter {
  std::vector<LayerHops> layers;

  HopCounts totals() const;
  bool same_counts(const HopCounter& o) const;
  /// layer,pt_ct_add,ct_ct_add,pt_ct_mul,ct_ct_mul,wall_ms,fast_path_hits
  /// with a final "total" row.
  std::string csv() const;
};

/// One ciphertext per scalar, one per plaintext lane; all share a scale.
struct CipherTensor {
  Shape3 shape;
  std::int64_t scale_exponent = 0;
  std::vector<std::vector<Ciphertext>> values;  // [element][lane]
};

/// Exact real-arithmetic forward pass.
std::vector<double> eval_plain(const NetworkSpec& net, std::span<const double> input);

/// Absorbs every BatchNormAffine into the preceding Conv2d/Dense, or failing
/// that into a following Dense (or unpadded Conv2d).
NetworkSpec fold_batchnorm(const NetworkSpec& net);

/// Static HOP prediction; needs no keys and no ciphertexts.
HopCounter project_hops(const NetworkSpec& net, const FixedPointConfig& cfg = {});

/// Runs the encrypted evaluator's exact operation sequence on symbolic
/// values (no cryptography) and returns what its counters record.
HopCounter trace_hops(const NetworkSpec& net, const FixedPointConfig& cfg = {});

struct CapacityReport {
  bool ok = true;
  std::string reason;
  std::int64_t output_scale = 0;
  double log2_coeff_bound = 0;  // worst plaintext coefficient, any intermediate
  double log2_capacity = 0;     // log2 of half the lane-modulus product
  std::size_t max_degree = 0;   // highest plaintext degree reached
  double output_bound = 0;      // bound on |output| given |input| <= input_bound
};

/// Worst-case plaintext growth for inputs bounded by input_bound. Fails when
/// a coefficient could wrap modulo the lanes or a degree could reach n.
CapacityReport analyze_capacity(const NetworkSpec& net, const FixedPointConfig& cfg,
                                std::size_t n, double input_bound = 1.0);
/// Throws CapacityError when analyze_capacity fails.
CapacityReport capacity_check(const NetworkSpec& net, const FixedPointConfig& cfg,
                              std::size_t n, double input_bound = 1.0);

CipherTensor encrypt_input(const FvContextPtr& ctx, const PublicKey& pk,
                           const FixedPointConfig& cfg, Shape3 shape,
                           std::span<const double> input, Sampler& rng);

struct EncryptedResult {
  CipherTensor output;
  HopCounter hops;
};

/// BatchNormAffine layers must be folded first. Zero weights are skipped.
EncryptedResult eval_encrypted(const NetworkSpec& net, const CipherTensor& input,
                               const FvContextPtr& ctx, const EvalKeys& ek,
                               const FixedPointConfig& cfg, double input_bound = 1.0);

struct MnistConfigs {
  NetworkSpec cryptonets;  // dense weights, x^2 activations
  NetworkSpec faster;      // pruned + power-of-two weights, Swish p*
};

inline constexpr double kMnistSurviving[4] = {0.1440, 0.0701, 0.0568, 0.1480};

/// Two MNIST-shaped networks with random weights (BN layers already folded).
/// maps is the first convolution's kernel count.
MnistConfigs build_mnist_configs(std::size_t maps = 5, std::uint64_t seed = 1);

/// The Swish power-of-two activation 2^-3 x^2 + 2^-1 x + 2^-4.
PolyApprox swish_pow2_activation();

}  // namespace fcn
