#pragma once

// Client-side output handling. Needs the secret key, so it lives outside
// the engine library.

#include <vector>

#include "fcn/engine.hpp"

namespace fcn {

/// Decrypts every element and decodes it at the tensor's scale. With
/// diagnostic set, exhausted noise raises NoiseBudgetExhausted.
std::vector<double> decrypt_output(const FvContextPtr& ctx, const SecretKey& sk,
                                   const FixedPointConfig& cfg, const CipherTensor& ct,
                                   bool diagnostic = true);

/// Smallest noise budget over all elements and lanes.
double min_noise_budget(const FvContextPtr& ctx, const SecretKey& sk,
                        const CipherTensor& ct);

}  // namespace fcn
