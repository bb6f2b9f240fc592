#include <algorithm>
#include <limits>

#include "fcn/client.hpp"
#include "fcn/decryptor.hpp"

namespace fcn {

std::vector<double> decrypt_output(const FvContextPtr& ctx, const SecretKey& sk,
                                   const FixedPointConfig& cfg, const CipherTensor& ct,
                                   bool diagnostic) {
  std::vector<double> out;
  out.reserve(ct.values.size());
  std::vector<Plaintext> lanes;
  for (const auto& element : ct.values) {
    lanes.clear();
    for (const auto& c : element) lanes.push_back(decrypt(ctx, sk, c, diagnostic));
    out.push_back(decode_fixed(lanes, ct.scale_exponent, cfg));
  }
  return out;
}

double min_noise_budget(const FvContextPtr& ctx, const SecretKey& sk, const CipherTensor& ct) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& element : ct.values) {
    for (const auto& c : element) m = std::min(m, noise_budget(ctx, sk, c));
  }
  return m;
}

}  // namespace fcn
