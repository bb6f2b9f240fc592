#pragma once

// Secret-key operations. Kept in its own library so that the server binary
// can be linked without any way to decrypt what it receives.

#include <cstdint>
#include <iosfwd>

#include "fcn/fv.hpp"

namespace fcn {

/// m = [round(t/q * [c0 + c1 s]_q)]_t. With diagnostic set, throws
/// NoiseBudgetExhausted instead of returning a plaintext that may be wrong.
Plaintext decrypt(const FvContextPtr& ctx, const SecretKey& sk,
                  const Ciphertext& ct, bool diagnostic = false);

/// Remaining headroom in bits: log2(q / (2 * ||t*[c0 + c1 s]_q - q*m||)),
/// i.e. log2(Delta / (2*||v||)) for the noise v. Decryption is correct
/// while this is positive. Readings under one bit are reported as 0, since
/// noise that has wrapped past q/2 is indistinguishable from that range.
double noise_budget(const FvContextPtr& ctx, const SecretKey& sk,
                    const Ciphertext& ct);

void write_secret_key(std::ostream& out, const FvContextPtr& ctx,
                      const SecretKey& sk);
SecretKey read_secret_key(std::istream& in, const FvContextPtr& ctx);

}  // namespace fcn
