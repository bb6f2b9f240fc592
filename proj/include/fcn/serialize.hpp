#pragma once

// Bit-exact wire/file formats for ciphertexts and keys. Every object starts
// with eight little-endian u64 header words followed by limb-major u64
// coefficient arrays.

#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <vector>

#include "fcn/fv.hpp"

namespace fcn {

inline constexpr std::uint64_t kCiphertextMagic = 0x46434E5031000000ULL;
inline constexpr std::uint64_t kSecretKeyMagic = 0x46434E50534B0000ULL;
inline constexpr std::uint64_t kPublicKeyMagic = 0x46434E50504B0000ULL;
inline constexpr std::uint64_t kEvalKeyMagic = 0x46434E50454B0000ULL;
inline constexpr std::uint64_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderWords = 8;

/// 8 + 2 * limbs * n.
std::size_t ciphertext_words(const FvContext& ctx);

void write_ciphertext(std::ostream& out, const Ciphertext& ct);
Ciphertext read_ciphertext(std::istream& in, const FvContextPtr& ctx);
std::vector<std::uint8_t> ciphertext_bytes(const Ciphertext& ct);
Ciphertext ciphertext_from_bytes(std::span<const std::uint8_t> bytes,
                                 const FvContextPtr& ctx);

void write_public_key(std::ostream& out, const FvContextPtr& ctx,
                      const PublicKey& pk);
PublicKey read_public_key(std::istream& in, const FvContextPtr& ctx);
void write_eval_keys(std::ostream& out, const FvContextPtr& ctx,
                     const EvalKeys& ek);
EvalKeys read_eval_keys(std::istream& in, const FvContextPtr& ctx);

// Shared by all key kinds: header [magic, version, n, limbs, count, 0, 0, 0].
void write_key_polys(std::ostream& out, const FvContextPtr& ctx,
                     std::uint64_t magic,
                     std::initializer_list<const RingPoly*> polys);
void write_key_polys(std::ostream& out, const FvContextPtr& ctx,
                     std::uint64_t magic, std::span<const RingPoly* const> polys);
std::vector<RingPoly> read_key_polys(std::istream& in, const FvContextPtr& ctx,
                                     std::uint64_t magic);

}  // namespace fcn
