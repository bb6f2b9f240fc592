#include "fcn/serialize.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

namespace fcn {

namespace {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

void put_words(std::ostream& out, std::span<const std::uint64_t> w) {
  out.write(reinterpret_cast<const char*>(w.data()),
            static_cast<std::streamsize>(w.size_bytes()));
  if (!out) throw FvError("write failed");
}

void get_words(std::istream& in, std::span<std::uint64_t> w) {
  in.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(w.size_bytes()));
  if (in.gcount() != static_cast<std::streamsize>(w.size_bytes())) {
    throw FvError("truncated input");
  }
}

RingPoly read_poly(std::istream& in, const FvContextPtr& ctx) {
  std::vector<std::uint64_t> data(ctx->degree() * ctx->ring()->limb_count());
  get_words(in, data);
  try {
    return RingPoly::from_limbs(ctx->ring(), std::move(data));
  } catch (const RingError& e) {
    throw FvError(std::string("malformed polynomial: ") + e.what());
  }
}

void check_shape(const FvContextPtr& ctx, std::uint64_t n, std::uint64_t limbs) {
  if (n != ctx->degree() || limbs != ctx->ring()->limb_count()) {
    throw FvError("serialized object has n=" + std::to_string(n) + ", limbs=" +
                  std::to_string(limbs) + "; parameters expect n=" +
                  std::to_string(ctx->degree()) + ", limbs=" +
                  std::to_string(ctx->ring()->limb_count()));
  }
}

}  // namespace

std::size_t ciphertext_words(const FvContext& ctx) {
  return kHeaderWords + 2 * ctx.ring()->limb_count() * ctx.degree();
}

void write_ciphertext(std::ostream& out, const Ciphertext& ct) {
  if (ct.c0.domain() != Domain::Coefficient || ct.c1.domain() != Domain::Coefficient) {
    throw FvError("ciphertexts are serialized in the coefficient domain");
  }
  const std::uint64_t header[kHeaderWords] = {
      kCiphertextMagic,
      kFormatVersion,
      ct.c0.degree(),
      ct.c0.limb_count(),
      ct.lane,
      static_cast<std::uint64_t>(ct.scale_exponent),
      ct.mul_depth,
      0};
  put_words(out, header);
  put_words(out, ct.c0.data());
  put_words(out, ct.c1.data());
}

Ciphertext read_ciphertext(std::istream& in, const FvContextPtr& ctx) {
  std::uint64_t h[kHeaderWords];
  get_words(in, h);
  if (h[0] != kCiphertextMagic) throw FvError("not a ciphertext (bad magic)");
  if (h[1] != kFormatVersion) throw FvError("unsupported ciphertext version");
  check_shape(ctx, h[2], h[3]);
  if (h[4] >= ctx->lane_count()) throw FvError("ciphertext lane out of range");
  if (h[6] > UINT32_MAX) throw FvError("ciphertext depth out of range");
  if (h[7] != 0) throw FvError("reserved header word must be zero");
  Ciphertext ct;
  ct.lane = h[4];
  ct.scale_exponent = static_cast<std::int64_t>(h[5]);
  ct.mul_depth = static_cast<std::uint32_t>(h[6]);
  ct.c0 = read_poly(in, ctx);
  ct.c1 = read_poly(in, ctx);
  return ct;
}

std::vector<std::uint8_t> ciphertext_bytes(const Ciphertext& ct) {
  std::ostringstream os(std::ios::binary);
  write_ciphertext(os, ct);
  const std::string s = std::move(os).str();
  return {s.begin(), s.end()};
}

Ciphertext ciphertext_from_bytes(std::span<const std::uint8_t> bytes,
                                 const FvContextPtr& ctx) {
  std::istringstream is(std::string(bytes.begin(), bytes.end()), std::ios::binary);
  Ciphertext ct = read_ciphertext(is, ctx);
  if (is.peek() != std::char_traits<char>::eof()) {
    throw FvError("trailing bytes after ciphertext");
  }
  return ct;
}

void write_key_polys(std::ostream& out, const FvContextPtr& ctx,
                     std::uint64_t magic,
                     std::initializer_list<const RingPoly*> polys) {
  write_key_polys(out, ctx, magic, std::span<const RingPoly* const>(polys.begin(), polys.size()));
}

void write_key_polys(std::ostream& out, const FvContextPtr& ctx,
                     std::uint64_t magic, std::span<const RingPoly* const> polys) {
  const std::uint64_t header[kHeaderWords] = {
      magic, kFormatVersion, ctx->degree(), ctx->ring()->limb_count(),
      polys.size(), 0, 0, 0};
  put_words(out, header);
  for (const RingPoly* p : polys) {
    if (!p->context()->same_as(*ctx->ring()) || p->domain() != Domain::Coefficient) {
      throw FvError("key polynomial does not match parameters");
    }
    put_words(out, p->data());
  }
}

std::vector<RingPoly> read_key_polys(std::istream& in, const FvContextPtr& ctx,
                                     std::uint64_t magic) {
  std::uint64_t h[kHeaderWords];
  get_words(in, h);
  if (h[0] != magic) throw FvError("unexpected key file type (bad magic)");
  if (h[1] != kFormatVersion) throw FvError("unsupported key file version");
  check_shape(ctx, h[2], h[3]);
  if (h[4] > 1024) throw FvError("implausible key polynomial count");
  std::vector<RingPoly> out;
  for (std::uint64_t i = 0; i < h[4]; ++i) out.push_back(read_poly(in, ctx));
  return out;
}

void write_public_key(std::ostream& out, const FvContextPtr& ctx,
                      const PublicKey& pk) {
  write_key_polys(out, ctx, kPublicKeyMagic, {&pk.p0, &pk.p1});
}

PublicKey read_public_key(std::istream& in, const FvContextPtr& ctx) {
  auto p = read_key_polys(in, ctx, kPublicKeyMagic);
  if (p.size() != 2) throw FvError("public key file must hold two polynomials");
  return PublicKey{std::move(p[0]), std::move(p[1])};
}

void write_eval_keys(std::ostream& out, const FvContextPtr& ctx,
                     const EvalKeys& ek) {
  std::vector<const RingPoly*> polys;
  for (std::size_t i = 0; i < ek.size(); ++i) {
    polys.push_back(&ek.a(i));
    polys.push_back(&ek.g(i));
  }
  write_key_polys(out, ctx, kEvalKeyMagic, polys);
}

EvalKeys read_eval_keys(std::istream& in, const FvContextPtr& ctx) {
  auto p = read_key_polys(in, ctx, kEvalKeyMagic);
  if (p.size() != 2 * (ctx->ell() + 1)) {
    throw FvError("evaluation key file has the wrong number of digits");
  }
  std::vector<RingPoly> a, g;
  for (std::size_t i = 0; i < p.size(); i += 2) {
    a.push_back(std::move(p[i]));
    g.push_back(std::move(p[i + 1]));
  }
  return EvalKeys(std::move(a), std::move(g));
}

}  // namespace fcn
