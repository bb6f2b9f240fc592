#include "fcn/protocol.hpp"

#include <algorithm>
#include <cstring>

#include "../io/bytes.hpp"
#include "fcn/serialize.hpp"

namespace fcn {

namespace {

constexpr char kMagic[4] = {'F', 'C', 'N', 'P'};
using Reader = io::ByteReader<ProtocolError>;

}  // namespace

std::array<std::uint8_t, kFrameHeaderBytes> frame_header(MsgType type, std::uint64_t length) {
  std::array<std::uint8_t, kFrameHeaderBytes> h{};
  std::memcpy(h.data(), kMagic, 4);
  h[4] = kProtocolVersion;
  h[5] = static_cast<std::uint8_t>(type);
  for (int i = 0; i < 8; ++i) h[6 + i] = static_cast<std::uint8_t>(length >> (8 * i));
  return h;
}

std::vector<std::uint8_t> encode_frame(MsgType type, std::span<const std::uint8_t> payload) {
  const auto h = frame_header(type, payload.size());
  std::vector<std::uint8_t> out(kFrameHeaderBytes + payload.size());
  std::copy(h.begin(), h.end(), out.begin());
  std::copy(payload.begin(), payload.end(), out.begin() + kFrameHeaderBytes);
  return out;
}

FrameHeader parse_frame_header(std::span<const std::uint8_t> header, std::uint64_t cap) {
  if (header.size() != kFrameHeaderBytes) throw ProtocolError("frame header must be 14 bytes");
  if (std::memcmp(header.data(), kMagic, 4) != 0) throw ProtocolError("bad frame magic");
  if (header[4] != kProtocolVersion) {
    throw ProtocolError("unsupported protocol version " + std::to_string(header[4]));
  }
  const auto t = header[5];
  if (t < 0x01 || t > 0x03) throw ProtocolError("unknown message type " + std::to_string(t));
  FrameHeader h;
  h.type = static_cast<MsgType>(t);
  for (int i = 0; i < 8; ++i) h.length |= static_cast<std::uint64_t>(header[6 + i]) << (8 * i);
  if (h.length > cap) {
    throw ProtocolError("payload of " + std::to_string(h.length) + " bytes exceeds the cap of " +
                        std::to_string(cap));
  }
  return h;
}

Frame decode_frame(std::span<const std::uint8_t> bytes, std::uint64_t cap) {
  if (bytes.size() < kFrameHeaderBytes) throw ProtocolError("truncated frame header");
  const auto h = parse_frame_header(bytes.first(kFrameHeaderBytes), cap);
  const auto body = bytes.subspan(kFrameHeaderBytes);
  if (body.size() != h.length) {
    throw ProtocolError("frame declares " + std::to_string(h.length) + " payload bytes but carries " +
                        std::to_string(body.size()));
  }
  return {h.type, {body.begin(), body.end()}};
}

std::vector<std::uint8_t> encode_batch(const Digest& digest, std::span<const Ciphertext> cts) {
  if (cts.size() > UINT32_MAX) throw ProtocolError("too many ciphertexts for one message");
  io::ByteWriter w;
  w.bytes(digest.data(), digest.size());
  w.put(static_cast<std::uint32_t>(cts.size()));
  for (const auto& ct : cts) {
    const auto b = ciphertext_bytes(ct);
    w.bytes(b.data(), b.size());
  }
  return std::move(w.data());
}

CiphertextBatch decode_batch(std::span<const std::uint8_t> payload, const FvContextPtr& ctx) {
  Reader r(payload.data(), payload.size());
  CiphertextBatch batch;
  std::memcpy(batch.digest.data(), r.take(kDigestBytes, "digest"), kDigestBytes);
  const auto count = r.get<std::uint32_t>("ciphertext count");
  const std::size_t each = ciphertext_words(*ctx) * 8;
  if (r.remaining() != static_cast<std::uint64_t>(count) * each) {
    throw ProtocolError("payload holds " + std::to_string(r.remaining()) + " ciphertext bytes, expected " +
                        std::to_string(static_cast<std::uint64_t>(count) * each));
  }
  batch.ciphertexts.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    try {
      batch.ciphertexts.push_back(ciphertext_from_bytes({r.take(each, "ciphertext"), each}, ctx));
    } catch (const FvError& e) {
      throw ProtocolError("ciphertext " + std::to_string(i) + ": " + e.what());
    }
  }
  return batch;
}

std::uint64_t batch_payload_bytes(const FvContext& ctx, std::uint64_t count) {
  return kDigestBytes + 4 + count * ciphertext_words(ctx) * 8;
}

std::uint64_t request_frame_bytes(const FvContext& ctx, std::uint64_t count) {
  return kFrameHeaderBytes + batch_payload_bytes(ctx, count);
}

std::vector<Ciphertext> flatten(const CipherTensor& t) {
  std::vector<Ciphertext> out;
  for (const auto& e : t.values) out.insert(out.end(), e.begin(), e.end());
  return out;
}

CipherTensor unflatten(std::vector<Ciphertext> cts, Shape3 shape, std::size_t lanes) {
  if (lanes == 0 || cts.size() != shape.size() * lanes) {
    throw ProtocolError("expected " + std::to_string(shape.size() * lanes) + " ciphertexts, got " +
                        std::to_string(cts.size()));
  }
  CipherTensor t;
  t.shape = shape;
  t.scale_exponent = cts.empty() ? 0 : cts[0].scale_exponent;
  t.values.resize(shape.size());
  for (std::size_t i = 0; i < cts.size(); ++i) {
    auto& ct = cts[i];
    if (ct.lane != i % lanes) throw ProtocolError("ciphertext lanes out of order");
    if (ct.scale_exponent != t.scale_exponent) throw ProtocolError("ciphertexts disagree on scale");
    t.values[i / lanes].push_back(std::move(ct));
  }
  return t;
}

}  // namespace fcn
