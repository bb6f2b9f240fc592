#pragma once

// Client/server wire protocol and its TCP transport.
//
// Frame: "FCNP" | u8 version | u8 type | u64 payload length (LE) | payload
// InferRequest / InferResponse payload: 32-byte parameter digest | u32 count |
// count serialized ciphertexts (element-major, lanes innermost).
// Error payload: UTF-8 message.

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fcn/engine.hpp"
#include "fcn/fv.hpp"

namespace fcn {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MsgType : std::uint8_t { InferRequest = 0x01, InferResponse = 0x02, Error = 0x03 };

inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::size_t kFrameHeaderBytes = 14;
inline constexpr std::uint64_t kDefaultPayloadCap = std::uint64_t{2} << 30;  // 2 GiB
inline constexpr std::size_t kDigestBytes = 32;

using Digest = std::array<std::uint8_t, kDigestBytes>;

struct Frame {
  MsgType type{};
  std::vector<std::uint8_t> payload;
};

std::array<std::uint8_t, kFrameHeaderBytes> frame_header(MsgType type, std::uint64_t length);
std::vector<std::uint8_t> encode_frame(MsgType type, std::span<const std::uint8_t> payload);

struct FrameHeader {
  MsgType type{};
  std::uint64_t length = 0;
};
/// Checks magic, version, type and the payload cap.
FrameHeader parse_frame_header(std::span<const std::uint8_t> header, std::uint64_t cap);
/// A complete frame held in memory; trailing bytes are an error.
Frame decode_frame(std::span<const std::uint8_t> bytes, std::uint64_t cap = kDefaultPayloadCap);

struct CiphertextBatch {
  Digest digest{};
  std::vector<Ciphertext> ciphertexts;
};

std::vector<std::uint8_t> encode_batch(const Digest& digest, std::span<const Ciphertext> cts);
/// Every ciphertext must be well formed for ctx; the digest is returned,
/// not checked.
CiphertextBatch decode_batch(std::span<const std::uint8_t> payload, const FvContextPtr& ctx);

/// Size arithmetic for a request carrying `count` ciphertexts.
std::uint64_t batch_payload_bytes(const FvContext& ctx, std::uint64_t count);
std::uint64_t request_frame_bytes(const FvContext& ctx, std::uint64_t count);

std::vector<Ciphertext> flatten(const CipherTensor& t);
/// Regroups a flat list into elements of `lanes` ciphertexts; the scale
/// comes from the ciphertexts and must be shared.
CipherTensor unflatten(std::vector<Ciphertext> cts, Shape3 shape, std::size_t lanes);

// ---- transport -------------------------------------------------------------

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket();

  int fd() const { return fd_; }
  void send_all(std::span<const std::uint8_t> bytes);
  /// Throws ProtocolError if the peer closes before `out` is filled.
  void recv_exact(std::span<std::uint8_t> out);
  void shutdown_write();

 private:
  int fd_ = -1;
};

/// "host:port"; host may be a name or a numeric IPv4/IPv6 address.
Socket connect_to(const std::string& address);

class Listener {
 public:
  /// Port 0 picks a free port; see port().
  explicit Listener(const std::string& address);
  std::uint16_t port() const { return port_; }
  Socket accept();

 private:
  Socket sock_;
  std::uint16_t port_ = 0;
};

void write_frame(Socket& s, MsgType type, std::span<const std::uint8_t> payload);
/// Reads the header first and refuses oversize payloads before allocating.
Frame read_frame(Socket& s, std::uint64_t cap = kDefaultPayloadCap);

}  // namespace fcn
