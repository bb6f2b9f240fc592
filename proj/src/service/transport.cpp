#include <cerrno>
#include <cstring>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include "fcn/protocol.hpp"

namespace fcn {

namespace {

[[noreturn]] void sys_fail(const std::string& what) {
  throw ProtocolError(what + ": " + std::strerror(errno));
}

// "host:port", "[v6]:port" or ":port".
std::pair<std::string, std::string> split_address(const std::string& address) {
  std::string host;
  std::string port;
  if (!address.empty() && address.front() == '[') {
    const auto close = address.find(']');
    if (close == std::string::npos || close + 1 >= address.size() || address[close + 1] != ':') {
      throw ProtocolError("bad address '" + address + "'");
    }
    host = address.substr(1, close - 1);
    port = address.substr(close + 2);
  } else {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos) throw ProtocolError("address '" + address + "' needs a port");
    host = address.substr(0, colon);
    port = address.substr(colon + 1);
  }
  if (port.empty()) throw ProtocolError("address '" + address + "' needs a port");
  return {host, port};
}

struct AddrInfo {
  addrinfo* head = nullptr;
  AddrInfo(const std::string& address, bool passive) {
    const auto [host, port] = split_address(address);
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    if (passive) hints.ai_flags = AI_PASSIVE;
    const int rc = getaddrinfo(host.empty() ? nullptr : host.c_str(), port.c_str(), &hints, &head);
    if (rc != 0) throw ProtocolError("cannot resolve '" + address + "': " + gai_strerror(rc));
  }
  ~AddrInfo() { freeaddrinfo(head); }
  AddrInfo(const AddrInfo&) = delete;
  AddrInfo& operator=(const AddrInfo&) = delete;
};

}  // namespace

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = o.fd_;
    o.fd_ = -1;
  }
  return *this;
}

Socket::~Socket() {
  if (fd_ >= 0) ::close(fd_);
}

void Socket::send_all(std::span<const std::uint8_t> bytes) {
  while (!bytes.empty()) {
    const auto k = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR) continue;
      sys_fail("send");
    }
    bytes = bytes.subspan(static_cast<std::size_t>(k));
  }
}

void Socket::recv_exact(std::span<std::uint8_t> out) {
  std::size_t got = 0;
  while (got < out.size()) {
    const auto k = ::recv(fd_, out.data() + got, out.size() - got, 0);
    if (k < 0) {
      if (errno == EINTR) continue;
      sys_fail("recv");
    }
    if (k == 0) {
      throw ProtocolError("connection closed after " + std::to_string(got) + " of " +
                          std::to_string(out.size()) + " expected bytes");
    }
    got += static_cast<std::size_t>(k);
  }
}

void Socket::shutdown_write() { ::shutdown(fd_, SHUT_WR); }

Socket connect_to(const std::string& address) {
  AddrInfo ai(address, false);
  int last_errno = 0;
  for (auto* p = ai.head; p; p = p->ai_next) {
    Socket s(::socket(p->ai_family, p->ai_socktype, p->ai_protocol));
    if (s.fd() < 0) {
      last_errno = errno;
      continue;
    }
    if (::connect(s.fd(), p->ai_addr, p->ai_addrlen) == 0) return s;
    last_errno = errno;
  }
  errno = last_errno;
  sys_fail("cannot connect to " + address);
}

Listener::Listener(const std::string& address) {
  AddrInfo ai(address, true);
  int last_errno = 0;
  for (auto* p = ai.head; p; p = p->ai_next) {
    Socket s(::socket(p->ai_family, p->ai_socktype, p->ai_protocol));
    if (s.fd() < 0) {
      last_errno = errno;
      continue;
    }
    const int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(s.fd(), p->ai_addr, p->ai_addrlen) != 0 || ::listen(s.fd(), 16) != 0) {
      last_errno = errno;
      continue;
    }
    sockaddr_storage bound{};
    socklen_t len = sizeof bound;
    ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port
                                              : reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
    sock_ = std::move(s);
    return;
  }
  errno = last_errno;
  sys_fail("cannot listen on " + address);
}

Socket Listener::accept() {
  while (true) {
    const int fd = ::accept(sock_.fd(), nullptr, nullptr);
    if (fd >= 0) return Socket(fd);
    if (errno != EINTR) sys_fail("accept");
  }
}

void write_frame(Socket& s, MsgType type, std::span<const std::uint8_t> payload) {
  const auto h = frame_header(type, payload.size());
  s.send_all(h);
  s.send_all(payload);
}

Frame read_frame(Socket& s, std::uint64_t cap) {
  std::array<std::uint8_t, kFrameHeaderBytes> h{};
  s.recv_exact(h);
  const auto fh = parse_frame_header(h, cap);
  Frame f{fh.type, std::vector<std::uint8_t>(fh.length)};
  s.recv_exact(f.payload);
  return f;
}

}  // namespace fcn
