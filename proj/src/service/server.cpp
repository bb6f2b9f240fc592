#include "fcn/server.hpp"

#include <chrono>
#include <ostream>

namespace fcn {

namespace {

Frame error_frame(const std::string& msg) {
  return {MsgType::Error, std::vector<std::uint8_t>(msg.begin(), msg.end())};
}

std::string hex_prefix(const Digest& d) {
  static const char* k = "0123456789abcdef";
  std::string s;
  for (std::size_t i = 0; i < 6; ++i) {
    s += k[d[i] >> 4];
    s += k[d[i] & 15];
  }
  return s;
}

}  // namespace

ServerState make_server_state(const FvContextPtr& ctx, EvalKeys ek, const FixedPointConfig& cfg,
                              const NetworkSpec& net, double input_bound) {
  ServerState st{ctx, std::move(ek), cfg, fold_batchnorm(net), kDefaultPayloadCap, input_bound};
  capacity_check(st.net, cfg, ctx->degree(), input_bound);
  return st;
}

Frame handle_request(const Frame& request, const ServerState& state) {
  if (request.type != MsgType::InferRequest) return error_frame("expected an InferRequest frame");
  try {
    auto batch = decode_batch(request.payload, state.ctx);
    const auto expected = state.ctx->digest();
    if (batch.digest != expected) {
      return error_frame("parameter digest mismatch: request " + hex_prefix(batch.digest) +
                         "..., server " + hex_prefix(expected) + "...");
    }
    const auto input = unflatten(std::move(batch.ciphertexts), state.net.input, state.ctx->lane_count());
    const auto result = eval_encrypted(state.net, input, state.ctx, state.eval_keys, state.cfg,
                                       state.input_bound);
    const auto out = flatten(result.output);
    return {MsgType::InferResponse, encode_batch(expected, out)};
  } catch (const std::exception& e) {
    return error_frame(e.what());
  }
}

std::size_t serve_connection(Socket& s, const ServerState& state, std::ostream* log) {
  std::size_t answered = 0;
  while (true) {
    std::array<std::uint8_t, kFrameHeaderBytes> h{};
    // A clean close between frames ends the session quietly.
    try {
      s.recv_exact(std::span(h).first(1));
    } catch (const ProtocolError&) {
      return answered;
    }
    Frame request;
    try {
      s.recv_exact(std::span(h).subspan(1));
      const auto fh = parse_frame_header(h, state.payload_cap);
      request.type = fh.type;
      request.payload.resize(fh.length);
    } catch (const ProtocolError& e) {
      if (log) *log << "rejecting frame: " << e.what() << '\n';
      const auto reply = error_frame(e.what());
      try {
        write_frame(s, reply.type, reply.payload);
      } catch (const ProtocolError&) {
      }
      return answered;
    }
    try {
      s.recv_exact(request.payload);
    } catch (const ProtocolError& e) {
      if (log) *log << "aborting connection: " << e.what() << '\n';
      return answered;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto reply = handle_request(request, state);
    if (log) {
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      *log << (reply.type == MsgType::Error ? "error reply: " + std::string(reply.payload.begin(), reply.payload.end())
                                            : "answered request")
           << " (" << ms << " ms)\n";
    }
    try {
      write_frame(s, reply.type, reply.payload);
    } catch (const ProtocolError& e) {
      if (log) *log << "aborting connection: " << e.what() << '\n';
      return answered;
    }
    ++answered;
  }
}

void run_server(Listener& listener, const ServerState& state, std::size_t max_connections,
                std::ostream* log) {
  for (std::size_t i = 0; max_connections == 0 || i < max_connections; ++i) {
    auto s = listener.accept();
    serve_connection(s, state, log);
  }
}

CipherTensor request_inference(const std::string& address, const FvContextPtr& ctx,
                               const CipherTensor& input, std::uint64_t cap) {
  auto s = connect_to(address);
  const auto cts = flatten(input);
  write_frame(s, MsgType::InferRequest, encode_batch(ctx->digest(), cts));
  const auto reply = read_frame(s, cap);
  if (reply.type == MsgType::Error) {
    throw ProtocolError("server error: " + std::string(reply.payload.begin(), reply.payload.end()));
  }
  if (reply.type != MsgType::InferResponse) throw ProtocolError("unexpected reply frame type");
  auto batch = decode_batch(reply.payload, ctx);
  if (batch.digest != ctx->digest()) throw ProtocolError("response carries a different parameter digest");
  const std::size_t lanes = ctx->lane_count();
  if (batch.ciphertexts.size() % lanes != 0) throw ProtocolError("response is not a whole number of elements");
  const Shape3 shape{batch.ciphertexts.size() / lanes, 1, 1};
  return unflatten(std::move(batch.ciphertexts), shape, lanes);
}

}  // namespace fcn
