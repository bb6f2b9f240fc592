#pragma once

// Blind inference over the wire. The server side holds the model, the
// parameters and the public evaluation keys; nothing here can decrypt.

#include <cstdint>
#include <iosfwd>
#include <string>

#include "fcn/engine.hpp"
#include "fcn/protocol.hpp"

namespace fcn {

struct ServerState {
  FvContextPtr ctx;
  EvalKeys eval_keys;
  FixedPointConfig cfg;
  NetworkSpec net;  // batch-norm already folded
  std::uint64_t payload_cap = kDefaultPayloadCap;
  double input_bound = 1.0;
};

/// Builds the state, folding batch-norm layers and running the capacity
/// check once up front.
ServerState make_server_state(const FvContextPtr& ctx, EvalKeys ek, const FixedPointConfig& cfg,
                              const NetworkSpec& net, double input_bound = 1.0);

/// One request frame in, one response frame (InferResponse or Error) out.
Frame handle_request(const Frame& request, const ServerState& state);

/// Serves frames until the peer closes. A frame cut off mid-way ends the
/// connection without a reply; an oversize header gets an Error frame.
/// Returns the number of requests answered.
std::size_t serve_connection(Socket& s, const ServerState& state, std::ostream* log = nullptr);

/// Accepts and serves connections one after another; 0 means forever.
void run_server(Listener& listener, const ServerState& state, std::size_t max_connections,
                std::ostream* log = nullptr);

/// Client half: sends one request and returns the output ciphertexts,
/// regrouped per element. An Error frame becomes a ProtocolError carrying
/// the server's message.
CipherTensor request_inference(const std::string& address, const FvContextPtr& ctx,
                               const CipherTensor& input,
                               std::uint64_t cap = kDefaultPayloadCap);

}  // namespace fcn
