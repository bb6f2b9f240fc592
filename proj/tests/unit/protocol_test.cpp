#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "fcn/client.hpp"
#include "fcn/protocol.hpp"
#include "fcn/serialize.hpp"
#include "fcn/server.hpp"
#include "../support/tiny_nets.hpp"

namespace fcn {
namespace {

FvContextPtr small_ctx() {
  EncryptionParams p;
  p.n = 1024;
  return FvContext::make(p);
}

// ---- framing ---------------------------------------------------------------

TEST(Frame, HeaderLayout) {
  const std::vector<std::uint8_t> payload = {7, 8, 9};
  const auto f = encode_frame(MsgType::InferResponse, payload);
  const std::vector<std::uint8_t> want = {'F', 'C', 'N', 'P', 1, 2, 3, 0, 0, 0, 0, 0, 0, 0, 7, 8, 9};
  EXPECT_EQ(f, want);
  const auto back = decode_frame(f);
  EXPECT_EQ(back.type, MsgType::InferResponse);
  EXPECT_EQ(back.payload, payload);
}

TEST(Frame, LengthMustBeExact) {
  auto f = encode_frame(MsgType::Error, std::vector<std::uint8_t>{1, 2, 3, 4});
  EXPECT_THROW(decode_frame(std::span(f).first(f.size() - 1)), ProtocolError);
  f.push_back(0);
  EXPECT_THROW(decode_frame(f), ProtocolError);
  EXPECT_THROW(decode_frame(std::span(f).first(10)), ProtocolError);
}

TEST(Frame, RejectsBadHeaders) {
  const auto good = encode_frame(MsgType::InferRequest, {});
  for (auto [index, value] : {std::pair{0, 'X'}, {4, 2}, {5, 0}, {5, 4}}) {
    auto f = good;
    f[index] = static_cast<std::uint8_t>(value);
    EXPECT_THROW(decode_frame(f), ProtocolError) << index;
  }
}

TEST(Frame, PayloadCap) {
  const auto h = frame_header(MsgType::InferRequest, 1001);
  EXPECT_NO_THROW(parse_frame_header(h, 1001));
  EXPECT_THROW(parse_frame_header(h, 1000), ProtocolError);
  const auto huge = frame_header(MsgType::InferRequest, ~std::uint64_t{0});
  EXPECT_THROW(parse_frame_header(huge, kDefaultPayloadCap), ProtocolError);
}

// ---- ciphertext batches ----------------------------------------------------

TEST(Batch, ByteLosslessRoundTrip) {
  const auto ctx = small_ctx();
  const auto keys = keygen(ctx, 3);
  Sampler rng(4);
  std::vector<Ciphertext> cts;
  for (std::int64_t i = 0; i < 3; ++i) {
    const std::int64_t m[] = {i, -i, 5};
    cts.push_back(encrypt(ctx, keys.pub, make_plaintext(ctx, 0, m), i, rng));
  }
  const auto payload = encode_batch(ctx->digest(), cts);
  EXPECT_EQ(payload.size(), batch_payload_bytes(*ctx, 3));
  const auto batch = decode_batch(payload, ctx);
  EXPECT_EQ(batch.digest, ctx->digest());
  EXPECT_EQ(batch.ciphertexts, cts);
  EXPECT_EQ(encode_batch(batch.digest, batch.ciphertexts), payload);

  EXPECT_THROW(decode_batch(std::span(payload).first(payload.size() - 8), ctx), ProtocolError);
  auto wrong_count = payload;
  wrong_count[32] = 4;
  EXPECT_THROW(decode_batch(wrong_count, ctx), ProtocolError);
}

TEST(Batch, FullImageRequestSize) {
  const auto ctx = FvContext::make(EncryptionParams{});
  EXPECT_EQ(ciphertext_words(*ctx), 65544u);
  EXPECT_EQ(batch_payload_bytes(*ctx, 784), 32u + 4u + 784u * 65544u * 8u);
  EXPECT_EQ(request_frame_bytes(*ctx, 784), 14u + 32u + 4u + 784u * 65544u * 8u);
}

TEST(Batch, FlattenOrdersLanesInnermost) {
  const auto ctx = FvContext::make([] {
    EncryptionParams p;
    p.n = 1024;
    p.t_lanes = {kMnistPlainModulus1, kMnistPlainModulus2};
    return p;
  }());
  const FixedPointConfig cfg{15, ctx->params().t_lanes};
  const auto keys = keygen(ctx, 1);
  Sampler rng(2);
  const std::vector<double> x = {0.5, -0.25, 1, 0};
  const auto t = encrypt_input(ctx, keys.pub, cfg, {1, 2, 2}, x, rng);
  const auto flat = flatten(t);
  ASSERT_EQ(flat.size(), 8u);
  for (std::size_t i = 0; i < flat.size(); ++i) EXPECT_EQ(flat[i].lane, i % 2);
  const auto back = unflatten(flat, {1, 2, 2}, 2);
  EXPECT_EQ(back.values, t.values);
  EXPECT_EQ(back.scale_exponent, t.scale_exponent);
  EXPECT_THROW(unflatten(flat, {1, 2, 1}, 2), ProtocolError);
  auto swapped = flat;
  std::swap(swapped[0], swapped[1]);
  EXPECT_THROW(unflatten(swapped, {1, 2, 2}, 2), ProtocolError);
}

// ---- request handling and loopback -----------------------------------------

struct Fixture {
  FvContextPtr ctx = small_ctx();
  KeySet keys = keygen(ctx, 11);
  FixedPointConfig cfg{15, ctx->params().t_lanes};
  NetworkSpec net;
  ServerState state;
  std::vector<double> input;

  Fixture() {
    std::mt19937_64 rng(5);
    net = testing::random_tiny_net(rng, 1, true);
    state = make_server_state(ctx, keys.eval, cfg, net);
    input = testing::uniforms(16, -1, 1, rng);
  }

  CipherTensor encrypted_input(std::uint64_t seed = 8) const {
    Sampler s(seed);
    return encrypt_input(ctx, keys.pub, cfg, net.input, input, s);
  }
  Frame request(const Digest& digest) const {
    return {MsgType::InferRequest, encode_batch(digest, flatten(encrypted_input()))};
  }
};

TEST(Server, AnswersWithTheLocalResult) {
  const Fixture f;
  const auto reply = handle_request(f.request(f.ctx->digest()), f.state);
  ASSERT_EQ(reply.type, MsgType::InferResponse);
  auto batch = decode_batch(reply.payload, f.ctx);
  const auto local = eval_encrypted(f.state.net, f.encrypted_input(), f.ctx, f.keys.eval, f.cfg);
  EXPECT_EQ(batch.ciphertexts, flatten(local.output));
}

TEST(Server, TamperedDigestGetsErrorFrame) {
  const Fixture f;
  auto digest = f.ctx->digest();
  digest[0] ^= 0x80;
  const auto reply = handle_request(f.request(digest), f.state);
  EXPECT_EQ(reply.type, MsgType::Error);
  EXPECT_EQ(static_cast<int>(reply.type), 0x03);
  const std::string msg(reply.payload.begin(), reply.payload.end());
  EXPECT_NE(msg.find("digest mismatch"), std::string::npos) << msg;
}

TEST(Server, MalformedRequestsGetErrorFrames) {
  const Fixture f;
  EXPECT_EQ(handle_request({MsgType::InferResponse, {}}, f.state).type, MsgType::Error);
  EXPECT_EQ(handle_request({MsgType::InferRequest, {1, 2, 3}}, f.state).type, MsgType::Error);
  // Wrong element count for the model's input.
  auto cts = flatten(f.encrypted_input());
  cts.pop_back();
  EXPECT_EQ(handle_request({MsgType::InferRequest, encode_batch(f.ctx->digest(), cts)}, f.state).type,
            MsgType::Error);
}

TEST(Loopback, RoundTripMatchesLocalInference) {
  const Fixture f;
  Listener listener("127.0.0.1:0");
  std::thread server([&] { run_server(listener, f.state, 1); });
  const auto remote = request_inference("127.0.0.1:" + std::to_string(listener.port()), f.ctx,
                                        f.encrypted_input());
  server.join();

  const auto local = eval_encrypted(f.state.net, f.encrypted_input(), f.ctx, f.keys.eval, f.cfg);
  EXPECT_EQ(flatten(remote), flatten(local.output));
  const auto got = decrypt_output(f.ctx, f.keys.secret, f.cfg, remote);
  const auto want = decrypt_output(f.ctx, f.keys.secret, f.cfg, local.output);
  EXPECT_EQ(got, want);
  const auto plain = eval_plain(f.net, f.input);
  for (std::size_t i = 0; i < plain.size(); ++i) EXPECT_NEAR(got[i], plain[i], 1e-3);
}

TEST(Loopback, ServerErrorSurfacesAtClient) {
  Fixture f;
  Listener listener("127.0.0.1:0");
  std::thread server([&] { run_server(listener, f.state, 1); });
  // A client with different parameters: same shape, other digest.
  EncryptionParams other = f.ctx->params();
  other.noise_stddev = 3.3;
  const auto ctx2 = FvContext::make(other);
  EXPECT_THROW(
      {
        try {
          request_inference("127.0.0.1:" + std::to_string(listener.port()), ctx2, f.encrypted_input());
        } catch (const ProtocolError& e) {
          EXPECT_NE(std::string(e.what()).find("digest mismatch"), std::string::npos) << e.what();
          throw;
        }
      },
      ProtocolError);
  server.join();
}

TEST(Loopback, OversizePayloadRejectedBeforeReading) {
  Fixture f;
  f.state.payload_cap = 1000;
  Listener listener("127.0.0.1:0");
  std::size_t answered = 99;
  std::thread server([&] {
    auto s = listener.accept();
    answered = serve_connection(s, f.state);
  });
  auto s = connect_to("127.0.0.1:" + std::to_string(listener.port()));
  const auto h = frame_header(MsgType::InferRequest, 1u << 30);
  s.send_all(h);
  const auto reply = read_frame(s);
  server.join();
  EXPECT_EQ(reply.type, MsgType::Error);
  EXPECT_NE(std::string(reply.payload.begin(), reply.payload.end()).find("exceeds the cap"), std::string::npos);
  EXPECT_EQ(answered, 0u);
}

TEST(Loopback, DropMidFrameAbortsCleanly) {
  const Fixture f;
  Listener listener("127.0.0.1:0");
  std::size_t answered = 99;
  std::thread server([&] {
    auto s = listener.accept();
    answered = serve_connection(s, f.state);
  });
  {
    auto s = connect_to("127.0.0.1:" + std::to_string(listener.port()));
    const auto frame = encode_frame(MsgType::InferRequest, f.request(f.ctx->digest()).payload);
    s.send_all(std::span(frame).first(frame.size() / 2));
  }  // closed mid-payload
  server.join();
  EXPECT_EQ(answered, 0u);
}

TEST(Loopback, ClientSeesTruncatedResponse) {
  Listener listener("127.0.0.1:0");
  std::thread server([&] {
    auto s = listener.accept();
    const auto h = frame_header(MsgType::InferResponse, 100);
    s.send_all(h);
    s.send_all(std::vector<std::uint8_t>(10));
  });
  auto s = connect_to("127.0.0.1:" + std::to_string(listener.port()));
  server.join();
  EXPECT_THROW(read_frame(s), ProtocolError);
}

TEST(Transport, BadAddresses) {
  EXPECT_THROW(connect_to("no-port"), ProtocolError);
  EXPECT_THROW(Listener("127.0.0.1:"), ProtocolError);
  Listener l("127.0.0.1:0");
  EXPECT_GT(l.port(), 0);
}

}  // namespace
}  // namespace fcn
