#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fcn/client.hpp"
#include "fcn/engine.hpp"
#include "../support/tiny_nets.hpp"

namespace fcn {
namespace {

using testing::normals;
using testing::random_tiny_net;
using testing::uniforms;

Dense dense_layer(std::size_t out, std::size_t in, std::vector<double> w, std::vector<double> b) {
  return Dense{out, in, WeightTensor::dense({out, in}, std::move(w)), std::move(b)};
}

PolyActivation activation(std::vector<double> c) {
  PolyActivation a;
  a.poly.coeffs = std::move(c);
  return a;
}

double rel_error(const std::vector<double>& got, const std::vector<double>& want) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < want.size(); ++i) {
    num = std::max(num, std::fabs(got[i] - want[i]));
    den = std::max(den, std::fabs(want[i]));
  }
  return num / den;
}

// ---- plaintext reference ---------------------------------------------------

TEST(EvalPlain, IdentityConvLeavesInputUnchanged) {
  NetworkSpec net;
  net.input = {1, 3, 3};
  net.layers.push_back(Conv2d{1, 1, 1, 1, 1, 0, WeightTensor::dense({1, 1, 1, 1}, {1.0}), {}});
  const std::vector<double> x = {1, -2, 3, 4, 5.5, 6, -7, 8, 9};
  EXPECT_EQ(eval_plain(net, x), x);
}

TEST(EvalPlain, SwishPow2ConstantTerm) {
  NetworkSpec net;
  net.input = {1, 1, 1};
  net.layers.push_back(PolyActivation{swish_pow2_activation()});
  const double zero = 0;
  EXPECT_EQ(eval_plain(net, std::span(&zero, 1))[0], 0.0625);
}

TEST(EvalPlain, RejectsWrongInputSize) {
  NetworkSpec net;
  net.input = {1, 2, 2};
  const std::vector<double> x(3);
  EXPECT_THROW(eval_plain(net, x), ModelError);
}

// Independent forward pass: explicit zero padding, then plain sums.
std::vector<double> hand_forward(const Conv2d& c, const Dense& d, Shape3 in,
                                 const std::vector<double>& x) {
  const std::size_t ph = in.h + 2 * c.padding, pw = in.w + 2 * c.padding;
  std::vector<double> padded(in.c * ph * pw, 0.0);
  for (std::size_t ch = 0; ch < in.c; ++ch)
    for (std::size_t i = 0; i < in.h; ++i)
      for (std::size_t j = 0; j < in.w; ++j)
        padded[(ch * ph + i + c.padding) * pw + j + c.padding] = x[(ch * in.h + i) * in.w + j];
  const std::size_t oh = (ph - c.kh) / c.stride + 1, ow = (pw - c.kw) / c.stride + 1;
  std::vector<double> mid;
  for (std::size_t o = 0; o < c.out_maps; ++o)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        double s = c.bias[o];
        for (std::size_t ch = 0; ch < in.c; ++ch)
          for (std::size_t a = 0; a < c.kh; ++a)
            for (std::size_t b = 0; b < c.kw; ++b)
              s += c.weights.values[((o * in.c + ch) * c.kh + a) * c.kw + b] *
                   padded[(ch * ph + i * c.stride + a) * pw + j * c.stride + b];
        mid.push_back(s * s);
      }
  std::vector<double> y;
  for (std::size_t o = 0; o < d.out; ++o) {
    double s = d.bias[o];
    for (std::size_t i = 0; i < d.in; ++i) s += d.weights.values[o * d.in + i] * mid[i];
    y.push_back(s);
  }
  return y;
}

TEST(EvalPlain, MatchesHandRolledForwardPass) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Shape3 in{2, 5, 5};
    Conv2d c{3, 2, 3, 3, 2, 1, WeightTensor::dense({3, 2, 3, 3}, normals(54, 0.3, rng)),
             normals(3, 0.1, rng)};
    Dense d = dense_layer(4, 27, normals(108, 0.2, rng), normals(4, 0.1, rng));
    NetworkSpec net;
    net.input = in;
    net.layers = {c, activation({0, 0, 1}), d};
    const auto x = uniforms(in.size(), -1, 1, rng);
    const auto want = hand_forward(c, d, in, x);
    const auto got = eval_plain(net, x);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(EvalPlain, PoolSumsOnlyInBoundsElements) {
  NetworkSpec net;
  net.input = {1, 2, 2};
  net.layers.push_back(ScaledAvgPool{3, 1, 1, false});
  const std::vector<double> x = {1, 2, 3, 4};
  EXPECT_EQ(eval_plain(net, x), std::vector<double>({10, 10, 10, 10}));
  net.layers[0] = ScaledAvgPool{2, 2, 0, true};
  EXPECT_EQ(eval_plain(net, x), std::vector<double>({2.5}));
}

// ---- batch-norm folding ----------------------------------------------------

TEST(FoldBatchNorm, TrivialCases) {
  NetworkSpec net;
  net.input = {1, 2, 2};
  net.layers = {Conv2d{1, 1, 1, 1, 1, 0, WeightTensor::dense({1, 1, 1, 1}, {0.25}), {}},
                BatchNormAffine{{1.0}, {0.0}}};
  auto f = fold_batchnorm(net);
  ASSERT_EQ(f.layers.size(), 1u);
  EXPECT_EQ(std::get<Conv2d>(f.layers[0]).weights.values[0], 0.25);

  std::get<BatchNormAffine>(net.layers[1]).scale = {2.0};
  f = fold_batchnorm(net);
  EXPECT_EQ(std::get<Conv2d>(f.layers[0]).weights.values[0], 0.5);
}

TEST(FoldBatchNorm, RandomNetsAgreeWithUnfolded) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    NetworkSpec net;
    net.input = {2, 6, 6};
    auto bn = [&](std::size_t c) {
      return BatchNormAffine{uniforms(c, 0.5, 2, rng), uniforms(c, -1, 1, rng)};
    };
    Conv2d c{3, 2, 3, 3, 1, 1, WeightTensor::dense({3, 2, 3, 3}, normals(54, 0.3, rng)),
             trial % 2 ? normals(3, 0.1, rng) : std::vector<double>{}};
    net.layers = {bn(2),  // folds forward into the unpadded conv below
                  Conv2d{2, 2, 1, 1, 1, 0, WeightTensor::dense({2, 2, 1, 1}, normals(4, 0.5, rng)), {}},
                  c, bn(3), bn(3),  // two in a row after a conv
                  activation({0.1, 0.5, 0.125}),
                  ScaledAvgPool{2, 2, 0, false}, bn(3),  // forward into the dense
                  dense_layer(5, 27, normals(135, 0.2, rng), normals(5, 0.1, rng)), bn(5)};
    const auto folded = fold_batchnorm(net);
    for (const auto& l : folded.layers) EXPECT_FALSE(std::holds_alternative<BatchNormAffine>(l));
    const auto x = uniforms(net.input.size(), -1, 1, rng);
    const auto a = eval_plain(net, x), b = eval_plain(folded, x);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9 * std::max(1.0, std::fabs(a[i])));
  }
}

TEST(FoldBatchNorm, NoFoldableNeighbourIsAnError) {
  NetworkSpec net;
  net.input = {1, 1, 1};
  net.layers = {activation({0, 0, 1}), BatchNormAffine{{2.0}, {1.0}}, activation({0, 0, 1})};
  EXPECT_THROW(fold_batchnorm(net), ModelError);
  net.layers = {BatchNormAffine{{2.0}, {1.0}}};
  EXPECT_THROW(fold_batchnorm(net), ModelError);
  net.input = {1, 3, 3};
  net.layers = {BatchNormAffine{{2.0}, {1.0}},
                Conv2d{1, 1, 2, 2, 1, 1, WeightTensor::dense({1, 1, 2, 2}, {1, 1, 1, 1}), {}}};
  EXPECT_THROW(fold_batchnorm(net), ModelError);  // padding would see the shift
}

// ---- HOP counting ----------------------------------------------------------

void expect_counts(const HopCounts& c, std::uint64_t pt_mul, std::uint64_t ct_add,
                   std::uint64_t pt_add, std::uint64_t ct_mul) {
  EXPECT_EQ(c.pt_ct_mul, pt_mul);
  EXPECT_EQ(c.ct_ct_add, ct_add);
  EXPECT_EQ(c.pt_ct_add, pt_add);
  EXPECT_EQ(c.ct_ct_mul, ct_mul);
}

NetworkSpec dense_4_2() {
  NetworkSpec net;
  net.input = {4, 1, 1};
  net.layers.push_back(dense_layer(2, 4, {0.5, -1.25, 0.3, 2, 0.7, 0.1, -0.9, 1.5}, {0.25, -0.5}));
  return net;
}

NetworkSpec conv_2x2_on_3x3() {
  NetworkSpec net;
  net.input = {1, 3, 3};
  net.layers.push_back(Conv2d{1, 1, 2, 2, 1, 0,
                              WeightTensor::dense({1, 1, 2, 2}, {0.5, -0.75, 0.3, 1.1}), {0.2}});
  return net;
}

TEST(Hops, DenseFourToTwo) {
  const auto net = dense_4_2();
  expect_counts(project_hops(net).totals(), 8, 6, 2, 0);
  EXPECT_TRUE(project_hops(net).same_counts(trace_hops(net)));
}

TEST(Hops, ConvTwoByTwoOnThreeByThree) {
  const auto net = conv_2x2_on_3x3();
  expect_counts(project_hops(net).totals(), 16, 12, 4, 0);
  EXPECT_TRUE(project_hops(net).same_counts(trace_hops(net)));
}

TEST(Hops, SquareActivationOver845Nodes) {
  NetworkSpec net;
  net.input = {5, 13, 13};
  net.layers.push_back(activation({0, 0, 1}));
  const auto h = project_hops(net);
  expect_counts(h.totals(), 0, 0, 0, 845);
  EXPECT_TRUE(h.same_counts(trace_hops(net)));
}

TEST(Hops, FullQuadraticPerNodeCost) {
  NetworkSpec net;
  net.input = {1, 1, 10};
  net.layers.push_back(PolyActivation{swish_pow2_activation()});
  expect_counts(project_hops(net).totals(), 20, 10, 10, 10);
  net.layers[0] = activation({0, 0.5, 0});  // linear only
  expect_counts(project_hops(net).totals(), 10, 0, 0, 0);
  net.layers[0] = activation({0.25, 0, 0});  // constant only
  expect_counts(project_hops(net).totals(), 0, 0, 10, 0);
  EXPECT_TRUE(project_hops(net).same_counts(trace_hops(net)));
}

TEST(Hops, EmptyNetIsAllZero) {
  NetworkSpec net;
  net.input = {1, 28, 28};
  const auto h = project_hops(net);
  EXPECT_TRUE(h.layers.empty());
  EXPECT_EQ(h.totals().total(), 0u);
}

TEST(Hops, ZeroWeightsAndZeroBiasAreElided) {
  auto net = dense_4_2();
  auto& d = std::get<Dense>(net.layers[0]);
  d.weights.mask = {1, 0, 1, 0, 0, 0, 0, 0};  // second output has no weights
  d.bias = {0.0, 0.5};
  const auto h = project_hops(net);
  expect_counts(h.totals(), 2, 1, 1, 0);
  EXPECT_TRUE(h.same_counts(trace_hops(net)));
}

TEST(Hops, ProjectionEqualsInstrumentationOnRandomNets) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    auto net = random_tiny_net(rng, 1 + trial % 3, trial % 2 == 0);
    if (trial % 5 == 0) net.layers.insert(net.layers.begin(), ScaledAvgPool{3, 1, 1, true});  // keeps 4x4
    ASSERT_TRUE(project_hops(net).same_counts(trace_hops(net))) << "trial " << trial;
  }
  for (std::size_t maps : {5u, 20u}) {
    const auto cfg = build_mnist_configs(maps, 3);
    EXPECT_TRUE(project_hops(cfg.cryptonets).same_counts(trace_hops(cfg.cryptonets)));
    EXPECT_TRUE(project_hops(cfg.faster).same_counts(trace_hops(cfg.faster)));
  }
}

TEST(Hops, PruningNeverIncreasesAnyClass) {
  std::mt19937_64 rng(4);
  NetworkSpec base;
  base.input = {2, 6, 6};
  base.layers = {Conv2d{4, 2, 3, 3, 1, 1, WeightTensor::dense({4, 2, 3, 3}, normals(72, 0.3, rng)),
                        normals(4, 0.1, rng)},
                 PolyActivation{swish_pow2_activation()}, ScaledAvgPool{2, 2, 0, false},
                 dense_layer(10, 36, normals(360, 0.2, rng), normals(10, 0.1, rng))};
  HopCounts prev = project_hops(base).totals();
  for (double keep : {0.8, 0.5, 0.3, 0.1, 0.02}) {
    NetworkSpec net = base;
    for (auto& l : net.layers) {
      if (auto* c = std::get_if<Conv2d>(&l)) c->weights = prune_mask(c->weights, keep);
      if (auto* d = std::get_if<Dense>(&l)) d->weights = prune_mask(d->weights, keep);
    }
    const HopCounts h = project_hops(net).totals();
    EXPECT_LE(h.pt_ct_mul, prev.pt_ct_mul) << keep;
    EXPECT_LE(h.ct_ct_add, prev.ct_ct_add) << keep;
    EXPECT_LE(h.pt_ct_add, prev.pt_ct_add) << keep;
    EXPECT_LE(h.ct_ct_mul, prev.ct_ct_mul) << keep;
    EXPECT_LT(h.total(), prev.total()) << keep;
    prev = h;
  }
}

TEST(Hops, QuantizedNetTakesFastPathForEveryPlaintextMultiply) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    auto net = random_tiny_net(rng, 2, true);
    for (auto& l : net.layers) {
      if (auto* a = std::get_if<PolyActivation>(&l)) a->poly = swish_pow2_activation();
    }
    const auto h = trace_hops(net).totals();
    EXPECT_GT(h.pt_ct_mul, 0u);
    EXPECT_EQ(h.fast_path_hits, h.pt_ct_mul);
  }
}

TEST(Hops, CsvLayout) {
  const auto csv = project_hops(dense_4_2()).csv();
  EXPECT_EQ(csv,
            "layer,pt_ct_add,ct_ct_add,pt_ct_mul,ct_ct_mul,wall_ms,fast_path_hits\n"
            "FC-1,2,6,8,0,0.000,2\n"
            "total,2,6,8,0,0.000,2\n");
}

// ---- MNIST configurations --------------------------------------------------

TEST(Mnist, ConfigShapesAndSparsities) {
  const auto cfg = build_mnist_configs(5, 1);
  for (const auto* net : {&cfg.cryptonets, &cfg.faster}) {
    EXPECT_EQ(net->output_shape(), (Shape3{10, 1, 1}));
    EXPECT_EQ(net->activation_count(), 2u);
    const auto shapes = net->shapes();
    EXPECT_EQ(shapes[0], (Shape3{5, 13, 13}));  // 845 activation nodes
    EXPECT_EQ(shapes[3], (Shape3{50, 5, 5}));
  }
  expect_counts(project_hops(cfg.cryptonets).layers[1].counts, 0, 0, 0, 845);

  const auto report = sparsity_report(cfg.faster);
  ASSERT_EQ(report.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(report[i].fraction, kMnistSurviving[i], 1.0 / static_cast<double>(report[i].total));
    EXPECT_GE(report[i].fraction, kMnistSurviving[i]);
    EXPECT_TRUE(report[i].monomial_encodable);
  }
  EXPECT_EQ(report[0].surviving, 18u);   // ceil(0.1440 * 125)
  EXPECT_EQ(report[2].surviving, 7100u);  // 0.0568 * 125000
}

TEST(Mnist, TotalHopRatio) {
  const auto cfg = build_mnist_configs(5, 1);
  const double dense = static_cast<double>(project_hops(cfg.cryptonets).totals().total());
  const double sparse = static_cast<double>(project_hops(cfg.faster).totals().total());
  EXPECT_GE(dense / sparse, 7.3);
  EXPECT_LE(dense / sparse, 10.9);
}

// ---- capacity --------------------------------------------------------------

TEST(Capacity, EmptyNetAndSquare) {
  FixedPointConfig cfg;
  NetworkSpec net;
  net.input = {1, 2, 2};
  auto r = capacity_check(net, cfg, 4096, 0.75);
  EXPECT_EQ(r.output_scale, 15);
  EXPECT_EQ(r.output_bound, 0.75);
  net.layers.push_back(activation({0, 0, 1}));
  r = capacity_check(net, cfg, 4096, 2.0);
  EXPECT_EQ(r.output_scale, 30);
  EXPECT_EQ(r.output_bound, 4.0);
  EXPECT_EQ(r.max_degree, 2u * 16);  // 2^16 * 2^16
}

TEST(Capacity, DeepDenseNetOverflowsOneLane) {
  std::mt19937_64 rng(1);
  NetworkSpec net;
  net.input = {64, 1, 1};
  for (int i = 0; i < 3; ++i) {
    net.layers.push_back(dense_layer(64, 64, normals(64 * 64, 0.2, rng), {}));
    net.layers.push_back(activation({0, 0, 1}));
  }
  FixedPointConfig one;
  const auto r = analyze_capacity(net, one, 8192);
  EXPECT_FALSE(r.ok);
  EXPECT_THROW(capacity_check(net, one, 8192), CapacityError);
  // The degree limit binds on a small ring.
  NetworkSpec wide;
  wide.input = {1, 1, 1};
  wide.layers = {activation({0, 0, 1}), activation({0, 0, 1}), activation({0, 0, 1})};
  EXPECT_FALSE(analyze_capacity(wide, one, 64).ok);
  EXPECT_TRUE(analyze_capacity(wide, one, 4096).ok);
}

// ---- encrypted evaluation --------------------------------------------------

struct Keys {
  FvContextPtr ctx;
  KeySet keys;
  FixedPointConfig cfg;
};

const Keys& keys_1024() {
  static const Keys k = [] {
    EncryptionParams p;
    p.n = 1024;
    Keys k{FvContext::make(p), {}, {}};
    k.keys = keygen(k.ctx, 11);
    return k;
  }();
  return k;
}

TEST(Encrypted, DenseFourToTwoMatchesPlainAndCounts) {
  const auto& k = keys_1024();
  const auto net = dense_4_2();
  Sampler rng(3);
  const std::vector<double> x = {0.5, -0.25, 0.75, 1.0};
  const auto in = encrypt_input(k.ctx, k.keys.pub, k.cfg, net.input, x, rng);
  const auto r = eval_encrypted(net, in, k.ctx, k.keys.eval, k.cfg);
  expect_counts(r.hops.totals(), 8, 6, 2, 0);
  EXPECT_TRUE(r.hops.same_counts(project_hops(net)));
  EXPECT_EQ(r.output.scale_exponent, 30);
  const auto got = decrypt_output(k.ctx, k.keys.secret, k.cfg, r.output);
  const auto want = eval_plain(net, x);
  EXPECT_LT(rel_error(got, want), 1e-4);
}

TEST(Encrypted, ConvCountsMatchProjection) {
  const auto& k = keys_1024();
  const auto net = conv_2x2_on_3x3();
  Sampler rng(4);
  const std::vector<double> x = {0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8, 0.9};
  const auto r = eval_encrypted(net, encrypt_input(k.ctx, k.keys.pub, k.cfg, net.input, x, rng),
                                k.ctx, k.keys.eval, k.cfg);
  expect_counts(r.hops.totals(), 16, 12, 4, 0);
  EXPECT_LT(rel_error(decrypt_output(k.ctx, k.keys.secret, k.cfg, r.output), eval_plain(net, x)), 1e-4);
}

TEST(Encrypted, RandomTinyNetsMatchPlain) {
  const auto& k = keys_1024();
  std::mt19937_64 rng(21);
  Sampler enc(5);
  for (int trial = 0; trial < 4; ++trial) {
    const auto net = random_tiny_net(rng, 1 + trial % 2, trial % 2 == 1);
    const auto x = uniforms(net.input.size(), -1, 1, rng);
    const auto r = eval_encrypted(net, encrypt_input(k.ctx, k.keys.pub, k.cfg, net.input, x, enc),
                                  k.ctx, k.keys.eval, k.cfg);
    EXPECT_TRUE(r.hops.same_counts(project_hops(net))) << trial;
    EXPECT_GT(min_noise_budget(k.ctx, k.keys.secret, r.output), 0) << trial;
    const auto got = decrypt_output(k.ctx, k.keys.secret, k.cfg, r.output);
    EXPECT_LT(rel_error(got, eval_plain(net, x)), 5e-4) << trial;
  }
}

TEST(Encrypted, RejectsUnfoldedBatchNormAndBadInputs) {
  const auto& k = keys_1024();
  NetworkSpec net;
  net.input = {1, 1, 2};
  net.layers = {BatchNormAffine{{2.0}, {0.0}}};
  Sampler rng(1);
  const std::vector<double> x = {0.5, 0.5};
  const auto in = encrypt_input(k.ctx, k.keys.pub, k.cfg, net.input, x, rng);
  EXPECT_THROW(eval_encrypted(net, in, k.ctx, k.keys.eval, k.cfg), ModelError);
  EXPECT_THROW(project_hops(net), ModelError);

  net.layers.clear();
  net.input = {1, 1, 3};
  EXPECT_THROW(eval_encrypted(net, in, k.ctx, k.keys.eval, k.cfg), ModelError);
  FixedPointConfig two;
  two.t_lanes = {kMnistPlainModulus1, kMnistPlainModulus2};
  EXPECT_THROW(encrypt_input(k.ctx, k.keys.pub, two, {1, 1, 2}, x, rng), EncodeError);
}

}  // namespace
}  // namespace fcn
