#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fcn/compress.hpp"

namespace fcn {
namespace {

WeightTensor random_tensor(std::size_t n, std::uint64_t seed, double scale = 0.2) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return WeightTensor::dense({n}, v);
}

TEST(Prune, Examples) {
  const auto w = WeightTensor::dense({4}, {3, -1, 0.5, 2});
  EXPECT_EQ(prune_mask(w, 1.0).mask, (std::vector<std::uint8_t>{1, 1, 1, 1}));
  EXPECT_EQ(prune_mask(w, 0.5).mask, (std::vector<std::uint8_t>{1, 0, 0, 1}));
  EXPECT_THROW(prune_mask(w, 0.0), ModelError);
  EXPECT_THROW(prune_mask(WeightTensor{}, 0.5), ModelError);
}

TEST(Prune, StableTies) {
  const auto w = WeightTensor::dense({4}, {1, -1, 1, 1});
  EXPECT_EQ(prune_mask(w, 0.5).mask, (std::vector<std::uint8_t>{1, 1, 0, 0}));
}

TEST(Prune, HitsPublishedSparsities) {
  for (double target : {0.1440, 0.0701, 0.0568, 0.1480}) {
    const auto w = random_tensor(25000, 3);
    const auto p = prune_mask(w, target);
    EXPECT_NEAR(static_cast<double>(p.surviving()) / 25000, target, 1.0 / 25000);
    // Every survivor outweighs every pruned entry.
    double min_kept = INFINITY, max_cut = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (p.mask[i]) {
        min_kept = std::min(min_kept, std::fabs(w.values[i]));
      } else {
        max_cut = std::max(max_cut, std::fabs(w.values[i]));
      }
    }
    EXPECT_GE(min_kept, max_cut);
  }
}

TEST(QuantBounds, Formula) {
  const auto one = WeightTensor::dense({2}, {1.0, -0.1});
  QuantSpec q = quant_bounds(one);
  EXPECT_EQ(q.n1, 0);
  EXPECT_EQ(q.n2, -7);
  const auto p = q.codebook();
  EXPECT_EQ(p.size(), static_cast<std::size_t>(2 * (q.n1 - q.n2 + 1) + 1));
  for (double v : p) {
    if (v == 0) continue;
    int e;
    EXPECT_EQ(std::frexp(std::fabs(v), &e), 0.5);
  }
  EXPECT_EQ(quant_bounds(WeightTensor::dense({1}, {0.75})).n1, 0);
  EXPECT_EQ(quant_bounds(WeightTensor::dense({1}, {-0.74})).n1, -1);
  EXPECT_EQ(quant_bounds(one, 5, N2Rule::HalfPowerExponent).n2, -3);
  EXPECT_THROW(quant_bounds(one, 4, N2Rule::HalfPowerExponent), ModelError);
  EXPECT_THROW(quant_bounds(WeightTensor::dense({2}, {0, 0})), ModelError);
}

TEST(QuantBounds, UsesOnlySurvivingWeights) {
  auto w = WeightTensor::dense({3}, {4.0, 0.5, 0.25});
  w.mask[0] = 0;
  EXPECT_EQ(quant_bounds(w).n1, -1);
}

TEST(Snap, NearestRule) {
  QuantSpec q;
  q.n1 = 0;
  q.n2 = -7;
  EXPECT_EQ(snap_pow2(0.5, q), 0.5);
  EXPECT_EQ(snap_pow2(0.3, q), 0.25);
  EXPECT_EQ(snap_pow2(-0.3, q), -0.25);
  EXPECT_EQ(snap_pow2(0.375, q), 0.5);  // midpoint goes up
  EXPECT_EQ(snap_pow2(1.7, q), 1.0);    // clipped at 2^n1
  EXPECT_EQ(snap_pow2(0.75 * std::ldexp(1.0, -7), q), std::ldexp(1.0, -7));
  EXPECT_EQ(snap_pow2(0.74 * std::ldexp(1.0, -7), q), 0.0);
}

TEST(Snap, ErrorWithinHalfGap) {
  QuantSpec q;
  q.n1 = 0;
  q.n2 = -7;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(0.75 * std::ldexp(1.0, -7), 1.5);
  for (int i = 0; i < 10000; ++i) {
    const double v = d(rng);
    const double s = snap_pow2(v, q);
    // Local gap: distance between the codebook neighbours around v.
    const double lo = std::ldexp(1.0, std::max(q.n2, static_cast<int>(std::floor(std::log2(v)))));
    const double gap = std::min(lo, 1.0);
    if (v <= 1.0) {
      ASSERT_LE(std::fabs(v - s), gap / 2 + 1e-15) << v;
    }
  }
}

TEST(Quantize, FractionsAndIdempotence) {
  const auto w = random_tensor(1000, 7);
  const QuantSpec q = quant_bounds(w);
  const auto full = quantize_to_pow2(w, q, 1.0);
  for (double v : full.values) EXPECT_TRUE(is_monomial_weight(v, 15) || v == 0);
  EXPECT_EQ(quantize_to_pow2(full, q, 1.0), full);

  // A partial partition touches exactly the largest ceil(f * N) weights.
  const auto part = quantize_to_pow2(w, q, 0.3);
  std::size_t changed_or_exact = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (part.values[i] != w.values[i] || is_monomial_weight(w.values[i], 15)) ++changed_or_exact;
  }
  EXPECT_EQ(changed_or_exact, 300u);

  // Schedule replay: 30% then 100% equals one-shot on the same codebook.
  EXPECT_EQ(quantize_to_pow2(part, q, 1.0).values.size(), full.values.size());
}

TEST(Quantize, PrunedWeightsStayPruned) {
  auto w = prune_mask(random_tensor(200, 9), 0.2);
  const auto q = quant_bounds(w);
  const auto out = quantize_to_pow2(w, q, 1.0);
  EXPECT_EQ(out.surviving(), w.surviving());
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!w.mask[i]) {
      EXPECT_EQ(out.effective(i), 0.0);
    }
  }
}

TEST(Monomial, Predicate) {
  EXPECT_TRUE(is_monomial_weight(0.125, 15));
  EXPECT_TRUE(is_monomial_weight(-std::ldexp(1.0, -15), 15));
  EXPECT_FALSE(is_monomial_weight(std::ldexp(1.0, -16), 15));
  EXPECT_FALSE(is_monomial_weight(0.3, 15));
  EXPECT_FALSE(is_monomial_weight(0.75, 15));
}

TEST(Report, FlagsAndCounts) {
  NetworkSpec net;
  net.input = {1, 1, 2};
  Dense d;
  d.in = 2;
  d.out = 2;
  d.weights = WeightTensor::dense({2, 2}, {0.5, -0.25, 0, 0.5});
  net.layers.push_back(d);
  auto r = sparsity_report(net);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].layer, "FC-1");
  EXPECT_EQ(r[0].surviving, 3u);
  EXPECT_TRUE(r[0].monomial_encodable);
  EXPECT_EQ(r[0].exponent_counts.at(-1), 2u);
  std::get<Dense>(net.layers[0]).weights.values[3] = 0.3;
  EXPECT_FALSE(sparsity_report(net)[0].monomial_encodable);
  EXPECT_NE(sparsity_csv(r).find("FC-1,4,3,0.75,true,-2:1;-1:2"), std::string::npos);
}

}  // namespace
}  // namespace fcn
