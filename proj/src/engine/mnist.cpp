#include <cmath>
#include <random>

#include "fcn/compress.hpp"
#include "fcn/engine.hpp"

namespace fcn {

PolyApprox swish_pow2_activation() {
  PolyApprox p = PolyApprox::from_pow2({{1, -4}, {1, -1}, {1, -3}}, kDefaultInterval);
  p.delta = max_error(ActivationFn::make(ActivationKind::Swish), p.coeffs, p.interval_a,
                      p.grid_points);
  return p;
}

namespace {

WeightTensor he_normal(std::vector<std::size_t> shape, std::size_t fan_in, std::mt19937_64& rng) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return WeightTensor::dense(std::move(shape), std::move(v));
}

std::vector<double> small_bias(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 0.05);
  std::vector<double> b(n);
  for (auto& x : b) x = dist(rng);
  return b;
}

BatchNormAffine random_bn(std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> scale(0.5, 1.5), shift(-0.1, 0.1);
  BatchNormAffine bn;
  for (std::size_t i = 0; i < c; ++i) {
    bn.scale.push_back(scale(rng));
    bn.shift.push_back(shift(rng));
  }
  return bn;
}

WeightTensor prune_and_quantize(const WeightTensor& w, double surviving) {
  const WeightTensor pruned = prune_mask(w, surviving);
  return quantize_to_pow2(pruned, quant_bounds(pruned), 1.0);
}

}  // namespace

MnistConfigs build_mnist_configs(std::size_t maps, std::uint64_t seed) {
  if (maps == 0) throw ModelError("feature-map count must be positive");
  std::mt19937_64 rng(seed);
  constexpr std::size_t kConv2Maps = 50, kHidden = 100, kClasses = 10;

  // 28x28 -> conv 5x5/2 pad 1 -> 13x13 -> pool 3/1 pad 1 -> conv 5x5/2 -> 5x5
  // -> pool 3/1 pad 1 -> 1250 -> 100 -> 10.
  NetworkSpec net;
  net.input = {1, 28, 28};
  Conv2d c1{maps, 1, 5, 5, 2, 1, he_normal({maps, 1, 5, 5}, 25, rng), small_bias(maps, rng)};
  Conv2d c2{kConv2Maps, maps, 5, 5, 2, 0, he_normal({kConv2Maps, maps, 5, 5}, maps * 25, rng),
            small_bias(kConv2Maps, rng)};
  const std::size_t flat = kConv2Maps * 5 * 5;
  Dense f1{kHidden, flat, he_normal({kHidden, flat}, flat, rng), small_bias(kHidden, rng)};
  Dense f2{kClasses, kHidden, he_normal({kClasses, kHidden}, kHidden, rng),
           small_bias(kClasses, rng)};
  const ScaledAvgPool pool{3, 1, 1, false};
  PolyActivation square;
  square.poly.coeffs = {0.0, 0.0, 1.0};

  net.layers = {c1, random_bn(maps, rng), square, pool, c2, pool,
                f1, random_bn(kHidden, rng), square, f2};
  MnistConfigs cfg;
  cfg.cryptonets = fold_batchnorm(net);

  cfg.faster = cfg.cryptonets;
  std::size_t weighted = 0;
  for (auto& layer : cfg.faster.layers) {
    if (auto* c = std::get_if<Conv2d>(&layer)) {
      c->weights = prune_and_quantize(c->weights, kMnistSurviving[weighted++]);
    } else if (auto* d = std::get_if<Dense>(&layer)) {
      d->weights = prune_and_quantize(d->weights, kMnistSurviving[weighted++]);
    } else if (auto* a = std::get_if<PolyActivation>(&layer)) {
      a->poly = swish_pow2_activation();
    }
  }
  return cfg;
}

}  // namespace fcn
