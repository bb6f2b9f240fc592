#include <cmath>

#include "fcn/engine.hpp"

namespace fcn {

namespace {

// Signed input index for output position o and kernel offset k, or -1 when
// it falls in the padding.
std::ptrdiff_t source(std::size_t o, std::size_t k, std::size_t stride,
                      std::size_t pad, std::size_t extent) {
  const auto i = static_cast<std::ptrdiff_t>(o * stride + k) - static_cast<std::ptrdiff_t>(pad);
  return i >= 0 && i < static_cast<std::ptrdiff_t>(extent) ? i : -1;
}

std::vector<double> conv_plain(const Conv2d& l, Shape3 in, Shape3 out,
                               const std::vector<double>& x) {
  std::vector<double> y(out.size());
  for (std::size_t oc = 0; oc < out.c; ++oc) {
    for (std::size_t oy = 0; oy < out.h; ++oy) {
      for (std::size_t ox = 0; ox < out.w; ++ox) {
        double acc = l.bias.empty() ? 0.0 : l.bias[oc];
        for (std::size_t ic = 0; ic < l.in_maps; ++ic) {
          for (std::size_t ky = 0; ky < l.kh; ++ky) {
            const auto iy = source(oy, ky, l.stride, l.padding, in.h);
            if (iy < 0) continue;
            for (std::size_t kx = 0; kx < l.kw; ++kx) {
              const auto ix = source(ox, kx, l.stride, l.padding, in.w);
              if (ix < 0) continue;
              const double w = l.weights.effective(((oc * l.in_maps + ic) * l.kh + ky) * l.kw + kx);
              acc += w * x[(ic * in.h + iy) * in.w + ix];
            }
          }
        }
        y[(oc * out.h + oy) * out.w + ox] = acc;
      }
    }
  }
  return y;
}

std::vector<double> pool_plain(const ScaledAvgPool& l, Shape3 in, Shape3 out,
                               const std::vector<double>& x) {
  std::vector<double> y(out.size());
  const double recip = 1.0 / static_cast<double>(l.window * l.window);
  for (std::size_t c = 0; c < out.c; ++c) {
    for (std::size_t oy = 0; oy < out.h; ++oy) {
      for (std::size_t ox = 0; ox < out.w; ++ox) {
        double acc = 0;
        for (std::size_t ky = 0; ky < l.window; ++ky) {
          const auto iy = source(oy, ky, l.stride, l.padding, in.h);
          if (iy < 0) continue;
          for (std::size_t kx = 0; kx < l.window; ++kx) {
            const auto ix = source(ox, kx, l.stride, l.padding, in.w);
            if (ix >= 0) acc += x[(c * in.h + iy) * in.w + ix];
          }
        }
        y[(c * out.h + oy) * out.w + ox] = l.reciprocal ? acc * recip : acc;
      }
    }
  }
  return y;
}

std::vector<double> dense_plain(const Dense& l, const std::vector<double>& x) {
  std::vector<double> y(l.out);
  for (std::size_t o = 0; o < l.out; ++o) {
    double acc = l.bias.empty() ? 0.0 : l.bias[o];
    for (std::size_t i = 0; i < l.in; ++i) acc += l.weights.effective(o * l.in + i) * x[i];
    y[o] = acc;
  }
  return y;
}

}  // namespace

std::vector<double> eval_plain(const NetworkSpec& net, std::span<const double> input) {
  const auto shapes = net.shapes();
  if (input.size() != net.input.size()) {
    throw ModelError("input has " + std::to_string(input.size()) + " values, network expects " +
                     std::to_string(net.input.size()));
  }
  std::vector<double> x(input.begin(), input.end());
  Shape3 in = net.input;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Shape3 out = shapes[i];
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, Conv2d>) {
            x = conv_plain(l, in, out, x);
          } else if constexpr (std::is_same_v<T, ScaledAvgPool>) {
            x = pool_plain(l, in, out, x);
          } else if constexpr (std::is_same_v<T, Dense>) {
            x = dense_plain(l, x);
          } else if constexpr (std::is_same_v<T, BatchNormAffine>) {
            const std::size_t plane = in.h * in.w;
            for (std::size_t j = 0; j < x.size(); ++j) {
              x[j] = l.scale[j / plane] * x[j] + l.shift[j / plane];
            }
          } else {
            for (auto& v : x) v = l.poly(v);
          }
        },
        net.layers[i]);
    in = out;
  }
  return x;
}

namespace {

// BN applied to this layer's output: w[o, ...] *= scale[o], b = scale*b + shift.
template <class L>
void fold_into_previous(L& l, const BatchNormAffine& bn, std::size_t outs) {
  const std::size_t per = l.weights.size() / outs;
  for (std::size_t o = 0; o < outs; ++o) {
    for (std::size_t j = 0; j < per; ++j) l.weights.values[o * per + j] *= bn.scale[o];
  }
  if (l.bias.empty()) l.bias.assign(outs, 0.0);
  for (std::size_t o = 0; o < outs; ++o) l.bias[o] = bn.scale[o] * l.bias[o] + bn.shift[o];
}

// BN applied to this layer's input with `plane` elements per channel:
// W (s x + t) + b = (W s) x + (W t + b).
template <class L>
void fold_into_next(L& l, const BatchNormAffine& bn, std::size_t outs, std::size_t plane) {
  const std::size_t per = l.weights.size() / outs;  // input positions per output
  if (l.bias.empty()) l.bias.assign(outs, 0.0);
  for (std::size_t o = 0; o < outs; ++o) {
    for (std::size_t j = 0; j < per; ++j) {
      const std::size_t c = j / plane;
      l.bias[o] += l.weights.effective(o * per + j) * bn.shift[c];
      l.weights.values[o * per + j] *= bn.scale[c];
    }
  }
}

}  // namespace

NetworkSpec fold_batchnorm(const NetworkSpec& net) {
  const auto shapes = net.shapes();
  NetworkSpec out;
  out.input = net.input;
  std::vector<std::size_t> pending;  // BN layers waiting for the next layer
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& layer = net.layers[i];
    if (const auto* bn = std::get_if<BatchNormAffine>(&layer)) {
      if (!out.layers.empty() && pending.empty()) {
        if (auto* c = std::get_if<Conv2d>(&out.layers.back())) {
          fold_into_previous(*c, *bn, c->out_maps);
          continue;
        }
        if (auto* d = std::get_if<Dense>(&out.layers.back())) {
          fold_into_previous(*d, *bn, d->out);
          continue;
        }
      }
      pending.push_back(i);
      continue;
    }
    Layer copy = layer;
    // The BN nearest this layer is folded first.
    for (auto it = pending.rbegin(); it != pending.rend(); ++it) {
      const std::size_t b = *it;
      const auto& bn = std::get<BatchNormAffine>(net.layers[b]);
      const Shape3 in = b == 0 ? net.input : shapes[b - 1];
      if (auto* d = std::get_if<Dense>(&copy)) {
        fold_into_next(*d, bn, d->out, in.h * in.w);
      } else if (auto* c = std::get_if<Conv2d>(&copy); c && c->padding == 0) {
        fold_into_next(*c, bn, c->out_maps, c->kh * c->kw);
      } else {
        throw ModelError("batch-norm layer " + std::to_string(b + 1) +
                         " has no foldable neighbour");
      }
    }
    pending.clear();
    out.layers.push_back(std::move(copy));
  }
  if (!pending.empty()) {
    throw ModelError("batch-norm layer " + std::to_string(pending.front() + 1) +
                     " has no foldable neighbour");
  }
  out.shapes();
  return out;
}

}  // namespace fcn
