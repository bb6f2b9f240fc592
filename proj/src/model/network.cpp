#include "fcn/network.hpp"

#include <algorithm>

namespace fcn {

WeightTensor WeightTensor::dense(std::vector<std::size_t> shape, std::vector<double> values) {
  WeightTensor w;
  w.shape = std::move(shape);
  w.values = std::move(values);
  w.mask.assign(w.values.size(), 1);
  w.validate();
  return w;
}

std::size_t WeightTensor::surviving() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < values.size(); ++i) n += effective(i) != 0;
  return n;
}

void WeightTensor::validate() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  if (shape.empty() || n != values.size()) {
    throw ModelError("weight tensor shape does not match its value count");
  }
  if (mask.size() != values.size()) throw ModelError("mask length does not match weights");
  for (auto m : mask) {
    if (m > 1) throw ModelError("mask entries must be 0 or 1");
  }
}

std::size_t conv_output(std::size_t in, std::size_t k, std::size_t stride,
                        std::size_t padding) {
  if (stride == 0) throw ModelError("stride must be positive");
  if (in + 2 * padding < k) throw ModelError("window larger than padded input");
  return (in + 2 * padding - k) / stride + 1;
}

std::vector<Shape3> NetworkSpec::shapes() const {
  if (input.size() == 0) throw ModelError("input shape is empty");
  std::vector<Shape3> out;
  Shape3 s = input;
  std::size_t acts = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string where = "layer " + std::to_string(i + 1) + ": ";
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, Conv2d>) {
            if (l.in_maps != s.c) throw ModelError(where + "conv input maps do not match");
            if (l.weights.shape != std::vector<std::size_t>{l.out_maps, l.in_maps, l.kh, l.kw}) {
              throw ModelError(where + "conv weight shape mismatch");
            }
            l.weights.validate();
            if (!l.bias.empty() && l.bias.size() != l.out_maps) {
              throw ModelError(where + "conv bias length mismatch");
            }
            s = {l.out_maps, conv_output(s.h, l.kh, l.stride, l.padding),
                 conv_output(s.w, l.kw, l.stride, l.padding)};
          } else if constexpr (std::is_same_v<T, ScaledAvgPool>) {
            if (l.window == 0) throw ModelError(where + "pool window must be positive");
            if (l.padding >= l.window) throw ModelError(where + "pool padding must be below the window");
            s = {s.c, conv_output(s.h, l.window, l.stride, l.padding),
                 conv_output(s.w, l.window, l.stride, l.padding)};
          } else if constexpr (std::is_same_v<T, Dense>) {
            if (l.in != s.size()) throw ModelError(where + "dense input size does not match");
            if (l.weights.shape != std::vector<std::size_t>{l.out, l.in}) {
              throw ModelError(where + "dense weight shape mismatch");
            }
            l.weights.validate();
            if (!l.bias.empty() && l.bias.size() != l.out) {
              throw ModelError(where + "dense bias length mismatch");
            }
            s = {l.out, 1, 1};
          } else if constexpr (std::is_same_v<T, BatchNormAffine>) {
            if (l.scale.size() != s.c || l.shift.size() != s.c) {
              throw ModelError(where + "batch-norm needs one scale/shift per channel");
            }
          } else {
            if (l.poly.coeffs.empty()) throw ModelError(where + "activation has no coefficients");
            ++acts;
          }
        },
        layers[i]);
    if (s.size() == 0) throw ModelError(where + "produces an empty tensor");
    out.push_back(s);
  }
  if (acts > kMaxActivations) {
    throw ModelError("network has " + std::to_string(acts) +
                     " activations; the depth budget allows " + std::to_string(kMaxActivations));
  }
  return out;
}

Shape3 NetworkSpec::output_shape() const {
  const auto s = shapes();
  return s.empty() ? input : s.back();
}

std::size_t NetworkSpec::activation_count() const {
  return static_cast<std::size_t>(std::count_if(layers.begin(), layers.end(), [](const Layer& l) {
    return std::holds_alternative<PolyActivation>(l);
  }));
}

std::vector<std::string> NetworkSpec::layer_names() const {
  std::size_t conv = 0, pool = 0, fc = 0, bn = 0, act = 0;
  std::vector<std::string> names;
  for (const auto& l : layers) {
    switch (l.index()) {
      case 0: names.push_back("Conv-" + std::to_string(++conv)); break;
      case 1: names.push_back("Pool-" + std::to_string(++pool)); break;
      case 2: names.push_back("FC-" + std::to_string(++fc)); break;
      case 3: names.push_back("BN-" + std::to_string(++bn)); break;
      default: names.push_back("Act-" + std::to_string(++act)); break;
    }
  }
  return names;
}

}  // namespace fcn
