#include "fcn/weights_file.hpp"

#include <climits>
#include <cmath>
#include <fstream>
#include <iterator>
#include <optional>

#include "bytes.hpp"

namespace fcn {

namespace {

using Reader = io::ByteReader<WeightsFormatError>;
constexpr char kMagic[4] = {'F', 'C', 'N', 'W'};
enum Tag : std::uint8_t { kInput = 0, kConv = 1, kPool = 2, kDense = 3, kBatchNorm = 4, kAct = 5 };

// Exponent of an exact +-2^e, or nullopt. Zero maps to INT16_MIN.
std::optional<std::int16_t> pow2_exponent(double v) {
  if (v == 0) return INT16_MIN;
  int e = 0;
  const double m = std::frexp(std::fabs(v), &e);
  if (m != 0.5 || e - 1 <= INT16_MIN || e - 1 > INT16_MAX) return std::nullopt;
  return static_cast<std::int16_t>(e - 1);
}

std::optional<std::vector<std::int16_t>> exponents(const WeightTensor& w) {
  std::vector<std::int16_t> out;
  out.reserve(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto e = pow2_exponent(w.effective(i));
    if (!e) return std::nullopt;
    out.push_back(*e);
  }
  return out;
}

std::uint32_t u32(std::size_t v) {
  if (v > UINT32_MAX) throw WeightsFormatError("dimension does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

void put_weights(io::ByteWriter& w, const WeightTensor& t, const std::vector<double>& bias) {
  for (double v : t.values) w.put(v);
  std::vector<std::uint8_t> bits((t.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t.mask[i]) bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  w.bytes(bits.data(), bits.size());
  w.put<std::uint8_t>(bias.empty() ? 0 : 1);
  for (double b : bias) w.put(b);
  const auto ex = exponents(t);
  w.put<std::uint8_t>(ex ? 1 : 0);
  if (ex) {
    for (auto e : *ex) w.put(e);
  }
}

std::uint8_t flag(Reader& r, const char* what) {
  const auto f = r.get<std::uint8_t>(what);
  if (f > 1) throw WeightsFormatError(std::string(what) + " must be 0 or 1");
  return f;
}

void get_weights(Reader& r, WeightTensor& t, std::vector<double>& bias, std::size_t outs) {
  std::size_t n = 1;
  for (auto d : t.shape) {
    if (d == 0) throw WeightsFormatError("weight tensor has a zero dimension");
    if (n > (std::size_t{1} << 32) / d) throw WeightsFormatError("weight tensor is implausibly large");
    n *= d;
  }
  if (r.remaining() / sizeof(double) < n) throw WeightsFormatError("truncated input while reading weights");
  t.values.resize(n);
  for (auto& v : t.values) {
    v = r.get<double>("weights");
    if (!std::isfinite(v)) throw WeightsFormatError("weights must be finite");
  }
  const std::uint8_t* bits = r.take((n + 7) / 8, "mask");
  t.mask.resize(n);
  for (std::size_t i = 0; i < n; ++i) t.mask[i] = (bits[i / 8] >> (i % 8)) & 1;
  for (std::size_t i = n; i < ((n + 7) / 8) * 8; ++i) {
    if ((bits[i / 8] >> (i % 8)) & 1) throw WeightsFormatError("mask padding bits must be zero");
  }
  if (flag(r, "bias flag")) {
    bias.resize(outs);
    for (auto& b : bias) {
      b = r.get<double>("bias");
      if (!std::isfinite(b)) throw WeightsFormatError("bias must be finite");
    }
  }
  const bool quantized = flag(r, "quantization flag");
  const auto derived = exponents(t);
  if (quantized) {
    if (!derived) throw WeightsFormatError("exponent array present but weights are not powers of two");
    for (std::size_t i = 0; i < n; ++i) {
      if (r.get<std::int16_t>("exponents") != (*derived)[i]) {
        throw WeightsFormatError("exponent " + std::to_string(i) + " disagrees with its weight");
      }
    }
  } else if (derived) {
    throw WeightsFormatError("power-of-two weights must carry their exponent array");
  }
}

std::size_t dim(Reader& r, const char* what) { return r.get<std::uint32_t>(what); }

}  // namespace

std::vector<std::uint8_t> weights_bytes(const NetworkSpec& net) {
  net.shapes();
  if (net.layers.size() + 1 > UINT16_MAX) throw WeightsFormatError("too many layers");
  io::ByteWriter w;
  w.bytes(kMagic, 4);
  w.put<std::uint16_t>(kWeightsVersion);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(net.layers.size() + 1));
  w.put<std::uint8_t>(kInput);
  w.put(u32(net.input.c));
  w.put(u32(net.input.h));
  w.put(u32(net.input.w));
  for (const auto& layer : net.layers) {
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, Conv2d>) {
            w.put<std::uint8_t>(kConv);
            for (auto d : {l.out_maps, l.in_maps, l.kh, l.kw, l.stride, l.padding}) w.put(u32(d));
            put_weights(w, l.weights, l.bias);
          } else if constexpr (std::is_same_v<T, ScaledAvgPool>) {
            w.put<std::uint8_t>(kPool);
            for (auto d : {l.window, l.stride, l.padding}) w.put(u32(d));
            w.put<std::uint8_t>(l.reciprocal ? 1 : 0);
          } else if constexpr (std::is_same_v<T, Dense>) {
            w.put<std::uint8_t>(kDense);
            w.put(u32(l.out));
            w.put(u32(l.in));
            put_weights(w, l.weights, l.bias);
          } else if constexpr (std::is_same_v<T, BatchNormAffine>) {
            w.put<std::uint8_t>(kBatchNorm);
            w.put(u32(l.scale.size()));
            for (double v : l.scale) w.put(v);
            for (double v : l.shift) w.put(v);
          } else {
            w.put<std::uint8_t>(kAct);
            w.put(u32(l.poly.coeffs.size()));
            for (double c : l.poly.coeffs) w.put(c);
            w.put(l.poly.interval_a);
            w.put(l.poly.delta);
            w.put<std::uint8_t>(l.poly.is_pow2() ? 1 : 0);
            for (const auto& t : l.poly.pow2) {
              w.put(static_cast<std::int8_t>(t.sign));
              w.put(static_cast<std::int16_t>(t.exponent));
            }
          }
        },
        layer);
  }
  return std::move(w.data());
}

NetworkSpec weights_from_bytes(std::span<const std::uint8_t> bytes) {
  Reader r(bytes.data(), bytes.size());
  if (std::memcmp(r.take(4, "magic"), kMagic, 4) != 0) throw WeightsFormatError("not a weights file (bad magic)");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kWeightsVersion) {
    throw WeightsFormatError("unsupported weights version " + std::to_string(version));
  }
  const auto records = r.get<std::uint16_t>("record count");
  if (records == 0) throw WeightsFormatError("missing input record");
  if (r.get<std::uint8_t>("tag") != kInput) throw WeightsFormatError("first record must be the input");
  NetworkSpec net;
  net.input.c = dim(r, "input shape");
  net.input.h = dim(r, "input shape");
  net.input.w = dim(r, "input shape");

  for (std::size_t i = 1; i < records; ++i) {
    const auto tag = r.get<std::uint8_t>("tag");
    switch (tag) {
      case kConv: {
        Conv2d c;
        c.out_maps = dim(r, "conv");
        c.in_maps = dim(r, "conv");
        c.kh = dim(r, "conv");
        c.kw = dim(r, "conv");
        c.stride = dim(r, "conv");
        c.padding = dim(r, "conv");
        c.weights.shape = {c.out_maps, c.in_maps, c.kh, c.kw};
        get_weights(r, c.weights, c.bias, c.out_maps);
        net.layers.push_back(std::move(c));
        break;
      }
      case kPool: {
        ScaledAvgPool p;
        p.window = dim(r, "pool");
        p.stride = dim(r, "pool");
        p.padding = dim(r, "pool");
        p.reciprocal = flag(r, "reciprocal flag");
        net.layers.push_back(p);
        break;
      }
      case kDense: {
        Dense d;
        d.out = dim(r, "dense");
        d.in = dim(r, "dense");
        d.weights.shape = {d.out, d.in};
        get_weights(r, d.weights, d.bias, d.out);
        net.layers.push_back(std::move(d));
        break;
      }
      case kBatchNorm: {
        BatchNormAffine bn;
        const std::size_t c = dim(r, "batch-norm");
        if (r.remaining() / 16 < c) throw WeightsFormatError("truncated input while reading batch-norm");
        bn.scale.resize(c);
        bn.shift.resize(c);
        for (auto& v : bn.scale) v = r.get<double>("batch-norm");
        for (auto& v : bn.shift) v = r.get<double>("batch-norm");
        net.layers.push_back(std::move(bn));
        break;
      }
      case kAct: {
        PolyActivation a;
        const std::size_t k = dim(r, "activation");
        if (k == 0 || k > 16) throw WeightsFormatError("activation needs 1 to 16 coefficients");
        a.poly.coeffs.resize(k);
        for (auto& c : a.poly.coeffs) c = r.get<double>("activation");
        a.poly.interval_a = r.get<double>("activation interval");
        a.poly.delta = r.get<double>("activation delta");
        if (flag(r, "pow2 flag")) {
          for (std::size_t j = 0; j < k; ++j) {
            Pow2Term t;
            t.sign = r.get<std::int8_t>("activation terms");
            t.exponent = r.get<std::int16_t>("activation terms");
            if (t.sign < -1 || t.sign > 1 || t.value() != a.poly.coeffs[j]) {
              throw WeightsFormatError("activation power-of-two terms disagree with coefficients");
            }
            a.poly.pow2.push_back(t);
          }
        }
        net.layers.push_back(std::move(a));
        break;
      }
      default:
        throw WeightsFormatError("unknown layer tag " + std::to_string(tag));
    }
  }
  if (r.remaining() != 0) throw WeightsFormatError("trailing bytes after the last record");
  try {
    net.shapes();
  } catch (const ModelError& e) {
    throw WeightsFormatError(std::string("inconsistent model: ") + e.what());
  }
  return net;
}

void save_weights(const std::string& path, const NetworkSpec& net) {
  const auto bytes = weights_bytes(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WeightsFormatError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw WeightsFormatError("write failed for " + path);
}

NetworkSpec load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WeightsFormatError("cannot open " + path);
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return weights_from_bytes(bytes);
}

}  // namespace fcn
