#include "fcn/ring.hpp"

#include <algorithm>
#include <bit>
#include <string>

namespace fcn {

namespace {

std::size_t bit_reverse(std::size_t x, int bits) {
  std::size_t r = 0;
  for (int i = 0; i < bits; ++i) {
    r = (r << 1) | (x & 1);
    x >>= 1;
  }
  return r;
}

std::uint64_t find_2n_root(const Modulus& mod, std::size_t n) {
  const std::uint64_t q = mod.value();
  const std::uint64_t exp = (q - 1) / (2 * n);
  for (std::uint64_t x = 2; x < q; ++x) {
    const std::uint64_t g = mod.pow(x, exp);
    if (mod.pow(g, n) == q - 1) return g;
  }
  throw RingError("no primitive 2n-th root of unity");
}

void require_same(const RingPoly& a, const RingPoly& b, const char* what) {
  if (!a.context() || !b.context() || !a.context()->same_as(*b.context())) {
    throw RingError(std::string(what) + ": ring parameter mismatch");
  }
}

}  // namespace

ModulusLimb::ModulusLimb(std::uint64_t q, std::size_t n) : mod_(q), n_(n) {
  if (n < 2 || !std::has_single_bit(n)) {
    throw RingError("ring degree must be a power of two");
  }
  if (!is_prime(q)) throw RingError("limb modulus " + std::to_string(q) + " is not prime");
  if ((q - 1) % (2 * n) != 0) {
    throw RingError("limb modulus " + std::to_string(q) +
                    " is not 1 mod 2n; the NTT does not exist");
  }
  root_ = find_2n_root(mod_, n);
  const int log_n = std::countr_zero(n);
  const std::uint64_t root_inv = mod_.inv(root_);
  fwd_.resize(n);
  inv_.resize(n);
  fwd_shoup_.resize(n);
  inv_shoup_.resize(n);
  std::uint64_t p = 1, pi = 1;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = bit_reverse(i, log_n);
    fwd_[r] = p;
    inv_[r] = pi;
    p = mod_.mul(p, root_);
    pi = mod_.mul(pi, root_inv);
  }
  for (std::size_t i = 0; i < n; ++i) {
    fwd_shoup_[i] = mod_.shoup(fwd_[i]);
    inv_shoup_[i] = mod_.shoup(inv_[i]);
  }
  n_inv_ = mod_.inv(n % q);
  n_inv_shoup_ = mod_.shoup(n_inv_);
}

// Cooley-Tukey, natural order in, bit-reversed order out.
void ModulusLimb::forward(std::span<std::uint64_t> a) const {
  const std::uint64_t q = mod_.value();
  std::size_t t = n_;
  for (std::size_t m = 1; m < n_; m <<= 1) {
    t >>= 1;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j1 = 2 * i * t;
      const std::uint64_t w = fwd_[m + i];
      const std::uint64_t ws = fwd_shoup_[m + i];
      std::uint64_t* x = a.data() + j1;
      std::uint64_t* y = x + t;
      for (std::size_t j = 0; j < t; ++j) {
        const std::uint64_t u = x[j];
        const std::uint64_t v = mod_.mul_shoup(y[j], w, ws);
        const std::uint64_t s = u + v;
        x[j] = s >= q ? s - q : s;
        y[j] = u >= v ? u - v : u + q - v;
      }
    }
  }
}

// Gentleman-Sande, bit-reversed order in, natural order out.
void ModulusLimb::inverse(std::span<std::uint64_t> a) const {
  const std::uint64_t q = mod_.value();
  std::size_t t = 1;
  for (std::size_t m = n_; m > 1; m >>= 1) {
    const std::size_t h = m >> 1;
    std::size_t j1 = 0;
    for (std::size_t i = 0; i < h; ++i) {
      const std::uint64_t w = inv_[h + i];
      const std::uint64_t ws = inv_shoup_[h + i];
      std::uint64_t* x = a.data() + j1;
      std::uint64_t* y = x + t;
      for (std::size_t j = 0; j < t; ++j) {
        const std::uint64_t u = x[j];
        const std::uint64_t v = y[j];
        const std::uint64_t s = u + v;
        x[j] = s >= q ? s - q : s;
        y[j] = mod_.mul_shoup(u >= v ? u - v : u + q - v, w, ws);
      }
      j1 += 2 * t;
    }
    t <<= 1;
  }
  for (auto& v : a) v = mod_.mul_shoup(v, n_inv_, n_inv_shoup_);
}

RingContext::RingContext(std::size_t n, std::span<const std::uint64_t> primes)
    : n_(n) {
  if (primes.empty()) throw RingError("ring context needs at least one limb");
  limbs_.reserve(primes.size());
  for (auto q : primes) {
    if (std::count(primes.begin(), primes.end(), q) != 1) {
      throw RingError("limb moduli must be distinct");
    }
    limbs_.emplace_back(q, n);
  }
}

std::vector<std::uint64_t> RingContext::primes() const {
  std::vector<std::uint64_t> out;
  out.reserve(limbs_.size());
  for (const auto& l : limbs_) out.push_back(l.value());
  return out;
}

bool RingContext::same_as(const RingContext& other) const {
  if (this == &other) return true;
  if (n_ != other.n_ || limbs_.size() != other.limbs_.size()) return false;
  for (std::size_t i = 0; i < limbs_.size(); ++i) {
    if (limbs_[i].value() != other.limbs_[i].value()) return false;
  }
  return true;
}

RingPoly::RingPoly(RingContextPtr ctx, Domain domain)
    : ctx_(std::move(ctx)), domain_(domain) {
  if (!ctx_) throw RingError("null ring context");
  data_.assign(ctx_->degree() * ctx_->limb_count(), 0);
}

RingPoly RingPoly::from_signed(RingContextPtr ctx,
                               std::span<const std::int64_t> coeffs) {
  RingPoly p(std::move(ctx));
  if (coeffs.size() > p.degree()) {
    throw RingError("more coefficients than the ring degree");
  }
  for (std::size_t l = 0; l < p.limb_count(); ++l) {
    const Modulus& m = p.ctx_->limb(l).modulus();
    auto dst = p.limb(l);
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      dst[i] = m.from_signed(coeffs[i]);
    }
  }
  return p;
}

RingPoly RingPoly::from_limbs(RingContextPtr ctx,
                              std::vector<std::uint64_t> data, Domain domain) {
  RingPoly p(std::move(ctx), domain);
  if (data.size() != p.data_.size()) {
    throw RingError("limb data has the wrong length");
  }
  for (std::size_t l = 0; l < p.limb_count(); ++l) {
    const std::uint64_t q = p.ctx_->limb(l).value();
    for (std::size_t i = 0; i < p.degree(); ++i) {
      if (data[l * p.degree() + i] >= q) {
        throw RingError("coefficient not reduced below its limb modulus");
      }
    }
  }
  p.data_ = std::move(data);
  return p;
}

bool RingPoly::is_zero() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](std::uint64_t v) { return v == 0; });
}

bool operator==(const RingPoly& a, const RingPoly& b) {
  if (!a.ctx_ || !b.ctx_) return !a.ctx_ && !b.ctx_;
  return a.ctx_->same_as(*b.ctx_) && a.domain_ == b.domain_ &&
         a.data_ == b.data_;
}

RingPoly ntt_forward(const RingPoly& p) {
  if (p.domain() != Domain::Coefficient) {
    throw RingError("ntt_forward: input is already in the NTT domain");
  }
  RingPoly r = p;
  for (std::size_t l = 0; l < r.limb_count(); ++l) {
    r.ctx_->limb(l).forward(r.limb(l));
  }
  r.domain_ = Domain::Ntt;
  return r;
}

RingPoly ntt_inverse(const RingPoly& p) {
  if (p.domain() != Domain::Ntt) {
    throw RingError("ntt_inverse: input is not in the NTT domain");
  }
  RingPoly r = p;
  for (std::size_t l = 0; l < r.limb_count(); ++l) {
    r.ctx_->limb(l).inverse(r.limb(l));
  }
  r.domain_ = Domain::Coefficient;
  return r;
}

namespace {

template <typename Op>
RingPoly zip_limbs(const RingPoly& a, const RingPoly& b, const char* what,
                   Op op) {
  require_same(a, b, what);
  if (a.domain() != b.domain()) {
    throw RingError(std::string(what) + ": domain mismatch");
  }
  RingPoly r = a;
  for (std::size_t l = 0; l < r.limb_count(); ++l) {
    const Modulus& m = a.context()->limb(l).modulus();
    auto dst = r.limb(l);
    auto src = b.limb(l);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = op(m, dst[i], src[i]);
  }
  return r;
}

}  // namespace

RingPoly poly_add(const RingPoly& a, const RingPoly& b) {
  return zip_limbs(a, b, "poly_add",
                   [](const Modulus& m, std::uint64_t x, std::uint64_t y) {
                     return m.add(x, y);
                   });
}

RingPoly poly_sub(const RingPoly& a, const RingPoly& b) {
  return zip_limbs(a, b, "poly_sub",
                   [](const Modulus& m, std::uint64_t x, std::uint64_t y) {
                     return m.sub(x, y);
                   });
}

RingPoly poly_mul_pointwise(const RingPoly& a, const RingPoly& b) {
  if (a.domain() != Domain::Ntt || b.domain() != Domain::Ntt) {
    throw RingError("poly_mul_pointwise: operands must be in the NTT domain");
  }
  return zip_limbs(a, b, "poly_mul_pointwise",
                   [](const Modulus& m, std::uint64_t x, std::uint64_t y) {
                     return m.mul(x, y);
                   });
}

RingPoly poly_negate(const RingPoly& a) {
  RingPoly r = a;
  for (std::size_t l = 0; l < r.limb_count(); ++l) {
    const Modulus& m = a.context()->limb(l).modulus();
    for (auto& v : r.limb(l)) v = m.neg(v);
  }
  return r;
}

RingPoly scalar_mul(const RingPoly& a, std::int64_t scalar) {
  RingPoly r = a;
  for (std::size_t l = 0; l < r.limb_count(); ++l) {
    const Modulus& m = a.context()->limb(l).modulus();
    const std::uint64_t s = m.from_signed(scalar);
    const std::uint64_t ss = m.shoup(s);
    for (auto& v : r.limb(l)) v = m.mul_shoup(v, s, ss);
  }
  return r;
}

RingPoly poly_mul_ntt(const RingPoly& a, const RingPoly& b) {
  require_same(a, b, "poly_mul_ntt");
  const RingPoly fa = a.domain() == Domain::Ntt ? a : ntt_forward(a);
  const RingPoly fb = b.domain() == Domain::Ntt ? b : ntt_forward(b);
  return ntt_inverse(poly_mul_pointwise(fa, fb));
}

RingPoly poly_mul_naive(const RingPoly& a, const RingPoly& b) {
  require_same(a, b, "poly_mul_naive");
  if (a.domain() != Domain::Coefficient || b.domain() != Domain::Coefficient) {
    throw RingError("poly_mul_naive: operands must be in the coefficient domain");
  }
  const std::size_t n = a.degree();
  RingPoly r(a.context());
  for (std::size_t l = 0; l < a.limb_count(); ++l) {
    const Modulus& m = a.context()->limb(l).modulus();
    auto x = a.limb(l);
    auto y = b.limb(l);
    auto z = r.limb(l);
    for (std::size_t i = 0; i < n; ++i) {
      if (x[i] == 0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        const std::uint64_t prod = m.mul(x[i], y[j]);
        const std::size_t k = i + j;
        if (k < n) {
          z[k] = m.add(z[k], prod);
        } else {
          z[k - n] = m.sub(z[k - n], prod);
        }
      }
    }
  }
  return r;
}

RingPoly poly_mul_monomial(const RingPoly& c, std::size_t k,
                           std::span<const std::uint64_t> coeff_residues) {
  if (c.domain() != Domain::Coefficient) {
    throw RingError("poly_mul_monomial: input must be in the coefficient domain");
  }
  const std::size_t n = c.degree();
  if (k >= n) throw RingError("poly_mul_monomial: exponent out of range");
  if (coeff_residues.size() != c.limb_count()) {
    throw RingError("poly_mul_monomial: need one coefficient residue per limb");
  }
  RingPoly d(c.context());
  for (std::size_t l = 0; l < c.limb_count(); ++l) {
    const Modulus& m = c.context()->limb(l).modulus();
    const std::uint64_t b = coeff_residues[l];
    if (b >= m.value()) throw RingError("poly_mul_monomial: coefficient not reduced");
    const std::uint64_t bs = m.shoup(b);
    auto src = c.limb(l);
    auto dst = d.limb(l);
    const std::size_t split = n - k;
    // j = i + k < n
    for (std::size_t i = 0; i < split; ++i) {
      dst[i + k] = m.mul_shoup(src[i], b, bs);
    }
    // j >= n wraps to j - n with a sign flip
    for (std::size_t i = split; i < n; ++i) {
      dst[i - split] = m.neg(m.mul_shoup(src[i], b, bs));
    }
  }
  return d;
}

RingPoly poly_mul_monomial(const RingPoly& c, std::size_t k,
                           std::int64_t coeff) {
  std::vector<std::uint64_t> residues(c.limb_count());
  for (std::size_t l = 0; l < residues.size(); ++l) {
    residues[l] = c.context()->limb(l).modulus().from_signed(coeff);
  }
  return poly_mul_monomial(c, k, residues);
}

}  // namespace fcn
