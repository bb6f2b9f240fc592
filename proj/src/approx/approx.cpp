#include "fcn/approx.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

namespace fcn {

namespace {

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

double horner(const std::vector<double>& c, double x) {
  double r = 0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) r = r * x + *it;
  return r;
}

double horner_derivative(const std::vector<double>& c, double x) {
  double r = 0;
  for (std::size_t j = c.size(); j-- > 1;) r = r * x + static_cast<double>(j) * c[j];
  return r;
}

// f and f' sampled once on the uniform grid; shared by every candidate.
struct Grid {
  const ActivationFn& f;
  std::vector<double> x, fx, dfx;

  Grid(const ActivationFn& fn, double a, int points) : f(fn) {
    if (points < 2) throw ApproxError("grid needs at least two points");
    if (!(a > 0)) throw ApproxError("interval half-width must be positive");
    x.resize(points);
    fx.resize(points);
    dfx.resize(points);
    for (int i = 0; i < points; ++i) {
      // Endpoints are hit exactly.
      x[i] = i == points - 1 ? a : -a + 2 * a * i / (points - 1);
      fx[i] = f(x[i]);
      dfx[i] = f.derivative(x[i]);
    }
  }

  double err(const std::vector<double>& c, std::size_t i) const {
    return fx[i] - horner(c, x[i]);
  }

  // Root of f' - p' in [lo, hi] given opposite signs at the ends.
  double stationary(const std::vector<double>& c, double lo, double hi) const {
    double dlo = f.derivative(lo) - horner_derivative(c, lo);
    for (int it = 0; it < 60 && hi - lo > 1e-15 * std::max(1.0, std::fabs(lo)); ++it) {
      const double mid = 0.5 * (lo + hi);
      const double dm = f.derivative(mid) - horner_derivative(c, mid);
      if ((dm < 0) == (dlo < 0)) {
        lo = mid;
        dlo = dm;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  }

  // Stops early once the error exceeds cutoff; the return value is then
  // only known to be above it.
  double max_abs_error(const std::vector<double>& c, double cutoff = INFINITY) const {
    double worst = 0;
    double dprev = dfx[0] - horner_derivative(c, x[0]);
    worst = std::fabs(err(c, 0));
    for (std::size_t i = 1; i < x.size(); ++i) {
      worst = std::max(worst, std::fabs(err(c, i)));
      const double d = dfx[i] - horner_derivative(c, x[i]);
      if ((d < 0) != (dprev < 0) && d != 0 && dprev != 0) {
        const double r = stationary(c, x[i - 1], x[i]);
        worst = std::max(worst, std::fabs(f(r) - horner(c, r)));
      }
      dprev = d;
      if (worst > cutoff) return worst;
    }
    return worst;
  }
};

// Solves the (m x m) system in place with partial pivoting.
std::vector<double> solve(std::vector<std::vector<double>> A, std::vector<double> b) {
  const std::size_t m = b.size();
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < m; ++r) {
      if (std::fabs(A[r][col]) > std::fabs(A[piv][col])) piv = r;
    }
    if (std::fabs(A[piv][col]) < 1e-300) throw ApproxError("singular Remez system");
    std::swap(A[piv], A[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < m; ++r) {
      const double k = A[r][col] / A[col][col];
      for (std::size_t c = col; c < m; ++c) A[r][c] -= k * A[col][c];
      b[r] -= k * b[col];
    }
  }
  std::vector<double> x(m);
  for (std::size_t r = m; r-- > 0;) {
    double s = b[r];
    for (std::size_t c = r + 1; c < m; ++c) s -= A[r][c] * x[c];
    x[r] = s / A[r][r];
  }
  return x;
}

}  // namespace

ActivationFn ActivationFn::make(ActivationKind kind) {
  ActivationFn fn;
  fn.kind_ = kind;
  switch (kind) {
    case ActivationKind::ReLU:
      fn.name_ = "relu";
      fn.f_ = [](double x) { return std::max(0.0, x); };
      fn.df_ = [](double x) { return x > 0 ? 1.0 : 0.0; };
      break;
    case ActivationKind::Swish:
      fn.name_ = "swish";
      fn.f_ = [](double x) { return x * sigmoid(x); };
      fn.df_ = [](double x) {
        const double s = sigmoid(x), f = x * s;
        return f + s * (1 - f);
      };
      break;
    case ActivationKind::Softplus:
      fn.name_ = "softplus";
      fn.f_ = [](double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); };
      fn.df_ = sigmoid;
      break;
    case ActivationKind::Square:
      fn.name_ = "square";
      fn.f_ = [](double x) { return x * x; };
      fn.df_ = [](double x) { return 2 * x; };
      break;
    case ActivationKind::Abs:
      fn.name_ = "abs";
      fn.f_ = [](double x) { return std::fabs(x); };
      fn.df_ = [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); };
      break;
  }
  return fn;
}

ActivationFn ActivationFn::parse(std::string_view name) {
  for (auto k : {ActivationKind::ReLU, ActivationKind::Swish, ActivationKind::Softplus,
                 ActivationKind::Square, ActivationKind::Abs}) {
    ActivationFn fn = make(k);
    if (fn.name() == name) return fn;
  }
  throw ApproxError("unknown activation '" + std::string(name) +
                    "' (expected relu, swish, softplus, square or abs)");
}

double Pow2Term::value() const {
  return sign == 0 ? 0.0 : sign * std::ldexp(1.0, exponent);
}

double PolyApprox::operator()(double x) const { return horner(coeffs, x); }

PolyApprox PolyApprox::from_pow2(std::vector<Pow2Term> terms, double a) {
  PolyApprox p;
  p.interval_a = a;
  for (const auto& t : terms) p.coeffs.push_back(t.value());
  p.pow2 = std::move(terms);
  return p;
}

double max_error(const ActivationFn& f, const std::vector<double>& coeffs,
                 double a, int grid_points) {
  return Grid(f, a, grid_points).max_abs_error(coeffs);
}

RemezResult remez_minimax(const ActivationFn& f, int degree, double a,
                          int max_iterations, int grid_points) {
  if (degree < 0 || degree > 8) throw ApproxError("degree must lie in [0, 8]");
  const Grid grid(f, a, grid_points);
  const std::size_t m = static_cast<std::size_t>(degree) + 2;
  const std::size_t g = grid.x.size();

  // Work in u = x / a for conditioning; convert at the end.
  std::vector<double> ref(m);
  for (std::size_t i = 0; i < m; ++i) {
    ref[i] = -a * std::cos(M_PI * static_cast<double>(i) / static_cast<double>(m - 1));
  }

  RemezResult out;
  std::vector<double> c(static_cast<std::size_t>(degree) + 1, 0.0);
  auto to_x = [&](const std::vector<double>& u) {
    std::vector<double> r(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) r[j] = u[j] / std::pow(a, static_cast<double>(j));
    return r;
  };

  for (int iter = 1; iter <= max_iterations; ++iter) {
    out.iterations = iter;
    std::vector<std::vector<double>> A(m, std::vector<double>(m));
    std::vector<double> b(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double u = ref[i] / a;
      double pw = 1;
      for (std::size_t j = 0; j + 1 < m; ++j, pw *= u) A[i][j] = pw;
      A[i][m - 1] = (i % 2 == 0) ? 1.0 : -1.0;
      b[i] = f(ref[i]);
    }
    const std::vector<double> sol = solve(A, b);
    c = to_x(std::vector<double>(sol.begin(), sol.end() - 1));

    // Extrema of e = f - p: one per maximal same-sign run of the grid,
    // refined to the stationary point inside the run when there is one.
    std::vector<double> e(g);
    double emax = 0;
    for (std::size_t i = 0; i < g; ++i) {
      e[i] = grid.err(c, i);
      emax = std::max(emax, std::fabs(e[i]));
    }
    if (emax < 1e-13) {  // f is (numerically) a polynomial of this degree
      out.converged = true;
      ref.clear();
      break;
    }
    struct Ext { double x, e; };
    std::vector<Ext> ext;
    const double zero_tol = emax * 1e-12;
    std::size_t i = 0;
    while (i < g) {
      if (std::fabs(e[i]) <= zero_tol) { ++i; continue; }
      const bool neg = e[i] < 0;
      std::size_t best = i;
      std::size_t j = i;
      while (j < g && std::fabs(e[j]) > zero_tol && (e[j] < 0) == neg) {
        if (std::fabs(e[j]) > std::fabs(e[best])) best = j;
        ++j;
      }
      Ext x{grid.x[best], e[best]};
      if (best > 0 && best + 1 < g) {
        const double lo = grid.x[best - 1], hi = grid.x[best + 1];
        const double dlo = f.derivative(lo) - horner_derivative(c, lo);
        const double dhi = f.derivative(hi) - horner_derivative(c, hi);
        if ((dlo < 0) != (dhi < 0)) {
          const double r = grid.stationary(c, lo, hi);
          const double er = f(r) - horner(c, r);
          if (std::fabs(er) > std::fabs(x.e)) x = {r, er};
        }
      }
      ext.push_back(x);
      i = j;
    }
    if (ext.size() < m) {
      // Too few sign changes for a full exchange: swap the global maximum
      // into the reference set, keeping the signs alternating.
      std::size_t gi = 0;
      for (std::size_t t = 1; t < g; ++t) {
        if (std::fabs(e[t]) > std::fabs(e[gi])) gi = t;
      }
      const double xs = grid.x[gi], es = e[gi];
      auto sign_at = [&](std::size_t r) { return f(ref[r]) - horner(c, ref[r]) < 0; };
      const bool neg = es < 0;
      if (xs < ref.front()) {
        if (sign_at(0) == neg) {
          ref.front() = xs;
        } else {
          ref.pop_back();
          ref.insert(ref.begin(), xs);
        }
      } else if (xs > ref.back()) {
        if (sign_at(m - 1) == neg) {
          ref.back() = xs;
        } else {
          ref.erase(ref.begin());
          ref.push_back(xs);
        }
      } else {
        std::size_t r = 0;
        while (r + 1 < m && ref[r + 1] < xs) ++r;
        if (sign_at(r) == neg) ref[r] = xs;
        else ref[std::min(r + 1, m - 1)] = xs;
      }
      continue;
    }
    // Trim to m points, keeping the global maximum: drop the weaker end.
    while (ext.size() > m) {
      if (std::fabs(ext.front().e) < std::fabs(ext.back().e)) {
        ext.erase(ext.begin());
      } else {
        ext.pop_back();
      }
    }
    double lo_err = INFINITY, hi_err = 0;
    for (std::size_t k = 0; k < m; ++k) {
      ref[k] = ext[k].x;
      lo_err = std::min(lo_err, std::fabs(ext[k].e));
      hi_err = std::max(hi_err, std::fabs(ext[k].e));
    }
    const double true_max = grid.max_abs_error(c);
    if (true_max - lo_err <= 1e-12 * std::max(1.0, true_max) ||
        (hi_err >= true_max * (1 - 1e-14) && hi_err - lo_err <= 1e-13)) {
      out.converged = true;
      break;
    }
  }

  out.approx.coeffs = c;
  out.approx.interval_a = a;
  out.approx.grid_points = grid_points;
  out.approx.delta = grid.max_abs_error(c);
  out.reference = ref;
  for (double x : ref) out.reference_errors.push_back(f(x) - horner(c, x));
  return out;
}

Pow2Term round_pow2(double c) {
  if (c == 0 || !std::isfinite(c)) return {};
  int e = 0;
  const double m = std::frexp(std::fabs(c), &e);  // |c| = m * 2^e, m in [0.5, 1)
  // log2|c| = e + log2(m) with log2(m) in [-1, 0); the midpoint is m = 2^-1/2.
  return {c < 0 ? -1 : 1, m <= M_SQRT1_2 ? e - 1 : e};
}

PolyApprox round_coeffs_pow2(const ActivationFn& f, const PolyApprox& p) {
  std::vector<Pow2Term> terms;
  for (double c : p.coeffs) terms.push_back(round_pow2(c));
  PolyApprox r = PolyApprox::from_pow2(std::move(terms), p.interval_a);
  r.grid_points = p.grid_points;
  r.delta = max_error(f, r.coeffs, r.interval_a, r.grid_points);
  return r;
}

PolyApprox scan_optimal_pow2(const ActivationFn& f, const PolyApprox& p,
                             const ScanOptions& opts) {
  if (opts.window < 0) throw ApproxError("scan window must be non-negative");
  const PolyApprox hat = p.is_pow2() ? p : round_coeffs_pow2(f, p);
  const Grid grid(f, hat.interval_a, hat.grid_points);
  const double hat_delta = grid.max_abs_error(hat.coeffs);
  const double bound = opts.bound.value_or(hat_delta);

  // Options per coefficient: zero stays zero, otherwise both signs times the
  // exponent window.
  const std::size_t k = hat.pow2.size();
  std::vector<std::vector<Pow2Term>> choices(k);
  for (std::size_t j = 0; j < k; ++j) {
    if (hat.pow2[j].sign == 0) {
      choices[j] = {Pow2Term{}};
      continue;
    }
    for (int e = hat.pow2[j].exponent - opts.window; e <= hat.pow2[j].exponent + opts.window; ++e) {
      choices[j].push_back({-1, e});
      choices[j].push_back({1, e});
    }
  }

  // Ordering key: exponents from the highest degree down, then signs.
  auto key = [&](const std::vector<Pow2Term>& t) {
    std::vector<int> kv;
    for (std::size_t j = t.size(); j-- > 0;) kv.push_back(t[j].exponent);
    for (std::size_t j = t.size(); j-- > 0;) kv.push_back(t[j].sign);
    return kv;
  };

  std::optional<std::vector<Pow2Term>> best;
  double best_delta = INFINITY;
  std::vector<std::size_t> idx(k, 0);
  std::vector<Pow2Term> cur(k);
  std::vector<double> coeffs(k);
  while (true) {
    for (std::size_t j = 0; j < k; ++j) {
      cur[j] = choices[j][idx[j]];
      coeffs[j] = cur[j].value();
    }
    const double d = grid.max_abs_error(coeffs, std::min(bound, best_delta));
    if (d <= bound && (d < best_delta || (d == best_delta && key(cur) < key(*best)))) {
      best = cur;
      best_delta = d;
    }
    std::size_t j = 0;
    while (j < k && ++idx[j] == choices[j].size()) idx[j++] = 0;
    if (j == k) break;
  }
  if (!best) {
    throw ApproxError("no power-of-two polynomial in the scan window meets the error bound");
  }
  PolyApprox r = PolyApprox::from_pow2(*best, hat.interval_a);
  r.grid_points = hat.grid_points;
  r.delta = best_delta;
  return r;
}

std::string format_pow2(const PolyApprox& p) {
  std::ostringstream os;
  bool first = true;
  for (std::size_t j = p.pow2.size(); j-- > 0;) {
    const Pow2Term& t = p.pow2[j];
    if (t.sign == 0) continue;
    if (!first) os << (t.sign < 0 ? " - " : " + ");
    else if (t.sign < 0) os << "-";
    first = false;
    os << "2^" << t.exponent;
    if (j >= 1) os << " x";
    if (j >= 2) os << "^" << j;
  }
  if (first) os << "0";
  return os.str();
}

std::string format_real(const PolyApprox& p) {
  std::ostringstream os;
  os.precision(10);
  bool first = true;
  for (std::size_t j = p.coeffs.size(); j-- > 0;) {
    const double c = p.coeffs[j];
    if (!first) os << (c < 0 ? " - " : " + ");
    else if (c < 0) os << "-";
    first = false;
    os << std::fabs(c);
    if (j >= 1) os << " x";
    if (j >= 2) os << "^" << j;
  }
  return os.str();
}

}  // namespace fcn
