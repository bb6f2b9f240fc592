#pragma once

// Low-degree polynomial stand-ins for activation functions: real minimax fits
// (Remez exchange), rounding to signed powers of two, and an exhaustive
// search for the best power-of-two polynomial near the rounded one.

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fcn {

class ApproxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ActivationKind { ReLU, Swish, Softplus, Square, Abs };

class ActivationFn {
 public:
  static ActivationFn make(ActivationKind kind);
  /// "relu", "swish", "softplus", "square", "abs".
  static ActivationFn parse(std::string_view name);

  ActivationKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  double operator()(double x) const { return f_(x); }
  double derivative(double x) const { return df_(x); }

 private:
  ActivationKind kind_{};
  std::string name_;
  std::function<double(double)> f_, df_;
};

/// sign * 2^exponent; sign 0 means the coefficient is zero.
struct Pow2Term {
  int sign = 0;
  int exponent = 0;
  double value() const;
  friend bool operator==(const Pow2Term&, const Pow2Term&) = default;
};

inline constexpr double kDefaultInterval = 4.125;
inline constexpr int kDefaultGridPoints = 10001;

struct PolyApprox {
  std::vector<double> coeffs;  // ascending powers: c0 + c1 x + c2 x^2 ...
  std::vector<Pow2Term> pow2;  // same order; empty for real coefficients
  double interval_a = kDefaultInterval;
  double delta = 0;
  int grid_points = kDefaultGridPoints;

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }
  bool is_pow2() const { return !pow2.empty(); }
  double operator()(double x) const;

  static PolyApprox from_pow2(std::vector<Pow2Term> terms, double a);
};

/// max |f - p| over a uniform grid with both endpoints, plus any interior
/// stationary points of f - p located by bisection on the grid.
double max_error(const ActivationFn& f, const std::vector<double>& coeffs,
                 double a, int grid_points = kDefaultGridPoints);

struct RemezResult {
  PolyApprox approx;
  bool converged = false;
  int iterations = 0;
  std::vector<double> reference;         // final alternation points
  std::vector<double> reference_errors;  // f - p at those points
};

RemezResult remez_minimax(const ActivationFn& f, int degree, double a,
                          int max_iterations = 100,
                          int grid_points = kDefaultGridPoints);

/// Each coefficient to sign * 2^k with k the nearest integer to log2|c|
/// (ties toward the smaller magnitude). Zero stays zero.
Pow2Term round_pow2(double c);
PolyApprox round_coeffs_pow2(const ActivationFn& f, const PolyApprox& p);

struct ScanOptions {
  int window = 3;                 // exponents e-W .. e+W around each rounded one
  std::optional<double> bound;    // K; defaults to delta of the rounded poly
};

/// Scans both signs and the exponent window of every nonzero rounded
/// coefficient and returns the feasible candidate (delta <= K) with the
/// smallest delta. Ties go to the lexicographically smallest exponent tuple,
/// highest degree first.
PolyApprox scan_optimal_pow2(const ActivationFn& f, const PolyApprox& p,
                             const ScanOptions& opts = {});

/// "2^-3 x^2 + 2^-1 x + 2^-4" style rendering, highest degree first.
std::string format_pow2(const PolyApprox& p);
std::string format_real(const PolyApprox& p);

}  // namespace fcn
