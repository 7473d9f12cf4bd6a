#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace resglass {

// Exit-code contract of the CLI; library code signals the same taxonomy
// through the exception types below.
enum ExitCode : int {
  kExitSuccess = 0,
  kExitParamError = 1,
  kExitVerificationFailure = 2,
  kExitNumericalAbort = 3,
};

struct param_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct domain_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct size_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

inline double sq(double x) { return x * x; }

// Compensated summation; the normalization and band-mass contracts are
// tighter than what naive accumulation over 1e4 terms guarantees.
inline double kahan_sum(std::span<const double> xs) {
  double s = 0.0, c = 0.0;
  for (double x : xs) {
    double y = x - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s;
}

// log(n choose k) for real-valued arguments via log-gamma.
inline double log_binomial(double n, double k) {
  if (k < 0.0 || k > n) return -kInf;
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

inline double logsumexp(std::span<const double> xs) {
  double m = -kInf;
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw param_error(msg);
}

}  // namespace resglass
