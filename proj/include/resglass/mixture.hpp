#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "resglass/common.hpp"

namespace resglass {

// Which binomial enters the depth weight: binom(p-1, r-1) follows from the
// path count, binom(p, r) is the constant-dropping variant.
enum class Convention { ShiftedBinomial, PlainBinomial };

inline std::string to_string(Convention c) {
  return c == Convention::ShiftedBinomial ? "shifted" : "plain";
}

inline Convention convention_from_string(const std::string& s) {
  if (s == "shifted") return Convention::ShiftedBinomial;
  if (s == "plain") return Convention::PlainBinomial;
  throw param_error("unknown convention '" + s + "' (want shifted|plain)");
}

struct NetworkShape {
  int p = 10;        // depth
  int n = 16;        // hidden width
  int d = 16;        // input dimension
  long long Lambda = 16;  // unique weights
  double rho = 0.5;  // ReLU-open probability
  double C = 1.0;    // global weight scale

  double beta() const { return rho * n * C / std::sqrt(double(Lambda)); }
};

struct EnsembleMixture {
  int p = 0;
  double beta = 0.0;
  Convention convention = Convention::ShiftedBinomial;
  std::vector<double> eps;      // eps[r-1], r = 1..p
  std::vector<double> log_eps;  // same indexing, -inf where underflowed
  double log_z = 0.0;

  double sum_sq() const {
    std::vector<double> sqs(eps.size());
    for (size_t i = 0; i < eps.size(); ++i) sqs[i] = eps[i] * eps[i];
    return kahan_sum(sqs);
  }
};

inline double log_depth_weight(int p, int r, double log_beta, Convention conv) {
  const double lb = conv == Convention::ShiftedBinomial
                        ? log_binomial(p - 1, r - 1)
                        : log_binomial(p, r);
  return lb + r * log_beta;
}

// eps_r proportional to binom * beta^r, normalized so sum of squares is 1.
// Built entirely in log space; values for p up to 1e4 stay finite.
inline EnsembleMixture build_mixture(int p, double beta,
                                     Convention conv = Convention::ShiftedBinomial) {
  require(p >= 1, "build_mixture: p must be >= 1");
  require(beta > 0.0 && std::isfinite(beta), "build_mixture: beta must be positive");

  EnsembleMixture mix;
  mix.p = p;
  mix.beta = beta;
  mix.convention = conv;
  const double log_beta = std::log(beta);

  std::vector<double> lw(p);
  for (int r = 1; r <= p; ++r) lw[r - 1] = log_depth_weight(p, r, log_beta, conv);
  mix.log_z = 0.5 * [&] {
    std::vector<double> twice(p);
    for (int i = 0; i < p; ++i) twice[i] = 2.0 * lw[i];
    return logsumexp(twice);
  }();

  mix.log_eps.resize(p);
  mix.eps.resize(p);
  for (int i = 0; i < p; ++i) {
    mix.log_eps[i] = lw[i] - mix.log_z;
    mix.eps[i] = std::exp(mix.log_eps[i]);
  }
  // One compensated renormalization pass; exp() rounding over many terms can
  // otherwise push the square sum just past the 1e-12 contract at p ~ 1e4.
  const double s = mix.sum_sq();
  const double scale = 1.0 / std::sqrt(s);
  for (int i = 0; i < p; ++i) mix.eps[i] *= scale;
  mix.log_z += 0.5 * std::log(s);
  for (int i = 0; i < p; ++i) mix.log_eps[i] = lw[i] - mix.log_z;
  return mix;
}

inline EnsembleMixture build_mixture(const NetworkShape& shape,
                                     Convention conv = Convention::ShiftedBinomial) {
  return build_mixture(shape.p, shape.beta(), conv);
}

// Smallest r maximizing eps_r (ties toward smaller r). The weights are
// unimodal with successive ratio beta (p-r)/r (shifted) or beta (p-r)/(r+1)
// (plain), so the peak is characterized exactly by the ratio test; this
// avoids lgamma rounding breaking exact ties such as beta = 1.
inline int argmax_depth(const EnsembleMixture& mix) {
  int r = 1;
  if (mix.convention == Convention::ShiftedBinomial) {
    while (r < mix.p && mix.beta * (mix.p - r) > double(r)) ++r;
  } else {
    while (r < mix.p && mix.beta * (mix.p - r) > double(r + 1)) ++r;
  }
  return r;
}

// Sum of eps_r^2 over r in [ceil(alpha1 p), floor(alpha2 p)], clipped to [1, p].
inline double band_mass(const EnsembleMixture& mix, double alpha1, double alpha2) {
  require(0.0 <= alpha1 && alpha1 < alpha2 && alpha2 <= 1.0,
          "band_mass: need 0 <= alpha1 < alpha2 <= 1");
  const int lo = std::max(1, (int)std::ceil(alpha1 * mix.p));
  const int hi = std::min(mix.p, (int)std::floor(alpha2 * mix.p));
  std::vector<double> sqs;
  for (int r = lo; r <= hi; ++r) sqs.push_back(sq(mix.eps[r - 1]));
  return kahan_sum(sqs);
}

struct ScaleSolution {
  double C = 0.0;
  double beta = 0.0;
  // beta interval bracketing the argmax transition into k
  double beta_lo = 0.0;
  double beta_hi = 0.0;
};

// Finds C with argmax_depth == k by bisection on beta (argmax is a monotone
// step function of beta: the ratio eps_{r+1}/eps_r scales linearly in beta),
// then inverts beta = rho n C / sqrt(Lambda).
inline ScaleSolution solve_scale_for_depth(const NetworkShape& shape, int k,
                                           Convention conv = Convention::ShiftedBinomial) {
  require(1 <= k && k <= shape.p, "solve_scale_for_depth: k out of [1, p]");
  require(shape.rho > 0.0 && shape.n > 0, "solve_scale_for_depth: rho, n must be positive");

  auto f = [&](double beta) { return argmax_depth(build_mixture(shape.p, beta, conv)); };

  double lo = 1e-9, hi = 1.0;
  while (f(lo) > k) lo /= 16.0;   // f -> 1 as beta -> 0
  while (f(hi) < k) hi *= 2.0;    // f -> p as beta -> inf
  double beta_k = -1.0;
  if (f(lo) == k) beta_k = lo;
  if (f(hi) == k && beta_k < 0.0) beta_k = hi;
  for (int it = 0; it < 400 && beta_k < 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    const int fm = f(mid);
    if (fm == k) {
      beta_k = mid;
    } else if (fm < k) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (beta_k < 0.0)
    throw numerical_error("solve_scale_for_depth: bisection failed to land on k");

  ScaleSolution sol;
  sol.beta = beta_k;
  sol.beta_lo = lo;
  sol.beta_hi = hi;
  sol.C = beta_k * std::sqrt(double(shape.Lambda)) / (shape.rho * shape.n);
  return sol;
}

// log of sum_{r=0}^{p} binom(p,r)^2 beta^(2r), evaluated through the closed
// form (1-beta^2)^p P_p((1+beta^2)/(1-beta^2)). The generating identity
// includes the r = 0 term. Three-term recurrence with overflow rescaling.
inline double legendre_normalization(int p, double beta) {
  require(p >= 0, "legendre_normalization: p must be >= 0");
  if (!(beta > 0.0 && beta < 1.0))
    throw domain_error("legendre_normalization: closed form requires 0 < beta < 1");

  const double x = (1.0 + beta * beta) / (1.0 - beta * beta);
  double prev = 1.0;  // P_0
  double cur = x;     // P_1
  double log_scale = 0.0;
  if (p == 0) return p * std::log(1.0 - beta * beta);  // log 1 = 0
  for (int k = 1; k < p; ++k) {
    double next = ((2.0 * k + 1.0) * x * cur - k * prev) / (k + 1.0);
    if (std::abs(next) > 1e280) {
      const double s = std::abs(next);
      next /= s;
      cur /= s;
      log_scale += std::log(s);
    }
    prev = cur;
    cur = next;
  }
  if (!(cur > 0.0))
    throw numerical_error("legendre_normalization: recurrence left the positive branch");
  return p * std::log1p(-beta * beta) + std::log(cur) + log_scale;
}

struct PathCensus {
  int r = 0;
  double log_gamma = 0.0;  // log of binom(p-1, r-1) n^r
  double log_psi = 0.0;    // log of d * gamma_r
  bool exact_valid = false;  // exact counts fit in 64 bits
  unsigned long long gamma_exact = 0;
  unsigned long long psi_exact = 0;
};

namespace detail {
inline bool checked_mul(unsigned long long a, unsigned long long b,
                        unsigned long long& out) {
  return !__builtin_mul_overflow(a, b, &out);
}

// binom(n, k) in 64 bits, false on overflow.
inline bool binomial_u64(int n, int k, unsigned long long& out) {
  if (k < 0 || k > n) {
    out = 0;
    return true;
  }
  k = std::min(k, n - k);
  unsigned long long b = 1;
  for (int i = 1; i <= k; ++i) {
    // b * (n - k + i) / i is exact at every step
    unsigned long long num;
    if (!checked_mul(b, (unsigned long long)(n - k + i), num)) return false;
    b = num / i;
  }
  out = b;
  return true;
}
}  // namespace detail

inline PathCensus path_census(const NetworkShape& shape, int r) {
  require(1 <= r && r <= shape.p, "path_census: r out of [1, p]");
  PathCensus pc;
  pc.r = r;
  pc.log_gamma = log_binomial(shape.p - 1, r - 1) + r * std::log(double(shape.n));
  pc.log_psi = pc.log_gamma + std::log(double(shape.d));

  unsigned long long b = 0, g = 0, ps = 0;
  bool ok = detail::binomial_u64(shape.p - 1, r - 1, b);
  unsigned long long npow = 1;
  for (int i = 0; ok && i < r; ++i) ok = detail::checked_mul(npow, (unsigned long long)shape.n, npow);
  ok = ok && detail::checked_mul(b, npow, g);
  ok = ok && detail::checked_mul(g, (unsigned long long)shape.d, ps);
  if (ok) {
    pc.exact_valid = true;
    pc.gamma_exact = g;
    pc.psi_exact = ps;
  }
  return pc;
}

struct XiBounds {
  double bound_lower = 0.0;  // total^2 / d
  double bound_upper = 0.0;  // total^2
  std::vector<long long> witness_min;  // balanced partition
  std::vector<long long> witness_max;  // delta partition
  double witness_min_value = 0.0;      // ||witness_min||_2^2
  double witness_max_value = 0.0;
};

// Bounds on the squared mass of a partition of `total` into d nonnegative
// parts: (1/d) total^2 <= ||parts||^2 <= total^2, with balanced/delta
// witnesses. The lower bound is attained only when d divides total.
inline XiBounds xi_variance_bounds(long long d, long long total) {
  require(d >= 1, "xi_variance_bounds: d must be >= 1");
  require(total >= 1, "xi_variance_bounds: total must be a positive integer");

  XiBounds b;
  b.bound_lower = double(total) * double(total) / double(d);
  b.bound_upper = double(total) * double(total);

  b.witness_min.assign(d, total / d);
  for (long long i = 0; i < total % d; ++i) b.witness_min[i] += 1;
  b.witness_max.assign(d, 0);
  b.witness_max[0] = total;

  for (long long v : b.witness_min) b.witness_min_value += double(v) * double(v);
  b.witness_max_value = double(total) * double(total);
  return b;
}

}  // namespace resglass
