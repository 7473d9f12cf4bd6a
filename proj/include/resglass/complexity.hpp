#pragma once

#include <cmath>
#include <vector>

#include "resglass/common.hpp"
#include "resglass/mixture.hpp"
#include "resglass/rng.hpp"

namespace resglass {

struct ComplexityStats {
  double v1 = 0.0;        // sum eps_r^2 r
  double v2 = 0.0;        // sum eps_r^2 r (r-1)
  double alpha_sq = 0.0;  // v2 + v1 - v1^2
  double theta = 0.0;     // 0.5 log(v2/v1) - (v2-v1)/(v2+v1)
};

inline double theta_from_moments(double v1, double v2) {
  return 0.5 * std::log(v2 / v1) - (v2 - v1) / (v2 + v1);
}

// Closed form for the point mass at depth p.
inline double theta_pure(int p) {
  return 0.5 * std::log(double(p - 1)) - (1.0 - 2.0 / double(p));
}

namespace detail {
inline ComplexityStats stats_from_masses(const std::vector<double>& mass,
                                         int r_offset) {
  // mass[i] is eps^2 at depth r = r_offset + i
  std::vector<double> t1(mass.size()), t2(mass.size());
  for (size_t i = 0; i < mass.size(); ++i) {
    const double r = double(r_offset + (int)i);
    t1[i] = mass[i] * r;
    t2[i] = mass[i] * r * (r - 1.0);
  }
  ComplexityStats cs;
  cs.v1 = kahan_sum(t1);
  cs.v2 = kahan_sum(t2);
  cs.alpha_sq = cs.v2 + cs.v1 - cs.v1 * cs.v1;
  cs.theta = theta_from_moments(cs.v1, cs.v2);
  return cs;
}
}  // namespace detail

// Moments of the depth distribution eps_r^2 and the complexity exponent.
// The mixture must be supported on interaction orders r >= 2; the exponent
// does not depend on the index k.
inline ComplexityStats complexity_stats(const EnsembleMixture& mix) {
  require(mix.p >= 2, "complexity_stats: need p >= 2");
  if (mix.p >= 1 && mix.eps[0] != 0.0)
    throw param_error("complexity_stats: mixture has mass at r = 1; truncate first");
  std::vector<double> mass(mix.p);
  for (int r = 1; r <= mix.p; ++r) mass[r - 1] = sq(mix.eps[r - 1]);
  return detail::stats_from_masses(mass, 1);
}

struct TruncatedMixture {
  EnsembleMixture mix;
  double removed_mass = 0.0;  // eps_1^2 before renormalization
  bool truncated = false;
};

// Drops the r = 1 entry and renormalizes the rest; the interaction sum of
// the glass model starts at r = 2.
inline TruncatedMixture truncate_to_r2(const EnsembleMixture& in) {
  require(in.p >= 2, "truncate_to_r2: need p >= 2");
  TruncatedMixture out;
  out.mix = in;
  out.removed_mass = sq(in.eps[0]);
  out.truncated = out.removed_mass > 0.0;
  out.mix.eps[0] = 0.0;
  out.mix.log_eps[0] = -kInf;
  const double rest = 1.0 - out.removed_mass;
  if (rest <= 0.0)
    throw param_error("truncate_to_r2: no mass on r >= 2");
  const double scale = 1.0 / std::sqrt(out.mix.sum_sq());
  for (int r = 2; r <= in.p; ++r) {
    out.mix.eps[r - 1] *= scale;
    out.mix.log_eps[r - 1] += std::log(scale);
  }
  out.mix.log_z -= std::log(scale);
  return out;
}

struct ThetaSweepRow {
  double beta = 0.0;
  double v1 = 0.0;
  double v2 = 0.0;
  double alpha_sq = 0.0;
  double theta = 0.0;
};

inline std::vector<ThetaSweepRow> theta_beta_sweep(
    int p, const std::vector<double>& beta_grid,
    Convention conv = Convention::ShiftedBinomial) {
  require(!beta_grid.empty(), "theta_beta_sweep: empty beta grid");
  std::vector<ThetaSweepRow> rows;
  rows.reserve(beta_grid.size());
  for (double beta : beta_grid) {
    require(beta > 0.0, "theta_beta_sweep: beta must be positive");
    auto trunc = truncate_to_r2(build_mixture(p, beta, conv));
    auto cs = complexity_stats(trunc.mix);
    rows.push_back({beta, cs.v1, cs.v2, cs.alpha_sq, cs.theta});
  }
  return rows;
}

struct SimplexMaximum {
  std::vector<double> eps;  // index r-2 holds eps_r, r = 2..p
  double theta = 0.0;
  double off_mass = 0.0;  // mass outside r = p at the best point
  int iterations = 0;
};

// Maximizes theta over {sum_{r=2..p} eps_r^2 = 1, eps_r >= 0} by projected
// ascent in an unconstrained square-root parameterization (y normalized
// after every step). Multistart; returns the best point found.
inline SimplexMaximum maximize_theta_on_simplex(int p, int /*k*/, int restarts,
                                                std::uint64_t seed) {
  require(p >= 2, "maximize_theta_on_simplex: need p >= 2");
  require(restarts >= 1, "maximize_theta_on_simplex: need restarts >= 1");
  const int dim = p - 1;  // depths 2..p

  SimplexMaximum best;
  best.theta = -kInf;

  for (int start = 0; start < restarts; ++start) {
    Rng rng(seed, "simplex-restart-" + std::to_string(start));
    std::vector<double> y(dim);
    for (double& v : y) v = std::abs(rng.gaussian()) + 1e-3;

    auto normalize = [&] {
      double s = 0.0;
      for (double v : y) s += v * v;
      const double inv = 1.0 / std::sqrt(s);
      for (double& v : y) v *= inv;
    };
    normalize();

    auto eval = [&](const std::vector<double>& yy, std::vector<double>* grad_y) {
      // masses m_r = y_r^2 (y normalized), moments, theta, chain rule
      double v1 = 0.0, v2 = 0.0;
      for (int i = 0; i < dim; ++i) {
        const double r = double(i + 2);
        const double m = yy[i] * yy[i];
        v1 += m * r;
        v2 += m * r * (r - 1.0);
      }
      const double th = theta_from_moments(v1, v2);
      if (grad_y) {
        const double dth_dv1 = -0.5 / v1 + 2.0 * v2 / sq(v1 + v2);
        const double dth_dv2 = 0.5 / v2 - 2.0 * v1 / sq(v1 + v2);
        // dtheta/dm_r, then project through m = y^2 / ||y||^2 at ||y|| = 1
        double inner = 0.0;
        std::vector<double> g_m(dim);
        for (int i = 0; i < dim; ++i) {
          const double r = double(i + 2);
          g_m[i] = dth_dv1 * r + dth_dv2 * r * (r - 1.0);
          inner += g_m[i] * yy[i] * yy[i];
        }
        grad_y->assign(dim, 0.0);
        for (int i = 0; i < dim; ++i)
          (*grad_y)[i] = 2.0 * yy[i] * (g_m[i] - inner);
      }
      return th;
    };

    double step = 0.1;
    std::vector<double> grad(dim);
    double theta = eval(y, &grad);
    int it = 0;
    for (; it < 100000; ++it) {
      double gnorm = 0.0;
      for (double g : grad) gnorm += g * g;
      gnorm = std::sqrt(gnorm);
      if (gnorm < 1e-10) break;

      std::vector<double> trial = y;
      for (int i = 0; i < dim; ++i) trial[i] += step * grad[i];
      double s = 0.0;
      for (double v : trial) s += v * v;
      const double inv = 1.0 / std::sqrt(s);
      for (double& v : trial) v *= inv;

      const double trial_theta = eval(trial, nullptr);
      if (trial_theta >= theta) {
        y = trial;
        theta = eval(y, &grad);
        step = std::min(step * 1.05, 10.0);
      } else {
        step *= 0.5;
        if (step < 1e-18) break;
      }
    }

    if (theta > best.theta) {
      best.theta = theta;
      best.iterations = it;
      best.eps.assign(dim, 0.0);
      for (int i = 0; i < dim; ++i) best.eps[i] = std::abs(y[i]);
      double off = 0.0;
      for (int i = 0; i + 1 < dim; ++i) off += sq(best.eps[i]);
      best.off_mass = off;
    }
  }
  return best;
}

}  // namespace resglass
