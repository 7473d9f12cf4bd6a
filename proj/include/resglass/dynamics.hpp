#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "resglass/common.hpp"
#include "resglass/multilinear.hpp"
#include "resglass/rng.hpp"

namespace resglass {

// L(w) = L_m(w) + L_p(w); each term is a multilinear form in the unit-scaled
// weights w~ = w/C with prefactor eps_r lambda_hat_r / Lambda^{(r-1)/2}. The
// lambda_hat factors carry the batch-norm path scales; the no-BN variant has
// lambda_hat = 1 and the scale exposure through C alone.
struct TwoPathLoss {
  int Lambda = 4;
  int m = 2;
  int p = 4;
  double eps_m = std::sqrt(0.5);
  double eps_p = std::sqrt(0.5);
  double C = 1.0;
  double lambda_hat_m = 1.0;
  double lambda_hat_p = 1.0;
  TensorForm xm;
  TensorForm xp;

  double coeff_m() const {
    return eps_m * lambda_hat_m /
           (std::pow(double(Lambda), (m - 1) / 2.0) * std::pow(C, m));
  }
  double coeff_p() const {
    return eps_p * lambda_hat_p /
           (std::pow(double(Lambda), (p - 1) / 2.0) * std::pow(C, p));
  }
};

inline TwoPathLoss make_two_path_loss(int Lambda, int m, int p, double C,
                                      Rng& rng, double lambda_hat_m = 1.0,
                                      double lambda_hat_p = 1.0) {
  require(Lambda >= 1, "make_two_path_loss: Lambda must be >= 1");
  require(m >= 1 && p > m, "make_two_path_loss: need 1 <= m < p");
  require(C > 0.0, "make_two_path_loss: C must be positive");
  std::uint64_t count = 1;
  for (int k = 0; k < p; ++k) {
    count *= std::uint64_t(Lambda);
    require(count <= 1'000'000ull, "make_two_path_loss: Lambda^p exceeds 1e6");
  }
  TwoPathLoss loss;
  loss.Lambda = Lambda;
  loss.m = m;
  loss.p = p;
  loss.C = C;
  loss.lambda_hat_m = lambda_hat_m;
  loss.lambda_hat_p = lambda_hat_p;
  loss.xm = TensorForm::gaussian(Lambda, m, rng);
  loss.xp = TensorForm::gaussian(Lambda, p, rng);
  return loss;
}

struct LossTerms {
  double L = 0.0, L_m = 0.0, L_p = 0.0;
  Eigen::VectorXd g, g_m, g_p;
};

// No radius precondition; used on stepped points as well.
inline LossTerms loss_terms_raw(const TwoPathLoss& loss, const Eigen::VectorXd& w) {
  LossTerms t;
  t.L_m = loss.coeff_m() * loss.xm.value(w);
  t.L_p = loss.coeff_p() * loss.xp.value(w);
  t.L = t.L_m + t.L_p;
  t.g_m = Eigen::VectorXd::Zero(loss.Lambda);
  t.g_p = Eigen::VectorXd::Zero(loss.Lambda);
  loss.xm.add_gradient(w, loss.coeff_m(), t.g_m);
  loss.xp.add_gradient(w, loss.coeff_p(), t.g_p);
  t.g = t.g_m + t.g_p;
  return t;
}

// Public evaluation under the constraint ||w||_2 = sqrt(Lambda) C.
inline LossTerms loss_and_grads(const TwoPathLoss& loss, const Eigen::VectorXd& w) {
  if (w.size() != loss.Lambda)
    throw domain_error("loss_and_grads: dimension mismatch");
  const double target = std::sqrt(double(loss.Lambda)) * loss.C;
  if (std::abs(w.norm() - target) > 1e-8 * target)
    throw domain_error("loss_and_grads: ||w|| must equal sqrt(Lambda) C");
  return loss_terms_raw(loss, w);
}

// d/dC of the loss along the radial reparameterization w = C sqrt(Lambda) w-hat,
// evaluated at the query point's own radial coordinate: (1/C_w)(m L_m + p L_p).
inline double dC_derivative(const TwoPathLoss& loss, const Eigen::VectorXd& w) {
  require(loss.C > 0.0, "dC_derivative: C must be positive");
  const double C_w = w.norm() / std::sqrt(double(loss.Lambda));
  if (!(C_w > 0.0)) throw domain_error("dC_derivative: zero-norm point");
  const LossTerms t = loss_terms_raw(loss, w);
  return (loss.m * t.L_m + loss.p * t.L_p) / C_w;
}

// --- stationarity preparation -----------------------------------------------

// Non-skipped layer: dL/dlambda_l = (L_m + L_p)/lambda_l; rescale the deep
// tensor so the sum vanishes at w. Returns false when L_p is numerically
// too small to rescale against.
inline bool prepare_lambda_stationary_nonskipped(TwoPathLoss& loss,
                                                 const Eigen::VectorXd& w) {
  const LossTerms t = loss_terms_raw(loss, w);
  if (std::abs(t.L_p) <= 1e-12 * (std::abs(t.L_m) + 1.0)) return false;
  const double s = -t.L_m / t.L_p;
  for (double& c : loss.xp.coeffs()) c *= s;
  return true;
}

// Skipped layer: dL/dlambda_l = L_p/lambda_l; deflate the deep tensor by the
// rank-one form of w~ so L_p(w) = 0 while g_p stays generically nonzero.
inline bool prepare_lambda_stationary_skipped(TwoPathLoss& loss,
                                              const Eigen::VectorXd& w) {
  const Eigen::VectorXd wt = w / loss.C;
  const double denom = std::pow(wt.squaredNorm(), loss.p);
  const double raw = loss.xp.value(wt);
  const double factor = raw / denom;
  auto& coeffs = loss.xp.coeffs();
  const int L = loss.Lambda;
  std::vector<int> digits(loss.p, 0);
  for (std::uint64_t t = 0; t < coeffs.size(); ++t) {
    double prod = 1.0;
    for (int k = 0; k < loss.p; ++k) prod *= wt[digits[k]];
    coeffs[t] -= factor * prod;
    for (int k = 0; k < loss.p; ++k) {
      if (++digits[k] < L) break;
      digits[k] = 0;
    }
  }
  const LossTerms after = loss_terms_raw(loss, w);
  return after.g_p.norm() > 1e-12;
}

// Radial stationarity dL/dC = 0: rescale the deep tensor so m L_m + p L_p = 0.
inline bool prepare_radial_stationary(TwoPathLoss& loss, const Eigen::VectorXd& w) {
  const LossTerms t = loss_terms_raw(loss, w);
  if (std::abs(t.L_p) <= 1e-12 * (std::abs(t.L_m) + 1.0)) return false;
  const double s = -(loss.m * t.L_m) / (loss.p * t.L_p);
  for (double& c : loss.xp.coeffs()) c *= s;
  return true;
}

// --- one-step theorem trials -------------------------------------------------

struct Thm3Trial {
  bool tested = false;
  bool passed = false;
  bool equality = false;   // g = 0: update leaves lambda unchanged
  double observed = 0.0;   // dL/dlambda_l after the step (lambda_l = 1)
  double predicted = 0.0;  // first-order Taylor value
  double residual = 0.0;   // |observed - predicted|
};

// Case 1 (non-skipped layer). The loss must already satisfy L_m + L_p = 0 at w.
inline Thm3Trial thm3_step_nonskipped(const TwoPathLoss& loss,
                                      const Eigen::VectorXd& w, double mu) {
  const LossTerms t = loss_terms_raw(loss, w);
  Thm3Trial trial;
  trial.tested = true;
  const double lambda_l = 1.0;
  if (t.g.norm() == 0.0) {
    trial.equality = true;
    return trial;
  }
  const Eigen::VectorXd stepped = w - mu * t.g;
  const LossTerms after = loss_terms_raw(loss, stepped);
  trial.observed = (after.L_m + after.L_p) / lambda_l;
  trial.predicted = -mu * t.g.squaredNorm() / lambda_l;
  trial.residual = std::abs(trial.observed - trial.predicted);
  trial.passed =
      std::abs(lambda_l - mu * trial.observed) > std::abs(lambda_l);
  return trial;
}

// Case 2 (skipped layer). The loss must already satisfy L_p = 0 at w; the
// theorem's hypothesis restricts to ||g_p|| > ||g_m||.
inline Thm3Trial thm3_step_skipped(const TwoPathLoss& loss,
                                   const Eigen::VectorXd& w, double mu) {
  const LossTerms t = loss_terms_raw(loss, w);
  Thm3Trial trial;
  if (!(t.g_p.norm() > t.g_m.norm())) return trial;  // hypothesis not met
  trial.tested = true;
  const double lambda_l = 1.0;
  if (t.g.norm() == 0.0) {
    trial.equality = true;
    return trial;
  }
  // Cauchy-Schwarz with ||g_p|| > ||g_m|| excludes g_m^T g_p < -||g_p||^2
  const Eigen::VectorXd stepped = w - mu * t.g;
  const LossTerms after = loss_terms_raw(loss, stepped);
  trial.observed = after.L_p / lambda_l;
  trial.predicted = -mu * (t.g_p.dot(t.g_m) + t.g_p.squaredNorm()) / lambda_l;
  trial.residual = std::abs(trial.observed - trial.predicted);
  trial.passed =
      std::abs(lambda_l - mu * trial.observed) > std::abs(lambda_l);
  return trial;
}

struct Thm4Trial {
  bool tested = false;
  double observed = 0.0;       // dL/dC after the step
  double predicted_theorem = 0.0;   // -mu/C (m||g_m||^2 + p||g_p||^2 + (m+p) g_m.g_p)
  double predicted_appendix = 0.0;  // m-coefficient on ||g_p||^2 instead
  double abs_residual_theorem = 0.0;
  double rel_residual_theorem = 0.0;
  double rel_residual_appendix = 0.0;
};

// The loss must already satisfy m L_m + p L_p = 0 at w.
inline Thm4Trial thm4_step(const TwoPathLoss& loss, const Eigen::VectorXd& w,
                           double mu) {
  const LossTerms t = loss_terms_raw(loss, w);
  Thm4Trial trial;
  trial.tested = true;
  const Eigen::VectorXd stepped = w - mu * t.g;
  trial.observed = dC_derivative(loss, stepped);
  const double cross = (loss.m + loss.p) * t.g_m.dot(t.g_p);
  const double common = loss.p * t.g_p.squaredNorm() + cross;
  trial.predicted_theorem =
      -mu / loss.C * (loss.m * t.g_m.squaredNorm() + common);
  trial.predicted_appendix =
      -mu / loss.C * (loss.m * t.g_p.squaredNorm() + common);
  trial.abs_residual_theorem = std::abs(trial.observed - trial.predicted_theorem);
  trial.rel_residual_theorem =
      trial.abs_residual_theorem / std::max(1e-300, std::abs(trial.predicted_theorem));
  trial.rel_residual_appendix = std::abs(trial.observed - trial.predicted_appendix) /
                                std::max(1e-300, std::abs(trial.predicted_appendix));
  return trial;
}

// --- batched verification ----------------------------------------------------

struct DynamicsConfig {
  int Lambda = 4;
  int m = 2;
  int p = 4;
  double C = 1.0;
};

struct Thm3Report {
  int trials = 0;
  double mu = 0.0;
  int case1_tested = 0, case1_passed = 0;
  int case2_tested = 0, case2_passed = 0;
  double case1_pass_fraction = 0.0;
  double case2_pass_fraction = 0.0;
  double pass_fraction = 0.0;     // over all tested trials, both cases
  double median_residual = 0.0;   // absolute Taylor residual, both cases
  double residual_slope = 0.0;    // log-log slope of the median vs mu
};

struct Thm4Report {
  int trials = 0;
  double mu = 0.0;
  double pass_fraction = 0.0;    // trials with theorem-variant rel residual < 5%
  double median_residual = 0.0;  // relative residual of the theorem variant
  double median_residual_appendix = 0.0;
  double residual_slope = 0.0;   // log-log slope of median absolute residual vs mu
  std::string sign_variant;      // "theorem" or "appendix"
};

namespace detail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double slope_of(const std::vector<double>& xs, const std::vector<double>& ys) {
  const size_t n = xs.size();
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double num = 0, den = 0;
  for (size_t i = 0; i < n; ++i) {
    num += (xs[i] - mx) * (ys[i] - my);
    den += sq(xs[i] - mx);
  }
  return num / den;
}

template <class F>
void parallel_trials(int trials, int jobs, F&& body) {
  const int njobs = std::max(1, jobs);
  if (njobs == 1 || trials < 2) {
    for (int i = 0; i < trials; ++i) body(i);
    return;
  }
  std::vector<std::thread> threads;
  const int chunk = (trials + njobs - 1) / njobs;
  for (int j = 0; j < njobs; ++j) {
    const int lo = j * chunk, hi = std::min(trials, lo + chunk);
    if (lo < hi)
      threads.emplace_back([lo, hi, &body] {
        for (int i = lo; i < hi; ++i) body(i);
      });
  }
  for (auto& t : threads) t.join();
}

inline Eigen::VectorXd trial_point(const DynamicsConfig& cfg, Rng& rng) {
  Eigen::VectorXd w(cfg.Lambda);
  for (int i = 0; i < cfg.Lambda; ++i) w[i] = rng.gaussian();
  return w * (cfg.C * std::sqrt(double(cfg.Lambda)) / w.norm());
}

}  // namespace detail

// The residual slope is measured on the same prepared trials at the mu grid
// {mu, mu/2, mu/4, mu/8}; the reported pass/residual stats are at the head mu.
inline Thm3Report verify_thm3(const DynamicsConfig& cfg, int trials, double mu,
                              std::uint64_t seed, int jobs = 1) {
  require(trials >= 1, "verify_thm3: trials must be >= 1");
  require(mu > 0.0 && mu <= 1e-2, "verify_thm3: mu must lie in (0, 1e-2]");

  const std::vector<double> mus = {mu, mu / 2, mu / 4, mu / 8};
  Rng root(seed);
  std::vector<std::vector<Thm3Trial>> c1(mus.size()), c2(mus.size());
  for (auto& v : c1) v.resize(trials);
  for (auto& v : c2) v.resize(trials);

  detail::parallel_trials(trials, jobs, [&](int i) {
    Rng rng = root.stream("thm3-trial-" + std::to_string(i));
    {
      TwoPathLoss loss = make_two_path_loss(cfg.Lambda, cfg.m, cfg.p, cfg.C, rng);
      Eigen::VectorXd w = detail::trial_point(cfg, rng);
      if (prepare_lambda_stationary_nonskipped(loss, w))
        for (size_t k = 0; k < mus.size(); ++k)
          c1[k][i] = thm3_step_nonskipped(loss, w, mus[k]);
    }
    {
      Rng rng2 = root.stream("thm3c2-trial-" + std::to_string(i));
      TwoPathLoss loss = make_two_path_loss(cfg.Lambda, cfg.m, cfg.p, cfg.C, rng2);
      Eigen::VectorXd w = detail::trial_point(cfg, rng2);
      if (prepare_lambda_stationary_skipped(loss, w))
        for (size_t k = 0; k < mus.size(); ++k)
          c2[k][i] = thm3_step_skipped(loss, w, mus[k]);
    }
  });

  Thm3Report rep;
  rep.trials = trials;
  rep.mu = mu;
  std::vector<double> med_log;
  std::vector<double> log_mu;
  for (size_t k = 0; k < mus.size(); ++k) {
    std::vector<double> residuals;
    for (const auto& t : c1[k])
      if (t.tested && !t.equality) residuals.push_back(t.residual);
    for (const auto& t : c2[k])
      if (t.tested && !t.equality) residuals.push_back(t.residual);
    if (k == 0) rep.median_residual = detail::median_of(residuals);
    med_log.push_back(std::log(detail::median_of(residuals)));
    log_mu.push_back(std::log(mus[k]));
  }
  rep.residual_slope = detail::slope_of(log_mu, med_log);

  for (const auto& t : c1[0]) {
    if (!t.tested) continue;
    ++rep.case1_tested;
    if (t.passed) ++rep.case1_passed;
  }
  for (const auto& t : c2[0]) {
    if (!t.tested) continue;
    ++rep.case2_tested;
    if (t.passed) ++rep.case2_passed;
  }
  rep.case1_pass_fraction =
      rep.case1_tested ? double(rep.case1_passed) / rep.case1_tested : 0.0;
  rep.case2_pass_fraction =
      rep.case2_tested ? double(rep.case2_passed) / rep.case2_tested : 0.0;
  const int tested = rep.case1_tested + rep.case2_tested;
  rep.pass_fraction =
      tested ? double(rep.case1_passed + rep.case2_passed) / tested : 0.0;
  return rep;
}

inline Thm4Report verify_thm4(const DynamicsConfig& cfg, int trials, double mu,
                              std::uint64_t seed, int jobs = 1) {
  require(trials >= 1, "verify_thm4: trials must be >= 1");
  require(mu > 0.0 && mu <= 1e-2, "verify_thm4: mu must lie in (0, 1e-2]");

  const std::vector<double> mus = {mu, mu / 2, mu / 4, mu / 8};
  Rng root(seed);
  std::vector<std::vector<Thm4Trial>> trials_by_mu(mus.size());
  for (auto& v : trials_by_mu) v.resize(trials);

  detail::parallel_trials(trials, jobs, [&](int i) {
    Rng rng = root.stream("thm4-trial-" + std::to_string(i));
    TwoPathLoss loss = make_two_path_loss(cfg.Lambda, cfg.m, cfg.p, cfg.C, rng);
    Eigen::VectorXd w = detail::trial_point(cfg, rng);
    if (prepare_radial_stationary(loss, w))
      for (size_t k = 0; k < mus.size(); ++k)
        trials_by_mu[k][i] = thm4_step(loss, w, mus[k]);
  });

  Thm4Report rep;
  rep.trials = trials;
  rep.mu = mu;
  std::vector<double> log_mu, med_log;
  for (size_t k = 0; k < mus.size(); ++k) {
    std::vector<double> abs_res;
    for (const auto& t : trials_by_mu[k])
      if (t.tested) abs_res.push_back(t.abs_residual_theorem);
    log_mu.push_back(std::log(mus[k]));
    med_log.push_back(std::log(detail::median_of(abs_res)));
  }
  rep.residual_slope = detail::slope_of(log_mu, med_log);

  std::vector<double> rel_thm, rel_app;
  int tested = 0, passed = 0;
  for (const auto& t : trials_by_mu[0]) {
    if (!t.tested) continue;
    ++tested;
    rel_thm.push_back(t.rel_residual_theorem);
    rel_app.push_back(t.rel_residual_appendix);
    if (t.rel_residual_theorem < 0.05) ++passed;
  }
  rep.median_residual = detail::median_of(rel_thm);
  rep.median_residual_appendix = detail::median_of(rel_app);
  rep.pass_fraction = tested ? double(passed) / tested : 0.0;
  rep.sign_variant =
      rep.median_residual <= rep.median_residual_appendix ? "theorem" : "appendix";
  return rep;
}

}  // namespace resglass
