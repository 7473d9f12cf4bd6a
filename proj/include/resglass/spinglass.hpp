#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "resglass/common.hpp"
#include "resglass/multilinear.hpp"
#include "resglass/rng.hpp"

namespace resglass {

// H(w) = sum_r (eps_r / Lambda^{(r-1)/2}) sum_idx J^r_idx prod_{k=1}^{r} w_{i_k}
// on the sphere ||w||^2 = Lambda. Coupling tensors are i.i.d. standard
// Gaussians, stored asymmetric and evaluated as written.
struct SpinGlassModel {
  int Lambda = 0;
  std::vector<int> orders;        // ascending, each >= 2
  std::vector<double> eps;        // aligned with orders, sum of squares 1
  std::vector<TensorForm> tensors;
  std::uint64_t seed = 0;

  bool degenerate() const {
    for (const auto& t : tensors)
      for (double c : t.coeffs())
        if (c != 0.0) return false;
    return true;
  }
};

constexpr std::uint64_t kSpinGlassEntryGuard = 10'000'000ull;

inline SpinGlassModel sample_model(int Lambda, const std::vector<int>& orders,
                                   const std::vector<double>& eps,
                                   std::uint64_t seed) {
  require(Lambda >= 1, "sample_model: Lambda must be >= 1");
  require(!orders.empty() && orders.size() == eps.size(),
          "sample_model: orders and eps must align and be nonempty");
  std::uint64_t entries = 0;
  for (size_t j = 0; j < orders.size(); ++j) {
    require(orders[j] >= 2, "sample_model: interaction orders start at r = 2");
    if (j > 0) require(orders[j] > orders[j - 1], "sample_model: orders must ascend");
    std::uint64_t n = 1;
    for (int k = 0; k < orders[j]; ++k) {
      n *= std::uint64_t(Lambda);
      if (n > kSpinGlassEntryGuard) break;
    }
    entries += n;
  }
  if (entries > kSpinGlassEntryGuard)
    throw size_error("sample_model: tensor storage exceeds the desk-scale guard");
  double ss = 0.0;
  for (double e : eps) ss += e * e;
  require(std::abs(ss - 1.0) <= 1e-10, "sample_model: eps must satisfy sum eps^2 = 1");

  SpinGlassModel m;
  m.Lambda = Lambda;
  m.orders = orders;
  m.eps = eps;
  m.seed = seed;
  Rng root(seed);
  for (int r : orders) {
    Rng sub = root.stream("coupling-order-" + std::to_string(r));
    m.tensors.push_back(TensorForm::gaussian(Lambda, r, sub));
  }
  return m;
}

inline double order_prefactor(const SpinGlassModel& m, size_t j) {
  return m.eps[j] / std::pow(double(m.Lambda), (m.orders[j] - 1) / 2.0);
}

inline void check_on_sphere(const SpinGlassModel& m, const Eigen::VectorXd& w) {
  if (w.size() != m.Lambda)
    throw domain_error("evaluate: point dimension != Lambda");
  // loose enough that finite-difference probes (O(1e-5) off-sphere) pass
  if (std::abs(w.squaredNorm() - double(m.Lambda)) > 1e-3 * double(m.Lambda))
    throw domain_error("evaluate: point is off the sphere ||w||^2 = Lambda");
}

inline double evaluate_energy(const SpinGlassModel& m, const Eigen::VectorXd& w) {
  double e = 0.0;
  for (size_t j = 0; j < m.tensors.size(); ++j)
    e += order_prefactor(m, j) * m.tensors[j].value(w);
  return e;
}

struct Evaluation {
  double energy = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

inline Evaluation evaluate(const SpinGlassModel& m, const Eigen::VectorXd& w) {
  check_on_sphere(m, w);
  Evaluation ev;
  ev.energy = evaluate_energy(m, w);
  ev.gradient = Eigen::VectorXd::Zero(m.Lambda);
  ev.hessian = Eigen::MatrixXd::Zero(m.Lambda, m.Lambda);
  for (size_t j = 0; j < m.tensors.size(); ++j) {
    const double s = order_prefactor(m, j);
    m.tensors[j].add_gradient(w, s, ev.gradient);
    m.tensors[j].add_hessian(w, s, ev.hessian);
  }
  return ev;
}

struct CriticalPointRecord {
  Eigen::VectorXd w;
  double energy = 0.0;  // H(w)/Lambda
  double lagrange = 0.0;
  int index = 0;  // negative tangent-space Hessian eigenvalues
  double grad_norm = 0.0;  // ||grad H - lambda w||
  int multiplicity = 1;    // converged starts mapped to this point
};

struct CriticalSearch {
  std::vector<CriticalPointRecord> points;
  int restarts = 0;
  int dropped = 0;  // starts that failed to converge
  bool degenerate = false;
};

namespace detail {

struct NewtonOutcome {
  bool converged = false;
  Eigen::VectorXd w;
  double lagrange = 0.0;
  double grad_norm = 0.0;
};

inline NewtonOutcome newton_from_start(const SpinGlassModel& m, Rng rng) {
  const int L = m.Lambda;
  Eigen::VectorXd w(L);
  for (int i = 0; i < L; ++i) w[i] = rng.gaussian();
  w *= std::sqrt(double(L)) / w.norm();

  Evaluation ev = evaluate(m, w);
  double lambda = w.dot(ev.gradient) / double(L);

  NewtonOutcome out;
  auto residual = [&](const Evaluation& e, const Eigen::VectorXd& ww, double lam) {
    Eigen::VectorXd r(L + 1);
    r.head(L) = e.gradient - lam * ww;
    r[L] = 0.5 * (ww.squaredNorm() - double(L));
    return r;
  };

  Eigen::VectorXd F = residual(ev, w, lambda);
  for (int it = 0; it < 200; ++it) {
    if (F.head(L).norm() < 1e-10) break;
    Eigen::MatrixXd J(L + 1, L + 1);
    J.topLeftCorner(L, L) = ev.hessian - lambda * Eigen::MatrixXd::Identity(L, L);
    J.topRightCorner(L, 1) = -w;
    J.bottomLeftCorner(1, L) = w.transpose();
    J(L, L) = 0.0;
    Eigen::VectorXd delta = J.fullPivLu().solve(-F);
    if (!delta.allFinite()) break;

    double t = 1.0;
    bool stepped = false;
    for (int bt = 0; bt < 40; ++bt) {
      Eigen::VectorXd wt = w + t * delta.head(L);
      const double n = wt.norm();
      if (n > 0.0) {
        wt *= std::sqrt(double(L)) / n;
        const double lt = lambda + t * delta[L];
        Evaluation et = evaluate(m, wt);
        Eigen::VectorXd Ft = residual(et, wt, lt);
        if (Ft.norm() < F.norm()) {
          w = wt;
          lambda = lt;
          ev = std::move(et);
          F = std::move(Ft);
          stepped = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!stepped) break;
  }

  out.grad_norm = (ev.gradient - lambda * w).norm();
  out.converged = out.grad_norm < 1e-8;
  out.w = w;
  out.lagrange = lambda;
  return out;
}

inline int tangent_index(const SpinGlassModel& m, const Eigen::VectorXd& w,
                         double lambda) {
  const int L = m.Lambda;
  if (L == 1) return 0;
  Evaluation ev = evaluate(m, w);
  Eigen::MatrixXd wcol = w;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(wcol);
  Eigen::MatrixXd Q = qr.householderQ();
  Eigen::MatrixXd tangent = Q.rightCols(L - 1);  // orthonormal complement of w
  Eigen::MatrixXd shifted = ev.hessian - lambda * Eigen::MatrixXd::Identity(L, L);
  Eigen::MatrixXd T = tangent.transpose() * shifted * tangent;
  T = 0.5 * (T + T.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
  const double tol = 1e-9 * std::max(1.0, T.cwiseAbs().maxCoeff());
  int idx = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()[i] < -tol) ++idx;
  return idx;
}

}  // namespace detail

// Multistart Newton on the Lagrange system grad H = lambda w with sphere
// retraction. Starts are deterministic substreams of the seed; results are
// merged in start order, so the census is identical for any jobs count.
// The census is a lower bound on the true count: desk scale means Lambda
// small (<= 8 for exhaustive intent) and enough restarts.
inline CriticalSearch find_critical_points(const SpinGlassModel& m, int restarts,
                                           std::uint64_t seed, int jobs = 1) {
  require(restarts >= 0, "find_critical_points: restarts must be >= 0");
  CriticalSearch out;
  out.restarts = restarts;
  if (m.degenerate()) {
    out.degenerate = true;  // every point is critical; census is meaningless
    return out;
  }

  std::vector<detail::NewtonOutcome> outcomes(restarts);
  Rng root(seed);
  auto run_range = [&](int lo, int hi) {
    for (int s = lo; s < hi; ++s)
      outcomes[s] =
          detail::newton_from_start(m, root.stream("newton-start-" + std::to_string(s)));
  };
  const int njobs = std::max(1, jobs);
  if (njobs == 1 || restarts < 2) {
    run_range(0, restarts);
  } else {
    std::vector<std::thread> threads;
    const int chunk = (restarts + njobs - 1) / njobs;
    for (int j = 0; j < njobs; ++j) {
      const int lo = j * chunk, hi = std::min(restarts, lo + chunk);
      if (lo < hi) threads.emplace_back(run_range, lo, hi);
    }
    for (auto& t : threads) t.join();
  }

  const double dedup = 1e-6 * std::sqrt(double(m.Lambda));
  for (auto& oc : outcomes) {
    if (!oc.converged) {
      ++out.dropped;
      continue;
    }
    bool merged = false;
    for (auto& rec : out.points) {
      if ((rec.w - oc.w).norm() < dedup) {
        ++rec.multiplicity;
        if (oc.grad_norm < rec.grad_norm) rec.grad_norm = oc.grad_norm;
        merged = true;
        break;
      }
    }
    if (merged) continue;
    CriticalPointRecord rec;
    rec.w = oc.w;
    rec.lagrange = oc.lagrange;
    rec.grad_norm = oc.grad_norm;
    rec.energy = evaluate_energy(m, oc.w) / double(m.Lambda);
    rec.index = detail::tangent_index(m, oc.w, oc.lagrange);
    out.points.push_back(std::move(rec));
  }
  std::sort(out.points.begin(), out.points.end(),
            [](const CriticalPointRecord& a, const CriticalPointRecord& b) {
              if (a.energy != b.energy) return a.energy < b.energy;
              return a.index < b.index;
            });
  return out;
}

struct CensusHistogram {
  std::map<int, long long> by_index;
  long long total = 0;
  int restarts = 0;
  int dropped = 0;
  bool degenerate = false;
};

// Histogram over the index of deduplicated critical points with normalized
// energy H/Lambda <= ceiling.
inline CensusHistogram empirical_census(const SpinGlassModel& m, int restarts,
                                        std::uint64_t seed, double ceiling = kInf,
                                        int jobs = 1) {
  CriticalSearch search = find_critical_points(m, restarts, seed, jobs);
  CensusHistogram h;
  h.restarts = search.restarts;
  h.dropped = search.dropped;
  h.degenerate = search.degenerate;
  for (const auto& rec : search.points) {
    if (rec.energy > ceiling) continue;
    ++h.by_index[rec.index];
    ++h.total;
  }
  return h;
}

inline nlohmann::ordered_json model_to_json(const SpinGlassModel& m) {
  nlohmann::ordered_json j;
  j["Lambda"] = m.Lambda;
  j["seed"] = m.seed;
  j["orders"] = m.orders;
  j["eps"] = m.eps;
  nlohmann::ordered_json tensors;
  for (size_t k = 0; k < m.orders.size(); ++k)
    tensors[std::to_string(m.orders[k])] = m.tensors[k].coeffs();
  j["tensors"] = tensors;
  return j;
}

inline SpinGlassModel model_from_json(const nlohmann::ordered_json& j) {
  SpinGlassModel m;
  m.Lambda = j.at("Lambda").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.orders = j.at("orders").get<std::vector<int>>();
  m.eps = j.at("eps").get<std::vector<double>>();
  for (int r : m.orders) {
    auto coeffs = j.at("tensors").at(std::to_string(r)).get<std::vector<double>>();
    m.tensors.emplace_back(m.Lambda, r, std::move(coeffs));
  }
  return m;
}

}  // namespace resglass
