#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "resglass/common.hpp"
#include "resglass/rng.hpp"

namespace resglass {

enum class LossKind { Softmax, Hinge };

inline std::string to_string(LossKind k) {
  return k == LossKind::Softmax ? "softmax" : "hinge";
}

inline LossKind loss_kind_from_string(const std::string& s) {
  if (s == "softmax") return LossKind::Softmax;
  if (s == "hinge") return LossKind::Hinge;
  throw param_error("loss kind must be 'softmax' or 'hinge'");
}

struct ToyNetConfig {
  int p = 10;
  int n = 16;
  int d = 16;
  int num_classes = 50;
  int samples_per_class = 20;
  bool use_bn = true;
  LossKind loss = LossKind::Softmax;
  double learning_rate = 0.01;
  int batch_size = 64;
  int iterations = 4000;
  int log_every = 100;
  std::uint64_t seed = 17;
};

inline void validate(const ToyNetConfig& cfg) {
  require(cfg.p >= 2, "config: p must be >= 2");
  require(cfg.n >= 1 && cfg.d >= 1, "config: n and d must be positive");
  require(cfg.num_classes >= 2, "config: num_classes must be >= 2");
  require(cfg.samples_per_class >= 1, "config: samples_per_class must be >= 1");
  require(cfg.learning_rate > 0.0, "config: learning_rate must be positive");
  require(cfg.batch_size >= 1, "config: batch_size must be >= 1");
  require(cfg.iterations >= 0, "config: iterations must be >= 0");
  require(cfg.log_every >= 1, "config: log_every must be >= 1");
  require(cfg.loss == LossKind::Softmax || cfg.num_classes == 2,
          "config: hinge loss requires num_classes == 2");
}

// --- dataset ------------------------------------------------------------------

struct Dataset {
  Eigen::MatrixXd X;       // d x N, samples as columns, class-major order
  std::vector<int> y;      // N labels in [0, num_classes)
  int num_classes = 0;
};

// Class means uniform in [-1, 1]^d, isotropic covariance 0.1 I.
inline Dataset make_dataset(int num_classes, int d, int samples_per_class,
                            std::uint64_t seed) {
  require(num_classes >= 2, "make_dataset: num_classes must be >= 2");
  require(d >= 1, "make_dataset: d must be >= 1");
  require(samples_per_class >= 1, "make_dataset: samples_per_class must be >= 1");
  Rng root(seed);
  Rng mean_rng = root.stream("dataset-means");
  Rng sample_rng = root.stream("dataset-samples");
  Eigen::MatrixXd means(d, num_classes);
  for (int k = 0; k < num_classes; ++k)
    for (int i = 0; i < d; ++i) means(i, k) = mean_rng.uniform(-1.0, 1.0);
  const double noise = std::sqrt(0.1);
  Dataset ds;
  ds.num_classes = num_classes;
  ds.X.resize(d, std::size_t(num_classes) * samples_per_class);
  ds.y.resize(std::size_t(num_classes) * samples_per_class);
  for (int k = 0; k < num_classes; ++k)
    for (int s = 0; s < samples_per_class; ++s) {
      const Eigen::Index col = Eigen::Index(k) * samples_per_class + s;
      for (int i = 0; i < d; ++i)
        ds.X(i, col) = means(i, k) + noise * sample_rng.gaussian();
      ds.y[col] = k;
    }
  return ds;
}

// --- parameters and forward ----------------------------------------------------

struct ToyNetParams {
  std::vector<Eigen::MatrixXd> W;  // W[0]: d x n, W[1..p-1]: n x n
  Eigen::VectorXd lambda;          // per-layer BN scale, init 1
  Eigen::VectorXd sigma;           // latest per-batch sigma estimates, init 1
  Eigen::MatrixXd Wout;            // n x num_classes (softmax) or n x 1 (hinge)

  double weight_norm() const {
    double s = 0.0;
    for (const auto& Wl : W) s += Wl.squaredNorm();
    return std::sqrt(s);
  }
};

// Fan-in initialization N(0, 1/fan_in); the head starts at zero so early
// updates cannot blow up the per-layer scales.
inline ToyNetParams init_params(const ToyNetConfig& cfg, Rng& rng) {
  ToyNetParams params;
  params.W.reserve(cfg.p);
  for (int l = 0; l < cfg.p; ++l) {
    const int fan_in = l == 0 ? cfg.d : cfg.n;
    Eigen::MatrixXd Wl(fan_in, cfg.n);
    const double scale = 1.0 / std::sqrt(double(fan_in));
    for (Eigen::Index j = 0; j < Wl.cols(); ++j)
      for (Eigen::Index i = 0; i < Wl.rows(); ++i)
        Wl(i, j) = scale * rng.gaussian();
    params.W.push_back(std::move(Wl));
  }
  params.lambda = Eigen::VectorXd::Ones(cfg.p);
  params.sigma = Eigen::VectorXd::Ones(cfg.p);
  const int head = cfg.loss == LossKind::Hinge ? 1 : cfg.num_classes;
  params.Wout = Eigen::MatrixXd::Zero(cfg.n, head);
  return params;
}

// Mean over units of the per-unit root-mean-square activation, floored away
// from zero. Uncentered on purpose: the scale estimate must track the second
// moment the residual recursion accumulates, not the spread around the mean.
inline double sigma_rms(const Eigen::MatrixXd& A) {
  const Eigen::Index B = A.cols();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    acc += std::sqrt(A.row(i).squaredNorm() / double(B));
  return std::max(acc / double(A.rows()), 1e-6);
}

// One residual layer H -> (lambda/sigma) R(W^T H) + H with sigma estimated
// from the batch. Layer arithmetic identical to the training forward pass.
inline Eigen::MatrixXd residual_step(const Eigen::MatrixXd& Wl, double lambda,
                                     bool use_bn, const Eigen::MatrixXd& H_prev,
                                     double* sigma_out = nullptr) {
  if (Wl.rows() != H_prev.rows())
    throw domain_error("residual_step: shape mismatch");
  const Eigen::MatrixXd A = (Wl.transpose() * H_prev).cwiseMax(0.0);
  const double sigma = use_bn ? sigma_rms(A) : 1.0;
  if (sigma_out) *sigma_out = sigma;
  if (!use_bn) return A + H_prev;
  return (lambda / sigma) * A + H_prev;
}

struct ForwardCache {
  std::vector<Eigen::MatrixXd> A;  // post-ReLU activations per layer
  std::vector<Eigen::MatrixXd> H;  // post-skip outputs per layer
  Eigen::VectorXd sigma;           // sigma used for this batch
  Eigen::MatrixXd logits;          // head x B
};

// sigma_override freezes the per-layer estimates (stop-gradient semantics for
// finite-difference checks); by default sigma comes from the batch itself.
inline ForwardCache forward(const ToyNetParams& params, const ToyNetConfig& cfg,
                            const Eigen::MatrixXd& X,
                            const Eigen::VectorXd* sigma_override = nullptr) {
  if (X.rows() != cfg.d) throw domain_error("forward: input dim mismatch");
  if (int(params.W.size()) != cfg.p) throw domain_error("forward: layer count mismatch");
  ForwardCache cache;
  cache.A.resize(cfg.p);
  cache.H.resize(cfg.p);
  cache.sigma = Eigen::VectorXd::Ones(cfg.p);
  for (int l = 0; l < cfg.p; ++l) {
    const Eigen::MatrixXd& below = l == 0 ? X : cache.H[l - 1];
    cache.A[l] = (params.W[l].transpose() * below).cwiseMax(0.0);
    double sigma = 1.0;
    if (cfg.use_bn)
      sigma = sigma_override ? std::max((*sigma_override)[l], 1e-6)
                             : sigma_rms(cache.A[l]);
    cache.sigma[l] = sigma;
    const double scale = cfg.use_bn ? params.lambda[l] / sigma : 1.0;
    if (l == 0)
      cache.H[l] = scale * cache.A[l];
    else
      cache.H[l] = scale * cache.A[l] + cache.H[l - 1];
  }
  cache.logits = params.Wout.transpose() * cache.H[cfg.p - 1];
  return cache;
}

// --- loss, accuracy, gradients -------------------------------------------------

namespace detail {

// Column-wise softmax probabilities, stabilized by the per-column maximum.
inline Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd P = logits;
  for (Eigen::Index b = 0; b < P.cols(); ++b) {
    P.col(b).array() -= P.col(b).maxCoeff();
    P.col(b) = P.col(b).array().exp();
    P.col(b) /= P.col(b).sum();
  }
  return P;
}

}  // namespace detail

struct LossValue {
  double loss = 0.0;
  double accuracy = 0.0;
};

inline LossValue loss_and_accuracy(const ForwardCache& cache, const ToyNetConfig& cfg,
                                   const std::vector<int>& y) {
  const Eigen::Index B = cache.logits.cols();
  if (Eigen::Index(y.size()) != B)
    throw domain_error("loss_and_accuracy: label count mismatch");
  LossValue out;
  if (cfg.loss == LossKind::Hinge) {
    for (Eigen::Index b = 0; b < B; ++b) {
      const double sign = y[b] == 1 ? 1.0 : -1.0;
      const double margin = sign * cache.logits(0, b);
      out.loss += std::max(0.0, 1.0 - margin);
      out.accuracy += (cache.logits(0, b) > 0.0) == (y[b] == 1) ? 1.0 : 0.0;
    }
  } else {
    const Eigen::MatrixXd P = detail::softmax_columns(cache.logits);
    for (Eigen::Index b = 0; b < B; ++b) {
      out.loss += -std::log(std::max(P(y[b], b), 1e-300));
      Eigen::Index argmax = 0;
      P.col(b).maxCoeff(&argmax);
      out.accuracy += argmax == y[b] ? 1.0 : 0.0;
    }
  }
  out.loss /= double(B);
  out.accuracy /= double(B);
  return out;
}

struct Gradients {
  std::vector<Eigen::MatrixXd> gW;
  Eigen::VectorXd glambda;
  Eigen::MatrixXd gWout;
  double loss = 0.0;
  double accuracy = 0.0;
  Eigen::VectorXd sigma;  // per-batch estimates used in the pass
};

// Mean-loss gradients over the batch; sigma is a per-batch constant.
inline Gradients backward(const ToyNetParams& params, const ToyNetConfig& cfg,
                          const Eigen::MatrixXd& X, const std::vector<int>& y,
                          const Eigen::VectorXd* sigma_override = nullptr) {
  const ForwardCache cache = forward(params, cfg, X, sigma_override);
  const Eigen::Index B = X.cols();
  if (Eigen::Index(y.size()) != B) throw domain_error("backward: label count mismatch");

  const LossValue lv = loss_and_accuracy(cache, cfg, y);
  Gradients g;
  g.loss = lv.loss;
  g.accuracy = lv.accuracy;
  g.sigma = cache.sigma;
  g.glambda = Eigen::VectorXd::Zero(cfg.p);
  g.gW.resize(cfg.p);

  Eigen::MatrixXd dlogits;
  if (cfg.loss == LossKind::Hinge) {
    dlogits = Eigen::MatrixXd::Zero(1, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      const double sign = y[b] == 1 ? 1.0 : -1.0;
      if (1.0 - sign * cache.logits(0, b) > 0.0) dlogits(0, b) = -sign / double(B);
    }
  } else {
    dlogits = detail::softmax_columns(cache.logits);
    for (Eigen::Index b = 0; b < B; ++b) dlogits(y[b], b) -= 1.0;
    dlogits /= double(B);
  }

  const Eigen::MatrixXd& Hp = cache.H[cfg.p - 1];
  g.gWout = Hp * dlogits.transpose();
  Eigen::MatrixXd G = params.Wout * dlogits;  // dL/dH_l, starts at l = p-1

  for (int l = cfg.p - 1; l >= 0; --l) {
    const double scale = cfg.use_bn ? params.lambda[l] / cache.sigma[l] : 1.0;
    if (cfg.use_bn)
      g.glambda[l] = (G.array() * cache.A[l].array()).sum() / cache.sigma[l];
    const Eigen::MatrixXd dZ =
        (scale * G.array() * (cache.A[l].array() > 0.0).cast<double>()).matrix();
    const Eigen::MatrixXd& below = l == 0 ? X : cache.H[l - 1];
    g.gW[l] = below * dZ.transpose();
    if (l > 0) G += params.W[l] * dZ;  // skip path plus transformed path
  }
  return g;
}

// --- training -----------------------------------------------------------------

struct TraceRow {
  int iteration = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  Eigen::VectorXd lambda;
  double weight_norm = 0.0;
};

struct TrainingTrace {
  ToyNetConfig config;
  std::vector<TraceRow> rows;
  bool aborted = false;
  ToyNetParams final_params;
};

namespace detail {

inline TraceRow trace_row(int iteration, const ToyNetParams& params,
                          const ToyNetConfig& cfg, const Dataset& ds) {
  const ForwardCache cache = forward(params, cfg, ds.X);
  const LossValue lv = loss_and_accuracy(cache, cfg, ds.y);
  TraceRow row;
  row.iteration = iteration;
  row.loss = lv.loss;
  row.accuracy = lv.accuracy;
  row.lambda = params.lambda;
  row.weight_norm = params.weight_norm();
  return row;
}

}  // namespace detail

// Plain SGD. Rows are logged before the step at every log_every-th iteration
// and once more after the final step; divergence aborts with a partial trace.
inline TrainingTrace train(const ToyNetConfig& cfg) {
  validate(cfg);
  const Dataset ds = make_dataset(cfg.num_classes, cfg.d, cfg.samples_per_class,
                                  cfg.seed);
  Rng root(cfg.seed);
  Rng init_rng = root.stream("init");
  Rng batch_rng = root.stream("batch");

  TrainingTrace trace;
  trace.config = cfg;
  ToyNetParams params = init_params(cfg, init_rng);

  const Eigen::Index N = ds.X.cols();
  Eigen::MatrixXd bx(cfg.d, cfg.batch_size);
  std::vector<int> by(cfg.batch_size);

  auto row_is_finite = [](const TraceRow& row) {
    return std::isfinite(row.loss) && std::isfinite(row.weight_norm) &&
           row.lambda.allFinite();
  };

  for (int it = 0; it < cfg.iterations; ++it) {
    if (it % cfg.log_every == 0) {
      TraceRow row = detail::trace_row(it, params, cfg, ds);
      if (!row_is_finite(row)) {
        trace.aborted = true;
        trace.final_params = std::move(params);
        return trace;
      }
      trace.rows.push_back(std::move(row));
    }

    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto idx = Eigen::Index(batch_rng.integer(std::uint64_t(N)));
      bx.col(b) = ds.X.col(idx);
      by[b] = ds.y[idx];
    }
    const Gradients g = backward(params, cfg, bx, by);
    if (!std::isfinite(g.loss)) {
      trace.aborted = true;
      trace.final_params = std::move(params);
      return trace;
    }
    params.sigma = g.sigma;
    for (int l = 0; l < cfg.p; ++l) params.W[l] -= cfg.learning_rate * g.gW[l];
    if (cfg.use_bn) params.lambda -= cfg.learning_rate * g.glambda;
    params.Wout -= cfg.learning_rate * g.gWout;
  }

  TraceRow last = detail::trace_row(cfg.iterations, params, cfg, ds);
  if (row_is_finite(last))
    trace.rows.push_back(std::move(last));
  else
    trace.aborted = true;
  trace.final_params = std::move(params);
  return trace;
}

// Median of the final BN scales over the skippable layers l >= 2.
inline double median_lambda_tail(const TrainingTrace& trace) {
  require(!trace.rows.empty(), "median_lambda_tail: empty trace");
  const Eigen::VectorXd& lambda = trace.rows.back().lambda;
  require(lambda.size() >= 2, "median_lambda_tail: need p >= 2");
  std::vector<double> tail(lambda.data() + 1, lambda.data() + lambda.size());
  std::sort(tail.begin(), tail.end());
  const std::size_t n = tail.size();
  return n % 2 ? tail[n / 2] : 0.5 * (tail[n / 2 - 1] + tail[n / 2]);
}

}  // namespace resglass
