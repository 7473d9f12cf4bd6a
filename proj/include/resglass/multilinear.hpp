#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "resglass/common.hpp"
#include "resglass/rng.hpp"

namespace resglass {

// Dense order-r coefficient tensor on Lambda^r multi-indices, flat index
// t = sum_k i_k Lambda^k. Evaluates the full asymmetric multilinear form
//   F(w) = sum_idx T[idx] prod_k w_{i_k}
// and its exact Euclidean gradient and Hessian via prefix/suffix products.
class TensorForm {
 public:
  TensorForm() = default;
  TensorForm(int Lambda, int order, std::vector<double> coeffs)
      : Lambda_(Lambda), order_(order), coeffs_(std::move(coeffs)) {
    require(Lambda >= 1 && order >= 1, "TensorForm: Lambda and order must be >= 1");
    std::uint64_t want = 1;
    for (int k = 0; k < order; ++k) want *= std::uint64_t(Lambda);
    require(coeffs_.size() == want, "TensorForm: coefficient count != Lambda^order");
  }

  static TensorForm gaussian(int Lambda, int order, Rng& rng) {
    std::uint64_t count = 1;
    for (int k = 0; k < order; ++k) count *= std::uint64_t(Lambda);
    std::vector<double> c(count);
    for (auto& v : c) v = rng.gaussian();
    return TensorForm(Lambda, order, std::move(c));
  }

  int Lambda() const { return Lambda_; }
  int order() const { return order_; }
  const std::vector<double>& coeffs() const { return coeffs_; }
  std::vector<double>& coeffs() { return coeffs_; }

  double value(const Eigen::VectorXd& w) const {
    double acc = 0.0;
    iterate(w, [&](double coeff, const int* /*digits*/, const double* prefix,
                   const double* /*suffix*/) { acc += coeff * prefix[order_]; });
    return acc;
  }

  void add_gradient(const Eigen::VectorXd& w, double scale,
                    Eigen::VectorXd& grad) const {
    iterate(w, [&](double coeff, const int* digits, const double* prefix,
                   const double* suffix) {
      for (int a = 0; a < order_; ++a)
        grad[digits[a]] += scale * coeff * prefix[a] * suffix[a + 1];
    });
  }

  void add_hessian(const Eigen::VectorXd& w, double scale,
                   Eigen::MatrixXd& hess) const {
    iterate(w, [&](double coeff, const int* digits, const double* prefix,
                   const double* suffix) {
      for (int a = 0; a < order_; ++a) {
        double mid = 1.0;  // product of w over positions strictly between a and b
        for (int b = a + 1; b < order_; ++b) {
          const double v = scale * coeff * prefix[a] * mid * suffix[b + 1];
          hess(digits[a], digits[b]) += v;
          hess(digits[b], digits[a]) += v;
          mid *= w[digits[b]];
        }
      }
    });
  }

 private:
  // Calls f(coeff, digits, prefix, suffix) for every multi-index:
  // prefix[a] = prod_{k<a} w_{i_k} (prefix[order] = full product),
  // suffix[a] = prod_{k>=a} w_{i_k}.
  template <class F>
  void iterate(const Eigen::VectorXd& w, F&& f) const {
    std::vector<int> digits(order_, 0);
    std::vector<double> prefix(order_ + 1), suffix(order_ + 1);
    const std::uint64_t total = coeffs_.size();
    for (std::uint64_t t = 0; t < total; ++t) {
      prefix[0] = 1.0;
      for (int k = 0; k < order_; ++k) prefix[k + 1] = prefix[k] * w[digits[k]];
      suffix[order_] = 1.0;
      for (int k = order_ - 1; k >= 0; --k) suffix[k] = suffix[k + 1] * w[digits[k]];
      f(coeffs_[t], digits.data(), prefix.data(), suffix.data());
      for (int k = 0; k < order_; ++k) {  // odometer increment
        if (++digits[k] < Lambda_) break;
        digits[k] = 0;
      }
    }
  }

  int Lambda_ = 0;
  int order_ = 0;
  std::vector<double> coeffs_;
};

}  // namespace resglass
