// Critical-point census of a small mixed spin glass, checked against the
// exact eigendecomposition available in the pure quadratic case.

#include <Eigen/Dense>
#include <cstdio>

#include "resglass/spinglass.hpp"

using namespace resglass;

int main() {
  // Pure 2-spin: every critical point is +/- sqrt(Lambda) times an
  // eigenvector of the symmetrized coupling matrix.
  const int Lambda = 4;
  const SpinGlassModel pure = sample_model(Lambda, {2}, {1.0}, 42);
  const CriticalSearch search = find_critical_points(pure, 200, 42);

  Eigen::MatrixXd M(Lambda, Lambda);
  for (int b = 0; b < Lambda; ++b)
    for (int a = 0; a < Lambda; ++a)
      M(a, b) = pure.tensors[0].coeffs()[a + Lambda * b];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (M + M.transpose()));

  std::printf("pure 2-spin census (Lambda = %d, %d restarts, %d dropped)\n",
              Lambda, search.restarts, search.dropped);
  std::printf("%10s %10s %7s %14s\n", "energy", "eigen", "index", "multiplicity");
  for (size_t i = 0; i < search.points.size(); ++i) {
    const CriticalPointRecord& rec = search.points[i];
    const double oracle = eig.eigenvalues()[int(i) / 2] / std::sqrt(double(Lambda));
    std::printf("%10.5f %10.5f %7d %14d\n", rec.energy, oracle, rec.index,
                rec.multiplicity);
  }

  // Mixed 2+3 model: no closed form, the census reports what Newton found.
  const SpinGlassModel mixed =
      sample_model(6, {2, 3}, {std::sqrt(0.5), std::sqrt(0.5)}, 7);
  const CriticalSearch mixed_search = find_critical_points(mixed, 400, 7);
  std::printf("\nmixed {2,3} census (Lambda = 6): %zu points, %d dropped\n",
              mixed_search.points.size(), mixed_search.dropped);
  for (const CriticalPointRecord& rec : mixed_search.points)
    std::printf("  energy %9.5f  index %d  grad %8.1e  hits %d\n", rec.energy,
                rec.index, rec.grad_norm, rec.multiplicity);
  return 0;
}
