// Acceptance gate: one pass/fail line per criterion, nonzero exit on failure.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "resglass/complexity.hpp"
#include "resglass/dynamics.hpp"
#include "resglass/mixture.hpp"
#include "resglass/spinglass.hpp"
#include "resglass/toynet.hpp"

namespace fs = std::filesystem;
using namespace resglass;

namespace {

int g_failures = 0;

template <class F>
void criterion(int num, const std::string& name, double budget_s, F&& body) {
  std::string detail;
  bool ok = false;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double dt =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool in_budget = budget_s <= 0.0 || dt < budget_s;
  const bool pass = ok && in_budget;
  if (!pass) ++g_failures;
  std::printf("%s  criterion %d: %-20s  %6.2fs%s%s%s\n", pass ? "PASS" : "FAIL", num,
              name.c_str(), dt,
              budget_s > 0.0
                  ? (" / budget " + std::to_string(int(budget_s)) + "s").c_str()
                  : "",
              detail.empty() ? "" : "  -- ", detail.c_str());
}

struct CmdResult {
  int exit_code = -1;
  std::string output;
};

CmdResult run_cli(const std::string& args) {
  const std::string cmd = std::string(RESGLASS_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  CmdResult result;
  if (!pipe) return result;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof(buf), pipe))
    result.output.append(buf, n);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "resglass_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return "<unreadable:" + path.string() + ">";
  return std::string(std::istreambuf_iterator<char>(f), {});
}

std::vector<double> csv_column(const std::string& csv, std::size_t col) {
  std::vector<double> out;
  std::istringstream lines(csv);
  std::string line;
  bool header = true;
  while (std::getline(lines, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::istringstream cells(line);
    std::string cell;
    for (std::size_t i = 0; i <= col; ++i)
      if (!std::getline(cells, cell, ',')) cell.clear();
    out.push_back(std::stod(cell));
  }
  return out;
}

bool unimodal(const std::vector<double>& v, std::size_t peak) {
  for (std::size_t i = 1; i <= peak; ++i)
    if (v[i] < v[i - 1]) return false;
  for (std::size_t i = peak + 1; i < v.size(); ++i)
    if (v[i] > v[i - 1]) return false;
  return true;
}

// Shadow of the argmax: direct scan of log binom(p-1, r-1) + r log beta.
int brute_force_argmax(int p, double beta) {
  int best_r = 1;
  double best = -kInf;
  for (int r = 1; r <= p; ++r) {
    const double v = std::lgamma(double(p)) - std::lgamma(double(r)) -
                     std::lgamma(double(p - r + 1)) + r * std::log(beta);
    if (v > best) {
      best = v;
      best_r = r;
    }
  }
  return best_r;
}

bool criterion_mixture(std::string& detail) {
  const std::vector<double> betas = {0.1, 0.5, 2.0};
  const std::vector<int> expected_peak = {10, 34, 67};
  for (std::size_t i = 0; i < betas.size(); ++i) {
    const fs::path dir = fresh_dir("c1_beta" + std::to_string(i));
    char args[128];
    std::snprintf(args, sizeof(args), "mixture --p 100 --beta %g --out %s",
                  betas[i], dir.c_str());
    if (run_cli(args).exit_code != 0) {
      detail = "cmd_mixture failed for beta=" + std::to_string(betas[i]);
      return false;
    }
    const std::vector<double> eps = csv_column(slurp(dir / "mixture.csv"), 1);
    if (eps.size() != 100) {
      detail = "expected 100 rows";
      return false;
    }
    const std::size_t peak =
        std::max_element(eps.begin(), eps.end()) - eps.begin();
    if (int(peak) + 1 != expected_peak[i] || !unimodal(eps, peak)) {
      detail = "shape mismatch at beta=" + std::to_string(betas[i]);
      return false;
    }
  }
  for (int p : {100, 1000})
    for (double beta : betas) {
      const int a = argmax_depth(build_mixture(p, beta));
      if (a != brute_force_argmax(p, beta)) {
        detail = "argmax != brute force at p=" + std::to_string(p);
        return false;
      }
      if (std::abs(double(a) / p - beta / (1.0 + beta)) > 2.0 / p) {
        detail = "peak fraction bound violated at p=" + std::to_string(p);
        return false;
      }
    }
  detail = "peaks at r=10,34,67; argmax exact at p=100,1000";
  return true;
}

bool criterion_band(std::string& detail) {
  const EnsembleMixture mix = build_mixture(2000, 0.5);
  const double inner = band_mass(mix, 0.23, 0.43);
  const double outer = band_mass(mix, 0.5, 0.9);
  char buf[96];
  std::snprintf(buf, sizeof(buf), "band[0.23,0.43]=%.6f band[0.5,0.9]=%.2e", inner,
                outer);
  detail = buf;
  return inner >= 0.999 && outer <= 1e-6;
}

bool criterion_legendre(std::string& detail) {
  double worst = 0.0;
  for (int p = 1; p <= 200; ++p)
    for (double beta : {0.1, 0.5, 0.9}) {
      const double closed = legendre_normalization(p, beta);
      std::vector<double> logs(p + 1);
      for (int r = 0; r <= p; ++r)
        logs[r] = 2.0 * log_binomial(p, r) + 2.0 * r * std::log(beta);
      const double direct = logsumexp(logs);
      worst = std::max(worst,
                       std::abs(closed - direct) / std::max(1.0, std::abs(direct)));
    }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "worst rel diff %.2e", worst);
  detail = buf;
  return worst <= 1e-10;
}

bool criterion_complexity(std::string& detail) {
  for (int p = 2; p <= 50; ++p) {
    const double stats = theta_from_moments(double(p), double(p) * (p - 1));
    const double closed = 0.5 * std::log(p - 1.0) - (1.0 - 2.0 / p);
    if (std::abs(stats - closed) > 1e-14) {
      detail = "pure theta mismatch at p=" + std::to_string(p);
      return false;
    }
  }
  std::vector<double> grid(50);
  for (int i = 0; i < 50; ++i) grid[i] = 0.05 + (5.0 - 0.05) * i / 49.0;
  const auto rows = theta_beta_sweep(100, grid);
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].theta < rows[i - 1].theta) {
      detail = "sweep not monotone at step " + std::to_string(i);
      return false;
    }
  for (int p : {3, 5, 10}) {
    const SimplexMaximum best = maximize_theta_on_simplex(p, 0, 16, 7);
    const double target = 0.5 * std::log(p - 1.0) - (1.0 - 2.0 / p);
    if (best.off_mass >= 1e-6 || std::abs(best.theta - target) > 1e-7) {
      detail = "simplex maximum not the r=p delta at p=" + std::to_string(p);
      return false;
    }
  }
  detail = "pure theta exact p=2..50; sweep monotone; simplex delta p=3,5,10";
  return true;
}

bool criterion_spinglass(std::string& detail) {
  const SpinGlassModel model = sample_model(4, {2}, {1.0}, 42);
  const CriticalSearch search = find_critical_points(model, 400, 42);
  if (search.points.size() != 8) {
    detail = "census size " + std::to_string(search.points.size()) + " != 8";
    return false;
  }
  Eigen::MatrixXd M(4, 4);
  for (int b = 0; b < 4; ++b)
    for (int a = 0; a < 4; ++a) M(a, b) = model.tensors[0].coeffs()[a + 4 * b];
  const Eigen::MatrixXd S = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
  const std::vector<int> want_index = {0, 0, 1, 1, 2, 2, 3, 3};
  for (int i = 0; i < 8; ++i) {
    const double want_energy = eig.eigenvalues()[i / 2] / 2.0;  // sqrt(Lambda)=2
    if (std::abs(search.points[i].energy - want_energy) > 1e-8 ||
        search.points[i].index != want_index[i]) {
      detail = "eigen oracle mismatch at point " + std::to_string(i);
      return false;
    }
  }

  Rng wr(123);
  Eigen::VectorXd w(5);
  for (int i = 0; i < 5; ++i) w[i] = wr.gaussian();
  w *= std::sqrt(5.0) / w.norm();
  const double inv = 1.0 / std::sqrt(2.0);
  const int N = 10000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < N; ++i) {
    const SpinGlassModel m = sample_model(5, {2, 3}, {inv, inv}, 1000 + i);
    const double h2 = sq(evaluate_energy(m, w));
    sum += h2;
    sum_sq += sq(h2);
  }
  const double mean = sum / N;
  const double se = std::sqrt((sum_sq / N - sq(mean)) / N);
  char buf[96];
  std::snprintf(buf, sizeof(buf), "census==oracle; E[H^2]=%.3f (3SE=%.3f, target 5)",
                mean, 3 * se);
  detail = buf;
  return std::abs(mean - 5.0) <= 3.0 * se;
}

bool criterion_dynamics(std::string& detail) {
  DynamicsConfig cfg;
  const Thm3Report r3 = verify_thm3(cfg, 200, 1e-3, 17);
  const Thm4Report r4 = verify_thm4(cfg, 200, 1e-3, 17);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "thm3 case1=%.3f case2=%.3f; thm4 median=%.2e slope=%.3f variant=%s",
                r3.case1_pass_fraction, r3.case2_pass_fraction, r4.median_residual,
                r4.residual_slope, r4.sign_variant.c_str());
  detail = buf;
  return r3.case1_pass_fraction >= 0.95 && r3.case2_pass_fraction >= 0.95 &&
         r4.median_residual < 0.05 && r4.residual_slope >= 1.8 &&
         r4.residual_slope <= 2.2;
}

double toynet_gradcheck_worst(bool use_bn) {
  ToyNetConfig cfg;
  cfg.p = 3;
  cfg.n = 4;
  cfg.d = 3;
  cfg.num_classes = 4;
  cfg.samples_per_class = 2;
  cfg.use_bn = use_bn;
  const Dataset ds = make_dataset(cfg.num_classes, cfg.d, cfg.samples_per_class, 7);
  Rng rng(123);
  ToyNetParams params = init_params(cfg, rng);
  params.lambda[0] = 1.2;
  params.lambda[1] = 0.8;
  for (Eigen::Index j = 0; j < params.Wout.cols(); ++j)
    for (Eigen::Index i = 0; i < params.Wout.rows(); ++i)
      params.Wout(i, j) = 0.3 * rng.gaussian();

  const Eigen::VectorXd sigma = forward(params, cfg, ds.X).sigma;
  const Gradients g = backward(params, cfg, ds.X, ds.y);
  const double h = 1e-5;
  double worst = 0.0;
  auto probe = [&](double& slot, double analytic) {
    const double saved = slot;
    slot = saved + h;
    const double up =
        loss_and_accuracy(forward(params, cfg, ds.X, &sigma), cfg, ds.y).loss;
    slot = saved - h;
    const double dn =
        loss_and_accuracy(forward(params, cfg, ds.X, &sigma), cfg, ds.y).loss;
    slot = saved;
    const double fd = (up - dn) / (2 * h);
    worst = std::max(worst, std::abs(fd - analytic) /
                                std::max({1e-6, std::abs(fd), std::abs(analytic)}));
  };
  for (int l = 0; l < cfg.p; ++l)
    for (Eigen::Index j = 0; j < params.W[l].cols(); ++j)
      for (Eigen::Index i = 0; i < params.W[l].rows(); ++i)
        probe(params.W[l](i, j), g.gW[l](i, j));
  for (Eigen::Index j = 0; j < params.Wout.cols(); ++j)
    for (Eigen::Index i = 0; i < params.Wout.rows(); ++i)
      probe(params.Wout(i, j), g.gWout(i, j));
  if (use_bn)
    for (int l = 0; l < cfg.p; ++l) probe(params.lambda[l], g.glambda[l]);
  return worst;
}

bool criterion_toynet(std::string& detail) {
  int bn_ok = 0, nobn_ok = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ToyNetConfig cfg;
    cfg.seed = seed;
    const TrainingTrace bn = train(cfg);
    if (!bn.aborted && median_lambda_tail(bn) > 1.05) ++bn_ok;
    cfg.use_bn = false;
    const TrainingTrace nobn = train(cfg);
    if (!nobn.aborted && nobn.rows.back().weight_norm >=
                             1.05 * nobn.rows.front().weight_norm)
      ++nobn_ok;
  }
  const double worst_bn = toynet_gradcheck_worst(true);
  const double worst_plain = toynet_gradcheck_worst(false);
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "lambda growth %d/5, norm growth %d/5, gradcheck rel %.1e / %.1e",
                bn_ok, nobn_ok, worst_bn, worst_plain);
  detail = buf;
  return bn_ok >= 4 && nobn_ok >= 4 && worst_bn < 1e-4 && worst_plain < 1e-4;
}

bool criterion_determinism(std::string& detail) {
  const std::vector<std::string> invocations = {
      "mixture --p 100 --beta 0.5 --seed 17",
      "mixture --p 64 --beta 2 --convention plain --seed 17",
      "complexity-sweep --steps 25 --seed 17",
      "spinglass-census --lambda 3 --orders 2,3 --restarts 150 --seed 11 --jobs 2",
      "dynamics --check thm3 --trials 60 --seed 7",
      "dynamics --check thm4 --trials 60 --seed 7",
      "train --iterations 150 --log-every 50 --seed 3",
  };
  int files = 0;
  for (std::size_t i = 0; i < invocations.size(); ++i) {
    const fs::path a = fresh_dir("c8_run" + std::to_string(i) + "a");
    const fs::path b = fresh_dir("c8_run" + std::to_string(i) + "b");
    const CmdResult ra = run_cli(invocations[i] + " --out " + a.string());
    const CmdResult rb = run_cli(invocations[i] + " --out " + b.string());
    if (ra.exit_code != rb.exit_code || ra.exit_code != 0) {
      detail = "nonzero exit for: " + invocations[i];
      return false;
    }
    for (const auto& entry : fs::directory_iterator(a)) {
      const fs::path name = entry.path().filename();
      if (slurp(entry.path()) != slurp(b / name)) {
        detail = name.string() + " differs for: " + invocations[i];
        return false;
      }
      ++files;
    }
  }
  detail = std::to_string(files) + " files byte-identical across reruns";
  return true;
}

}  // namespace

int main() {
  std::printf("acceptance gate\n");
  criterion(1, "mixture figures", 1.0, criterion_mixture);
  criterion(2, "band concentration", 1.0, criterion_band);
  criterion(3, "legendre identity", 0.0, criterion_legendre);
  criterion(4, "complexity", 10.0, criterion_complexity);
  criterion(5, "spin-glass oracle", 60.0, criterion_spinglass);
  criterion(6, "dynamics theorems", 60.0, criterion_dynamics);
  criterion(7, "toy resnet", 600.0, criterion_toynet);
  criterion(8, "cli determinism", 0.0, criterion_determinism);
  if (g_failures) {
    std::printf("acceptance: %d criterion(s) FAILED\n", g_failures);
    return 1;
  }
  std::printf("acceptance: all 8 criteria passed\n");
  return 0;
}
