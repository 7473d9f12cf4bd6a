#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "resglass/complexity.hpp"
#include "resglass/csv.hpp"
#include "resglass/dynamics.hpp"
#include "resglass/mixture.hpp"
#include "resglass/spinglass.hpp"
#include "resglass/svg.hpp"
#include "resglass/toynet.hpp"

namespace resglass {

struct OutputFlags {
  bool csv = true;
  bool json = true;
  bool svg = true;
};

namespace detail {

inline void write_json(const nlohmann::ordered_json& j,
                       const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw param_error("cannot open " + path.string());
  f << j.dump(2) << "\n";
}

inline std::string short_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", x);
  return buf;
}

}  // namespace detail

// Files: mixture.csv, mixture.json, mixture.svg
inline int cmd_mixture(int p, double beta, Convention conv,
                       const std::filesystem::path& out, const OutputFlags& flags) {
  const EnsembleMixture mix = build_mixture(p, beta, conv);
  std::filesystem::create_directories(out);

  if (flags.csv) {
    CsvTable table({"r", "eps", "eps_squared", "log_eps"});
    for (int r = 1; r <= p; ++r)
      table.add(r, mix.eps[r - 1], sq(mix.eps[r - 1]), mix.log_eps[r - 1]);
    table.write(out / "mixture.csv");
  }
  if (flags.json) {
    nlohmann::ordered_json j;
    j["p"] = p;
    j["beta"] = beta;
    j["convention"] = to_string(conv);
    j["eps"] = mix.eps;
    j["log_z"] = mix.log_z;
    j["argmax_depth"] = argmax_depth(mix);
    detail::write_json(j, out / "mixture.json");
  }
  if (flags.svg) {
    std::vector<double> rs(p), es(p);
    for (int r = 1; r <= p; ++r) {
      rs[r - 1] = r;
      es[r - 1] = mix.eps[r - 1];
    }
    Plot plot("Depth mixture, p=" + std::to_string(p) +
                  ", beta=" + detail::short_double(beta),
              "depth r", "eps_r");
    plot.add_bars("eps", rs, es);
    plot.write(out / "mixture.svg");
  }
  std::printf("mixture: p=%d beta=%s argmax_depth=%d\n", p,
              detail::short_double(beta).c_str(), argmax_depth(mix));
  return kExitSuccess;
}

// Files: complexity_sweep.csv, complexity_sweep.svg
inline int cmd_complexity_sweep(int p, double beta_min, double beta_max, int steps,
                                const std::filesystem::path& out,
                                const OutputFlags& flags) {
  require(steps >= 1, "complexity-sweep: steps must be >= 1");
  require(beta_min > 0.0, "complexity-sweep: beta-min must be positive");
  require(beta_max >= beta_min, "complexity-sweep: beta-max must be >= beta-min");
  std::vector<double> grid(steps);
  for (int i = 0; i < steps; ++i)
    grid[i] = steps == 1 ? beta_min
                         : beta_min + (beta_max - beta_min) * i / double(steps - 1);
  const std::vector<ThetaSweepRow> rows = theta_beta_sweep(p, grid);
  std::filesystem::create_directories(out);

  if (flags.csv) {
    CsvTable table({"beta", "v1", "v2", "alpha_sq", "theta"});
    for (const auto& row : rows)
      table.add(row.beta, row.v1, row.v2, row.alpha_sq, row.theta);
    table.write(out / "complexity_sweep.csv");
  }
  if (flags.svg) {
    std::vector<double> xs, ys;
    for (const auto& row : rows) {
      xs.push_back(row.beta);
      ys.push_back(row.theta);
    }
    Plot plot("Complexity exponent, p=" + std::to_string(p), "beta", "theta");
    plot.add_line("theta", xs, ys);
    plot.write(out / "complexity_sweep.svg");
  }
  std::printf("complexity-sweep: p=%d steps=%d theta[last]=%s\n", p, steps,
              detail::short_double(rows.back().theta).c_str());
  return kExitSuccess;
}

// Files: census.csv, census_hist.csv, census_hist.svg, model.json
inline int cmd_spinglass_census(int Lambda, std::vector<int> orders,
                                std::vector<double> eps, int restarts,
                                std::uint64_t seed, double ceiling, int jobs,
                                const std::filesystem::path& out,
                                const OutputFlags& flags) {
  require(!orders.empty(), "spinglass-census: orders must not be empty");
  if (eps.empty())
    eps.assign(orders.size(), 1.0 / std::sqrt(double(orders.size())));
  require(eps.size() == orders.size(),
          "spinglass-census: eps and orders must have equal length");
  double mass = 0.0;
  for (double e : eps) mass += sq(e);
  require(mass > 0.0, "spinglass-census: eps must not be all zero");
  if (std::abs(mass - 1.0) > 1e-12) {
    std::fprintf(stderr, "warning: eps renormalized to unit square mass\n");
    for (double& e : eps) e /= std::sqrt(mass);
  }

  const SpinGlassModel model = sample_model(Lambda, orders, eps, seed);
  const CriticalSearch search = find_critical_points(model, restarts, seed, jobs);
  if (restarts == 0)
    std::fprintf(stderr, "warning: restarts=0, census is empty\n");

  CensusHistogram hist;
  hist.restarts = search.restarts;
  hist.dropped = search.dropped;
  hist.degenerate = search.degenerate;

  std::filesystem::create_directories(out);
  if (flags.csv) {
    CsvTable census({"energy", "index", "grad_norm", "multiplicity"});
    for (const auto& rec : search.points) {
      if (rec.energy > ceiling) continue;
      census.add(rec.energy, rec.index, rec.grad_norm, rec.multiplicity);
    }
    census.write(out / "census.csv");
  }
  for (const auto& rec : search.points) {
    if (rec.energy > ceiling) continue;
    ++hist.by_index[rec.index];
    ++hist.total;
  }
  if (flags.csv) {
    CsvTable table({"index", "count"});
    for (const auto& [index, count] : hist.by_index) table.add(index, count);
    table.write(out / "census_hist.csv");
  }
  if (flags.json) detail::write_json(model_to_json(model), out / "model.json");
  if (flags.svg && !hist.by_index.empty()) {
    std::vector<double> xs, ys;
    for (const auto& [index, count] : hist.by_index) {
      xs.push_back(index);
      ys.push_back(double(count));
    }
    Plot plot("Critical point census, Lambda=" + std::to_string(Lambda), "index",
              "count");
    plot.add_bars("count", xs, ys);
    plot.write(out / "census_hist.svg");
  }
  std::printf("spinglass-census: restarts=%d points=%lld dropped=%d\n", restarts,
              hist.total, search.dropped);
  return kExitSuccess;
}

// Files: dynamics_thm3.json or dynamics_thm4.json; exit 0 iff criteria met.
inline int cmd_dynamics(const std::string& check, const DynamicsConfig& cfg,
                        int trials, double mu, std::uint64_t seed, int jobs,
                        const std::filesystem::path& out, const OutputFlags& flags) {
  require(check == "thm3" || check == "thm4",
          "dynamics: check must be 'thm3' or 'thm4'");
  std::filesystem::create_directories(out);
  bool pass = false;
  nlohmann::ordered_json j;
  j["check"] = check;
  if (check == "thm3") {
    const Thm3Report rep = verify_thm3(cfg, trials, mu, seed, jobs);
    j["trials"] = rep.trials;
    j["mu"] = rep.mu;
    j["pass_fraction"] = rep.pass_fraction;
    j["median_residual"] = rep.median_residual;
    j["residual_slope"] = rep.residual_slope;
    j["sign_variant"] = "theorem";
    j["case1_pass_fraction"] = rep.case1_pass_fraction;
    j["case2_pass_fraction"] = rep.case2_pass_fraction;
    j["case1_tested"] = rep.case1_tested;
    j["case2_tested"] = rep.case2_tested;
    pass = rep.case1_pass_fraction >= 0.95 && rep.case2_pass_fraction >= 0.95;
    std::printf("dynamics thm3: case1=%.4f case2=%.4f slope=%.3f -> %s\n",
                rep.case1_pass_fraction, rep.case2_pass_fraction,
                rep.residual_slope, pass ? "pass" : "FAIL");
  } else {
    const Thm4Report rep = verify_thm4(cfg, trials, mu, seed, jobs);
    j["trials"] = rep.trials;
    j["mu"] = rep.mu;
    j["pass_fraction"] = rep.pass_fraction;
    j["median_residual"] = rep.median_residual;
    j["residual_slope"] = rep.residual_slope;
    j["sign_variant"] = rep.sign_variant;
    j["median_residual_appendix"] = rep.median_residual_appendix;
    pass = rep.median_residual < 0.05 && rep.residual_slope >= 1.8 &&
           rep.residual_slope <= 2.2;
    std::printf("dynamics thm4: median=%.3e slope=%.3f variant=%s -> %s\n",
                rep.median_residual, rep.residual_slope, rep.sign_variant.c_str(),
                pass ? "pass" : "FAIL");
  }
  if (flags.json)
    detail::write_json(j, out / ("dynamics_" + check + ".json"));
  return pass ? kExitSuccess : kExitVerificationFailure;
}

// Files: train_trace.csv, train_lambda.svg, train_norm.svg; exit 3 on abort.
inline int cmd_train(const ToyNetConfig& cfg, const std::filesystem::path& out,
                     const OutputFlags& flags) {
  validate(cfg);
  const TrainingTrace trace = train(cfg);
  std::filesystem::create_directories(out);

  nlohmann::ordered_json cj;
  cj["p"] = cfg.p;
  cj["n"] = cfg.n;
  cj["d"] = cfg.d;
  cj["num_classes"] = cfg.num_classes;
  cj["samples_per_class"] = cfg.samples_per_class;
  cj["use_bn"] = cfg.use_bn;
  cj["loss"] = to_string(cfg.loss);
  cj["learning_rate"] = cfg.learning_rate;
  cj["batch_size"] = cfg.batch_size;
  cj["iterations"] = cfg.iterations;
  cj["log_every"] = cfg.log_every;
  cj["seed"] = cfg.seed;

  if (flags.csv) {
    std::vector<std::string> header = {"iteration", "loss", "accuracy"};
    for (int l = 1; l <= cfg.p; ++l) header.push_back("lambda_" + std::to_string(l));
    header.push_back("weight_norm");
    CsvTable table(header);
    table.add_comment("config: " + cj.dump());
    if (trace.aborted) table.add_comment("aborted: training diverged");
    for (const auto& row : trace.rows) {
      std::vector<std::string> cells = {std::to_string(row.iteration),
                                        format_double(row.loss),
                                        format_double(row.accuracy)};
      for (int l = 0; l < cfg.p; ++l) cells.push_back(format_double(row.lambda[l]));
      cells.push_back(format_double(row.weight_norm));
      table.add_row(std::move(cells));
    }
    table.write(out / "train_trace.csv");
  }

  if (flags.svg && !trace.rows.empty()) {
    std::vector<double> its;
    for (const auto& row : trace.rows) its.push_back(row.iteration);

    Plot lambda_plot("Batch-norm scales" + std::string(cfg.use_bn ? "" : " (BN off)"),
                     "iteration", "lambda_l");
    for (int l = 0; l < cfg.p; ++l) {
      std::vector<double> ys;
      for (const auto& row : trace.rows) ys.push_back(row.lambda[l]);
      lambda_plot.add_line("lambda_" + std::to_string(l + 1), its, ys);
    }
    lambda_plot.write(out / "train_lambda.svg");

    Plot norm_plot("Weight norm", "iteration", "||W||_2");
    std::vector<double> ys;
    for (const auto& row : trace.rows) ys.push_back(row.weight_norm);
    norm_plot.add_line("weight_norm", its, ys);
    norm_plot.write(out / "train_norm.svg");
  }

  if (trace.aborted) {
    std::fprintf(stderr, "error: training diverged; partial trace written\n");
    return kExitNumericalAbort;
  }
  const TraceRow& last = trace.rows.back();
  std::printf("train: iterations=%d loss=%.6g accuracy=%.4f weight_norm=%.6g\n",
              cfg.iterations, last.loss, last.accuracy, last.weight_norm);
  return kExitSuccess;
}

}  // namespace resglass
