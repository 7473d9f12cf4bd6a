#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "resglass/commands.hpp"

namespace {

using resglass::param_error;

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    std::size_t next = csv.find(',', pos);
    if (next == std::string::npos) next = csv.size();
    try {
      out.push_back(std::stoi(csv.substr(pos, next - pos)));
    } catch (const std::exception&) {
      throw param_error("invalid integer list: " + csv);
    }
    pos = next + 1;
  }
  if (out.empty()) throw param_error("empty integer list");
  return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    std::size_t next = csv.find(',', pos);
    if (next == std::string::npos) next = csv.size();
    try {
      out.push_back(std::stod(csv.substr(pos, next - pos)));
    } catch (const std::exception&) {
      throw param_error("invalid number list: " + csv);
    }
    pos = next + 1;
  }
  return out;
}

// Turn a JSON config object into flag tokens injected right after the
// subcommand, so explicitly passed flags override it (options take the last
// occurrence). Keys use the long flag spelling without the leading dashes.
std::vector<std::string> inject_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config_path;
  std::size_t subcmd_at = args.size();
  for (std::size_t i = 0; i < args.size();) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw param_error("--config needs a file path");
      config_path = args[i + 1];
      args.erase(args.begin() + i, args.begin() + i + 2);
      continue;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
      args.erase(args.begin() + i);
      continue;
    }
    if (subcmd_at == args.size() && !args[i].empty() && args[i][0] != '-')
      subcmd_at = i;
    ++i;
  }
  if (config_path.empty()) return args;
  if (subcmd_at == args.size())
    throw param_error("--config requires a subcommand");

  std::ifstream f(config_path);
  if (!f) throw param_error("cannot open config file: " + config_path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw param_error(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw param_error("config must be a JSON object");

  std::vector<std::string> tokens;
  for (const auto& [key, value] : j.items()) {
    if (value.is_boolean()) {
      tokens.push_back((value.get<bool>() ? "--" : "--no-") + key);
    } else if (value.is_array()) {
      std::string csv;
      for (const auto& item : value) {
        if (!csv.empty()) csv += ',';
        csv += item.is_string() ? item.get<std::string>() : item.dump();
      }
      tokens.push_back("--" + key);
      tokens.push_back(csv);
    } else {
      tokens.push_back("--" + key);
      tokens.push_back(value.is_string() ? value.get<std::string>() : value.dump());
    }
  }
  args.insert(args.begin() + subcmd_at + 1, tokens.begin(), tokens.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace resglass;

  CLI::App app{"Numerical laboratory for depth mixtures, spin-glass censuses, "
               "scale dynamics, and a toy residual network"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  std::string out = "out";
  std::uint64_t seed = 17;
  int jobs = 1;
  OutputFlags flags;

  auto add_common = [&](CLI::App* sub, bool with_jobs) {
    sub->add_option("--out", out, "Output directory")->capture_default_str();
    sub->add_option("--seed", seed, "Root RNG seed")->capture_default_str();
    if (with_jobs)
      sub->add_option("--jobs", jobs, "Worker threads (deterministic merge)")
          ->check(CLI::PositiveNumber);
    sub->add_flag("--csv,!--no-csv", flags.csv, "Write CSV outputs");
    sub->add_flag("--json,!--no-json", flags.json, "Write JSON outputs");
    sub->add_flag("--svg,!--no-svg", flags.svg, "Write SVG plots");
  };

  // mixture
  int mix_p = 100;
  double mix_beta = 0.5;
  std::string mix_conv = "shifted";
  auto* mixture = app.add_subcommand("mixture", "Depth-mixture vector eps_r");
  mixture->add_option("--p", mix_p, "Network depth")->capture_default_str();
  mixture->add_option("--beta", mix_beta, "Effective width-scale product")
      ->capture_default_str();
  mixture->add_option("--convention", mix_conv, "shifted | plain")
      ->capture_default_str();
  add_common(mixture, false);

  // complexity-sweep
  int sw_p = 100, sw_steps = 50;
  double sw_min = 0.05, sw_max = 5.0;
  auto* sweep = app.add_subcommand("complexity-sweep",
                                   "Complexity exponent theta against beta");
  sweep->add_option("--p", sw_p, "Network depth")->capture_default_str();
  sweep->add_option("--beta-min", sw_min, "Grid start")->capture_default_str();
  sweep->add_option("--beta-max", sw_max, "Grid end")->capture_default_str();
  sweep->add_option("--steps", sw_steps, "Grid points")->capture_default_str();
  add_common(sweep, false);

  // spinglass-census
  int sg_lambda = 4, sg_restarts = 200;
  std::string sg_orders = "2,3", sg_eps;
  double sg_ceiling = kInf;
  auto* census = app.add_subcommand("spinglass-census",
                                    "Empirical critical-point census");
  census->add_option("--lambda", sg_lambda, "Ambient dimension")
      ->capture_default_str();
  census->add_option("--orders", sg_orders, "Comma-separated interaction orders")
      ->capture_default_str();
  census->add_option("--eps", sg_eps,
                     "Comma-separated mixture weights (default: uniform)");
  census->add_option("--restarts", sg_restarts, "Newton restarts")
      ->capture_default_str();
  census->add_option("--ceiling", sg_ceiling,
                     "Keep only points with energy <= ceiling");
  add_common(census, true);

  // dynamics
  std::string dy_check;
  int dy_trials = 200, dy_lambda = 4, dy_m = 2, dy_p = 4;
  double dy_mu = 1e-3, dy_c = 1.0;
  auto* dynamics = app.add_subcommand("dynamics",
                                      "One-step scale-dynamics verification");
  dynamics->add_option("--check", dy_check, "thm3 | thm4")->required();
  dynamics->add_option("--trials", dy_trials, "Trial count")->capture_default_str();
  dynamics->add_option("--mu", dy_mu, "Learning rate")->capture_default_str();
  dynamics->add_option("--lambda", dy_lambda, "Ambient dimension")
      ->capture_default_str();
  dynamics->add_option("--m", dy_m, "Short-path order")->capture_default_str();
  dynamics->add_option("--p", dy_p, "Long-path order")->capture_default_str();
  dynamics->add_option("--c", dy_c, "Global scale C")->capture_default_str();
  add_common(dynamics, true);

  // train
  ToyNetConfig tn;
  std::string tn_loss = "softmax";
  auto* train_cmd = app.add_subcommand("train", "Toy residual network training");
  train_cmd->add_option("--p", tn.p, "Layers")->capture_default_str();
  train_cmd->add_option("--n", tn.n, "Width")->capture_default_str();
  train_cmd->add_option("--d", tn.d, "Input dimension")->capture_default_str();
  train_cmd->add_option("--classes", tn.num_classes, "Class count")
      ->capture_default_str();
  train_cmd->add_option("--samples-per-class", tn.samples_per_class,
                        "Samples per class")
      ->capture_default_str();
  train_cmd->add_flag("--bn,!--no-bn", tn.use_bn, "Multiplicative batch norm");
  train_cmd->add_option("--loss", tn_loss, "softmax | hinge")
      ->capture_default_str();
  train_cmd->add_option("--lr", tn.learning_rate, "Learning rate")
      ->capture_default_str();
  train_cmd->add_option("--batch-size", tn.batch_size, "SGD batch size")
      ->capture_default_str();
  train_cmd->add_option("--iterations", tn.iterations, "SGD iterations")
      ->capture_default_str();
  train_cmd->add_option("--log-every", tn.log_every, "Trace period")
      ->capture_default_str();
  add_common(train_cmd, false);

  try {
    std::vector<std::string> args = inject_config(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));

    if (app.got_subcommand(mixture))
      return cmd_mixture(mix_p, mix_beta, convention_from_string(mix_conv), out,
                         flags);
    if (app.got_subcommand(sweep))
      return cmd_complexity_sweep(sw_p, sw_min, sw_max, sw_steps, out, flags);
    if (app.got_subcommand(census))
      return cmd_spinglass_census(
          sg_lambda, parse_int_list(sg_orders),
          sg_eps.empty() ? std::vector<double>{} : parse_double_list(sg_eps),
          sg_restarts, seed, sg_ceiling, jobs, out, flags);
    if (app.got_subcommand(dynamics))
      return cmd_dynamics(dy_check, DynamicsConfig{dy_lambda, dy_m, dy_p, dy_c},
                          dy_trials, dy_mu, seed, jobs, out, flags);
    if (app.got_subcommand(train_cmd)) {
      tn.loss = loss_kind_from_string(tn_loss);
      tn.seed = seed;
      return cmd_train(tn, out, flags);
    }
    return kExitParamError;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitParamError;
  } catch (const param_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitParamError;
  } catch (const resglass::domain_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitParamError;
  } catch (const resglass::size_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitParamError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return kExitNumericalAbort;
  }
}
