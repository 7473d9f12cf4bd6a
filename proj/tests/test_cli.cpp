#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr combined
};

CmdResult run_cli(const std::string& args) {
  const std::string cmd = std::string(RESGLASS_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CmdResult result;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof(buf), pipe))
    result.output.append(buf, n);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "resglass_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string(std::istreambuf_iterator<char>(f), {});
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("cli rejects invalid parameters with exit code 1", "[cli]") {
  const fs::path dir = fresh_dir("badparams");
  CHECK(run_cli("mixture --p 0 --out " + dir.string()).exit_code == 1);
  CHECK(run_cli("dynamics --check thm3 --mu 0 --out " + dir.string()).exit_code == 1);
  CHECK(run_cli("dynamics --check thm9 --out " + dir.string()).exit_code == 1);
  CHECK(run_cli("mixture --convention fancy --out " + dir.string()).exit_code == 1);
  CHECK(run_cli("mixture --no-such-flag").exit_code == 1);
  CHECK(run_cli("").exit_code == 1);
  CHECK(run_cli("train --loss mse --out " + dir.string()).exit_code == 1);
  CHECK(run_cli("spinglass-census --orders 2 --eps 0,0 --out " + dir.string())
            .exit_code == 1);
}

TEST_CASE("cli help exits cleanly", "[cli]") {
  auto r = run_cli("--help");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("mixture") != std::string::npos);
}

TEST_CASE("mixture command writes the documented files", "[cli]") {
  const fs::path dir = fresh_dir("mixture");
  auto r = run_cli("mixture --p 100 --beta 0.1 --out " + dir.string());
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("argmax_depth=10") != std::string::npos);

  const std::string csv = slurp(dir / "mixture.csv");
  CHECK(csv.rfind("r,eps,eps_squared,log_eps\n", 0) == 0);
  CHECK(count_lines(csv) == 101);  // header + one row per depth

  const auto j = nlohmann::json::parse(slurp(dir / "mixture.json"));
  CHECK(j["p"] == 100);
  CHECK(j["beta"] == 0.1);
  CHECK(j["convention"] == "shifted");
  CHECK(j["eps"].size() == 100);
  CHECK(j["argmax_depth"] == 10);

  const std::string svg = slurp(dir / "mixture.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("<rect") != std::string::npos);
  CHECK(svg.find("Depth mixture") != std::string::npos);
}

TEST_CASE("mixture with p=1 yields a single unit bar", "[cli]") {
  const fs::path dir = fresh_dir("mixture_p1");
  REQUIRE(run_cli("mixture --p 1 --beta 5 --out " + dir.string()).exit_code == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "mixture.json"));
  REQUIRE(j["eps"].size() == 1);
  CHECK(j["eps"][0].get<double>() == 1.0);
  CHECK(count_lines(slurp(dir / "mixture.csv")) == 2);
}

TEST_CASE("output format flags suppress files", "[cli]") {
  const fs::path dir = fresh_dir("formats");
  REQUIRE(run_cli("mixture --p 10 --no-svg --no-json --out " + dir.string())
              .exit_code == 0);
  CHECK(fs::exists(dir / "mixture.csv"));
  CHECK_FALSE(fs::exists(dir / "mixture.json"));
  CHECK_FALSE(fs::exists(dir / "mixture.svg"));
}

TEST_CASE("complexity sweep writes a monotone theta curve", "[cli]") {
  const fs::path dir = fresh_dir("sweep");
  REQUIRE(run_cli("complexity-sweep --steps 12 --out " + dir.string()).exit_code == 0);
  const std::string csv = slurp(dir / "complexity_sweep.csv");
  CHECK(csv.rfind("beta,v1,v2,alpha_sq,theta\n", 0) == 0);
  CHECK(count_lines(csv) == 13);
  CHECK(slurp(dir / "complexity_sweep.svg").find("<polyline") != std::string::npos);
}

TEST_CASE("census reruns and jobs variations are byte-identical", "[cli]") {
  const fs::path a = fresh_dir("census_a");
  const fs::path b = fresh_dir("census_b");
  const fs::path c = fresh_dir("census_c");
  const std::string base =
      "spinglass-census --lambda 3 --orders 2,3 --restarts 120 --seed 5 --out ";
  REQUIRE(run_cli(base + a.string()).exit_code == 0);
  REQUIRE(run_cli(base + b.string()).exit_code == 0);
  REQUIRE(run_cli(base + c.string() + " --jobs 2").exit_code == 0);
  for (const char* name : {"census.csv", "census_hist.csv", "model.json",
                           "census_hist.svg"}) {
    CHECK(slurp(a / name) == slurp(b / name));
    CHECK(slurp(a / name) == slurp(c / name));
  }
}

TEST_CASE("census with zero restarts warns and writes empty tables", "[cli]") {
  const fs::path dir = fresh_dir("census_zero");
  auto r = run_cli("spinglass-census --restarts 0 --out " + dir.string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("restarts=0") != std::string::npos);
  CHECK(slurp(dir / "census.csv") == "energy,index,grad_norm,multiplicity\n");
  CHECK(slurp(dir / "census_hist.csv") == "index,count\n");
  CHECK_FALSE(fs::exists(dir / "census_hist.svg"));  // nothing to draw
}

TEST_CASE("dynamics subcommand passes its own criteria on defaults", "[cli]") {
  const fs::path dir = fresh_dir("dynamics");
  auto r3 = run_cli("dynamics --check thm3 --trials 100 --out " + dir.string());
  CHECK(r3.exit_code == 0);
  const auto j3 = nlohmann::json::parse(slurp(dir / "dynamics_thm3.json"));
  CHECK(j3["trials"] == 100);
  CHECK(j3["pass_fraction"].get<double>() >= 0.95);
  CHECK(j3["sign_variant"] == "theorem");
  CHECK(j3["residual_slope"].get<double>() > 1.8);

  auto r4 = run_cli("dynamics --check thm4 --trials 100 --jobs 2 --out " + dir.string());
  CHECK(r4.exit_code == 0);
  const auto j4 = nlohmann::json::parse(slurp(dir / "dynamics_thm4.json"));
  CHECK(j4["median_residual"].get<double>() < 0.05);
  CHECK(j4["sign_variant"] == "theorem");
}

TEST_CASE("train writes a trace with config header and layer columns", "[cli]") {
  const fs::path dir = fresh_dir("train");
  auto r = run_cli("train --iterations 120 --log-every 40 --out " + dir.string());
  REQUIRE(r.exit_code == 0);
  const std::string csv = slurp(dir / "train_trace.csv");
  CHECK(csv.rfind("# config: {\"p\":10,", 0) == 0);
  CHECK(csv.find("iteration,loss,accuracy,lambda_1,") != std::string::npos);
  CHECK(csv.find("lambda_10,weight_norm") != std::string::npos);
  CHECK(count_lines(csv) == 6);  // comment + header + rows at 0,40,80 + final 120
  CHECK(slurp(dir / "train_lambda.svg").find("lambda_10") != std::string::npos);
  CHECK(slurp(dir / "train_norm.svg").find("Weight norm") != std::string::npos);
}

TEST_CASE("train without batch norm keeps lambda columns at one", "[cli]") {
  const fs::path dir = fresh_dir("train_nobn");
  REQUIRE(run_cli("train --no-bn --iterations 60 --log-every 30 --out " +
                  dir.string())
              .exit_code == 0);
  const std::string csv = slurp(dir / "train_trace.csv");
  std::istringstream lines(csv);
  std::string line;
  int data_rows = 0;
  while (std::getline(lines, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("iteration", 0) == 0) continue;
    ++data_rows;
    CHECK(line.find(",1,1,1,1,1,1,1,1,1,1,") != std::string::npos);
  }
  CHECK(data_rows == 3);
}

TEST_CASE("train reports divergence with exit code 3", "[cli]") {
  const fs::path dir = fresh_dir("train_div");
  auto r = run_cli("train --lr 1e10 --iterations 40 --log-every 1 --out " +
                   dir.string());
  CHECK(r.exit_code == 3);
  CHECK(r.output.find("diverged") != std::string::npos);
  CHECK(slurp(dir / "train_trace.csv").find("# aborted") != std::string::npos);
}

TEST_CASE("config file supplies flags and explicit flags override it", "[cli]") {
  const fs::path dir = fresh_dir("config");
  {
    std::ofstream f(dir / "cfg.json");
    f << "{\"p\": 40, \"beta\": 2.0, \"svg\": false}";
  }
  REQUIRE(run_cli("mixture --config " + (dir / "cfg.json").string() + " --out " +
                  (dir / "a").string())
              .exit_code == 0);
  auto ja = nlohmann::json::parse(slurp(dir / "a" / "mixture.json"));
  CHECK(ja["p"] == 40);
  CHECK(ja["beta"] == 2.0);
  CHECK_FALSE(fs::exists(dir / "a" / "mixture.svg"));

  REQUIRE(run_cli("mixture --config " + (dir / "cfg.json").string() +
                  " --beta 0.5 --out " + (dir / "b").string())
              .exit_code == 0);
  auto jb = nlohmann::json::parse(slurp(dir / "b" / "mixture.json"));
  CHECK(jb["p"] == 40);
  CHECK(jb["beta"] == 0.5);

  CHECK(run_cli("mixture --config " + (dir / "missing.json").string()).exit_code == 1);
  {
    std::ofstream f(dir / "broken.json");
    f << "{not json";
  }
  CHECK(run_cli("mixture --config " + (dir / "broken.json").string()).exit_code == 1);
}

TEST_CASE("train reruns with a fixed seed are byte-identical", "[cli]") {
  const fs::path a = fresh_dir("train_rep_a");
  const fs::path b = fresh_dir("train_rep_b");
  const std::string base = "train --iterations 80 --log-every 20 --seed 3 --out ";
  REQUIRE(run_cli(base + a.string()).exit_code == 0);
  REQUIRE(run_cli(base + b.string()).exit_code == 0);
  for (const char* name : {"train_trace.csv", "train_lambda.svg", "train_norm.svg"})
    CHECK(slurp(a / name) == slurp(b / name));
}
