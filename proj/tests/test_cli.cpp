#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "peiv/config.hpp"
#include "peiv/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kScalarConfig = R"({
  "model": {
    "n": 1, "m": 1, "d": 1,
    "F_basis": [[[0.0]], [[1.0]]],
    "H_basis": [[[1.0]], [[0.0]]],
    "Q": [[0.2]], "R": [[0.09]]
  },
  "theta_true": [0.9],
  "prior": {"mean": [0.0], "cov": [[1.0526315789473684]]},
  "theta_prior": {"mean": [0.8], "cov": [[0.04]]},
  "mc": {"batch_sizes": [10], "replications": 2, "seed": 5,
         "sigma_theta": [[0.04]], "methods": ["peiv"],
         "ellipse_batch_size": 10}
})";

const char* kNoiseFreeConfig = R"({
  "model": {
    "n": 1, "m": 1, "d": 1,
    "F_basis": [[[0.0]], [[1.0]]],
    "H_basis": [[[1.0]], [[0.0]]],
    "Q": [[0.0]], "R": [[0.0]]
  },
  "theta_true": [0.9],
  "prior": {"mean": [1.0], "cov": [[0.0]]}
})";

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("peiv_cli_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PEIV_CLI_BIN) + " " + args + " 2>/dev/null";
  const int ret = std::system(cmd.c_str());
  if (ret == -1) return -1;
  return WIFEXITED(ret) ? WEXITSTATUS(ret) : -1;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += (c == '\n');
  return n;
}

}  // namespace

TEST_CASE("cli simulate: produces the contracted CSV") {
  TempDir tmp;
  const fs::path cfg = tmp.path / "cfg.json";
  write_file(cfg, kScalarConfig);
  const fs::path out = tmp.path / "traj.csv";

  REQUIRE(run_cli("simulate " + cfg.string() + " --seed 7 --steps 10 --out " +
                  out.string()) == 0);
  const std::string body = read_file(out);
  // header + 11 rows (k = 0..10); 10 of them carry measurements.
  CHECK(count_lines(body) == 12);
  std::istringstream ss(body);
  std::string line;
  std::getline(ss, line);
  CHECK(line == "k,x_1,y_1");
  std::getline(ss, line);
  CHECK(line.substr(line.size() - 1) == ",");  // k = 0 has no y field

  const fs::path out2 = tmp.path / "traj2.csv";
  REQUIRE(run_cli("simulate " + cfg.string() + " --seed 7 --steps 10 --out " +
                  out2.string()) == 0);
  CHECK(read_file(out) == read_file(out2));

  const fs::path out3 = tmp.path / "traj3.csv";
  REQUIRE(run_cli("simulate " + cfg.string() + " --seed 8 --steps 10 --out " +
                  out3.string()) == 0);
  CHECK(read_file(out) != read_file(out3));
}

TEST_CASE("cli simulate: noise-free run copies states into measurements") {
  TempDir tmp;
  const fs::path cfg = tmp.path / "cfg.json";
  write_file(cfg, kNoiseFreeConfig);
  const fs::path out = tmp.path / "traj.csv";
  REQUIRE(run_cli("simulate " + cfg.string() + " --seed 3 --steps 5 --out " +
                  out.string()) == 0);
  std::istringstream ss(read_file(out));
  std::string line;
  std::getline(ss, line);  // header
  std::getline(ss, line);  // k = 0
  while (std::getline(ss, line)) {
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    const double x = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
    const double y = std::stod(line.substr(c2 + 1));
    CHECK(x == doctest::Approx(y).epsilon(1e-15));
  }
}

TEST_CASE("cli estimate: JSON contract and determinism") {
  TempDir tmp;
  const fs::path cfg = tmp.path / "cfg.json";
  write_file(cfg, kScalarConfig);
  const fs::path data = tmp.path / "traj.csv";
  REQUIRE(run_cli("simulate " + cfg.string() + " --seed 11 --steps 30 --out " +
                  data.string()) == 0);

  const fs::path out = tmp.path / "result.json";
  REQUIRE(run_cli("estimate " + cfg.string() + " --method peiv --data " +
                  data.string() + " --out " + out.string()) == 0);
  json j = json::parse(read_file(out));
  for (const char* key : {"method", "theta_hat", "theta_cov", "iterations",
                          "converged", "loglik", "objective_trace",
                          "xhat_path", "config"})
    CHECK(j.contains(key));
  CHECK(j["method"] == "peiv");
  CHECK(j["theta_hat"].size() == 1);
  CHECK(fs::exists(j["xhat_path"].get<std::string>()));

  const fs::path out2 = tmp.path / "result2.json";
  REQUIRE(run_cli("estimate " + cfg.string() + " --method peiv --data " +
                  data.string() + " --out " + out2.string()) == 0);
  json j2 = json::parse(read_file(out2));
  j["xhat_path"] = "";
  j2["xhat_path"] = "";
  CHECK(j == j2);
}

TEST_CASE("cli estimate: d = 0 model reports an empty parameter") {
  const char* kFixedConfig = R"({
    "model": {"n": 1, "m": 1, "d": 0,
              "F_basis": [[[0.9]]], "H_basis": [[[1.0]]],
              "Q": [[0.2]], "R": [[0.09]]},
    "theta_true": [],
    "prior": {"mean": [0.0], "cov": [[1.0]]}
  })";
  TempDir tmp;
  const fs::path cfg = tmp.path / "cfg.json";
  write_file(cfg, kFixedConfig);
  const fs::path data = tmp.path / "traj.csv";
  REQUIRE(run_cli("simulate " + cfg.string() + " --seed 2 --steps 12 --out " +
                  data.string()) == 0);
  const fs::path out = tmp.path / "result.json";
  REQUIRE(run_cli("estimate " + cfg.string() + " --method em --data " +
                  data.string() + " --out " + out.string()) == 0);
  json j = json::parse(read_file(out));
  CHECK(j["theta_hat"].empty());
  CHECK(j["converged"] == true);
  CHECK(j["iterations"] == 1);
  CHECK(fs::exists(j["xhat_path"].get<std::string>()));
}

TEST_CASE("cli estimate: dimension mismatch exits with code 2") {
  TempDir tmp;
  const fs::path cfg = tmp.path / "cfg.json";
  write_file(cfg, kScalarConfig);
  const fs::path data = tmp.path / "bad.csv";
  write_file(data, "k,x_1,x_2,y_1\n0,1,2,\n1,1,2,3\n");
  const fs::path out = tmp.path / "result.json";
  CHECK(run_cli("estimate " + cfg.string() + " --method peiv --data " +
                data.string() + " --out " + out.string()) == 2);
}

TEST_CASE("cli benchmark: shape, meta, reproducibility") {
  TempDir tmp;
  const fs::path cfg = tmp.path / "cfg.json";
  write_file(cfg, kScalarConfig);
  const fs::path dir = tmp.path / "bench";
  REQUIRE(run_cli("benchmark " + cfg.string() + " --out-dir " + dir.string()) ==
          0);
  const std::string rmse_body = read_file(dir / "rmse.csv");
  CHECK(count_lines(rmse_body) == 2);  // header + 1 cell
  CHECK(rmse_body.rfind("method,N,M_effective,rmse_theta,rmse_x0,q05,q95,"
                        "failures\n",
                        0) == 0);
  CHECK(fs::exists(dir / "ellipse.csv"));
  json meta = json::parse(read_file(dir / "meta.json"));
  CHECK(meta["mc"]["seed"] == 5);
  CHECK(meta["mc"]["sigma_theta"][0][0] == 0.04);

  const fs::path dir2 = tmp.path / "bench2";
  REQUIRE(run_cli("benchmark " + cfg.string() + " --out-dir " +
                  dir2.string()) == 0);
  CHECK(read_file(dir / "rmse.csv") == read_file(dir2 / "rmse.csv"));
  CHECK(read_file(dir / "ellipse.csv") == read_file(dir2 / "ellipse.csv"));
}

TEST_CASE("cli benchmark: PEIV_THREADS fallback leaves results unchanged") {
  TempDir tmp;
  const fs::path cfg = tmp.path / "cfg.json";
  write_file(cfg, kScalarConfig);
  const fs::path d1 = tmp.path / "one";
  const fs::path d2 = tmp.path / "env";
  REQUIRE(run_cli("benchmark " + cfg.string() + " --out-dir " + d1.string() +
                  " --threads 1") == 0);
  const std::string cmd = "PEIV_THREADS=3 " + std::string(PEIV_CLI_BIN) +
                          " benchmark " + cfg.string() + " --out-dir " +
                          d2.string() + " 2>/dev/null";
  const int ret = std::system(cmd.c_str());
  REQUIRE((WIFEXITED(ret) && WEXITSTATUS(ret) == 0));
  CHECK(read_file(d1 / "rmse.csv") == read_file(d2 / "rmse.csv"));
}

TEST_CASE("cli: config errors exit with code 2") {
  TempDir tmp;
  CHECK(run_cli("benchmark " + (tmp.path / "missing.json").string() +
                " --out-dir " + (tmp.path / "x").string()) == 2);

  const fs::path bad = tmp.path / "bad.json";
  write_file(bad, R"({"model": {"n": 1}, "unknown_key": 3})");
  CHECK(run_cli("benchmark " + bad.string() + " --out-dir " +
                (tmp.path / "y").string()) == 2);

  write_file(bad, "{ not json");
  CHECK(run_cli("simulate " + bad.string() + " --steps 3 --out " +
                (tmp.path / "t.csv").string()) == 2);

  // Wrong value types are config errors too, not numerical failures.
  std::string typed(kScalarConfig);
  const auto pos = typed.find("\"n\": 1");
  typed.replace(pos, 6, "\"n\": \"one\"");
  write_file(bad, typed);
  CHECK(run_cli("simulate " + bad.string() + " --steps 3 --out " +
                (tmp.path / "t.csv").string()) == 2);
}

TEST_CASE("config: strict schema validation") {
  json j = json::parse(kScalarConfig);
  CHECK_NOTHROW(peiv::parse_experiment_config(j));

  json extra = j;
  extra["mc"]["typo_key"] = 1;
  CHECK_THROWS_AS(peiv::parse_experiment_config(extra), peiv::ConfigError);

  json wrong = j;
  wrong["model"]["d"] = 2;
  CHECK_THROWS_AS(peiv::parse_experiment_config(wrong), peiv::ConfigError);

  json badtheta = j;
  badtheta["theta_true"] = {0.9, 0.1};
  CHECK_THROWS_AS(peiv::parse_experiment_config(badtheta), peiv::ConfigError);
}
