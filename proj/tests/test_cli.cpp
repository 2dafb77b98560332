// Integration tests that drive the built CLI binary end to end.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

std::string binary() {
  const char* env = std::getenv("CONSENSUSLAB_BIN");
  REQUIRE(env != nullptr);
  return env;
}

int run(const std::string& args, std::string* output = nullptr) {
  const fs::path out = fs::temp_directory_path() / "consensuslab_cli_out.txt";
  const std::string cmd = binary() + " " + args + " > " + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (output) {
    std::ifstream in(out);
    std::ostringstream ss;
    ss << in.rdbuf();
    *output = ss.str();
  }
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path dir = fs::temp_directory_path() / "consensuslab_cli";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream os(p);
  os << text;
  return p;
}

const char* kTwoAgent = R"([graph]
agents = 2
edges = 1-2
[noise]
kind = homogeneous
sigma = 1.0
[gain]
k = 1.0
[sim]
dt = 0.001
horizon = 8
trials = 400
seed = 7
x0 = 1 -1
[output]
dir = {OUT}
)";

std::string with_out(const char* text, const fs::path& out) {
  std::string s(text);
  const auto pos = s.find("{OUT}");
  s.replace(pos, 5, out.string());
  return s;
}

}  // namespace

TEST_CASE("analyze: two-agent benchmark report") {
  const fs::path out = fs::temp_directory_path() / "consensuslab_cli" / "an_k2";
  fs::remove_all(out);
  const fs::path cfg = write_config("an_k2.ini", with_out(kTwoAgent, out));
  std::string log;
  REQUIRE(run("analyze --config " + cfg.string(), &log) == 0);
  const std::string report = slurp(out / "analysis.txt");
  CHECK(report.find("ms_iff: true") != std::string::npos);
  CHECK(report.find("gain_interval: (0, 2)") != std::string::npos);
  CHECK(report.find("two_agent_ms_error: 1\n") != std::string::npos);
  const auto j = nlohmann::json::parse(slurp(out / "analysis.json"));
  CHECK(j["verdicts"]["ms_iff"] == true);
  CHECK(std::abs(j["ss_error_bounds"]["linear"].get<double>() - 1.0) <= 1e-12);
  CHECK(std::abs(j["gain_interval"]["hi"].get<double>() - 2.0) <= 1e-12);
}

TEST_CASE("analyze: disconnected graph reports inf bounds and false verdicts") {
  const fs::path out = fs::temp_directory_path() / "consensuslab_cli" / "an_disc";
  fs::remove_all(out);
  const std::string text = R"([graph]
agents = 4
edges = 1-2 3-4
[noise]
kind = homogeneous
sigma = 1.0
[gain]
k = 1.0
[sim]
x0 = 1 -1 2 0
[output]
dir = )" + out.string() + "\n";
  const fs::path cfg = write_config("an_disc.ini", text);
  REQUIRE(run("analyze --config " + cfg.string()) == 0);
  const std::string report = slurp(out / "analysis.txt");
  CHECK(report.find("ms_iff: false") != std::string::npos);
  CHECK(report.find("ms_sufficient: false") != std::string::npos);
  CHECK(report.find("ss_bound_growth: inf") != std::string::npos);
  CHECK(report.find("ss_bound_linear: inf") != std::string::npos);
  CHECK(report.find("diameter: inf") != std::string::npos);
}

TEST_CASE("analyze: negative gain with symmetric homogeneous channels") {
  const fs::path out = fs::temp_directory_path() / "consensuslab_cli" / "an_neg";
  fs::remove_all(out);
  const std::string text = R"([graph]
agents = 2
edges = 1-2
[noise]
kind = homogeneous
sigma = 1.0
symmetric = true
[gain]
k = -3.0
[sim]
x0 = 1 -1
[output]
dir = )" + out.string() + "\n";
  const fs::path cfg = write_config("an_neg.ini", text);
  REQUIRE(run("analyze --config " + cfg.string()) == 0);
  const std::string report = slurp(out / "analysis.txt");
  CHECK(report.find("as_sufficient: true") != std::string::npos);
  CHECK(report.find("ms_sufficient: false") != std::string::npos);
  CHECK(report.find("ms_iff") == std::string::npos);  // needs independent channels
}

TEST_CASE("simulate: deterministic byte-identical CSVs for a fixed seed") {
  const fs::path out1 = fs::temp_directory_path() / "consensuslab_cli" / "sim1";
  const fs::path out2 = fs::temp_directory_path() / "consensuslab_cli" / "sim2";
  fs::remove_all(out1);
  fs::remove_all(out2);
  const fs::path cfg = write_config("sim.ini", with_out(kTwoAgent, out1));
  REQUIRE(run("simulate --config " + cfg.string() + " --per-trial") == 0);
  REQUIRE(run("simulate --config " + cfg.string() + " --per-trial --out " +
              out2.string()) == 0);
  CHECK(slurp(out1 / "ms_curve.csv") == slurp(out2 / "ms_curve.csv"));
  CHECK(slurp(out1 / "trials.csv") == slurp(out2 / "trials.csv"));
  CHECK(slurp(out1 / "ms_curve.csv").rfind("t,ms_delta_sq,se,consensus_mean_1", 0) == 0);

  // a different seed changes the curve
  const fs::path out3 = fs::temp_directory_path() / "consensuslab_cli" / "sim3";
  fs::remove_all(out3);
  REQUIRE(run("simulate --config " + cfg.string() + " --seed 8 --out " + out3.string()) ==
          0);
  CHECK(slurp(out1 / "ms_curve.csv") != slurp(out3 / "ms_curve.csv"));

  // aggregation must not depend on the worker count
  const fs::path out4 = fs::temp_directory_path() / "consensuslab_cli" / "sim4";
  fs::remove_all(out4);
  const std::string env1 = "CONSENSUSLAB_THREADS=1 " + binary() + " simulate --config " +
                           cfg.string() + " --per-trial --out " + out4.string();
  REQUIRE(WEXITSTATUS(std::system((env1 + " > /dev/null 2>&1").c_str())) == 0);
  const fs::path out5 = fs::temp_directory_path() / "consensuslab_cli" / "sim5";
  fs::remove_all(out5);
  const std::string env4 = "CONSENSUSLAB_THREADS=4 " + binary() + " simulate --config " +
                           cfg.string() + " --per-trial --out " + out5.string();
  REQUIRE(WEXITSTATUS(std::system((env4 + " > /dev/null 2>&1").c_str())) == 0);
  CHECK(slurp(out4 / "ms_curve.csv") == slurp(out5 / "ms_curve.csv"));
  CHECK(slurp(out4 / "trials.csv") == slurp(out5 / "trials.csv"));
}

TEST_CASE("simulate: noise-free run reproduces the ODE decay in the CSV") {
  const fs::path out = fs::temp_directory_path() / "consensuslab_cli" / "sim_nf";
  fs::remove_all(out);
  const std::string text = R"([graph]
agents = 2
edges = 1-2
[noise]
kind = homogeneous
sigma = 0.0
[gain]
k = 1.0
[sim]
dt = 0.0001
horizon = 1
trials = 1
seed = 1
x0 = 1 -1
[output]
dir = )" + out.string() + "\n";
  const fs::path cfg = write_config("sim_nf.ini", text);
  REQUIRE(run("simulate --config " + cfg.string()) == 0);
  const std::string csv = slurp(out / "ms_curve.csv");
  // last line: t = 1, ms = 2 exp(-4) within Euler tolerance
  const auto pos = csv.rfind('\n', csv.size() - 2);
  std::istringstream last(csv.substr(pos + 1));
  std::string tok;
  std::getline(last, tok, ',');
  CHECK(std::stod(tok) == doctest::Approx(1.0));
  std::getline(last, tok, ',');
  CHECK(std::stod(tok) == doctest::Approx(2.0 * std::exp(-4.0)).epsilon(0.01));
}

TEST_CASE("verify: inside-gain run passes; exit codes reflect results") {
  const fs::path out = fs::temp_directory_path() / "consensuslab_cli" / "ver1";
  fs::remove_all(out);
  const fs::path cfg = write_config("ver.ini", with_out(kTwoAgent, out));
  std::string log;
  const int rc = run("verify --config " + cfg.string(), &log);
  CHECK(rc == 0);
  CHECK(log.find("PASS ms_sandwich") != std::string::npos);
  CHECK(log.find("PASS ss_error_linear") != std::string::npos);
  CHECK(log.find("PASS unbiasedness") != std::string::npos);
  CHECK(log.find("SKIPPED lil_envelope") != std::string::npos);  // independent wiring
  CHECK(log.find("RESULT: PASS") != std::string::npos);
  CHECK(slurp(out / "verify.txt") == log);
}

TEST_CASE("verify: outside-gain divergence prediction") {
  const fs::path out = fs::temp_directory_path() / "consensuslab_cli" / "ver2";
  fs::remove_all(out);
  const std::string text = R"([graph]
agents = 2
edges = 1-2
[noise]
kind = homogeneous
sigma = 1.0
[gain]
k = 2.2
[sim]
dt = 0.0005
horizon = 1
trials = 1000
seed = 11
x0 = 1 -1
[output]
dir = )" + out.string() + "\n";
  const fs::path cfg = write_config("ver2.ini", text);
  std::string log;
  const int rc = run("verify --config " + cfg.string(), &log);
  CHECK(rc == 0);
  CHECK(log.find("PASS ms_divergence") != std::string::npos);
  CHECK(log.find("SKIPPED ss_error_linear") != std::string::npos);
}

TEST_CASE("config errors exit with code 2 and a line-anchored message") {
  const fs::path cfg = write_config("bad.ini", "[graph]\nagents = 2\nedges = 1-2\n"
                                               "typo_key = 1\n[noise]\nkind = homogeneous\n"
                                               "sigma = 1\n[gain]\nk = 1\n[sim]\nx0 = 1 -1\n");
  std::string log;
  CHECK(run("analyze --config " + cfg.string(), &log) == 2);
  CHECK(log.find("line 4") != std::string::npos);
  CHECK(log.find("typo_key") != std::string::npos);

  CHECK(run("analyze --config /nonexistent.ini", &log) == 2);
  CHECK(run("bogus-subcommand", &log) == 2);
}

TEST_CASE("graph file input") {
  const fs::path dir = fs::temp_directory_path() / "consensuslab_cli";
  fs::create_directories(dir);
  {
    std::ofstream g(dir / "p3.graph");
    g << "# path graph\n3\n1 2\n2 3\n";
  }
  const fs::path out = dir / "an_file";
  fs::remove_all(out);
  const std::string text = R"([graph]
file = p3.graph
[noise]
kind = homogeneous
sigma = 1.0
[gain]
k = 0.5
[sim]
x0 = 1 0 -1
[output]
dir = )" + out.string() + "\n";
  const fs::path cfg = write_config("an_file.ini", text);
  REQUIRE(run("analyze --config " + cfg.string()) == 0);
  const std::string report = slurp(out / "analysis.txt");
  CHECK(report.find("agents: 3") != std::string::npos);
  CHECK(report.find("diameter: 2") != std::string::npos);
}
