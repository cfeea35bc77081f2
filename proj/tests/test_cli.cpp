#include "hdsa/io.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const char* kConfig = R"([benchmark]
name = diffusion_reaction
elements = 40
kappa = 0.2

[prior]
alpha_u = 4
beta_u = 2e-2
alpha_z = 1e-10
beta_z = 3e-2
alpha_d = 1e-4

[update]
ranks = 2, 4
samples = 6

[sweep]
ranks = 0, 3, 3, 1-2

[preview]
samples = 200
)";

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / "hdsa_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path path = dir / "config.ini";
  std::ofstream(path) << text;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const fs::path& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(HDSA_CLI_PATH) + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::set<std::string> csv_files(const fs::path& dir) {
  std::set<std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".csv") out.insert(e.path().filename().string());
  return out;
}

}  // namespace

TEST(Cli, OptimizeWritesStatesAndManifest) {
  const fs::path dir = scratch("optimize");
  const Result r = run(dir, "optimize " + write_config(dir, kConfig).string() + " -o " + (dir / "out").string());
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"z_tilde.csv", "state_lofi.csv", "state_hifi.csv", "manifest.json", "optimize.log"})
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  const auto manifest = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  EXPECT_EQ(manifest["benchmark"]["elements"], 40);
  EXPECT_EQ(manifest["benchmark"]["kappa"], 0.2);
  EXPECT_TRUE(manifest["lofi_optimization"]["converged"].get<bool>());
}

TEST(Cli, RunIsDeterministicAndManifestIsComplete) {
  const fs::path dir = scratch("run");
  const fs::path config = write_config(dir, kConfig);
  ASSERT_EQ(run(dir, "run " + config.string() + " -o " + (dir / "a").string()).code, 0);
  ASSERT_EQ(run(dir, "run " + config.string() + " -o " + (dir / "b").string()).code, 0);
  const auto files = csv_files(dir / "a");
  for (const char* f : {"z_tilde.csv", "z_bar_r2.csv", "z_bar_r4.csv", "samples_r4.csv", "objective_r4.csv",
                        "markers_r4.csv", "spectrum.csv", "z_hifi.csv"})
    EXPECT_TRUE(files.count(f)) << f;
  EXPECT_EQ(files, csv_files(dir / "b"));
  for (const auto& f : files) EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;

  const auto manifest = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  std::set<std::string> listed;
  for (const auto& f : manifest["files"]) listed.insert(f.get<std::string>());
  std::set<std::string> present;
  for (const auto& e : fs::directory_iterator(dir / "a")) present.insert(e.path().filename().string());
  EXPECT_EQ(listed, present);
  EXPECT_EQ(manifest["config"]["benchmark"]["kappa"], 0.2);
  EXPECT_GT(manifest["state_prior_rank_q"].get<int>(), 0);

  std::vector<std::string> header;
  const hdsa::Matrix samples = hdsa::read_csv(dir / "a" / "samples_r4.csv", &header);
  EXPECT_EQ(samples.cols(), 6);
  EXPECT_EQ(samples.rows(), 41);
}

TEST(Cli, ZeroSamplesStillWritesMeanUpdate) {
  const fs::path dir = scratch("mean_only");
  std::string text = kConfig;
  text.replace(text.find("samples = 6"), 11, "samples = 0");
  ASSERT_EQ(run(dir, "run " + write_config(dir, text).string() + " -o " + (dir / "out").string()).code, 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "z_bar_r4.csv"));
  EXPECT_FALSE(fs::exists(dir / "out" / "samples_r4.csv"));
}

TEST(Cli, RankSweepStartsAtLowFidelityError) {
  const fs::path dir = scratch("sweep");
  ASSERT_EQ(run(dir, "rank-sweep " + write_config(dir, kConfig).string() + " -o " + (dir / "out").string()).code, 0);
  const hdsa::Matrix table = hdsa::read_csv(dir / "out" / "rank_sweep.csv");
  ASSERT_EQ(table.rows(), 4);
  EXPECT_EQ(table.col(0), (hdsa::Vector(4) << 0, 1, 2, 3).finished());
  EXPECT_EQ(table(0, 2), 0.0);
  const auto manifest = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  EXPECT_TRUE(manifest["hifi_optimization"]["converged"].get<bool>());
  EXPECT_EQ(table(0, 1), manifest["error_z_tilde"].get<double>());
  EXPECT_GT(table(0, 1), 0.0);
}

TEST(Cli, PreviewPriorSamplesAreCentredAndVanishAtTilde) {
  const fs::path dir = scratch("preview");
  const fs::path config = write_config(dir, kConfig);
  ASSERT_EQ(run(dir, "preview-prior " + config.string() + " -o " + (dir / "out").string()).code, 0);
  const hdsa::Matrix state = hdsa::read_csv(dir / "out" / "state_prior_samples.csv");
  const hdsa::Matrix values = state.rightCols(200);
  for (hdsa::Index i = 0; i < values.rows(); ++i) {
    const double mean = values.row(i).mean();
    const double sd = std::sqrt((values.row(i).array() - mean).square().sum() / 199.0);
    EXPECT_LE(std::abs(mean), 4.0 * sd / std::sqrt(200.0));
  }
  EXPECT_GT(hdsa::read_csv(dir / "out" / "delta_breve_samples.csv").rightCols(200).cwiseAbs().maxCoeff(), 0.0);
  ASSERT_EQ(run(dir, "preview-prior --at-tilde " + config.string() + " -o " + (dir / "tilde").string()).code, 0);
  EXPECT_EQ(hdsa::read_csv(dir / "tilde" / "delta_breve_samples.csv").rightCols(200).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Cli, ConfigErrorsExitWithTwoAndNameTheKey) {
  const fs::path dir = scratch("config_error");
  std::string text = kConfig;
  text.replace(text.find("alpha_d = 1e-4\n"), 15, "");
  const Result r = run(dir, "optimize " + write_config(dir, text).string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("prior.alpha_d"), std::string::npos) << r.err;
  EXPECT_EQ(run(dir, "optimize " + (dir / "absent.ini").string()).code, 2);
  EXPECT_EQ(run(dir, "frobnicate").code, 2);
  std::string big_rank = kConfig;
  big_rank.replace(big_rank.find("ranks = 2, 4"), 12, "ranks = 400");
  EXPECT_EQ(run(dir, "run " + write_config(dir, big_rank).string() + " -o " + (dir / "out").string()).code, 2);
}

TEST(Cli, SolverFailureExitsWithOne) {
  const fs::path dir = scratch("solver_failure");
  const std::string text = std::string(kConfig) + "\n[optimizer]\nmax_iter = 1\ngtol_rel = 1e-14\n";
  const Result r = run(dir, "optimize " + write_config(dir, text).string() + " -o " + (dir / "out").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("optimize.log"), std::string::npos) << r.err;
}

TEST(Cli, CostEstimatePrintsTotals) {
  const fs::path dir = scratch("cost");
  const Result r = run(dir, "cost-estimate");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("15900"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("2587"), std::string::npos) << r.out;
  EXPECT_EQ(run(dir, "cost-estimate --q -3").code, 2);
}

TEST(Cli, OracleCheckPasses) {
  const fs::path dir = scratch("oracle");
  const Result r = run(dir, "oracle-check --instances 4");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("all checks passed"), std::string::npos);
}
