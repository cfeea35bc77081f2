#pragma once

#include "hdsa/benchmarks.hpp"
#include "hdsa/calibration.hpp"
#include "hdsa/config.hpp"
#include "hdsa/optimization.hpp"
#include "hdsa/prior.hpp"
#include "hdsa/update.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hdsa {

inline constexpr const char* kVersion = "0.1.0";

Benchmark build_benchmark(const RunConfig& config);
TrustRegionOptions optimizer_options(const RunConfig& config);
GsvdOptions gsvd_options(const RunConfig& config);

/// Every configuration field, with stable key order.
nlohmann::ordered_json config_json(const RunConfig& config);
std::string config_fingerprint(const RunConfig& config);

/// Accumulates the run manifest; `write` lists every file registered with `add_file`.
class Manifest {
 public:
  Manifest(std::string command, const RunConfig& config);
  void add_file(const std::filesystem::path& path);
  void phase(const std::string& name, double seconds);
  nlohmann::ordered_json& extra() { return extra_; }
  /// Writes manifest.json into the output directory and returns its path.
  std::filesystem::path write() const;

 private:
  std::string command_;
  RunConfig config_;
  std::vector<std::string> files_;
  nlohmann::ordered_json timing_ = nlohmann::ordered_json::object();
  nlohmann::ordered_json extra_ = nlohmann::ordered_json::object();
};

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double lap();

 private:
  std::chrono::steady_clock::time_point start_;
};

/// Low-fidelity optimum and everything needed to sample the posterior solution.
struct Analysis {
  Benchmark benchmark;
  std::optional<ReducedProblem> lofi;
  std::optional<ReducedProblem> hifi;
  OptimizationResult optimum;
  OptPriorPtr opt_prior;
  StatePrior state_prior;
  TrainingData data;
  std::unique_ptr<Calibration> calibration;
  OptimizationPoint point;
  std::unique_ptr<SensitivityOperator> sensitivity;
  HessianProjector projector;  ///< at the largest requested rank
};

/// Solves the low-fidelity problem; optionally logs trust-region iterations.
void run_optimization(Analysis& analysis, const RunConfig& config, std::ostream* log);

/// z_tilde followed by training_count - 1 perturbed inputs.
Matrix training_inputs(const Analysis& analysis, const RunConfig& config);

/// Evaluates the high-fidelity model at the training inputs and calibrates. `max_rank` of zero
/// skips the Hessian eigensolve.
void run_calibration(Analysis& analysis, const RunConfig& config, Index max_rank, Manifest* manifest = nullptr);

/// |a - b|_M / |b|_M in the control mass inner product.
double relative_control_error(const Benchmark& bm, const Vector& a, const Vector& b);

/// trace(M_z C) for the sample covariance C of the columns of `samples`.
double integrated_variance(const Benchmark& bm, const Matrix& samples);

/// Subcommands. Each writes into config.output_dir and returns the process exit code.
int cmd_optimize(const RunConfig& config, std::ostream& out);
/// `reference_at_tilde` evaluates the data-uninformed samples at z_tilde instead of a perturbed input.
int cmd_preview_prior(const RunConfig& config, std::ostream& out, bool reference_at_tilde = false);
int cmd_run(const RunConfig& config, std::ostream& out);
int cmd_rank_sweep(const RunConfig& config, std::ostream& out);

struct OracleCheckOptions {
  Index instances = 20;
  Seed seed = 1;
  double tolerance = 1e-10;
};

/// Dense-oracle identity suite on random small instances; returns 0 when every check passes.
int cmd_oracle_check(const OracleCheckOptions& options, std::ostream& out);

}  // namespace hdsa
