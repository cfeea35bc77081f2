#include "hdsa/workflow.hpp"

#include "hdsa/dense_oracle.hpp"
#include "hdsa/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>

namespace hdsa {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json vector_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json index_list(const std::vector<Index>& v) {
  json out = json::array();
  for (Index r : v) out.push_back(r);
  return out;
}

std::vector<std::string> numbered(const std::string& prefix, Index count) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index k = 0; k < count; ++k) out.push_back(prefix + std::to_string(k));
  return out;
}

Matrix as_column(const Vector& v) { return Matrix(v); }

void check_ranks(const std::vector<Index>& ranks, Index n, const char* key) {
  for (Index r : ranks)
    if (r > n)
      throw ConfigError(std::string("key '") + key + "': rank " + std::to_string(r) +
                        " exceeds the optimization dimension " + std::to_string(n));
}

void write_fields(Manifest& manifest, const fs::path& path, const std::vector<std::string>& coord_names,
                  const Matrix& coords, const std::vector<std::string>& names, const Matrix& values) {
  write_field_csv(path, coord_names, coords, names, values);
  manifest.add_file(path);
}

void write_table(Manifest& manifest, const fs::path& path, const std::vector<std::string>& names,
                 const Matrix& values) {
  write_csv(path, names, values);
  manifest.add_file(path);
}

json optimization_json(const OptimizationResult& r) {
  json out;
  out["objective"] = r.objective;
  out["iterations"] = r.iterations;
  out["converged"] = r.converged;
  out["gradient_norm"] = r.grad_norm;
  out["initial_gradient_norm"] = r.initial_grad_norm;
  return out;
}

OptimizationResult solve_with_log(const ReducedProblem& problem, const Vector& z0, const RunConfig& config,
                                  const fs::path& log_path, Manifest& manifest) {
  fs::create_directories(log_path.parent_path());
  std::ofstream log(log_path);
  TrustRegionOptions opts = optimizer_options(config);
  opts.log = &log;
  OptimizationResult r = solve_lofi(problem, z0, opts);
  manifest.add_file(log_path);
  return r;
}

}  // namespace

double Stopwatch::lap() {
  const auto now = std::chrono::steady_clock::now();
  const double s = std::chrono::duration<double>(now - start_).count();
  start_ = now;
  return s;
}

Benchmark build_benchmark(const RunConfig& config) {
  if (config.benchmark == "diffusion_reaction") return make_diffusion_reaction(config.diffusion_reaction);
  if (config.benchmark == "mass_spring") return make_mass_spring(config.mass_spring);
  if (config.benchmark == "advection_diffusion") return make_advection_diffusion(config.advection_diffusion);
  throw ConfigError("unknown benchmark '" + config.benchmark + "'");
}

TrustRegionOptions optimizer_options(const RunConfig& config) {
  TrustRegionOptions opts;
  opts.gtol_rel = config.gtol_rel;
  opts.max_iter = config.max_iter;
  return opts;
}

GsvdOptions gsvd_options(const RunConfig& config) {
  GsvdOptions opts;
  opts.rank = config.q;
  opts.oversample = config.gsvd_oversample;
  opts.seed = config.gsvd_seed;
  return opts;
}

json config_json(const RunConfig& c) {
  json out;
  json bm;
  bm["name"] = c.benchmark;
  if (c.benchmark == "diffusion_reaction") {
    const auto& p = c.diffusion_reaction;
    bm["elements"] = p.elements;
    bm["kappa"] = p.kappa;
    bm["gamma"] = p.gamma;
    bm["amplitude"] = p.amplitude;
    bm["z0"] = p.z0;
  } else if (c.benchmark == "mass_spring") {
    const auto& p = c.mass_spring;
    bm["steps"] = p.steps;
    bm["horizon"] = p.horizon;
    bm["m1"] = p.m1;
    bm["m2"] = p.m2;
    bm["k1"] = p.k1;
    bm["k2"] = p.k2;
    bm["k3"] = p.k3;
    bm["gamma"] = p.gamma;
  } else {
    const auto& p = c.advection_diffusion;
    bm["cells"] = p.cells;
    bm["kappa"] = p.kappa;
    bm["gamma"] = p.gamma;
    bm["target"] = p.target;
    bm["nonlinear_velocity"] = p.nonlinear_velocity;
  }
  out["benchmark"] = bm;
  json prior;
  prior["alpha_u"] = c.alpha_u;
  prior["beta_u"] = c.beta_u;
  prior["alpha_z"] = c.alpha_z;
  if (!c.parametric()) prior["beta_z"] = c.beta_z;
  prior["alpha_d"] = c.alpha_d;
  prior["q"] = c.q;
  prior["oversample"] = c.gsvd_oversample;
  prior["seed"] = c.gsvd_seed;
  out["prior"] = prior;
  out["data"] = {{"count", c.training_count}, {"secondary_scale", c.secondary_scale}, {"seed", c.data_seed}};
  json update;
  update["ranks"] = index_list(c.ranks);
  update["oversample"] = c.rank_oversample;
  update["projector_seed"] = c.rank_seed;
  update["samples"] = c.samples;
  update["seed"] = c.seed;
  update["evaluate_samples"] = c.evaluate_samples;
  update["hifi_optimum"] = c.hifi_optimum;
  out["update"] = update;
  out["sweep"] = {{"ranks", index_list(c.sweep_ranks)}};
  out["preview"] = {{"samples", c.preview_samples}};
  out["optimizer"] = {{"gtol_rel", c.gtol_rel}, {"max_iter", c.max_iter}};
  return out;
}

std::string config_fingerprint(const RunConfig& config) { return hex64(fnv1a(config_json(config).dump())); }

Manifest::Manifest(std::string command, const RunConfig& config) : command_(std::move(command)), config_(config) {}

void Manifest::add_file(const fs::path& path) {
  const std::string name = path.lexically_relative(config_.output_dir).generic_string();
  if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
}

void Manifest::phase(const std::string& name, double seconds) { timing_[name] = seconds; }

fs::path Manifest::write() const {
  json out;
  out["tool"] = "hdsa";
  out["version"] = kVersion;
  out["command"] = command_;
  out["config_fingerprint"] = config_fingerprint(config_);
  out["config"] = config_json(config_);
  const TrustRegionOptions tr = optimizer_options(config_);
  out["optimizer_defaults"] = {{"initial_radius", tr.initial_radius},
                               {"eta", tr.eta},
                               {"expand", tr.expand},
                               {"shrink", tr.shrink},
                               {"cg_forcing", "min(0.5, sqrt(|g|))"},
                               {"max_cg", tr.max_cg}};
  out["seeds"] = {{"gsvd", config_.gsvd_seed},
                  {"data", config_.data_seed},
                  {"projector", config_.rank_seed},
                  {"samples", config_.seed}};
  for (const auto& [k, v] : extra_.items()) out[k] = v;
  out["timing_seconds"] = timing_;
  json files = json::array();
  for (const auto& f : files_) files.push_back(f);
  files.push_back("manifest.json");
  out["files"] = files;
  const fs::path path = config_.output_dir / "manifest.json";
  fs::create_directories(config_.output_dir);
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << std::setw(2) << out << "\n";
  return path;
}

void run_optimization(Analysis& a, const RunConfig& config, std::ostream* log) {
  a.benchmark = build_benchmark(config);
  a.lofi.emplace(a.benchmark.problem(false));
  a.hifi.emplace(a.benchmark.problem(true));
  TrustRegionOptions opts = optimizer_options(config);
  opts.log = log;
  a.optimum = solve_lofi(*a.lofi, a.benchmark.z0, opts);
}

Matrix training_inputs(const Analysis& a, const RunConfig& config) {
  const Vector& zt = a.optimum.z_tilde;
  Matrix z(zt.size(), config.training_count);
  z.col(0) = zt;
  for (Index l = 1; l < config.training_count; ++l)
    z.col(l) = sample_secondary_input(*a.opt_prior, zt, derive_seed(config.data_seed, static_cast<std::uint64_t>(l)),
                                      config.secondary_scale);
  return z;
}

void run_calibration(Analysis& a, const RunConfig& config, Index max_rank, Manifest* manifest) {
  Stopwatch clock;
  const Vector& zt = a.optimum.z_tilde;
  a.opt_prior = a.benchmark.opt_prior(config.alpha_z, config.beta_z);
  a.state_prior = truncated_gsvd(config.alpha_u, a.benchmark.state_operator(config.beta_u), gsvd_options(config));
  if (manifest) manifest->phase("state_prior", clock.lap());

  a.data.z_tilde = zt;
  a.data.z = training_inputs(a, config);
  a.data.d.resize(a.lofi->state_dim(), a.data.count());
  for (Index l = 0; l < a.data.count(); ++l) {
    try {
      a.data.d.col(l) = a.benchmark.discrepancy(a.data.z.col(l));
    } catch (const SolverFailure& e) {
      throw SolverFailure("high-fidelity solve failed at training input " + std::to_string(l) + ": " + e.what());
    }
  }
  if (manifest) manifest->phase("training_data", clock.lap());

  a.calibration = std::make_unique<Calibration>(a.data, a.state_prior, a.opt_prior, config.alpha_d);
  a.point = a.lofi->evaluate(zt);
  a.sensitivity = std::make_unique<SensitivityOperator>(a.lofi->b_pieces(a.point), *a.calibration);
  if (manifest) manifest->phase("calibration", clock.lap());

  if (max_rank > 0) {
    GenEigOptions eo;
    eo.rank = max_rank;
    eo.oversample = config.rank_oversample;
    eo.seed = config.rank_seed;
    const ReducedProblem& problem = *a.lofi;
    const OptimizationPoint& point = a.point;
    a.projector = gen_eig_H([&](const Vector& v) { return problem.hess_vec(point, v); }, *a.opt_prior, eo);
    if (manifest) manifest->phase("hessian_eigensolve", clock.lap());
  } else {
    a.projector = HessianProjector{};
    a.projector.v.resize(zt.size(), 0);
  }
}

double relative_control_error(const Benchmark& bm, const Vector& a, const Vector& b) {
  const Vector diff = a - b;
  return std::sqrt(diff.dot(bm.control_mass * diff) / b.dot(bm.control_mass * b));
}

double integrated_variance(const Benchmark& bm, const Matrix& samples) {
  const Index s = samples.cols();
  if (s < 2) return 0.0;
  const Matrix shifted = samples.colwise() - samples.col(0);
  const Vector mean = shifted.rowwise().mean();
  double total = 0.0;
  for (Index k = 0; k < s; ++k) {
    const Vector x = shifted.col(k) - mean;
    total += x.dot(bm.control_mass * x);
  }
  return total / static_cast<double>(s - 1);
}

namespace {

json benchmark_json(const Benchmark& bm) {
  json out;
  for (const auto& [k, v] : bm.settings) out[k] = v;
  out["state_dim"] = bm.state_mass.rows();
  out["control_dim"] = bm.control_mass.rows();
  out["parametric_control"] = bm.parametric();
  out["gauss_newton"] = bm.gauss_newton;
  return out;
}

void record_calibration(const Analysis& a, Manifest& manifest) {
  json& x = manifest.extra();
  x["state_prior_rank_q"] = a.state_prior.rank();
  x["projector_sketch_size"] = a.projector.sketch_size;
  x["projector_max_residual"] = a.projector.max_residual;
}

void write_calibration_json(const Analysis& a, const fs::path& path, Manifest& manifest) {
  const Calibration& cal = *a.calibration;
  json out;
  out["training_count"] = cal.data().count();
  out["alpha_d"] = cal.alpha_d();
  out["g_eigenvalues"] = vector_json(cal.spectrum().mu);
  out["state_prior_rank_q"] = a.state_prior.rank();
  const Vector& pi = a.state_prior.singular_values();
  out["state_prior_pi_first"] = pi.size() ? pi(0) : 0.0;
  out["state_prior_pi_last"] = pi.size() ? pi(pi.size() - 1) : 0.0;
  out["gamma_scale"] = a.sensitivity->gamma_scale();
  json disc = json::array();
  json gam = json::array();
  for (Index l = 0; l < cal.data().count(); ++l) {
    const Vector d = cal.data().d.col(l);
    disc.push_back(std::sqrt(d.dot(a.benchmark.state_mass * d)));
    gam.push_back(cal.gamma(cal.data().z.col(l)));
  }
  out["discrepancy_mass_norms"] = disc;
  out["gamma_at_training_inputs"] = gam;
  out["projector_rank"] = a.projector.rank();
  out["projector_sketch_size"] = a.projector.sketch_size;
  out["projector_max_residual"] = a.projector.max_residual;
  std::ofstream os(path);
  os << std::setw(2) << out << "\n";
  manifest.add_file(path);
}

}  // namespace

int cmd_optimize(const RunConfig& config, std::ostream& out) {
  Manifest manifest("optimize", config);
  Stopwatch clock;
  Analysis a;
  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  const fs::path log_path = dir / "optimize.log";
  {
    std::ofstream log(log_path);
    run_optimization(a, config, &log);
  }
  manifest.add_file(log_path);
  manifest.phase("lofi_optimization", clock.lap());
  const Benchmark& bm = a.benchmark;
  const Vector& zt = a.optimum.z_tilde;
  write_fields(manifest, dir / "z_tilde.csv", bm.control_columns, bm.control_coordinates, {"z_tilde"}, as_column(zt));
  write_fields(manifest, dir / "state_lofi.csv", bm.state_columns, bm.state_coordinates, {"u"},
               as_column(a.optimum.state));
  const Vector hifi_state = bm.hifi->solve(zt, Vector());
  write_fields(manifest, dir / "state_hifi.csv", bm.state_columns, bm.state_coordinates, {"u"},
               as_column(hifi_state));
  const double j_hifi = bm.objective.value(hifi_state, zt);
  manifest.phase("hifi_state", clock.lap());

  json& x = manifest.extra();
  x["benchmark"] = benchmark_json(bm);
  x["lofi_optimization"] = optimization_json(a.optimum);
  x["hifi_objective_at_z_tilde"] = j_hifi;
  manifest.write();

  out << "benchmark " << bm.name << ": low-fidelity optimum J = " << format_number(a.optimum.objective) << " after "
      << a.optimum.iterations << " iterations\n";
  out << "high-fidelity J at z_tilde = " << format_number(j_hifi) << "\n";
  if (!a.optimum.converged)
    throw SolverFailure("low-fidelity optimization did not converge; see " + log_path.string());
  return 0;
}

int cmd_preview_prior(const RunConfig& config, std::ostream& out, bool reference_at_tilde) {
  Manifest manifest("preview-prior", config);
  Stopwatch clock;
  Analysis a;
  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  run_optimization(a, config, nullptr);
  const Benchmark& bm = a.benchmark;
  a.opt_prior = bm.opt_prior(config.alpha_z, config.beta_z);
  a.state_prior = truncated_gsvd(config.alpha_u, bm.state_operator(config.beta_u), gsvd_options(config));
  manifest.phase("setup", clock.lap());

  const Index s = config.preview_samples;
  const Seed state_seed = derive_seed(config.seed, 0);
  const Seed opt_seed = derive_seed(config.seed, 1);
  const Seed breve_seed = derive_seed(config.seed, 2);

  Matrix us(bm.state_mass.rows(), s);
  for (Index k = 0; k < s; ++k) us.col(k) = a.state_prior.sample(derive_seed(state_seed, static_cast<std::uint64_t>(k)));
  write_fields(manifest, dir / "state_prior_samples.csv", bm.state_columns, bm.state_coordinates,
               numbered("sample_", s), us);

  Matrix zs(a.opt_prior->dim(), s);
  for (Index k = 0; k < s; ++k) zs.col(k) = a.opt_prior->sample(derive_seed(opt_seed, static_cast<std::uint64_t>(k)));
  write_fields(manifest, dir / "opt_prior_samples.csv", bm.control_columns, bm.control_coordinates,
               numbered("sample_", s), zs);
  if (bm.parametric())
    write_fields(manifest, dir / "opt_prior_fields.csv", bm.state_columns, bm.state_coordinates,
                 numbered("sample_", s), bm.control_basis * zs);

  // The data-uninformed component depends on the inputs only, so zero observations suffice.
  TrainingData data;
  data.z_tilde = a.optimum.z_tilde;
  data.z = training_inputs(a, config);
  data.d = Matrix::Zero(bm.state_mass.rows(), data.count());
  const Calibration cal(data, a.state_prior, a.opt_prior, config.alpha_d);
  const Vector z_ref = reference_at_tilde ? data.z_tilde
                                          : sample_secondary_input(*a.opt_prior, data.z_tilde,
                                                                   derive_seed(config.data_seed, 1000),
                                                                   config.secondary_scale);
  Matrix ds(bm.state_mass.rows(), s);
  for (Index k = 0; k < s; ++k)
    ds.col(k) = cal.sample_delta_breve(z_ref, derive_seed(breve_seed, static_cast<std::uint64_t>(k)));
  write_fields(manifest, dir / "z_reference.csv", bm.control_columns, bm.control_coordinates, {"z_ref"},
               as_column(z_ref));
  write_fields(manifest, dir / "delta_breve_samples.csv", bm.state_columns, bm.state_coordinates,
               numbered("sample_", s), ds);
  manifest.phase("sampling", clock.lap());

  // Largest state-prior sample mean in units of its standard error.
  double worst = 0.0;
  if (s > 1) {
    const Vector mean = us.rowwise().mean();
    for (Index i = 0; i < us.rows(); ++i) {
      const double sd = std::sqrt((us.row(i).array() - mean(i)).square().sum() / static_cast<double>(s - 1));
      if (sd > 0.0) worst = std::max(worst, std::abs(mean(i)) / (sd / std::sqrt(static_cast<double>(s))));
    }
  }
  json& x = manifest.extra();
  x["benchmark"] = benchmark_json(bm);
  x["state_prior_rank_q"] = a.state_prior.rank();
  x["gamma_at_reference"] = cal.gamma(z_ref);
  x["state_sample_mean_max_standard_errors"] = worst;
  manifest.write();
  out << "wrote " << s << " prior samples of each kind to " << dir.string() << "\n";
  out << "gamma(z_ref) = " << format_number(cal.gamma(z_ref)) << ", q = " << a.state_prior.rank() << "\n";
  return 0;
}

namespace {

Vector evaluate_objectives(const ReducedProblem& hifi, const Matrix& samples, Index& failures) {
  Vector j(samples.cols());
  failures = 0;
  for (Index k = 0; k < samples.cols(); ++k) {
    try {
      j(k) = hifi.value(samples.col(k));
    } catch (const SolverFailure&) {
      j(k) = kNaN;
      ++failures;
    }
  }
  return j;
}

double projection_defect(const HessianProjector& proj, const OptPrior& wz, const PosteriorEnsemble& ens) {
  double worst = 0.0;
  const double scale = std::max(1.0, ens.z_tilde.cwiseAbs().maxCoeff());
  for (Index k = 0; k < ens.samples.cols(); ++k) {
    const Vector d = ens.samples.col(k) - ens.z_tilde;
    worst = std::max(worst, (apply_projector(proj, wz, d) - d).cwiseAbs().maxCoeff() / scale);
  }
  return worst;
}

}  // namespace

int cmd_run(const RunConfig& config, std::ostream& out) {
  Manifest manifest("run", config);
  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  try {
    Stopwatch clock;
    Analysis a;
    const OptimizationResult lofi_result = [&] {
      const fs::path log_path = dir / "optimize.log";
      std::ofstream log(log_path);
      run_optimization(a, config, &log);
      manifest.add_file(log_path);
      return a.optimum;
    }();
    manifest.phase("lofi_optimization", clock.lap());
    const Benchmark& bm = a.benchmark;
    const Vector zt = a.optimum.z_tilde;
    manifest.extra()["benchmark"] = benchmark_json(bm);
    manifest.extra()["lofi_optimization"] = optimization_json(lofi_result);
    write_fields(manifest, dir / "z_tilde.csv", bm.control_columns, bm.control_coordinates, {"z_tilde"},
                 as_column(zt));
    if (!a.optimum.converged)
      throw SolverFailure("low-fidelity optimization did not converge; see " + (dir / "optimize.log").string());

    check_ranks(config.ranks, zt.size(), "update.ranks");
    const Index max_rank = *std::max_element(config.ranks.begin(), config.ranks.end());
    run_calibration(a, config, max_rank, &manifest);
    record_calibration(a, manifest);
    write_calibration_json(a, dir / "calibration.json", manifest);
    write_table(manifest, dir / "spectrum.csv", {"index", "rho"},
                (Matrix(a.projector.rank(), 2) << Vector::LinSpaced(a.projector.rank(), 1.0,
                                                                     static_cast<double>(a.projector.rank())),
                 a.projector.rho)
                    .finished());

    EnsembleOptions eo;
    eo.samples = config.samples;
    eo.seed = config.seed;
    const EnsembleDraws draws = draw_ensemble(*a.calibration, *a.sensitivity, eo);
    manifest.phase("posterior_draws", clock.lap());

    const double j_tilde = a.hifi->value(zt);
    double j_star = kNaN;
    Vector z_star;
    if (config.hifi_optimum) {
      const OptimizationResult hr = solve_with_log(*a.hifi, zt, config, dir / "hifi_optimize.log", manifest);
      z_star = hr.z_tilde;
      j_star = hr.objective;
      manifest.extra()["hifi_optimization"] = optimization_json(hr);
      write_fields(manifest, dir / "z_hifi.csv", bm.control_columns, bm.control_coordinates, {"z_hifi"},
                   as_column(z_star));
      manifest.phase("hifi_optimization", clock.lap());
    }
    out << "benchmark " << bm.name << ": J_hifi(z_tilde) = " << format_number(j_tilde);
    if (config.hifi_optimum) out << ", J_hifi(z_hifi) = " << format_number(j_star);
    out << "\n";

    json per_rank = json::array();
    for (Index r : config.ranks) {
      const HessianProjector proj = a.projector.truncated(r);
      const PosteriorEnsemble ens = project_ensemble(draws, proj);
      const std::string tag = "_r" + std::to_string(r);
      write_fields(manifest, dir / ("z_bar" + tag + ".csv"), bm.control_columns, bm.control_coordinates,
                   {"z_tilde", "z_bar"}, (Matrix(zt.size(), 2) << zt, ens.mean_update).finished());
      const double j_bar = a.hifi->value(ens.mean_update);
      json info;
      info["rank"] = r;
      info["hifi_objective_z_bar"] = j_bar;
      info["objective_ratio"] = j_bar / j_tilde;
      if (config.hifi_optimum) {
        info["error_z_bar"] = relative_control_error(bm, ens.mean_update, z_star);
        info["error_z_tilde"] = relative_control_error(bm, zt, z_star);
      }
      if (config.samples > 0) {
        write_table(manifest, dir / ("samples" + tag + ".csv"), numbered("sample_", config.samples), ens.samples);
        info["integrated_variance"] = integrated_variance(bm, ens.samples);
        info["projection_defect"] = projection_defect(proj, *a.opt_prior, ens);
        if (config.evaluate_samples) {
          Index failures = 0;
          const Vector js = evaluate_objectives(*a.hifi, ens.samples, failures);
          write_table(manifest, dir / ("objective" + tag + ".csv"), {"sample", "objective"},
                      (Matrix(js.size(), 2) << Vector::LinSpaced(js.size(), 0.0, static_cast<double>(js.size() - 1)),
                       js)
                          .finished());
          info["sample_solver_failures"] = failures;
        }
      }
      write_table(manifest, dir / ("markers" + tag + ".csv"), {"j_hifi_optimum", "j_z_bar", "j_z_tilde"},
                  (Matrix(1, 3) << j_star, j_bar, j_tilde).finished());
      per_rank.push_back(info);
      out << "  r = " << r << ": J_hifi(z_bar) = " << format_number(j_bar)
          << ", ratio = " << format_number(j_bar / j_tilde);
      if (config.hifi_optimum) out << ", error = " << format_number(relative_control_error(bm, ens.mean_update, z_star));
      out << "\n";
      manifest.phase("rank_" + std::to_string(r), clock.lap());
    }
    manifest.extra()["ranks"] = per_rank;
    manifest.extra()["leading_rho"] = vector_json(a.projector.rho.head(std::min<Index>(a.projector.rank(), 10)));
    manifest.write();
  } catch (const std::exception& e) {
    manifest.extra()["error"] = e.what();
    manifest.write();
    throw;
  }
  return 0;
}

int cmd_rank_sweep(const RunConfig& config, std::ostream& out) {
  if (config.sweep_ranks.empty()) throw ConfigError("missing required key 'sweep.ranks'");
  Manifest manifest("rank-sweep", config);
  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  Stopwatch clock;
  Analysis a;
  run_optimization(a, config, nullptr);
  if (!a.optimum.converged) throw SolverFailure("low-fidelity optimization did not converge");
  const Benchmark& bm = a.benchmark;
  const Vector zt = a.optimum.z_tilde;
  check_ranks(config.sweep_ranks, zt.size(), "sweep.ranks");
  write_fields(manifest, dir / "z_tilde.csv", bm.control_columns, bm.control_coordinates, {"z_tilde"}, as_column(zt));
  manifest.phase("lofi_optimization", clock.lap());
  run_calibration(a, config, config.sweep_ranks.back(), &manifest);
  record_calibration(a, manifest);

  const OptimizationResult hr = solve_with_log(*a.hifi, zt, config, dir / "hifi_optimize.log", manifest);
  manifest.extra()["hifi_optimization"] = optimization_json(hr);
  write_fields(manifest, dir / "z_hifi.csv", bm.control_columns, bm.control_coordinates, {"z_hifi"},
               as_column(hr.z_tilde));
  manifest.phase("hifi_optimization", clock.lap());

  EnsembleOptions eo;
  eo.samples = config.samples;
  eo.seed = config.seed;
  const EnsembleDraws draws = draw_ensemble(*a.calibration, *a.sensitivity, eo);
  const Index count = static_cast<Index>(config.sweep_ranks.size());
  Matrix table(count, 4);
  for (Index i = 0; i < count; ++i) {
    const Index r = config.sweep_ranks[static_cast<std::size_t>(i)];
    const PosteriorEnsemble ens = project_ensemble(draws, a.projector.truncated(r));
    table(i, 0) = static_cast<double>(r);
    table(i, 1) = relative_control_error(bm, ens.mean_update, hr.z_tilde);
    table(i, 2) = integrated_variance(bm, ens.samples);
    table(i, 3) = a.projector.rho.head(r).sum();
  }
  write_table(manifest, dir / "rank_sweep.csv", {"rank", "mean_error", "integrated_variance", "captured_curvature"},
              table);
  manifest.phase("sweep", clock.lap());
  manifest.extra()["benchmark"] = benchmark_json(bm);
  manifest.extra()["error_z_tilde"] = relative_control_error(bm, zt, hr.z_tilde);
  manifest.write();
  out << "rank sweep over " << count << " ranks; error at z_tilde = "
      << format_number(relative_control_error(bm, zt, hr.z_tilde)) << ", error at r = " << table(count - 1, 0)
      << ": " << format_number(table(count - 1, 1)) << "\n";
  return 0;
}

int cmd_oracle_check(const OracleCheckOptions& options, std::ostream& out) {
  require(options.instances > 0, "oracle-check: instance count must be positive");
  int failures = 0;
  for (Index k = 0; k < options.instances; ++k) {
    const Index m = 2 + k % 7;
    const Index n = 3 + k % 8;
    const Index count = 1 + k % 3;
    const DenseInstance inst = random_instance(derive_seed(options.seed, static_cast<std::uint64_t>(k)), m, n, count);
    std::vector<IdentityCheck> checks = verify_identities(inst, options.tolerance);
    const Calibration cal(inst.training_data(), state_prior_from_dense(inst.wu, inst.mu),
                          make_dense_prior(inst.wz, inst.mz), inst.alpha_d);
    const DensePosterior post = posterior_dense(inst);
    checks.push_back({"structured posterior mean", relative_error(cal.posterior_mean().to_dense(), post.mean),
                      options.tolerance});
    double worst_gamma = 0.0;
    for (Index l = 0; l < inst.count(); ++l) worst_gamma = std::max(worst_gamma, cal.gamma(inst.z.col(l)));
    checks.push_back({"gamma at training inputs", worst_gamma, options.tolerance});
    for (const auto& c : checks) {
      if (!c.pass()) ++failures;
      out << "instance " << k << " (m=" << m << ", n=" << n << ", N=" << count << ") " << c.name << ": "
          << std::setprecision(3) << std::scientific << c.error << std::defaultfloat << (c.pass() ? " ok" : " FAILED")
          << "\n";
    }
  }
  out << (failures == 0 ? "all checks passed" : std::to_string(failures) + " checks failed") << "\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace hdsa
