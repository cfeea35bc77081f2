#include "hdsa/cost_model.hpp"
#include "hdsa/workflow.hpp"
#include "oracle_support.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

using namespace hdsa;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Report {
 public:
  void check(int id, const char* title, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %d %s: %s (%s; %.1f s)\n", id, o.pass ? "PASS" : "FAIL", title, o.detail.c_str(), secs);
    std::fflush(stdout);
    failures_ += o.pass ? 0 : 1;
  }
  int failures() const { return failures_; }

 private:
  int failures_ = 0;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

struct Shape {
  Index m, n, count;
};

Shape instance_shape(Index k) {
  const Index m = 1 + k % 8;
  const Index n = 2 + (3 * k) % 9;
  return {m, n, 1 + k % std::min<Index>(3, n + 1)};
}

constexpr Index kInstances = 24;

Seed instance_seed(Index k) { return derive_seed(2024, static_cast<std::uint64_t>(k)); }

Outcome dense_equivalence() {
  double mean_err = 0.0, cov_err = 0.0, e2e_err = 0.0;
  for (Index k = 0; k < kInstances; ++k) {
    const Shape s = instance_shape(k);
    const oracle::LinearProblem lp = oracle::linear_problem(instance_seed(k), s.m, s.n, s.count);
    const DenseInstance& inst = lp.inst;
    const Calibration cal = lp.calibration();
    const DensePosterior post = posterior_dense(inst);
    mean_err = std::max(mean_err, relative_error(cal.posterior_mean().to_dense(), post.mean));

    // Empirical covariance of theta_hat + theta_breve, accumulated in blocks.
    const DenseFactors f = build_factors(inst);
    const Index samples = 200000, block = 2000;
    Matrix acc = Matrix::Zero(inst.p(), inst.p());
    Matrix x(inst.p(), block);
    for (Index start = 0; start < samples; start += block) {
      for (Index j = 0; j < block; ++j) {
        const Seed sk = derive_seed(instance_seed(k) + 1, static_cast<std::uint64_t>(start + j));
        x.col(j) = cal.sample_theta_hat(derive_seed(sk, 0)).to_dense() +
                   sample_theta_breve_dense(inst, f, derive_seed(sk, 1)).to_dense();
      }
      acc.selfadjointView<Eigen::Lower>().rankUpdate(x);
    }
    const Matrix emp = Matrix(acc.selfadjointView<Eigen::Lower>()) / static_cast<double>(samples);
    cov_err = std::max(cov_err, relative_error(emp, post.cov));

    const ReducedProblem problem = lp.problem();
    const OptimizationPoint point = problem.evaluate(inst.z_tilde);
    const SensitivityOperator b(problem.b_pieces(point), cal);
    const Index r = std::max<Index>(1, s.n - 1);
    GenEigOptions eo;
    eo.rank = r;
    const HessianProjector proj =
        gen_eig_H([&](const Vector& v) { return problem.hess_vec(point, v); }, cal.opt_prior(), eo);
    const Matrix ph = oracle::dense_projector(lp.hessian(), inst.wz, r).inv_hess();
    const Matrix bd = lp.b_dense();
    const Matrix gamma = oracle::dense_gamma(lp);
    EnsembleOptions opts;
    opts.samples = 4;
    opts.seed = instance_seed(k);
    const PosteriorEnsemble ens = posterior_solution_samples(cal, b, proj, opts);
    e2e_err = std::max(e2e_err, relative_error(ens.mean_update, inst.z_tilde - ph * bd * post.mean));
    for (Index j = 0; j < opts.samples; ++j) {
      const Seed sj = ens.seeds[static_cast<std::size_t>(j)];
      const Vector theta = post.mean + cal.sample_theta_hat(derive_seed(sj, 0)).to_dense();
      const Vector nu = cal.opt_prior().sample(derive_seed(sj, 1));
      e2e_err = std::max(e2e_err, relative_error(ens.samples.col(j), inst.z_tilde - ph * (bd * theta + gamma * nu)));
    }
  }
  Outcome o;
  o.pass = mean_err <= 1e-10 && cov_err <= 0.05 && e2e_err <= 1e-9;
  o.detail = std::to_string(kInstances) + " instances, mean " + sci(mean_err) + ", covariance (2e5 samples) " +
             sci(cov_err) + ", end-to-end " + sci(e2e_err);
  return o;
}

Outcome identity_suite() {
  double worst = 0.0;
  std::string worst_name;
  for (Index k = 0; k < kInstances; ++k) {
    const Shape s = instance_shape(k);
    for (const IdentityCheck& c : verify_identities(random_instance(instance_seed(k), s.m, s.n, s.count), 1e-10)) {
      if (c.error > worst) {
        worst = c.error;
        worst_name = c.name;
      }
    }
  }
  return {worst <= 1e-10, "largest error " + sci(worst) + " in '" + worst_name + "'"};
}

Outcome structural_invariants() {
  double breve = 0.0, silent = 0.0, tilde = 0.0, proj_err = 0.0, comp_err = 0.0, prior = 0.0;
  for (Index k = 0; k < kInstances; ++k) {
    const Shape s = instance_shape(k);
    const oracle::LinearProblem lp = oracle::linear_problem(instance_seed(k), s.m, s.n, s.count);
    const DenseInstance& inst = lp.inst;
    const Calibration cal = lp.calibration();
    const SparseMatrix mz = inst.mz.sparseView();
    const double zscale = inst.z.norm();
    for (Index l = 0; l < inst.count(); ++l)
      breve = std::max(breve, cal.sample_delta_breve(inst.z.col(l), derive_seed(5, l)).norm() / zscale);
    tilde = std::max(tilde, cal.gamma(inst.z_tilde));

    if (inst.count() < inst.n()) {
      Matrix span(inst.n(), inst.count());
      span.col(0) = inst.z_tilde;
      for (Index l = 1; l < inst.count(); ++l) span.col(l) = inst.z.col(l) - inst.z_tilde;
      const Eigen::HouseholderQR<Matrix> qr(span);
      const Matrix q = qr.householderQ() * Matrix::Identity(inst.n(), inst.count());
      Vector x = standard_normal(inst.n(), derive_seed(instance_seed(k), 50));
      x -= q * (q.transpose() * x);
      const Vector v = inst.wz * x;
      const Vector z = standard_normal(inst.n(), derive_seed(instance_seed(k), 51));
      const ThetaStructured hat = cal.sample_theta_hat(9);
      silent = std::max(silent, relative_error(cal.mean_discrepancy(z + v), cal.mean_discrepancy(z)));
      silent = std::max(silent, relative_error(hat.evaluate(z + v, mz), hat.evaluate(z, mz)));
    }

    const ReducedProblem problem = lp.problem();
    const OptimizationPoint point = problem.evaluate(inst.z_tilde);
    GenEigOptions eo;
    eo.rank = std::max<Index>(1, s.n / 2);
    const HessianProjector proj =
        gen_eig_H([&](const Vector& v) { return problem.hess_vec(point, v); }, cal.opt_prior(), eo);
    const Vector x = standard_normal(inst.n(), derive_seed(instance_seed(k), 52));
    const Vector px = apply_projector(proj, cal.opt_prior(), x);
    proj_err = std::max(proj_err, (apply_projector(proj, cal.opt_prior(), px) - px).norm() / x.norm());
    const Vector qx = cal.apply_complement_projector(x);
    comp_err = std::max(comp_err, (cal.apply_complement_projector(qx) - qx).norm() / x.norm());

    const Matrix a = build_A_at(inst, inst.z_tilde);
    const Matrix w_inv = build_Wtheta_dense(inst).inverse();
    prior = std::max(prior, relative_error(a * w_inv * a.transpose(), inst.wu.inverse()));
  }
  Outcome o;
  o.pass = breve <= 1e-12 && silent <= 1e-10 && tilde == 0.0 && proj_err <= 1e-8 && comp_err <= 1e-8 && prior <= 1e-10;
  o.detail = "breve at inputs " + sci(breve) + ", silent directions " + sci(silent) + ", gamma(z_tilde) " +
             sci(tilde) + ", P^2-P " + sci(proj_err) + ", Q^2-Q " + sci(comp_err) + ", prior map " + sci(prior);
  return o;
}

Outcome derivative_checks() {
  double grad = 0.0, sym = 0.0, hess = 0.0;
  DiffusionReactionParams dr;
  MassSpringParams ms;
  AdvectionDiffusionParams ad;
  const Benchmark bms[] = {make_diffusion_reaction(dr), make_mass_spring(ms), make_advection_diffusion(ad)};
  Seed seed = 1;
  for (const Benchmark& bm : bms) {
    const Vector z = bm.parametric() ? Vector(0.5 * standard_normal(bm.z0.size(), seed).cwiseAbs())
                                     : Vector(bm.z0 + 2.0 * standard_normal(bm.z0.size(), seed));
    for (bool hifi : {false, true}) {
      const ReducedProblem p(hifi ? bm.hifi : bm.lofi, bm.objective, bm.control_mass, false);
      const OptimizationPoint pt = p.evaluate(z);
      for (int t = 0; t < 3; ++t) {
        const Vector v = standard_normal(z.size(), ++seed);
        const double h = 1e-4 * std::max(1.0, z.norm()) / v.norm();
        const double fd = (p.value(z + h * v) - p.value(z - h * v)) / (2.0 * h);
        const double ad_val = pt.gradient.dot(v);
        grad = std::max(grad, std::abs(fd - ad_val) / std::abs(ad_val));
        const Vector w = standard_normal(z.size(), ++seed);
        const Vector hv = p.hess_vec(pt, v);
        const Vector hw = p.hess_vec(pt, w);
        sym = std::max(sym, std::abs(w.dot(hv) - v.dot(hw)) / (w.norm() * hv.norm()));
        const Vector gfd = (p.evaluate(z + h * v).gradient - p.evaluate(z - h * v).gradient) / (2.0 * h);
        hess = std::max(hess, (gfd - hv).norm() / hv.norm());
      }
    }
  }
  return {grad <= 1e-6 && sym <= 1e-10 && hess <= 1e-5,
          "gradient " + sci(grad) + ", Hessian symmetry " + sci(sym) + ", Hessian vs differences " + sci(hess)};
}

Outcome cost_model() {
  const CostParams p = illustrative_cost_params();
  const double o = cost_lofi_opt(p);
  const double post = cost_posterior(p);
  std::ostringstream ss;
  ss << "O = " << o << ", P = " << post;
  return {o == 15900.0 && post == 2587.0, ss.str()};
}

RunConfig load(const std::string& name) {
  return load_config(fs::path(HDSA_CONFIG_DIR) / (name + ".ini"));
}

Outcome spectrum_shape() {
  const RunConfig config = load("advection_diffusion");
  Analysis a;
  run_optimization(a, config, nullptr);
  const Index n = a.optimum.z_tilde.size();
  const OptimizationPoint point = a.lofi->evaluate(a.optimum.z_tilde);
  const OptPriorPtr wz = a.benchmark.opt_prior(config.alpha_z, config.beta_z);
  Matrix h(n, n);
  for (Index j = 0; j < n; ++j) h.col(j) = a.lofi->hess_vec(point, Vector::Unit(n, j));
  h = 0.5 * (h + h.transpose()).eval();
  const Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> eig(h, wz->dense_precision());
  const Vector rho = eig.eigenvalues().reverse();
  const double ratio = rho(0) / rho(1);
  return {ratio >= 100.0, "25x25 dense spectrum, rho_1 " + sci(rho(0)) + ", rho_2 " + sci(rho(1)) + ", ratio " +
                              sci(ratio)};
}

struct Improvement {
  double j_tilde = 0.0;
  std::vector<std::pair<Index, double>> j_bar;
};

Improvement objective_improvement(const RunConfig& config) {
  Analysis a;
  run_optimization(a, config, nullptr);
  if (!a.optimum.converged) throw SolverFailure(config.benchmark + ": low-fidelity optimization did not converge");
  run_calibration(a, config, config.max_rank());
  const EnsembleDraws draws = draw_ensemble(*a.calibration, *a.sensitivity, EnsembleOptions{});
  Improvement out;
  out.j_tilde = a.hifi->value(a.optimum.z_tilde);
  for (Index r : config.ranks)
    out.j_bar.emplace_back(r, a.hifi->value(project_ensemble(draws, a.projector.truncated(r)).mean_update));
  return out;
}

Outcome improvement_all() {
  bool pass = true;
  std::string detail;
  for (const char* name : {"diffusion_reaction", "mass_spring", "advection_diffusion"}) {
    const RunConfig config = load(name);
    const Improvement imp = objective_improvement(config);
    const bool factor_two = config.parametric();
    for (const auto& [r, j] : imp.j_bar) {
      const bool ok = factor_two ? imp.j_tilde / j >= 2.0 : j <= 0.75 * imp.j_tilde;
      pass = pass && ok;
      if (!detail.empty()) detail += ", ";
      detail += std::string(name) + " r=" + std::to_string(r) + " ratio " + sci(j / imp.j_tilde);
    }
  }
  return {pass, detail};
}

Outcome rank_sweep_shape() {
  RunConfig config = load("diffusion_reaction");
  config.sweep_ranks.clear();
  for (Index r = 1; r <= 30; ++r) config.sweep_ranks.push_back(r);
  Analysis a;
  run_optimization(a, config, nullptr);
  run_calibration(a, config, 30);
  const OptimizationResult hr = solve_lofi(*a.hifi, a.optimum.z_tilde, optimizer_options(config));
  EnsembleOptions eo;
  eo.samples = config.samples;
  eo.seed = config.seed;
  const EnsembleDraws draws = draw_ensemble(*a.calibration, *a.sensitivity, eo);
  Vector err(30), var(30);
  for (Index r = 1; r <= 30; ++r) {
    const PosteriorEnsemble ens = project_ensemble(draws, a.projector.truncated(r));
    err(r - 1) = relative_control_error(a.benchmark, ens.mean_update, hr.z_tilde);
    var(r - 1) = integrated_variance(a.benchmark, ens.samples);
  }
  const double early_min = err.head(5).minCoeff();
  const double tail_max = err.tail(26).maxCoeff();
  const double tail_min = err.tail(26).minCoeff();
  bool monotone = true;
  for (Index r = 1; r < 30; ++r) monotone = monotone && var(r) >= var(r - 1) * (1.0 - 1e-12);
  const bool drop = early_min <= 0.5 * err(0);
  const bool plateau = tail_max <= 1.1 * tail_min;
  return {drop && plateau && monotone,
          "error r=1 " + sci(err(0)) + ", min r<=5 " + sci(early_min) + ", r>=5 range [" + sci(tail_min) + ", " +
              sci(tail_max) + "], variance " + (monotone ? "non-decreasing" : "decreases") + " from " + sci(var(0)) +
              " to " + sci(var(29))};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "hdsa_acceptance_determinism";
  fs::remove_all(root);
  std::size_t compared = 0;
  for (const char* name : {"diffusion_reaction", "mass_spring", "advection_diffusion"}) {
    RunConfig config = load(name);
    config.samples = 10;
    std::ostringstream sink;
    for (const char* run : {"a", "b"}) {
      config.output_dir = root / name / run;
      cmd_run(config, sink);
    }
    for (const auto& e : fs::directory_iterator(root / name / "a")) {
      if (e.path().extension() != ".csv") continue;
      const fs::path other = root / name / "b" / e.path().filename();
      std::ifstream x(e.path(), std::ios::binary), y(other, std::ios::binary);
      std::stringstream xs, ys;
      xs << x.rdbuf();
      ys << y.rdbuf();
      if (xs.str() != ys.str()) return {false, e.path().filename().string() + " differs for " + name};
      ++compared;
    }
  }
  fs::remove_all(root);
  return {compared > 0, std::to_string(compared) + " CSV files byte-identical across repeated runs"};
}

}  // namespace

int main() {
  Report report;
  report.check(1, "dense-oracle equivalence", dense_equivalence);
  report.check(2, "factorization identities", identity_suite);
  report.check(3, "structural invariants", structural_invariants);
  report.check(4, "derivative checks", derivative_checks);
  report.check(5, "cost model", cost_model);
  report.check(6, "advection-diffusion spectrum gap", spectrum_shape);
  report.check(7, "objective improvement", improvement_all);
  report.check(8, "rank sweep shape", rank_sweep_shape);
  report.check(9, "determinism", determinism);
  return report.failures() == 0 ? 0 : 1;
}
