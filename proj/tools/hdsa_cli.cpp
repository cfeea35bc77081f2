#include "hdsa/config.hpp"
#include "hdsa/cost_model.hpp"
#include "hdsa/workflow.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

hdsa::RunConfig load(const std::string& path, const std::string& output) {
  hdsa::RunConfig config = hdsa::load_config(path);
  if (!output.empty()) config.output_dir = output;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Posterior optimal-solution sampling for low-fidelity optimization under model discrepancy"};
  app.set_version_flag("--version", std::string(hdsa::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::string output;
  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "INI configuration file")->required();
    cmd->add_option("-o,--output", output, "output directory (overrides [output] dir)");
  };

  auto* optimize = app.add_subcommand("optimize", "solve the low-fidelity problem and dump states at z_tilde");
  add_config(optimize);
  auto* preview = app.add_subcommand("preview-prior", "draw state, control, and data-uninformed prior samples");
  add_config(preview);
  bool at_tilde = false;
  preview->add_flag("--at-tilde", at_tilde, "evaluate the data-uninformed samples at z_tilde");
  auto* run = app.add_subcommand("run", "calibrate, sample posterior solutions, and evaluate them");
  add_config(run);
  auto* sweep = app.add_subcommand("rank-sweep", "posterior mean error and variance per projector rank");
  add_config(sweep);

  auto* cost = app.add_subcommand("cost-estimate", "solve-count cost of optimization and posterior sampling");
  hdsa::CostParams cp = hdsa::illustrative_cost_params();
  cost->add_option("--f", cp.f, "high-fidelity solve cost")->capture_default_str();
  cost->add_option("--f-tilde", cp.f_tilde, "low-fidelity solve cost")->capture_default_str();
  cost->add_option("--a-tilde", cp.a_tilde, "low-fidelity adjoint cost")->capture_default_str();
  cost->add_option("--e-u", cp.e_u, "state elliptic solve cost")->capture_default_str();
  cost->add_option("--e-z", cp.e_z, "control elliptic solve cost")->capture_default_str();
  cost->add_option("--iterations", cp.n_iter, "optimizer iterations")->capture_default_str();
  cost->add_option("--hessian-products", cp.n_adjoint, "Hessian products per iteration")->capture_default_str();
  cost->add_option("--training", cp.n_data, "high-fidelity evaluations N")->capture_default_str();
  cost->add_option("--samples", cp.samples, "posterior samples s")->capture_default_str();
  cost->add_option("--q", cp.q, "state prior rank")->capture_default_str();
  cost->add_option("--r", cp.r, "projector rank")->capture_default_str();
  cost->add_option("--l-e", cp.l_e, "prior oversampling")->capture_default_str();
  cost->add_option("--l-h", cp.l_h, "projector oversampling")->capture_default_str();

  auto* oracle = app.add_subcommand("oracle-check", "compare structured formulas against dense algebra");
  hdsa::OracleCheckOptions oc;
  oracle->add_option("--instances", oc.instances, "random instances")->capture_default_str();
  oracle->add_option("--seed", oc.seed, "master seed")->capture_default_str();
  oracle->add_option("--tolerance", oc.tolerance, "relative tolerance")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*optimize) return hdsa::cmd_optimize(load(config_path, output), std::cout);
    if (*preview) return hdsa::cmd_preview_prior(load(config_path, output), std::cout, at_tilde);
    if (*run) return hdsa::cmd_run(load(config_path, output), std::cout);
    if (*sweep) return hdsa::cmd_rank_sweep(load(config_path, output), std::cout);
    if (*cost) {
      cp.validate();
      const double o = hdsa::cost_lofi_opt(cp);
      const double p = hdsa::cost_posterior(cp);
      std::cout << "low-fidelity optimization: " << o << "\n"
                << "posterior sampling: " << p << "\n"
                << "ratio: " << p / o << "\n";
      return 0;
    }
    if (*oracle) return hdsa::cmd_oracle_check(oc, std::cout);
  } catch (const hdsa::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const hdsa::InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return 2;
  } catch (const hdsa::SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
