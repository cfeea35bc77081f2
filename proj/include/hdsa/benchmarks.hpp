#pragma once

#include "hdsa/mesh.hpp"
#include "hdsa/optimization.hpp"
#include "hdsa/prior.hpp"
#include "hdsa/random.hpp"

#include <Eigen/SparseLU>

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace hdsa {

struct NewtonOptions {
  double tol = 1e-10;
  int max_iter = 60;
};

/// Newton's method with backtracking on |F|. Throws SolverFailure on divergence.
Vector newton_solve(const std::function<Vector(const Vector&)>& residual,
                    const std::function<SparseMatrix(const Vector&)>& jacobian, Vector u,
                    const NewtonOptions& options = {});

/// Steady Galerkin system L u + N(u) = B z on the free nodes; constrained nodes stay zero.
struct GalerkinPhysics {
  SparseMatrix linear;  ///< m x m
  Matrix control;       ///< m x n
  /// Adds N(u) to `residual` and dN/du to `jacobian` (either may be null). Empty for linear physics.
  std::function<void(const Vector& u, Vector* residual, std::vector<Triplet>* jacobian)> nonlinear;
  /// (lambda^T N)_uu du.
  std::function<Vector(const Vector& u, const Vector& lambda, const Vector& du)> second_derivative;
  std::vector<Index> free;  ///< empty: every node is free
  std::function<Vector(const Vector& z)> initial_guess;
  NewtonOptions newton;
};

class GalerkinModel final : public StateModel {
 public:
  explicit GalerkinModel(GalerkinPhysics physics);
  Index state_dim() const override { return physics_.linear.rows(); }
  Index control_dim() const override { return physics_.control.cols(); }
  Vector solve(const Vector& z, const Vector& guess) const override;
  std::shared_ptr<const StateLinearization> linearize(const Vector& u, const Vector& z) const override;

  /// F(u, z) restricted to the free rows.
  Vector residual(const Vector& u, const Vector& z) const;
  const GalerkinPhysics& physics() const { return physics_; }

 private:
  SparseMatrix jacobian_full(const Vector& u) const;
  Vector to_free(const Vector& x) const;
  Vector to_full(const Vector& x) const;

  GalerkinPhysics physics_;
  SparseMatrix select_;  ///< free x m
};

/// A high/low-fidelity model pair with its objective and discretized spaces.
struct Benchmark {
  std::string name;
  std::shared_ptr<const StateModel> lofi;
  std::shared_ptr<const StateModel> hifi;
  TrackingObjective objective;
  SparseMatrix control_mass;
  SparseMatrix state_mass;
  SparseMatrix state_stiffness;
  SparseMatrix control_stiffness;  ///< function-valued controls
  Matrix control_basis;            ///< parametric controls: basis evaluated at the state nodes
  bool gauss_newton = false;
  Matrix state_coordinates;
  Matrix control_coordinates;
  std::vector<std::string> state_columns;
  std::vector<std::string> control_columns;
  Vector z0;
  /// Discretization choices written to the manifest.
  std::vector<std::pair<std::string, double>> settings;

  bool parametric() const { return control_basis.size() > 0; }
  ReducedProblem problem(bool high_fidelity = false) const;
  EllipticOperator state_operator(double beta_u) const;
  OptPriorPtr opt_prior(double alpha_z, double beta_z) const;
  /// S(z) - S~(z).
  Vector discrepancy(const Vector& z) const;
};

struct DiffusionReactionParams {
  Index elements = 100;
  double kappa = 0.2;
  double gamma = 1e-4;
  double amplitude = 0.7;
  double z0 = 100.0;
};

/// -kappa u'' + c(x) u^2 = z on (0,1), zero Neumann; c = 1 (low) or 1 + amplitude sin(2 pi x) (high).
Benchmark make_diffusion_reaction(const DiffusionReactionParams& params = {});

struct MassSpringParams {
  Index steps = 200;
  double horizon = 10.0;
  double m1 = 1.0;
  double m2 = 10.0;
  double k1 = 1.0;
  double k2 = 1.0;
  double k3 = 1.0;
  double gamma = 1e-6;
};

/// Crank-Nicolson trajectories of (x1, v1, x2, v2), one row per time node. `coupled == false`
/// holds block 2 at rest. `z` holds the forcing at the time nodes.
Matrix integrate_mass_spring(const MassSpringParams& params, const Vector& z, const Eigen::Vector4d& y0,
                             bool coupled);

/// State (x1 ; x1') on the time mesh; the high-fidelity model couples block 2.
Benchmark make_mass_spring(const MassSpringParams& params = {});

struct AdvectionDiffusionParams {
  Index cells = 40;
  double kappa = 0.25;
  double gamma = 1e-7;
  double target = 4.0;
  /// false: the high-fidelity velocity is frozen at (1,1), so both models coincide.
  bool nonlinear_velocity = true;
};

/// -kappa Lap u + v(u).grad u = sum z_j phi_j on (-1,1)^2, u = 0 on x = -1 and y = -1.
Benchmark make_advection_diffusion(const AdvectionDiffusionParams& params = {});

/// z_tilde + relative |z_tilde|_M p / |p|_M with p ~ N(0, W_z^{-1}).
Vector sample_secondary_input(const OptPrior& wz, const Vector& z_tilde, Seed seed, double relative = 0.2);

}  // namespace hdsa
