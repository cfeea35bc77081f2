#pragma once

#include "hdsa/types.hpp"

#include <Eigen/SparseCholesky>

#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

namespace hdsa {

/// Derivatives of the solution operator S(z) at a converged state, for a
/// constraint F(u, z) = 0 that is affine in z.
class StateLinearization {
 public:
  virtual ~StateLinearization() = default;
  /// S'(z) dz: one tangent solve.
  virtual Vector jacobian_apply(const Vector& dz) const = 0;
  /// S'(z)^T w: one adjoint solve.
  virtual Vector jacobian_transpose_apply(const Vector& w) const = 0;
  /// Second-order state term -(lambda^T F)_uu du with lambda = F_u^{-T} weight.
  /// Zero for models linear in u.
  virtual Vector curvature_apply(const Vector& weight, const Vector& du) const;
};

class StateModel {
 public:
  virtual ~StateModel() = default;
  virtual Index state_dim() const = 0;
  virtual Index control_dim() const = 0;
  /// Solves F(u, z) = 0. `guess` may be empty.
  virtual Vector solve(const Vector& z, const Vector& guess) const = 0;
  virtual std::shared_ptr<const StateLinearization> linearize(const Vector& u, const Vector& z) const = 0;
};

/// u = S z + offset with an explicit dense S.
class LinearStateModel final : public StateModel {
 public:
  explicit LinearStateModel(Matrix s, Vector offset = Vector());
  Index state_dim() const override { return s_->rows(); }
  Index control_dim() const override { return s_->cols(); }
  Vector solve(const Vector& z, const Vector& guess) const override;
  std::shared_ptr<const StateLinearization> linearize(const Vector& u, const Vector& z) const override;
  const Matrix& matrix() const { return *s_; }

 private:
  std::shared_ptr<const Matrix> s_;
  Vector offset_;
};

/// J(u, z) = 1/2 u^T Q u - b^T u + c + gamma/2 z^T R z.
struct TrackingObjective {
  SparseMatrix q;
  Vector b;
  double c = 0.0;
  double gamma = 0.0;
  SparseMatrix r;

  double value(const Vector& u, const Vector& z) const;
  Vector grad_u(const Vector& u) const { return q * u - b; }
  Vector hess_uu(const Vector& w) const { return q * w; }
};

struct OptimizationPoint {
  Vector z;
  Vector u;
  double value = 0.0;
  Vector grad_u;
  Vector gradient;
  std::shared_ptr<const StateLinearization> linearization;
};

/// The pieces of B = grad_{z,theta} J needed to apply it to structured vectors.
struct BPieces {
  std::function<Vector(const Vector&)> jacobian_transpose;
  Vector grad_u;
  std::function<Vector(const Vector&)> hess_uu;
};

/// min_z J(S(z), z) for one state model.
class ReducedProblem {
 public:
  ReducedProblem(std::shared_ptr<const StateModel> model, TrackingObjective objective, SparseMatrix control_mass,
                 bool gauss_newton = false);

  Index control_dim() const { return model_->control_dim(); }
  Index state_dim() const { return model_->state_dim(); }
  const StateModel& model() const { return *model_; }
  const TrackingObjective& objective() const { return objective_; }
  const SparseMatrix& control_mass() const { return mass_; }
  bool gauss_newton() const { return gauss_newton_; }

  /// Forward solve plus adjoint gradient.
  OptimizationPoint evaluate(const Vector& z, const Vector& guess = Vector()) const;
  double value(const Vector& z, const Vector& guess = Vector()) const;
  /// H w by tangent and adjoint solves at `point`.
  Vector hess_vec(const OptimizationPoint& point, const Vector& w) const;
  BPieces b_pieces(const OptimizationPoint& point) const;

  /// sqrt(g^T M_z^{-1} g).
  double dual_norm(const Vector& g) const;
  Vector mass_solve(const Vector& g) const;
  double mass_norm(const Vector& z) const;

 private:
  std::shared_ptr<const StateModel> model_;
  TrackingObjective objective_;
  SparseMatrix mass_;
  std::shared_ptr<Eigen::SimplicialLLT<SparseMatrix>> mass_factor_;
  bool gauss_newton_;
};

Vector gradient(const ReducedProblem& problem, const Vector& z);
Vector hess_vec(const ReducedProblem& problem, const Vector& z, const Vector& w);
BPieces apply_B_pieces(const ReducedProblem& problem, const Vector& z_tilde);

struct TrustRegionOptions {
  double gtol_rel = 1e-8;
  double gtol_abs = 0.0;
  int max_iter = 100;
  double initial_radius = 1e6;
  double eta = 0.1;
  double expand = 2.0;
  double shrink = 0.25;
  /// Relative CG tolerance; a negative value selects min(cg_tol_max, sqrt(|g|)).
  double cg_tol = -1.0;
  double cg_tol_max = 0.5;
  int max_cg = 500;
  std::ostream* log = nullptr;
};

struct TrustRegionRecord {
  int iteration = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  double radius = 0.0;
  int cg_iterations = 0;
  bool accepted = false;
};

struct OptimizationResult {
  Vector z_tilde;
  Vector state;
  double objective = 0.0;
  double grad_norm = 0.0;
  double initial_grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<TrustRegionRecord> trace;
};

/// Trust-region Newton-CG (Steihaug) with the M_z inner product as preconditioner.
OptimizationResult solve_lofi(const ReducedProblem& problem, const Vector& z0, const TrustRegionOptions& options = {});

}  // namespace hdsa
