#pragma once

#include "hdsa/random.hpp"
#include "hdsa/types.hpp"

#include <Eigen/SparseCholesky>

#include <memory>

namespace hdsa {

/// E = beta K + M on one discretized space.
struct EllipticOperator {
  double beta = 0.0;
  SparseMatrix mass;
  SparseMatrix stiffness;

  SparseMatrix matrix() const;
};

/// Sparse Cholesky of E = beta K + M, reusable for repeated solves.
class EllipticSolver {
 public:
  explicit EllipticSolver(const EllipticOperator& op);
  Vector solve(const Vector& x) const;
  Matrix solve(const Matrix& x) const;
  Index size() const { return size_; }

 private:
  Eigen::SimplicialLDLT<SparseMatrix> factor_;
  Index size_ = 0;
};

struct GsvdOptions {
  /// Retained rank; a negative value selects the smallest q with pi_{q+1}/pi_1 < truncation_ratio.
  Index rank = -1;
  Index oversample = 10;
  Seed seed = 20240601;
  double truncation_ratio = 1e-3;
};

/// State prior N(0, W_u^{-1}), W_u = (1/alpha) E M^{-1} E, stored through the
/// truncated GSVD of E^{-1}: W_u^{-1} ~= alpha V Pi^2 V^T with V^T M V = I.
class StatePrior {
 public:
  StatePrior() = default;
  StatePrior(double alpha, Matrix basis, Vector singular_values, SparseMatrix mass);

  double alpha() const { return alpha_; }
  Index dim() const { return basis_.rows(); }
  Index rank() const { return basis_.cols(); }
  const Matrix& basis() const { return basis_; }
  const Vector& singular_values() const { return pi_; }
  const SparseMatrix& mass() const { return mass_; }

  /// alpha V Pi^2 V^T x.
  Vector apply_inv(const Vector& x) const;

  /// (alpha_d W_u + mu M)^{-1} x = alpha V Aleph V^T x.
  Vector apply_shifted_inv(double alpha_d, double mu, const Vector& x) const;

  /// V Pi V^T x, the truncated E^{-1}.
  Vector apply_elliptic_inv(const Vector& x) const;

  Vector sample(Seed seed) const;
  Vector sample_shifted(double alpha_d, double mu, Seed seed) const;

  /// Leading `q` singular triples of this factorization.
  StatePrior truncated(Index q) const;

  /// alpha V Pi^2 V^T as a dense matrix (small problems only).
  Matrix dense_covariance() const;

 private:
  double alpha_ = 1.0;
  Matrix basis_;
  Vector pi_;
  SparseMatrix mass_;
};

/// Randomized range finder with one subspace iteration followed by a
/// generalized Rayleigh-Ritz step in the M inner product.
StatePrior truncated_gsvd(double alpha, const EllipticOperator& op, const GsvdOptions& options = {});

/// Exact factorization of an arbitrary SPD precision W in the M inner product.
StatePrior state_prior_from_dense(const Matrix& precision, const Matrix& mass);

/// Optimization-variable prior N(0, W_z^{-1}) together with the Z-space mass matrix M_z.
class OptPrior {
 public:
  virtual ~OptPrior() = default;
  virtual Index dim() const = 0;
  virtual double alpha() const = 0;
  /// W_z x.
  virtual Vector apply(const Vector& x) const = 0;
  /// W_z^{-1} x.
  virtual Vector apply_inv(const Vector& x) const = 0;
  virtual Vector sample(Seed seed) const = 0;
  virtual const SparseMatrix& mass() const = 0;
  virtual Vector mass_solve(const Vector& x) const = 0;

  Matrix dense_precision() const;
  Matrix dense_covariance() const;
};

using OptPriorPtr = std::shared_ptr<const OptPrior>;

/// W_z = (1/alpha) E M^{-1} E for a function-valued optimization variable.
OptPriorPtr make_function_prior(double alpha, const EllipticOperator& op);

/// W_z = (1/alpha) Phi^T M Phi for coefficients of a fixed basis Phi; Z carries
/// the Euclidean inner product (M_z = I).
OptPriorPtr make_parametric_prior(double alpha, const Matrix& basis, const SparseMatrix& state_mass);

/// Explicit SPD W_z and M_z (dense oracle instances).
OptPriorPtr make_dense_prior(const Matrix& precision, const Matrix& mass);

}  // namespace hdsa
