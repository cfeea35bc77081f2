#include "hdsa/prior.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>

namespace hdsa {

SparseMatrix EllipticOperator::matrix() const {
  require(mass.rows() == mass.cols() && mass.rows() > 0, "elliptic operator: empty mass matrix");
  require(beta >= 0.0, "elliptic operator: beta must be non-negative");
  if (beta == 0.0) return mass;
  require(stiffness.rows() == mass.rows() && stiffness.cols() == mass.cols(),
          "elliptic operator: stiffness and mass sizes differ");
  SparseMatrix e = beta * stiffness + mass;
  e.makeCompressed();
  return e;
}

EllipticSolver::EllipticSolver(const EllipticOperator& op) : size_(op.mass.rows()) {
  factor_.compute(op.matrix());
  if (factor_.info() != Eigen::Success) throw SolverFailure("elliptic operator is not positive definite");
}

Vector EllipticSolver::solve(const Vector& x) const {
  require_size(x.size(), size_, "elliptic solve");
  return factor_.solve(x);
}

Matrix EllipticSolver::solve(const Matrix& x) const {
  require_size(x.rows(), size_, "elliptic solve");
  return factor_.solve(x);
}

StatePrior::StatePrior(double alpha, Matrix basis, Vector singular_values, SparseMatrix mass)
    : alpha_(alpha), basis_(std::move(basis)), pi_(std::move(singular_values)), mass_(std::move(mass)) {
  require(alpha_ > 0.0, "state prior: alpha_u must be positive");
  require(basis_.cols() == pi_.size(), "state prior: rank mismatch between V and Pi");
  require(mass_.rows() == basis_.rows(), "state prior: mass matrix size mismatch");
}

Vector StatePrior::apply_inv(const Vector& x) const {
  require_size(x.size(), dim(), "apply_Wu_inv");
  const Vector c = basis_.transpose() * x;
  return alpha_ * (basis_ * (pi_.array().square() * c.array()).matrix());
}

Vector StatePrior::apply_shifted_inv(double alpha_d, double mu, const Vector& x) const {
  require(alpha_d > 0.0 && mu >= 0.0, "shifted inverse: need alpha_d > 0 and mu >= 0");
  require_size(x.size(), dim(), "shifted inverse");
  const Vector c = basis_.transpose() * x;
  const Eigen::ArrayXd p2 = pi_.array().square();
  const Eigen::ArrayXd aleph = p2 / (alpha_d + alpha_ * mu * p2);
  return alpha_ * (basis_ * (aleph * c.array()).matrix());
}

Vector StatePrior::apply_elliptic_inv(const Vector& x) const {
  require_size(x.size(), dim(), "elliptic inverse");
  const Vector c = basis_.transpose() * x;
  return basis_ * (pi_.array() * c.array()).matrix();
}

Vector StatePrior::sample(Seed seed) const {
  const Vector omega = standard_normal(rank(), seed);
  return std::sqrt(alpha_) * (basis_ * (pi_.array() * omega.array()).matrix());
}

Vector StatePrior::sample_shifted(double alpha_d, double mu, Seed seed) const {
  require(alpha_d > 0.0 && mu >= 0.0, "shifted sample: need alpha_d > 0 and mu >= 0");
  const Vector omega = standard_normal(rank(), seed);
  const Eigen::ArrayXd p2 = pi_.array().square();
  const Eigen::ArrayXd root = (p2 / (alpha_d + alpha_ * mu * p2)).sqrt();
  return std::sqrt(alpha_) * (basis_ * (root * omega.array()).matrix());
}

StatePrior StatePrior::truncated(Index q) const {
  require(q >= 1 && q <= rank(), "state prior: truncation rank out of range");
  return StatePrior(alpha_, basis_.leftCols(q), pi_.head(q), mass_);
}

Matrix StatePrior::dense_covariance() const {
  return alpha_ * basis_ * pi_.array().square().matrix().asDiagonal() * basis_.transpose();
}

namespace {

// Ritz pairs of E^{-1} M in the M inner product from a sketch of width k.
void gsvd_sketch(const EllipticSolver& solver, const SparseMatrix& mass, Index k, Seed seed, Matrix& v,
                 Vector& pi) {
  const Index m = mass.rows();
  Matrix y = solver.solve(Matrix(mass * standard_normal(m, k, seed)));
  y = solver.solve(Matrix(mass * y));
  Eigen::HouseholderQR<Matrix> qr(y);
  const Matrix q = qr.householderQ() * Matrix::Identity(m, k);
  const Matrix mq = mass * q;
  Matrix a = mq.transpose() * solver.solve(mq);
  a = 0.5 * (a + a.transpose()).eval();
  Matrix b = q.transpose() * mq;
  b = 0.5 * (b + b.transpose()).eval();
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> eig(a, b);
  if (eig.info() != Eigen::Success) throw SolverFailure("truncated_gsvd: Rayleigh-Ritz step failed");
  // Eigen returns ascending order; reverse to descending.
  pi = eig.eigenvalues().reverse();
  v = q * eig.eigenvectors().rowwise().reverse();
  if (pi(k - 1) <= 0.0) throw SolverFailure("truncated_gsvd: non-positive singular value; E is singular");
}

}  // namespace

StatePrior truncated_gsvd(double alpha, const EllipticOperator& op, const GsvdOptions& options) {
  require(alpha > 0.0, "truncated_gsvd: alpha must be positive");
  require(options.oversample >= 0, "truncated_gsvd: oversample must be non-negative");
  const Index m = op.mass.rows();
  require(options.rank <= m, "truncated_gsvd: rank exceeds the space dimension");
  require(options.rank != 0, "truncated_gsvd: rank must be positive");
  const EllipticSolver solver(op);
  Matrix v;
  Vector pi;
  Index q = options.rank;
  if (q > 0) {
    gsvd_sketch(solver, op.mass, std::min(q + options.oversample, m), options.seed, v, pi);
  } else {
    Index k = std::min<Index>(std::max<Index>(20, options.oversample + 1), m);
    for (;;) {
      gsvd_sketch(solver, op.mass, k, options.seed, v, pi);
      const Index below =
          std::find_if(pi.data(), pi.data() + k, [&](double p) { return p < options.truncation_ratio * pi(0); }) -
          pi.data();
      // Keep `oversample` spare Ritz values past the cut so the retained ones are accurate.
      if (k == m || (below < k && below + options.oversample <= k)) {
        q = std::max<Index>(1, below);
        break;
      }
      k = std::min(2 * k, m);
    }
  }
  return StatePrior(alpha, v.leftCols(q), pi.head(q), op.mass);
}

StatePrior state_prior_from_dense(const Matrix& precision, const Matrix& mass) {
  require(precision.rows() == precision.cols() && mass.rows() == mass.cols() && precision.rows() == mass.rows(),
          "state_prior_from_dense: size mismatch");
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> eig(precision, mass);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0)
    throw InvalidArgument("state_prior_from_dense: precision is not SPD");
  // Ascending lambda gives descending pi = lambda^{-1/2}.
  const Vector pi = eig.eigenvalues().cwiseInverse().cwiseSqrt();
  return StatePrior(1.0, eig.eigenvectors(), pi, mass.sparseView());
}

Matrix OptPrior::dense_precision() const {
  const Index n = dim();
  Matrix out(n, n);
  for (Index j = 0; j < n; ++j) out.col(j) = apply(Vector::Unit(n, j));
  return out;
}

Matrix OptPrior::dense_covariance() const {
  const Index n = dim();
  Matrix out(n, n);
  for (Index j = 0; j < n; ++j) out.col(j) = apply_inv(Vector::Unit(n, j));
  return out;
}

namespace {

class FunctionPrior final : public OptPrior {
 public:
  FunctionPrior(double alpha, const EllipticOperator& op)
      : alpha_(alpha), mass_(op.mass), e_(op.matrix()), solver_(op) {
    require(alpha > 0.0, "opt prior: alpha_z must be positive");
    mass_factor_.compute(mass_);
    if (mass_factor_.info() != Eigen::Success) throw InvalidArgument("opt prior: mass matrix is not SPD");
  }
  Index dim() const override { return mass_.rows(); }
  double alpha() const override { return alpha_; }
  Vector apply(const Vector& x) const override {
    require_size(x.size(), dim(), "apply_Wz");
    return (e_ * mass_solve(e_ * x)) / alpha_;
  }
  Vector apply_inv(const Vector& x) const override {
    require_size(x.size(), dim(), "apply_Wz_inv");
    return alpha_ * solver_.solve(Vector(mass_ * solver_.solve(x)));
  }
  Vector sample(Seed seed) const override {
    const Vector omega = standard_normal(dim(), seed);
    const Vector lw = mass_factor_.matrixL() * omega;
    const Vector root = mass_factor_.permutationPinv() * lw;
    return std::sqrt(alpha_) * solver_.solve(root);
  }
  const SparseMatrix& mass() const override { return mass_; }
  Vector mass_solve(const Vector& x) const override {
    require_size(x.size(), dim(), "mass solve");
    return mass_factor_.solve(x);
  }

 private:
  double alpha_;
  SparseMatrix mass_;
  SparseMatrix e_;
  EllipticSolver solver_;
  Eigen::SimplicialLLT<SparseMatrix> mass_factor_;
};

class DensePrior final : public OptPrior {
 public:
  DensePrior(double alpha, const Matrix& precision, const Matrix& mass)
      : alpha_(alpha), precision_(precision), mass_(mass.sparseView()), factor_(precision), mass_factor_(mass) {
    require(precision.rows() == precision.cols() && mass.rows() == mass.cols() && mass.rows() == precision.rows(),
            "opt prior: size mismatch");
    if (factor_.info() != Eigen::Success) throw InvalidArgument("opt prior: precision is not SPD");
    if (mass_factor_.info() != Eigen::Success) throw InvalidArgument("opt prior: mass matrix is not SPD");
  }
  Index dim() const override { return precision_.rows(); }
  double alpha() const override { return alpha_; }
  Vector apply(const Vector& x) const override {
    require_size(x.size(), dim(), "apply_Wz");
    return precision_ * x;
  }
  Vector apply_inv(const Vector& x) const override {
    require_size(x.size(), dim(), "apply_Wz_inv");
    return factor_.solve(x);
  }
  Vector sample(Seed seed) const override {
    return factor_.matrixU().solve(standard_normal(dim(), seed));
  }
  const SparseMatrix& mass() const override { return mass_; }
  Vector mass_solve(const Vector& x) const override {
    require_size(x.size(), dim(), "mass solve");
    return mass_factor_.solve(x);
  }

 private:
  double alpha_;
  Matrix precision_;
  SparseMatrix mass_;
  Eigen::LLT<Matrix> factor_;
  Eigen::LLT<Matrix> mass_factor_;
};

}  // namespace

OptPriorPtr make_function_prior(double alpha, const EllipticOperator& op) {
  return std::make_shared<FunctionPrior>(alpha, op);
}

OptPriorPtr make_parametric_prior(double alpha, const Matrix& basis, const SparseMatrix& state_mass) {
  require(alpha > 0.0, "opt prior: alpha_z must be positive");
  require(basis.rows() == state_mass.rows(), "opt prior: basis rows must match the state mass matrix");
  Matrix gram = basis.transpose() * (state_mass * basis);
  gram = 0.5 * (gram + gram.transpose()).eval();
  return std::make_shared<DensePrior>(alpha, Matrix(gram / alpha), Matrix::Identity(basis.cols(), basis.cols()));
}

OptPriorPtr make_dense_prior(const Matrix& precision, const Matrix& mass) {
  return std::make_shared<DensePrior>(1.0, precision, mass);
}

}  // namespace hdsa
