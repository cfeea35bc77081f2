#pragma once

#include "hdsa/dense_oracle.hpp"
#include "hdsa/optimization.hpp"
#include "hdsa/update.hpp"

#include <Eigen/Eigenvalues>

#include <memory>

namespace hdsa::oracle {

/// Dense instance paired with a linear-quadratic optimization problem u = S z + c.
struct LinearProblem {
  DenseInstance inst;
  Matrix s;
  Vector offset;
  Matrix q;
  Vector b;
  double gamma = 0.0;

  std::shared_ptr<const StateModel> model() const { return std::make_shared<LinearStateModel>(s, offset); }

  TrackingObjective objective() const {
    TrackingObjective obj;
    obj.q = q.sparseView();
    obj.b = b;
    obj.gamma = gamma;
    obj.r = inst.mz.sparseView();
    return obj;
  }

  ReducedProblem problem() const { return ReducedProblem(model(), objective(), inst.mz.sparseView()); }

  Matrix hessian() const { return s.transpose() * q * s + gamma * inst.mz; }

  Vector grad_u() const { return q * (s * inst.z_tilde + offset) - b; }

  Matrix b_dense() const { return build_B_dense(inst, s, q, grad_u()); }

  Calibration calibration() const {
    return Calibration(inst.training_data(), state_prior_from_dense(inst.wu, inst.mu),
                       make_dense_prior(inst.wz, inst.mz), inst.alpha_d);
  }
};

inline LinearProblem linear_problem(Seed seed, Index m, Index n, Index count) {
  LinearProblem lp;
  lp.inst = random_instance(seed, m, n, count);
  lp.s = standard_normal(m, n, derive_seed(seed, 101));
  lp.offset = standard_normal(m, derive_seed(seed, 102));
  const Matrix g = standard_normal(m, m, derive_seed(seed, 103));
  lp.q = g * g.transpose() / static_cast<double>(m) + 0.2 * Matrix::Identity(m, m);
  lp.b = standard_normal(m, derive_seed(seed, 104));
  lp.gamma = 0.1;
  return lp;
}

/// Leading r generalized eigenvectors of (H, W), V^T W V = I, descending eigenvalues.
struct DenseProjector {
  Matrix v;
  Vector rho;
  Matrix inv_hess() const { return v * rho.cwiseInverse().asDiagonal() * v.transpose(); }
};

inline DenseProjector dense_projector(const Matrix& h, const Matrix& w, Index r) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> eig(h, w);
  const Index n = h.rows();
  DenseProjector out;
  out.v = eig.eigenvectors().rightCols(r).rowwise().reverse();
  out.rho = eig.eigenvalues().tail(r).reverse();
  return out;
}

/// Gamma = sigma (I - W^{-1} Z_c (Z_c^T W^{-1} Z_c)^{-1} Z_c^T), sigma^2 = g^T W_u^{-1} g.
inline Matrix dense_gamma(const LinearProblem& lp) {
  const DenseInstance& inst = lp.inst;
  const Index n = inst.n();
  const Vector g = lp.grad_u();
  const double sigma = std::sqrt(g.dot(inst.wu.ldlt().solve(g)));
  Matrix out = Matrix::Identity(n, n);
  if (inst.count() > 1) {
    const Matrix winv = inst.wz.inverse();
    Matrix zc(n, inst.count() - 1);
    for (Index l = 1; l < inst.count(); ++l) zc.col(l - 1) = inst.z.col(l) - inst.z_tilde;
    const Matrix k = zc.transpose() * winv * zc;
    out -= winv * zc * k.ldlt().solve(zc.transpose());
  }
  return sigma * out;
}

/// Columns of T spanning the data-uninformed part of the posterior.
inline Matrix breve_factor(const DenseInstance& inst, const DenseFactors& f) {
  const Index informed = inst.m() * inst.count();
  return f.t.rightCols(inst.p() - informed);
}

}  // namespace hdsa::oracle
