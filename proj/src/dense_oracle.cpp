#include "hdsa/dense_oracle.hpp"

#include "hdsa/prior.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>

namespace hdsa {

namespace {

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Matrix random_spd(Index size, Seed seed, double shift) {
  const Matrix b = standard_normal(size, size, seed);
  Matrix out = b * b.transpose() / static_cast<double>(size);
  out.diagonal().array() += shift;
  return 0.5 * (out + out.transpose());
}

bool is_spd(const Matrix& a) {
  Eigen::LLT<Matrix> llt(a);
  return llt.info() == Eigen::Success;
}

}  // namespace

void DenseInstance::validate() const {
  require(mu.rows() == mu.cols() && wu.rows() == mu.rows() && wu.cols() == mu.cols(), "dense instance: state sizes");
  require(mz.rows() == mz.cols() && wz.rows() == mz.rows() && wz.cols() == mz.cols(), "dense instance: opt sizes");
  require(z.rows() == n() && d.rows() == m() && d.cols() == z.cols() && z_tilde.size() == n(),
          "dense instance: data sizes");
  require(p() <= 100, "dense instance: p = m(n+1) must not exceed 100");
  require(alpha_d > 0.0, "dense instance: alpha_d must be positive");
  require(is_spd(mu) && is_spd(mz) && is_spd(wu) && is_spd(wz), "dense instance: operators must be SPD");
}

DenseInstance random_instance(Seed seed, Index m, Index n, Index count) {
  require(m >= 1 && n >= 1 && count >= 1 && count <= n + 1, "random_instance: invalid dimensions");
  DenseInstance inst;
  inst.mu = random_spd(m, derive_seed(seed, 1), 0.5);
  inst.mz = random_spd(n, derive_seed(seed, 2), 0.5);
  inst.wu = random_spd(m, derive_seed(seed, 3), 0.3);
  inst.wz = random_spd(n, derive_seed(seed, 4), 0.3);
  inst.z_tilde = standard_normal(n, derive_seed(seed, 5));
  inst.z.resize(n, count);
  inst.z.col(0) = inst.z_tilde;
  const Matrix steps = standard_normal(n, count, derive_seed(seed, 6));
  for (Index l = 1; l < count; ++l) inst.z.col(l) = inst.z_tilde + 0.7 * steps.col(l);
  inst.d = standard_normal(m, count, derive_seed(seed, 7));
  const Vector u = standard_normal(1, derive_seed(seed, 8));
  inst.alpha_d = std::exp(0.8 * u(0)) * 0.5;
  inst.validate();
  return inst;
}

Matrix build_A_at(const DenseInstance& inst, const Vector& z) {
  const Index m = inst.m();
  Matrix a(m, inst.p());
  a.leftCols(m) = Matrix::Identity(m, m);
  a.rightCols(m * inst.n()) = kron(Matrix::Identity(m, m), Matrix((inst.mz * z).transpose()));
  return a;
}

Matrix build_A_dense(const DenseInstance& inst) {
  const Index m = inst.m();
  Matrix a(m * inst.count(), inst.p());
  for (Index l = 0; l < inst.count(); ++l) a.middleRows(l * m, m) = build_A_at(inst, inst.z.col(l));
  return a;
}

Matrix build_Wtheta_dense(const DenseInstance& inst) {
  const Index m = inst.m();
  const Index n = inst.n();
  const Vector mzt = inst.mz * inst.z_tilde;
  Matrix w(inst.p(), inst.p());
  w.topLeftCorner(m, m) = inst.wu;
  w.topRightCorner(m, m * n) = kron(inst.wu, Matrix(mzt.transpose()));
  w.bottomLeftCorner(m * n, m) = kron(inst.wu, Matrix(mzt));
  w.bottomRightCorner(m * n, m * n) =
      kron(inst.wu, Matrix(inst.mz * (inst.wz + inst.z_tilde * inst.z_tilde.transpose()) * inst.mz));
  return 0.5 * (w + w.transpose());
}

DensePosterior posterior_dense(const DenseInstance& inst) {
  inst.validate();
  const Index m = inst.m();
  const Index count = inst.count();
  const Matrix a = build_A_dense(inst);
  const Matrix noise = kron(Matrix::Identity(count, count), inst.mu);
  Matrix prec = build_Wtheta_dense(inst) + a.transpose() * noise * a / inst.alpha_d;
  prec = 0.5 * (prec + prec.transpose()).eval();
  Eigen::LLT<Matrix> llt(prec);
  if (llt.info() != Eigen::Success) throw SolverFailure("posterior_dense: posterior precision is not SPD");
  DensePosterior post;
  post.cov = llt.solve(Matrix::Identity(inst.p(), inst.p()));
  post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();
  Vector d(m * count);
  for (Index l = 0; l < count; ++l) d.segment(l * m, m) = inst.d.col(l);
  post.mean = post.cov * (a.transpose() * (noise * d)) / inst.alpha_d;
  return post;
}

DenseFactors build_factors(const DenseInstance& inst) {
  inst.validate();
  const Index m = inst.m();
  const Index n = inst.n();
  const Index count = inst.count();
  DenseFactors f;

  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ge(inst.wu, inst.mu);
  f.x = ge.eigenvectors();
  f.lambda = ge.eigenvalues();
  Eigen::SelfAdjointEigenSolver<Matrix> wz_eig(inst.wz);
  f.wz_half = wz_eig.operatorSqrt();
  f.wz_inv_half = wz_eig.operatorInverseSqrt();

  const Matrix mxl = inst.mu * f.x * f.lambda.cwiseSqrt().asDiagonal();
  f.l = Matrix::Zero(inst.p(), inst.p());
  f.l.topLeftCorner(m, m) = mxl;
  f.l.bottomLeftCorner(m * n, m) = kron(mxl, Matrix(inst.mz * inst.z_tilde));
  f.l.bottomRightCorner(m * n, m * n) = kron(mxl, Matrix(inst.mz * f.wz_half));

  const Matrix lxt = f.lambda.cwiseSqrt().cwiseInverse().asDiagonal() * f.x.transpose();
  const Matrix mz_inv = inst.mz.inverse();
  f.l_inv = Matrix::Zero(inst.p(), inst.p());
  f.l_inv.topLeftCorner(m, m) = lxt;
  f.l_inv.bottomLeftCorner(m * n, m) = kron(lxt, Matrix(-f.wz_inv_half * inst.z_tilde));
  f.l_inv.bottomRightCorner(m * n, m * n) = kron(lxt, Matrix(f.wz_inv_half * mz_inv));

  const OptPriorPtr wz = make_dense_prior(inst.wz, inst.mz);
  f.spectrum = build_spectrum(inst.training_data(), *wz);
  const GSpectrum& sp = f.spectrum;

  f.psi.resize(inst.p(), m * count);
  f.d_diag.resize(m * count);
  for (Index i = 0; i < count; ++i) {
    for (Index j = 0; j < m; ++j) {
      const Index col = i * m + j;
      const double scale = 1.0 / std::sqrt(sp.mu(i) * f.lambda(j));
      f.psi.col(col).head(m) = scale * sp.s(i) * f.x.col(j);
      f.psi.col(col).tail(m * n) = scale * kron(Matrix(f.x.col(j)), Matrix(sp.mz_wz_inv_y.col(i)));
      f.d_diag(col) = sp.mu(i) / (sp.mu(i) + inst.alpha_d * f.lambda(j));
    }
  }

  if (count > 1) {
    const Matrix zc = inst.z.rightCols(count - 1).colwise() - inst.z_tilde;
    const Matrix basis = f.wz_inv_half * zc;
    Eigen::HouseholderQR<Matrix> qr(basis);
    const Matrix full = qr.householderQ();
    f.z_breve = full.rightCols(n - count + 1);
  } else {
    f.z_breve = Matrix::Identity(n, n);
  }

  const Index nb = f.z_breve.cols();
  f.q = Matrix::Zero(inst.p(), inst.p());
  f.upsilon.resize(inst.p());
  for (Index i = 0; i < count; ++i) {
    for (Index j = 0; j < m; ++j) {
      const Index col = i * m + j;
      f.q.col(col) = f.l.transpose() * f.psi.col(col);
      f.upsilon(col) = inst.alpha_d + sp.mu(i) / f.lambda(j);
    }
  }
  for (Index j = 0; j < m; ++j) {
    for (Index k = 0; k < nb; ++k) {
      const Index col = m * count + j * nb + k;
      f.q.col(col).tail(m * n) = kron(Matrix(Vector::Unit(m, j)), Matrix(f.z_breve.col(k)));
      f.upsilon(col) = inst.alpha_d;
    }
  }
  const Matrix wz_half_zb = f.wz_inv_half * f.z_breve;
  f.breve_a = -(inst.z_tilde.transpose() * wz_half_zb).transpose();
  f.breve_u = f.x * f.lambda.cwiseSqrt().cwiseInverse().asDiagonal();
  f.breve_w = inst.mz.llt().solve(wz_half_zb);
  f.t = std::sqrt(inst.alpha_d) * f.l_inv.transpose() * f.q * f.upsilon.cwiseSqrt().cwiseInverse().asDiagonal();
  return f;
}

double relative_error(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "relative_error: shape mismatch");
  const double diff = (a - b).cwiseAbs().maxCoeff();
  const double scale = b.cwiseAbs().maxCoeff();
  return scale > 0.0 ? diff / scale : diff;
}

std::vector<IdentityCheck> verify_identities(const DenseInstance& inst, double tol) {
  std::vector<IdentityCheck> out;
  const Index m = inst.m();
  const Index count = inst.count();
  const Index p = inst.p();
  const DenseFactors f = build_factors(inst);
  const Matrix w_theta = build_Wtheta_dense(inst);
  const Matrix w_theta_inv = f.l_inv.transpose() * f.l_inv;
  const DensePosterior post = posterior_dense(inst);
  const Matrix a = build_A_dense(inst);
  const Matrix noise = kron(Matrix::Identity(count, count), inst.mu);

  out.push_back({"W_theta = L L^T", relative_error(f.l * f.l.transpose(), w_theta), tol});
  out.push_back({"L L^{-1} = I", relative_error(f.l * f.l_inv, Matrix::Identity(p, p)), tol});
  out.push_back({"W_theta^{-1} = L^{-T} L^{-1}", relative_error(w_theta_inv, w_theta.inverse()), tol});
  const Matrix wu_inv = inst.wu.inverse();
  out.push_back({"A W_theta^{-1} A^T (I (x) M_u) = G (x) W_u^{-1} M_u",
                 relative_error(a * w_theta_inv * a.transpose() * noise, kron(f.spectrum.g_matrix, wu_inv * inst.mu)),
                 tol});
  const Matrix sigma_psi = w_theta_inv - f.psi * f.d_diag.asDiagonal() * f.psi.transpose();
  out.push_back({"Sigma = W_theta^{-1} - Psi D Psi^T", relative_error(sigma_psi, post.cov), tol});
  out.push_back({"T T^T = Sigma", relative_error(f.t * f.t.transpose(), post.cov), tol});
  out.push_back({"Q^T Q = I", relative_error(f.q.transpose() * f.q, Matrix::Identity(p, p)), tol});

  // C = alpha_d L^{-1} Sigma^{-1} L^{-T}; its eigenpairs must be (Q, Upsilon).
  const Matrix a_noise_a = a.transpose() * noise * a / inst.alpha_d;
  const Matrix c = inst.alpha_d * f.l_inv * (w_theta + a_noise_a) * f.l_inv.transpose();
  out.push_back({"C Q = Q Upsilon", relative_error(c * f.q, f.q * f.upsilon.asDiagonal()), tol});
  Matrix lt_psi_formula(p, m * count);
  for (Index i = 0; i < count; ++i) {
    for (Index j = 0; j < m; ++j) {
      Vector col = Vector::Zero(p);
      col(j) = f.spectrum.eg(i);
      col.tail(m * inst.n()) =
          kron(Matrix(Vector::Unit(m, j)), Matrix(f.wz_inv_half * f.spectrum.y.col(i)));
      lt_psi_formula.col(i * m + j) = col / std::sqrt(f.spectrum.mu(i));
    }
  }
  out.push_back({"L^T psi_ij closed form", relative_error(f.l.transpose() * f.psi, lt_psi_formula), tol});
  const Matrix a_tilde = build_A_at(inst, inst.z_tilde);
  out.push_back({"A_z~ W_theta^{-1} A_z~^T = W_u^{-1}", relative_error(a_tilde * w_theta_inv * a_tilde.transpose(), wu_inv),
                 tol});
  return out;
}

ThetaStructured sample_theta_breve_dense(const DenseInstance& inst, const DenseFactors& f, Seed seed) {
  ThetaStructured theta;
  theta.origin = ThetaOrigin::Breve;
  theta.state_dim = inst.m();
  theta.opt_dim = inst.n();
  const Index nb = f.breve_w.cols();
  const Matrix u = f.breve_u * standard_normal(inst.m(), nb, seed);
  theta.terms.reserve(static_cast<std::size_t>(nb));
  for (Index k = 0; k < nb; ++k) theta.add(f.breve_a(k), u.col(k), f.breve_w.col(k));
  return theta;
}

Matrix build_B_dense(const DenseInstance& inst, const Matrix& jac, const Matrix& juu, const Vector& grad_u) {
  const Index m = inst.m();
  const Index n = inst.n();
  require(jac.rows() == m && jac.cols() == n, "build_B_dense: Jacobian shape");
  Matrix b = jac.transpose() * juu * build_A_at(inst, inst.z_tilde);
  b.rightCols(m * n) += kron(Matrix(grad_u.transpose()), inst.mz);
  return b;
}

}  // namespace hdsa
