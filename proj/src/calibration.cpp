#include "hdsa/calibration.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace hdsa {

void ThetaStructured::add(double a, Vector u, Vector w) {
  if (terms.empty() && state_dim == 0 && opt_dim == 0) {
    state_dim = u.size();
    opt_dim = w.size();
  }
  require_size(u.size(), state_dim, "Kronecker term state vector");
  require_size(w.size(), opt_dim, "Kronecker term opt vector");
  terms.push_back({a, std::move(u), std::move(w)});
}

Vector ThetaStructured::evaluate(const Vector& z, const SparseMatrix& mz) const {
  require_size(z.size(), opt_dim, "delta_eval");
  const Vector mzz = mz * z;
  Vector out = Vector::Zero(state_dim);
  for (const auto& t : terms) out += (t.a + t.w.dot(mzz)) * t.u;
  return out;
}

Vector ThetaStructured::to_dense() const {
  const Index m = state_dim;
  const Index n = opt_dim;
  Vector out = Vector::Zero(m * (n + 1));
  for (const auto& t : terms) {
    out.head(m) += t.a * t.u;
    for (Index i = 0; i < m; ++i) out.segment(m + i * n, n) += t.u(i) * t.w;
  }
  return out;
}

ThetaStructured operator+(const ThetaStructured& x, const ThetaStructured& y) {
  ThetaStructured out = x;
  if (out.terms.empty()) {
    out.state_dim = y.state_dim;
    out.opt_dim = y.opt_dim;
  }
  if (x.origin != y.origin) out.origin = ThetaOrigin::Other;
  for (const auto& t : y.terms) out.add(t.a, t.u, t.w);
  return out;
}

Vector delta_dense(const Vector& theta, const Vector& z, const SparseMatrix& mz) {
  const Index n = z.size();
  require(theta.size() % (n + 1) == 0, "delta_dense: theta length is not m(n+1)");
  const Index m = theta.size() / (n + 1);
  const Vector mzz = mz * z;
  Vector out = theta.head(m);
  for (Index i = 0; i < m; ++i) out(i) += theta.segment(m + i * n, n).dot(mzz);
  return out;
}

void TrainingData::validate() const {
  require(z.cols() >= 1, "training data: need at least one input");
  require(d.cols() == z.cols(), "training data: Z and D column counts differ");
  require_size(z_tilde.size(), z.rows(), "training data: z_tilde");
  require(z.allFinite() && d.allFinite() && z_tilde.allFinite(), "training data: non-finite entries");
  require((z.col(0).array() == z_tilde.array()).all(), "training data: the first input must equal z_tilde exactly");
}

GSpectrum build_spectrum(const TrainingData& data, const OptPrior& wz) {
  data.validate();
  require_size(data.z.rows(), wz.dim(), "build_spectrum: optimization dimension");
  const Index n_data = data.count();
  GSpectrum sp;
  sp.wz_inv_zt = wz.apply_inv(data.z_tilde);
  sp.wz_inv_z.resize(wz.dim(), n_data);
  sp.wz_inv_z.col(0) = sp.wz_inv_zt;
  for (Index l = 1; l < n_data; ++l) sp.wz_inv_z.col(l) = wz.apply_inv(data.z.col(l));

  const Matrix zhat = data.z.colwise() - data.z_tilde;
  const Matrix wz_inv_zhat = sp.wz_inv_z.colwise() - sp.wz_inv_zt;
  Matrix g = zhat.transpose() * wz_inv_zhat;
  g.array() += 1.0;
  g = 0.5 * (g + g.transpose()).eval();
  sp.g_matrix = g;

  // Unpivoted Cholesky, column by column, to name the first dependent input.
  Matrix l = Matrix::Zero(n_data, n_data);
  for (Index j = 0; j < n_data; ++j) {
    double pivot = g(j, j) - l.row(j).head(j).squaredNorm();
    if (!(pivot > 1e-12 * g(j, j))) {
      throw InvalidArgument("training data: input column " + std::to_string(j + 1) +
                            " is linearly dependent on the preceding inputs (relative to z_tilde)");
    }
    l(j, j) = std::sqrt(pivot);
    for (Index i = j + 1; i < n_data; ++i) l(i, j) = (g(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
  }

  Eigen::SelfAdjointEigenSolver<Matrix> eig(g);
  if (eig.info() != Eigen::Success) throw SolverFailure("build_spectrum: eigensolver failed");
  sp.mu = eig.eigenvalues().reverse();
  sp.g = eig.eigenvectors().rowwise().reverse();
  sp.eg = sp.g.colwise().sum().transpose();
  sp.y = data.z * sp.g - data.z_tilde * sp.eg.transpose();
  sp.wz_inv_y = sp.wz_inv_z * sp.g - sp.wz_inv_zt * sp.eg.transpose();
  sp.s = sp.eg - sp.y.transpose() * sp.wz_inv_zt;
  sp.mz_wz_inv_y.resize(wz.dim(), n_data);
  for (Index i = 0; i < n_data; ++i) sp.mz_wz_inv_y.col(i) = wz.mass_solve(sp.wz_inv_y.col(i));
  return sp;
}

Calibration::Calibration(TrainingData data, StatePrior state_prior, OptPriorPtr opt_prior, double alpha_d)
    : data_(std::move(data)), state_prior_(std::move(state_prior)), opt_prior_(std::move(opt_prior)), alpha_d_(alpha_d) {
  require(opt_prior_ != nullptr, "calibration: missing optimization-variable prior");
  require(alpha_d_ > 0.0, "calibration: alpha_d must be positive");
  require_size(data_.d.rows(), state_prior_.dim(), "calibration: discrepancy data rows");
  spectrum_ = build_spectrum(data_, *opt_prior_);

  const Index n_data = data_.count();
  const GSpectrum& sp = spectrum_;
  const Matrix zhat = data_.z.colwise() - data_.z_tilde;
  const Matrix wz_inv_zhat = sp.wz_inv_z.colwise() - sp.wz_inv_zt;

  a_ = Vector::Ones(n_data) - zhat.transpose() * sp.wz_inv_zt;
  // b(i, l) = (z_l - z~)^T W^{-1} Z g_i + (e^T g_i) a_l
  b_ = (wz_inv_zhat.transpose() * data_.z * sp.g).transpose();
  b_ += sp.eg * a_.transpose();

  const SparseMatrix& mu_mass = state_prior_.mass();
  u_.resize(state_prior_.dim(), n_data);
  for (Index l = 0; l < n_data; ++l) u_.col(l) = state_prior_.apply_inv(mu_mass * data_.d.col(l));
  u_shifted_.resize(static_cast<std::size_t>(n_data * n_data));
  for (Index i = 0; i < n_data; ++i) {
    for (Index l = 0; l < n_data; ++l) {
      u_shifted_[static_cast<std::size_t>(i * n_data + l)] =
          state_prior_.apply_shifted_inv(alpha_d_, sp.mu(i), mu_mass * u_.col(l));
    }
  }

  zc_ = zhat.rightCols(n_data - 1);
  wz_inv_zc_ = wz_inv_zhat.rightCols(n_data - 1);
  mz_wz_inv_zc_.resize(opt_dim(), n_data - 1);
  for (Index l = 0; l + 1 < n_data; ++l) mz_wz_inv_zc_.col(l) = opt_prior_->mass_solve(wz_inv_zc_.col(l));
  if (n_data > 1) {
    Matrix kc = zc_.transpose() * wz_inv_zc_;
    kc = 0.5 * (kc + kc.transpose()).eval();
    kc_.compute(kc);
    if (kc_.info() != Eigen::Success) throw InvalidArgument("calibration: Z_c^T W_z^{-1} Z_c is singular");
  }
}

ThetaStructured Calibration::posterior_mean() const {
  ThetaStructured theta;
  theta.origin = ThetaOrigin::Mean;
  theta.state_dim = state_dim();
  theta.opt_dim = opt_dim();
  const Index n_data = data_.count();
  for (Index l = 0; l < n_data; ++l) {
    const Vector w = l == 0 ? Vector(Vector::Zero(opt_dim())) : Vector(mz_wz_inv_zc_.col(l - 1));
    theta.add(a_(l), u_.col(l) / alpha_d_, w);
  }
  for (Index i = 0; i < n_data; ++i) {
    Vector v = Vector::Zero(state_dim());
    for (Index l = 0; l < n_data; ++l) v += b_(i, l) * u_shifted(i, l);
    theta.add(spectrum_.s(i), -v / alpha_d_, spectrum_.mz_wz_inv_y.col(i));
  }
  return theta;
}

ThetaStructured Calibration::sample_theta_hat(Seed seed) const {
  ThetaStructured theta;
  theta.origin = ThetaOrigin::Hat;
  theta.state_dim = state_dim();
  theta.opt_dim = opt_dim();
  const double root_ad = std::sqrt(alpha_d_);
  for (Index i = 0; i < data_.count(); ++i) {
    const Vector uhat = state_prior_.sample_shifted(alpha_d_, spectrum_.mu(i), derive_seed(seed, static_cast<std::uint64_t>(i)));
    theta.add(spectrum_.s(i), (root_ad / std::sqrt(spectrum_.mu(i))) * uhat, spectrum_.mz_wz_inv_y.col(i));
  }
  return theta;
}

double Calibration::gamma(const Vector& z) const {
  require_size(z.size(), opt_dim(), "gamma");
  const Vector d = z - data_.z_tilde;
  if (d.isZero(0.0)) return 0.0;
  Vector wz_inv_d = opt_prior_->apply_inv(d);
  Vector r = d;
  Vector wz_inv_r = wz_inv_d;
  if (zc_.cols() > 0) {
    const Vector c = kc_.solve(wz_inv_zc_.transpose() * d);
    r -= zc_ * c;
    wz_inv_r -= wz_inv_zc_ * c;
  }
  return std::sqrt(std::max(0.0, r.dot(wz_inv_r)));
}

Vector Calibration::sample_delta_breve(const Vector& z, Seed seed) const {
  const double g = gamma(z);
  if (g == 0.0) return Vector::Zero(state_dim());
  return g * state_prior_.sample(seed);
}

Vector Calibration::apply_complement_projector(const Vector& x) const {
  require_size(x.size(), opt_dim(), "complement projector");
  if (zc_.cols() == 0) return x;
  return x - wz_inv_zc_ * kc_.solve(zc_.transpose() * x);
}

Vector Calibration::mean_discrepancy(const Vector& z) const { return posterior_mean().evaluate(z, opt_prior_->mass()); }

ThetaStructured posterior_mean(const Calibration& cal) { return cal.posterior_mean(); }

ThetaStructured sample_theta_hat(const Calibration& cal, Seed seed) { return cal.sample_theta_hat(seed); }

Vector delta_eval(const ThetaStructured& theta, const Vector& z, const SparseMatrix& mz) {
  return theta.evaluate(z, mz);
}

Vector sample_delta_breve(const Calibration& cal, const Vector& z, Seed seed) {
  return cal.sample_delta_breve(z, seed);
}

}  // namespace hdsa
