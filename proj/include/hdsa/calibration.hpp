#pragma once

#include "hdsa/prior.hpp"
#include "hdsa/random.hpp"
#include "hdsa/types.hpp"

#include <Eigen/Cholesky>

#include <vector>

namespace hdsa {

/// One block (a u ; u (x) w) of a discrepancy parameter vector theta = (theta0 ; theta1),
/// where theta1 holds m consecutive blocks of length n.
struct KroneckerTerm {
  double a = 0.0;
  Vector u;
  Vector w;
};

enum class ThetaOrigin { Mean, Hat, Breve, Other };

/// Discrepancy parameters kept as a list of Kronecker terms; never expanded
/// to length m(n+1) outside of tests.
struct ThetaStructured {
  ThetaOrigin origin = ThetaOrigin::Other;
  Index state_dim = 0;
  Index opt_dim = 0;
  std::vector<KroneckerTerm> terms;

  void add(double a, Vector u, Vector w);

  /// delta(z, theta) = sum (a + w^T M_z z) u.
  Vector evaluate(const Vector& z, const SparseMatrix& mz) const;

  /// Dense theta (tests and small problems only).
  Vector to_dense() const;
};

ThetaStructured operator+(const ThetaStructured& x, const ThetaStructured& y);

/// Delta(z, theta) for a dense theta.
Vector delta_dense(const Vector& theta, const Vector& z, const SparseMatrix& mz);

struct TrainingData {
  Matrix z;  ///< n x N inputs, first column equal to z_tilde
  Matrix d;  ///< m x N discrepancy observations S(z_l) - S~(z_l)
  Vector z_tilde;

  Index count() const { return z.cols(); }
  /// Checks shapes and that z_1 == z_tilde exactly.
  void validate() const;
};

/// G = e e^T + (Z - z~ e^T)^T W_z^{-1} (Z - z~ e^T) and the quantities derived from
/// its eigenpairs, ordered by descending mu.
struct GSpectrum {
  Matrix g_matrix;
  Vector mu;
  Matrix g;            ///< eigenvectors as columns
  Vector eg;           ///< e^T g_i
  Matrix y;            ///< y_i = Z g_i - (e^T g_i) z~
  Vector s;            ///< s_i = e^T g_i - y_i^T W_z^{-1} z~
  Matrix wz_inv_z;     ///< W_z^{-1} z_l
  Vector wz_inv_zt;    ///< W_z^{-1} z~
  Matrix wz_inv_y;     ///< W_z^{-1} y_i
  Matrix mz_wz_inv_y;  ///< M_z^{-1} W_z^{-1} y_i
};

/// Builds the spectrum; rejects data whose augmented columns (1 ; z_l - z~) are
/// linearly dependent, naming the first dependent column.
GSpectrum build_spectrum(const TrainingData& data, const OptPrior& wz);

/// Posterior over the discrepancy parameters given training data and priors.
class Calibration {
 public:
  Calibration(TrainingData data, StatePrior state_prior, OptPriorPtr opt_prior, double alpha_d);

  const TrainingData& data() const { return data_; }
  const GSpectrum& spectrum() const { return spectrum_; }
  const StatePrior& state_prior() const { return state_prior_; }
  const OptPrior& opt_prior() const { return *opt_prior_; }
  double alpha_d() const { return alpha_d_; }
  Index state_dim() const { return state_prior_.dim(); }
  Index opt_dim() const { return opt_prior_->dim(); }

  const Vector& a() const { return a_; }
  /// b(i, l).
  const Matrix& b() const { return b_; }
  /// u_l = W_u^{-1} M_u d_l as columns.
  const Matrix& u() const { return u_; }
  /// u_{i,l} = (alpha_d W_u + mu_i M_u)^{-1} M_u u_l.
  const Vector& u_shifted(Index i, Index l) const { return u_shifted_[static_cast<std::size_t>(i * data_.count() + l)]; }

  ThetaStructured posterior_mean() const;
  ThetaStructured sample_theta_hat(Seed seed) const;

  /// gamma(z)^2 = (z - z~)^T (W^{-1} - W^{-1} Z_c (Z_c^T W^{-1} Z_c)^{-1} Z_c^T W^{-1}) (z - z~),
  /// evaluated as r^T W^{-1} r with r the W^{-1}-weighted residual of z - z~ against Z_c.
  double gamma(const Vector& z) const;
  Vector sample_delta_breve(const Vector& z, Seed seed) const;

  /// x - W^{-1} Z_c (Z_c^T W^{-1} Z_c)^{-1} Z_c^T x; identity when N = 1.
  Vector apply_complement_projector(const Vector& x) const;

  /// Posterior mean discrepancy at z.
  Vector mean_discrepancy(const Vector& z) const;

 private:
  TrainingData data_;
  StatePrior state_prior_;
  OptPriorPtr opt_prior_;
  double alpha_d_;
  GSpectrum spectrum_;
  Vector a_;
  Matrix b_;
  Matrix u_;
  std::vector<Vector> u_shifted_;
  Matrix zc_;
  Matrix wz_inv_zc_;
  Matrix mz_wz_inv_zc_;
  Eigen::LDLT<Matrix> kc_;
};

ThetaStructured posterior_mean(const Calibration& cal);
ThetaStructured sample_theta_hat(const Calibration& cal, Seed seed);
Vector delta_eval(const ThetaStructured& theta, const Vector& z, const SparseMatrix& mz);
Vector sample_delta_breve(const Calibration& cal, const Vector& z, Seed seed);

}  // namespace hdsa
