#pragma once

#include "hdsa/calibration.hpp"
#include "hdsa/random.hpp"
#include "hdsa/types.hpp"

#include <string>
#include <vector>

namespace hdsa {

/// Small problem with every operator stored explicitly (p = m(n+1) <= 100).
struct DenseInstance {
  Matrix mu;  ///< M_u
  Matrix mz;  ///< M_z
  Matrix wu;  ///< W_u
  Matrix wz;  ///< W_z
  Matrix z;   ///< n x N, first column z_tilde
  Matrix d;   ///< m x N
  Vector z_tilde;
  double alpha_d = 1.0;

  Index m() const { return mu.rows(); }
  Index n() const { return mz.rows(); }
  Index count() const { return z.cols(); }
  Index p() const { return m() * (n() + 1); }
  void validate() const;
  TrainingData training_data() const { return {z, d, z_tilde}; }
};

/// Random SPD operators and data; z_1 = z_tilde.
DenseInstance random_instance(Seed seed, Index m, Index n, Index count);

/// A_z = (I_m, I_m (x) z^T M_z).
Matrix build_A_at(const DenseInstance& inst, const Vector& z);
Matrix build_A_dense(const DenseInstance& inst);
Matrix build_Wtheta_dense(const DenseInstance& inst);

struct DensePosterior {
  Vector mean;
  Matrix cov;
};

DensePosterior posterior_dense(const DenseInstance& inst);

/// Factors used in the structured derivation of the posterior.
struct DenseFactors {
  Matrix x;             ///< generalized eigenvectors of (W_u, M_u), X^T M_u X = I
  Vector lambda;        ///< matching eigenvalues
  Matrix wz_half;       ///< W_z^{1/2}
  Matrix wz_inv_half;   ///< W_z^{-1/2}
  Matrix l;             ///< W_theta = L L^T
  Matrix l_inv;         ///< closed form of L^{-1}
  Matrix psi;           ///< right singular vectors psi_{i,j}, mN columns
  Vector d_diag;        ///< mu_i / (mu_i + alpha_d lambda_j)
  Matrix q;             ///< orthogonal eigenvectors of C
  Vector upsilon;       ///< eigenvalues of C
  Matrix t;             ///< Sigma = T T^T
  Matrix z_breve;       ///< orthonormal complement of W_z^{-1/2}(z_l - z~), l >= 2
  GSpectrum spectrum;
  /// theta_breve terms (a_k, breve_u omega_k, w_k) for k over the complement basis.
  Vector breve_a;
  Matrix breve_u;
  Matrix breve_w;
};

DenseFactors build_factors(const DenseInstance& inst);

struct IdentityCheck {
  std::string name;
  double error = 0.0;
  double tolerance = 0.0;
  bool pass() const { return error <= tolerance; }
};

/// Checks the factorization identities; failures are reported, not thrown.
std::vector<IdentityCheck> verify_identities(const DenseInstance& inst, double tol = 1e-10);

/// Explicit theta_breve sample built from the orthonormal complement basis; column k of an
/// m x (n - N + 1) standard normal draw feeds term k.
ThetaStructured sample_theta_breve_dense(const DenseInstance& inst, const DenseFactors& f, Seed seed);

/// B = S'^T J_uu A_{z~} + (0, grad_u J^T (x) M_z).
Matrix build_B_dense(const DenseInstance& inst, const Matrix& jac, const Matrix& juu, const Vector& grad_u);

/// max |a - b| / max |b|.
double relative_error(const Matrix& a, const Matrix& b);

}  // namespace hdsa
