#pragma once

#include "hdsa/calibration.hpp"
#include "hdsa/optimization.hpp"
#include "hdsa/prior.hpp"
#include "hdsa/random.hpp"

#include <functional>
#include <vector>

namespace hdsa {

using LinearOperator = std::function<Vector(const Vector&)>;

/// Leading generalized eigenpairs of H v = rho W_z v with V^T W_z V = I.
struct HessianProjector {
  Matrix v;
  Vector rho;
  /// Largest relative residual |H v_j - rho_j W_z v_j| / (rho_j |W_z v_j|) over the kept pairs.
  double max_residual = 0.0;
  Index sketch_size = 0;

  Index rank() const { return v.cols(); }
  HessianProjector truncated(Index r) const;
};

struct GenEigOptions {
  /// Negative: smallest r with rho_r / rho_1 <= rank_ratio.
  Index rank = -1;
  Index oversample = 10;
  Seed seed = 7;
  double rank_ratio = 1e-4;
  double residual_tol = 1e-6;
  int max_power_iterations = 8;
};

/// Randomized generalized eigensolver driven by H and W_z^{-1} applies.
HessianProjector gen_eig_H(const LinearOperator& hess_vec, const OptPrior& wz, const GenEigOptions& options = {});

/// sum_j rho_j^{-1} (v_j^T x) v_j.
Vector project_inv_hess(const HessianProjector& proj, const Vector& x);

/// P x = V V^T W_z x.
Vector apply_projector(const HessianProjector& proj, const OptPrior& wz, const Vector& x);

/// -H^{-1} x by conjugate gradients.
Vector unprojected_update(const LinearOperator& hess_vec, const Vector& x, double cg_tol, int max_iter = -1);

/// B = grad_{z,theta} J at z_tilde applied to structured theta, plus the
/// sampler for B theta_breve.
class SensitivityOperator {
 public:
  SensitivityOperator(BPieces pieces, const Calibration& calibration);

  /// B theta for mean, hat, or any other explicit term list.
  Vector apply(const ThetaStructured& theta) const;

  /// sqrt(grad_u J W_u^{-1} grad_u J^T); the factor is z independent.
  double gamma_scale() const { return gamma_scale_; }

  /// Gamma nu with nu ~ N(0, W_z^{-1}).
  Vector sample_breve(Seed seed) const;
  Vector apply_gamma(const Vector& nu) const;

 private:
  BPieces pieces_;
  const Calibration* calibration_;
  SparseMatrix mz_;
  Vector mz_z_tilde_;
  double gamma_scale_ = 0.0;
};

Vector apply_B(const SensitivityOperator& b, const ThetaStructured& theta);

struct EnsembleOptions {
  Index samples = 0;
  Seed seed = 1;
  /// 0: use HDSA_THREADS if set, otherwise one thread.
  unsigned threads = 0;
};

struct PosteriorEnsemble {
  Vector z_tilde;
  Vector mean_update;  ///< z_bar
  Vector b_mean;       ///< B theta_bar
  Matrix samples;      ///< n x s
  std::vector<Seed> seeds;
  Index rank = 0;
};

/// B theta_bar and B (theta_hat^k + theta_breve^k); independent of the projector rank.
struct EnsembleDraws {
  Vector z_tilde;
  Vector b_mean;
  Matrix b_samples;  ///< n x s
  std::vector<Seed> seeds;
};

EnsembleDraws draw_ensemble(const Calibration& calibration, const SensitivityOperator& b,
                            const EnsembleOptions& options);

PosteriorEnsemble project_ensemble(const EnsembleDraws& draws, const HessianProjector& proj);

/// z^k = z~ - P H^{-1} B (theta_bar + theta_hat^k) - P H^{-1} Gamma nu^k; the mean uses theta_bar.
PosteriorEnsemble posterior_solution_samples(const Calibration& calibration, const SensitivityOperator& b,
                                             const HessianProjector& proj, const EnsembleOptions& options);

/// Thread count from HDSA_THREADS, clamped to [1, requested or hardware].
unsigned resolve_threads(unsigned requested);

}  // namespace hdsa
