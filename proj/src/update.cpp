#include "hdsa/update.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <string>
#include <thread>

namespace hdsa {

HessianProjector HessianProjector::truncated(Index r) const {
  require(r >= 0 && r <= rank(), "HessianProjector: truncation rank out of range");
  HessianProjector out;
  out.v = v.leftCols(r);
  out.rho = rho.head(r);
  out.max_residual = max_residual;
  out.sketch_size = sketch_size;
  return out;
}

namespace {

Matrix apply_columns(const LinearOperator& op, const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j) out.col(j) = op(x.col(j));
  return out;
}

struct RitzResult {
  Matrix v;
  Vector rho;
  Vector residual;
  Matrix hq;
};

RitzResult rayleigh_ritz(const LinearOperator& hess_vec, const OptPrior& wz, const Matrix& y) {
  const Index n = y.rows();
  const Index k = y.cols();
  Eigen::HouseholderQR<Matrix> qr(y);
  const Matrix q = qr.householderQ() * Matrix::Identity(n, k);
  RitzResult out;
  out.hq = apply_columns(hess_vec, q);
  Matrix wq(n, k);
  for (Index j = 0; j < k; ++j) wq.col(j) = wz.apply(q.col(j));
  Matrix a = q.transpose() * out.hq;
  a = 0.5 * (a + a.transpose()).eval();
  Matrix b = q.transpose() * wq;
  b = 0.5 * (b + b.transpose()).eval();
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> eig(a, b);
  if (eig.info() != Eigen::Success) throw SolverFailure("gen_eig_H: Rayleigh-Ritz step failed");
  const Matrix u = eig.eigenvectors().rowwise().reverse();
  out.rho = eig.eigenvalues().reverse();
  out.v = q * u;
  const Matrix hv = out.hq * u;
  const Matrix wv = wq * u;
  out.residual.resize(k);
  for (Index j = 0; j < k; ++j) {
    const double scale = std::abs(out.rho(j)) * wv.col(j).norm();
    out.residual(j) = scale > 0.0 ? (hv.col(j) - out.rho(j) * wv.col(j)).norm() / scale
                                  : std::numeric_limits<double>::infinity();
  }
  return out;
}

Index auto_rank(const Vector& rho, double ratio) {
  for (Index j = 0; j < rho.size(); ++j)
    if (rho(j) <= ratio * rho(0)) return j + 1;
  return -1;
}

}  // namespace

HessianProjector gen_eig_H(const LinearOperator& hess_vec, const OptPrior& wz, const GenEigOptions& options) {
  const Index n = wz.dim();
  require(options.rank <= n, "gen_eig_H: rank exceeds the optimization dimension");
  require(options.rank != 0, "gen_eig_H: rank must be positive");
  require(options.oversample >= 0, "gen_eig_H: oversample must be non-negative");

  Index k = options.rank > 0 ? std::min(options.rank + options.oversample, n)
                             : std::min<Index>(std::max<Index>(20, 2 * options.oversample), n);
  for (;;) {
    const Matrix omega = standard_normal(n, k, derive_seed(options.seed, static_cast<std::uint64_t>(k)));
    Matrix y = apply_columns(hess_vec, omega);
    for (Index j = 0; j < k; ++j) y.col(j) = wz.apply_inv(Vector(y.col(j)));
    RitzResult rr = rayleigh_ritz(hess_vec, wz, y);

    Index r = options.rank;
    if (r < 0) {
      r = auto_rank(rr.rho, options.rank_ratio);
      if (r < 0 || r + options.oversample > k) {
        if (k < n) {
          k = std::min(2 * k, n);
          continue;
        }
        if (r < 0) r = n;
      }
    }
    r = std::min(r, k);

    for (int it = 0; it < options.max_power_iterations && k < n; ++it) {
      if (rr.residual.head(r).maxCoeff() <= options.residual_tol) break;
      // Subspace iteration reuses H Q from the previous Rayleigh-Ritz step.
      Matrix next = rr.hq;
      for (Index j = 0; j < k; ++j) next.col(j) = wz.apply_inv(Vector(next.col(j)));
      rr = rayleigh_ritz(hess_vec, wz, next);
    }
    if (rr.rho(0) <= 0.0 || rr.rho.head(r).minCoeff() <= 0.0) {
      throw SolverFailure("gen_eig_H: non-positive Ritz value; H is not positive definite on the sketch");
    }
    HessianProjector out;
    out.v = rr.v.leftCols(r);
    out.rho = rr.rho.head(r);
    out.max_residual = rr.residual.head(r).maxCoeff();
    out.sketch_size = k;
    return out;
  }
}

Vector project_inv_hess(const HessianProjector& proj, const Vector& x) {
  require_size(x.size(), proj.v.rows(), "project_inv_hess");
  if (proj.rank() == 0) return Vector::Zero(x.size());
  const Vector c = proj.v.transpose() * x;
  return proj.v * c.cwiseQuotient(proj.rho);
}

Vector apply_projector(const HessianProjector& proj, const OptPrior& wz, const Vector& x) {
  if (proj.rank() == 0) return Vector::Zero(x.size());
  return proj.v * (proj.v.transpose() * wz.apply(x));
}

Vector unprojected_update(const LinearOperator& hess_vec, const Vector& x, double cg_tol, int max_iter) {
  require(cg_tol > 0.0, "unprojected_update: cg_tol must be positive");
  const Index n = x.size();
  Vector y = Vector::Zero(n);
  const double xnorm = x.norm();
  if (xnorm == 0.0) return y;
  if (max_iter < 0) max_iter = static_cast<int>(std::max<Index>(50, 10 * n));
  Vector r = x;
  Vector p = r;
  double rr = r.squaredNorm();
  for (int k = 0; k < max_iter; ++k) {
    const Vector hp = hess_vec(p);
    const double curv = p.dot(hp);
    if (curv <= 0.0) throw SolverFailure("unprojected_update: H is not positive definite");
    const double alpha = rr / curv;
    y += alpha * p;
    r -= alpha * hp;
    const double rr_new = r.squaredNorm();
    if (std::sqrt(rr_new) <= cg_tol * xnorm) return -y;
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  throw SolverFailure("unprojected_update: conjugate gradients did not converge");
}

SensitivityOperator::SensitivityOperator(BPieces pieces, const Calibration& calibration)
    : pieces_(std::move(pieces)), calibration_(&calibration), mz_(calibration.opt_prior().mass()) {
  require(pieces_.jacobian_transpose && pieces_.hess_uu, "SensitivityOperator: missing adjoint pieces");
  require_size(pieces_.grad_u.size(), calibration.state_dim(), "SensitivityOperator: grad_u J");
  mz_z_tilde_ = mz_ * calibration.data().z_tilde;
  const double var = pieces_.grad_u.dot(calibration.state_prior().apply_inv(pieces_.grad_u));
  gamma_scale_ = std::sqrt(std::max(0.0, var));
}

Vector SensitivityOperator::apply(const ThetaStructured& theta) const {
  const Index m = calibration_->state_dim();
  const Index n = calibration_->opt_dim();
  Vector state = Vector::Zero(m);
  Vector out = Vector::Zero(n);
  bool any_state = false;
  for (const auto& t : theta.terms) {
    const double coef = t.a + t.w.dot(mz_z_tilde_);
    if (coef != 0.0) {
      state += coef * t.u;
      any_state = true;
    }
    const double gu = pieces_.grad_u.dot(t.u);
    if (gu != 0.0) out += gu * (mz_ * t.w);
  }
  if (any_state) out += pieces_.jacobian_transpose(pieces_.hess_uu(state));
  return out;
}

Vector SensitivityOperator::apply_gamma(const Vector& nu) const {
  return gamma_scale_ * calibration_->apply_complement_projector(nu);
}

Vector SensitivityOperator::sample_breve(Seed seed) const {
  if (gamma_scale_ == 0.0) return Vector::Zero(calibration_->opt_dim());
  return apply_gamma(calibration_->opt_prior().sample(seed));
}

Vector apply_B(const SensitivityOperator& b, const ThetaStructured& theta) { return b.apply(theta); }

unsigned resolve_threads(unsigned requested) {
  unsigned cap = requested;
  if (cap == 0) {
    cap = 1;
    if (const char* env = std::getenv("HDSA_THREADS")) {
      try {
        const long v = std::stol(env);
        if (v > 0) cap = static_cast<unsigned>(v);
      } catch (const std::exception&) {
        cap = 1;
      }
    }
  }
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  return std::max(1u, std::min(cap, hw));
}

EnsembleDraws draw_ensemble(const Calibration& calibration, const SensitivityOperator& b,
                            const EnsembleOptions& options) {
  require(options.samples >= 0, "posterior_solution_samples: negative sample count");
  EnsembleDraws draws;
  draws.z_tilde = calibration.data().z_tilde;
  draws.b_mean = b.apply(calibration.posterior_mean());
  draws.b_samples.resize(calibration.opt_dim(), options.samples);
  draws.seeds.resize(static_cast<std::size_t>(options.samples));
  for (Index k = 0; k < options.samples; ++k)
    draws.seeds[static_cast<std::size_t>(k)] = derive_seed(options.seed, static_cast<std::uint64_t>(k));

  auto draw = [&](Index k) {
    const Seed sk = draws.seeds[static_cast<std::size_t>(k)];
    const Vector bhat = b.apply(calibration.sample_theta_hat(derive_seed(sk, 0)));
    const Vector bbreve = b.sample_breve(derive_seed(sk, 1));
    draws.b_samples.col(k) = bhat + bbreve;
  };

  const unsigned threads = resolve_threads(options.threads);
  if (threads <= 1 || options.samples < 2) {
    for (Index k = 0; k < options.samples; ++k) draw(k);
  } else {
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_lock;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (Index k = t; k < options.samples; k += threads) draw(k);
        } catch (...) {
          const std::lock_guard<std::mutex> guard(failure_lock);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }
  return draws;
}

PosteriorEnsemble project_ensemble(const EnsembleDraws& draws, const HessianProjector& proj) {
  PosteriorEnsemble ens;
  ens.z_tilde = draws.z_tilde;
  ens.rank = proj.rank();
  ens.b_mean = draws.b_mean;
  ens.mean_update = ens.z_tilde - project_inv_hess(proj, ens.b_mean);
  ens.seeds = draws.seeds;
  ens.samples.resize(draws.b_samples.rows(), draws.b_samples.cols());
  for (Index k = 0; k < draws.b_samples.cols(); ++k)
    ens.samples.col(k) = ens.mean_update - project_inv_hess(proj, Vector(draws.b_samples.col(k)));
  return ens;
}

PosteriorEnsemble posterior_solution_samples(const Calibration& calibration, const SensitivityOperator& b,
                                             const HessianProjector& proj, const EnsembleOptions& options) {
  return project_ensemble(draw_ensemble(calibration, b, options), proj);
}

}  // namespace hdsa
