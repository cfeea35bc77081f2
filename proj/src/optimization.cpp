#include "hdsa/optimization.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace hdsa {

Vector StateLinearization::curvature_apply(const Vector& /*weight*/, const Vector& du) const {
  return Vector::Zero(du.size());
}

namespace {

class LinearLinearization final : public StateLinearization {
 public:
  explicit LinearLinearization(std::shared_ptr<const Matrix> s) : s_(std::move(s)) {}
  Vector jacobian_apply(const Vector& dz) const override { return *s_ * dz; }
  Vector jacobian_transpose_apply(const Vector& w) const override { return s_->transpose() * w; }

 private:
  std::shared_ptr<const Matrix> s_;
};

}  // namespace

LinearStateModel::LinearStateModel(Matrix s, Vector offset)
    : s_(std::make_shared<const Matrix>(std::move(s))), offset_(std::move(offset)) {
  if (offset_.size() == 0) offset_ = Vector::Zero(s_->rows());
  require_size(offset_.size(), s_->rows(), "LinearStateModel offset");
}

Vector LinearStateModel::solve(const Vector& z, const Vector& /*guess*/) const {
  require_size(z.size(), control_dim(), "LinearStateModel::solve");
  return *s_ * z + offset_;
}

std::shared_ptr<const StateLinearization> LinearStateModel::linearize(const Vector& /*u*/,
                                                                      const Vector& /*z*/) const {
  return std::make_shared<LinearLinearization>(s_);
}

double TrackingObjective::value(const Vector& u, const Vector& z) const {
  double out = 0.5 * u.dot(q * u) - b.dot(u) + c;
  if (gamma != 0.0) out += 0.5 * gamma * z.dot(r * z);
  return out;
}

ReducedProblem::ReducedProblem(std::shared_ptr<const StateModel> model, TrackingObjective objective,
                               SparseMatrix control_mass, bool gauss_newton)
    : model_(std::move(model)),
      objective_(std::move(objective)),
      mass_(std::move(control_mass)),
      mass_factor_(std::make_shared<Eigen::SimplicialLLT<SparseMatrix>>()),
      gauss_newton_(gauss_newton) {
  require(model_ != nullptr, "ReducedProblem: null state model");
  const Index m = model_->state_dim();
  const Index n = model_->control_dim();
  require(objective_.q.rows() == m && objective_.q.cols() == m, "ReducedProblem: Q does not match the state space");
  require_size(objective_.b.size(), m, "ReducedProblem: linear misfit term");
  require(objective_.r.rows() == n && objective_.r.cols() == n,
          "ReducedProblem: R does not match the control space");
  require(mass_.rows() == n && mass_.cols() == n, "ReducedProblem: M_z does not match the control space");
  mass_factor_->compute(mass_);
  if (mass_factor_->info() != Eigen::Success) throw InvalidArgument("ReducedProblem: M_z is not SPD");
}

OptimizationPoint ReducedProblem::evaluate(const Vector& z, const Vector& guess) const {
  require_size(z.size(), control_dim(), "ReducedProblem::evaluate");
  OptimizationPoint p;
  p.z = z;
  p.u = model_->solve(z, guess);
  if (!p.u.allFinite()) throw SolverFailure("forward solve produced non-finite state");
  p.value = objective_.value(p.u, z);
  p.linearization = model_->linearize(p.u, z);
  p.grad_u = objective_.grad_u(p.u);
  p.gradient = p.linearization->jacobian_transpose_apply(p.grad_u) + objective_.gamma * (objective_.r * z);
  return p;
}

double ReducedProblem::value(const Vector& z, const Vector& guess) const {
  const Vector u = model_->solve(z, guess);
  return objective_.value(u, z);
}

Vector ReducedProblem::hess_vec(const OptimizationPoint& point, const Vector& w) const {
  require_size(w.size(), control_dim(), "hess_vec");
  const Vector du = point.linearization->jacobian_apply(w);
  Vector t = objective_.hess_uu(du);
  if (!gauss_newton_) t += point.linearization->curvature_apply(point.grad_u, du);
  return point.linearization->jacobian_transpose_apply(t) + objective_.gamma * (objective_.r * w);
}

BPieces ReducedProblem::b_pieces(const OptimizationPoint& point) const {
  BPieces out;
  auto lin = point.linearization;
  out.jacobian_transpose = [lin](const Vector& w) { return lin->jacobian_transpose_apply(w); };
  out.grad_u = point.grad_u;
  auto q = std::make_shared<const SparseMatrix>(objective_.q);
  out.hess_uu = [q](const Vector& w) -> Vector { return *q * w; };
  return out;
}

double ReducedProblem::dual_norm(const Vector& g) const { return std::sqrt(std::max(0.0, g.dot(mass_solve(g)))); }

Vector ReducedProblem::mass_solve(const Vector& g) const {
  require_size(g.size(), control_dim(), "mass solve");
  return mass_factor_->solve(g);
}

double ReducedProblem::mass_norm(const Vector& z) const { return std::sqrt(std::max(0.0, z.dot(mass_ * z))); }

Vector gradient(const ReducedProblem& problem, const Vector& z) { return problem.evaluate(z).gradient; }

Vector hess_vec(const ReducedProblem& problem, const Vector& z, const Vector& w) {
  return problem.hess_vec(problem.evaluate(z), w);
}

BPieces apply_B_pieces(const ReducedProblem& problem, const Vector& z_tilde) {
  return problem.b_pieces(problem.evaluate(z_tilde));
}

namespace {

struct SteihaugStep {
  Vector p;
  Vector hp;
  int iterations = 0;
  bool hit_boundary = false;
};

// Largest tau >= 0 with |p + tau d|_M = radius.
double to_boundary(const ReducedProblem& prob, const Vector& p, const Vector& d, double radius) {
  const Vector md = prob.control_mass() * d;
  const double dd = d.dot(md);
  const double pd = p.dot(md);
  const double pp = p.dot(prob.control_mass() * p);
  const double disc = std::max(0.0, pd * pd + dd * (radius * radius - pp));
  return (-pd + std::sqrt(disc)) / dd;
}

SteihaugStep steihaug(const ReducedProblem& prob, const OptimizationPoint& point, double radius, double rel_tol,
                      int max_cg) {
  const Index n = prob.control_dim();
  SteihaugStep s;
  s.p = Vector::Zero(n);
  s.hp = Vector::Zero(n);
  Vector r = -point.gradient;
  Vector y = prob.mass_solve(r);
  Vector d = y;
  double ry = r.dot(y);
  const double target = rel_tol * std::sqrt(std::max(0.0, ry));
  if (ry <= 0.0) return s;
  for (int k = 0; k < max_cg; ++k) {
    ++s.iterations;
    const Vector hd = prob.hess_vec(point, d);
    const double curv = d.dot(hd);
    if (curv <= 0.0) {
      const double tau = to_boundary(prob, s.p, d, radius);
      s.p += tau * d;
      s.hp += tau * hd;
      s.hit_boundary = true;
      return s;
    }
    const double alpha = ry / curv;
    const Vector next = s.p + alpha * d;
    if (prob.mass_norm(next) >= radius) {
      const double tau = to_boundary(prob, s.p, d, radius);
      s.p += tau * d;
      s.hp += tau * hd;
      s.hit_boundary = true;
      return s;
    }
    s.p = next;
    s.hp += alpha * hd;
    r -= alpha * hd;
    y = prob.mass_solve(r);
    const double ry_new = r.dot(y);
    if (std::sqrt(std::max(0.0, ry_new)) <= target) return s;
    d = y + (ry_new / ry) * d;
    ry = ry_new;
  }
  return s;
}

void log_line(std::ostream* os, int iter, double objective, double gnorm, double radius) {
  if (!os) return;
  *os << std::setprecision(17) << iter << ' ' << objective << ' ' << gnorm << ' ' << radius << '\n';
}

}  // namespace

OptimizationResult solve_lofi(const ReducedProblem& problem, const Vector& z0, const TrustRegionOptions& options) {
  require_size(z0.size(), problem.control_dim(), "solve_lofi initial guess");
  require(z0.allFinite(), "solve_lofi: initial guess is not finite");
  require(options.initial_radius > 0.0 && options.shrink > 0.0 && options.shrink < 1.0 && options.expand > 1.0,
          "solve_lofi: invalid trust-region parameters");
  if (options.log) *options.log << "# iter objective gradnorm radius\n";

  OptimizationResult res;
  OptimizationPoint point = problem.evaluate(z0);
  double gnorm = problem.dual_norm(point.gradient);
  res.initial_grad_norm = gnorm;
  const double gtol = std::max(options.gtol_abs, options.gtol_rel * gnorm);
  double radius = options.initial_radius;
  log_line(options.log, 0, point.value, gnorm, radius);

  int consecutive_failures = 0;
  int iter = 0;
  while (gnorm > gtol && iter < options.max_iter) {
    ++iter;
    const double forcing = options.cg_tol >= 0.0 ? options.cg_tol : std::min(options.cg_tol_max, std::sqrt(gnorm));
    const SteihaugStep step = steihaug(problem, point, radius, forcing, options.max_cg);
    const double predicted = -(point.gradient.dot(step.p) + 0.5 * step.p.dot(step.hp));
    const double step_norm = problem.mass_norm(step.p);

    TrustRegionRecord rec;
    rec.iteration = iter;
    rec.cg_iterations = step.iterations;

    bool accepted = false;
    OptimizationPoint trial;
    double rho = -1.0;
    if (predicted > 0.0) {
      try {
        trial = problem.evaluate(point.z + step.p, point.u);
        const double actual = point.value - trial.value;
        const double noise = 1e-13 * std::max(1.0, std::abs(point.value));
        if (predicted < noise) {
          // Reductions at roundoff level: judge by the gradient instead.
          accepted = actual > -noise && problem.dual_norm(trial.gradient) < gnorm;
          rho = accepted ? 1.0 : -1.0;
        } else {
          rho = actual / predicted;
          accepted = rho > options.eta && actual > 0.0;
        }
      } catch (const SolverFailure&) {
        accepted = false;
      }
    }
    if (accepted) {
      point = std::move(trial);
      gnorm = problem.dual_norm(point.gradient);
      consecutive_failures = 0;
    } else if (++consecutive_failures > 60) {
      throw SolverFailure("trust region collapsed after repeated step rejections");
    }
    if (rho < 0.25) {
      radius = options.shrink * std::min(radius, step_norm > 0.0 ? step_norm : radius);
    } else if (rho > 0.75 && step.hit_boundary) {
      radius *= options.expand;
    }
    rec.accepted = accepted;
    rec.objective = point.value;
    rec.grad_norm = gnorm;
    rec.radius = radius;
    res.trace.push_back(rec);
    log_line(options.log, iter, point.value, gnorm, radius);
  }

  res.z_tilde = point.z;
  res.state = point.u;
  res.objective = point.value;
  res.grad_norm = gnorm;
  res.iterations = iter;
  res.converged = gnorm <= gtol;
  return res;
}

}  // namespace hdsa
