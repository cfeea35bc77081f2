#include "hdsa/benchmarks.hpp"

#include <Eigen/LU>

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

namespace hdsa {

Vector newton_solve(const std::function<Vector(const Vector&)>& residual,
                    const std::function<SparseMatrix(const Vector&)>& jacobian, Vector u,
                    const NewtonOptions& options) {
  Vector r = residual(u);
  double rn = r.norm();
  for (int it = 0;; ++it) {
    if (!std::isfinite(rn)) throw SolverFailure("Newton: non-finite residual");
    if (rn <= options.tol) return u;
    if (it >= options.max_iter) {
      std::ostringstream msg;
      msg << "Newton: no convergence after " << it << " iterations, |F| = " << rn;
      throw SolverFailure(msg.str());
    }
    SparseMatrix jac = jacobian(u);
    jac.makeCompressed();
    Eigen::SparseLU<SparseMatrix> lu;
    lu.compute(jac);
    if (lu.info() != Eigen::Success) throw SolverFailure("Newton: singular Jacobian");
    const Vector du = lu.solve(Vector(-r));
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      Vector trial = u + t * du;
      Vector rt = residual(trial);
      const double tn = rt.norm();
      if (std::isfinite(tn) && tn <= (1.0 - 1e-4 * t) * rn) {
        u = std::move(trial);
        r = std::move(rt);
        rn = tn;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      std::ostringstream msg;
      msg << "Newton: line search failed at iteration " << it << ", |F| = " << rn;
      throw SolverFailure(msg.str());
    }
  }
}

namespace {

class GalerkinLinearization final : public StateLinearization {
 public:
  GalerkinLinearization(const SparseMatrix& jac_ff, Matrix control_free, SparseMatrix select, Vector u,
                        std::function<Vector(const Vector&, const Vector&, const Vector&)> second)
      : control_free_(std::move(control_free)), select_(std::move(select)), u_(std::move(u)),
        second_(std::move(second)) {
    SparseMatrix jt = jac_ff.transpose();
    jt.makeCompressed();
    SparseMatrix j = jac_ff;
    j.makeCompressed();
    lu_.compute(j);
    lu_t_.compute(jt);
    if (lu_.info() != Eigen::Success || lu_t_.info() != Eigen::Success)
      throw SolverFailure("linearization: singular state Jacobian");
  }

  Vector jacobian_apply(const Vector& dz) const override {
    return select_.transpose() * lu_.solve(Vector(control_free_ * dz));
  }

  Vector jacobian_transpose_apply(const Vector& w) const override {
    return control_free_.transpose() * lu_t_.solve(Vector(select_ * w));
  }

  Vector curvature_apply(const Vector& weight, const Vector& du) const override {
    if (!second_) return Vector::Zero(du.size());
    const Vector lambda = select_.transpose() * lu_t_.solve(Vector(select_ * weight));
    return -second_(u_, lambda, du);
  }

 private:
  Matrix control_free_;
  SparseMatrix select_;
  Vector u_;
  std::function<Vector(const Vector&, const Vector&, const Vector&)> second_;
  Eigen::SparseLU<SparseMatrix> lu_;
  Eigen::SparseLU<SparseMatrix> lu_t_;
};

SparseMatrix selection(Index m, const std::vector<Index>& free) {
  std::vector<Triplet> t;
  if (free.empty()) {
    for (Index i = 0; i < m; ++i) t.emplace_back(i, i, 1.0);
    SparseMatrix s(m, m);
    s.setFromTriplets(t.begin(), t.end());
    return s;
  }
  for (std::size_t k = 0; k < free.size(); ++k) t.emplace_back(static_cast<Index>(k), free[k], 1.0);
  SparseMatrix s(static_cast<Index>(free.size()), m);
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

SparseMatrix block_diag(const SparseMatrix& a, const SparseMatrix& b) {
  std::vector<Triplet> t;
  for (Index k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  for (Index k = 0; k < b.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(b, k); it; ++it) t.emplace_back(a.rows() + it.row(), a.cols() + it.col(), it.value());
  SparseMatrix out(a.rows() + b.rows(), a.cols() + b.cols());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

SparseMatrix sparse_identity(Index n) {
  SparseMatrix out(n, n);
  out.setIdentity();
  return out;
}

}  // namespace

GalerkinModel::GalerkinModel(GalerkinPhysics physics) : physics_(std::move(physics)) {
  const Index m = physics_.linear.rows();
  require(physics_.linear.cols() == m, "GalerkinModel: linear operator must be square");
  require(physics_.control.rows() == m, "GalerkinModel: control operator rows");
  select_ = selection(m, physics_.free);
}

Vector GalerkinModel::to_free(const Vector& x) const { return select_ * x; }
Vector GalerkinModel::to_full(const Vector& x) const { return select_.transpose() * x; }

SparseMatrix GalerkinModel::jacobian_full(const Vector& u) const {
  SparseMatrix jac = physics_.linear;
  if (physics_.nonlinear) {
    std::vector<Triplet> t;
    physics_.nonlinear(u, nullptr, &t);
    SparseMatrix extra(jac.rows(), jac.cols());
    extra.setFromTriplets(t.begin(), t.end());
    jac += extra;
  }
  return jac;
}

Vector GalerkinModel::residual(const Vector& u, const Vector& z) const {
  Vector r = physics_.linear * u - physics_.control * z;
  if (physics_.nonlinear) physics_.nonlinear(u, &r, nullptr);
  return to_free(r);
}

Vector GalerkinModel::solve(const Vector& z, const Vector& guess) const {
  require_size(z.size(), control_dim(), "GalerkinModel::solve");
  Vector start;
  if (guess.size() == state_dim()) {
    start = to_free(guess);
  } else if (physics_.initial_guess) {
    start = to_free(physics_.initial_guess(z));
  } else {
    start = Vector::Zero(select_.rows());
  }
  auto res = [&](const Vector& uf) { return residual(to_full(uf), z); };
  auto jac = [&](const Vector& uf) -> SparseMatrix {
    return SparseMatrix(select_ * jacobian_full(to_full(uf)) * select_.transpose());
  };
  return to_full(newton_solve(res, jac, start, physics_.newton));
}

std::shared_ptr<const StateLinearization> GalerkinModel::linearize(const Vector& u, const Vector& /*z*/) const {
  require_size(u.size(), state_dim(), "GalerkinModel::linearize");
  const SparseMatrix jac_ff = select_ * jacobian_full(u) * select_.transpose();
  return std::make_shared<GalerkinLinearization>(jac_ff, Matrix(select_ * physics_.control), select_, u,
                                                 physics_.second_derivative);
}

ReducedProblem Benchmark::problem(bool high_fidelity) const {
  return ReducedProblem(high_fidelity ? hifi : lofi, objective, control_mass, gauss_newton);
}

EllipticOperator Benchmark::state_operator(double beta_u) const {
  return EllipticOperator{beta_u, state_mass, state_stiffness};
}

OptPriorPtr Benchmark::opt_prior(double alpha_z, double beta_z) const {
  if (parametric()) return make_parametric_prior(alpha_z, control_basis, state_mass);
  return make_function_prior(alpha_z, EllipticOperator{beta_z, control_mass, control_stiffness});
}

Vector Benchmark::discrepancy(const Vector& z) const { return hifi->solve(z, Vector()) - lofi->solve(z, Vector()); }

namespace {

// Four-point Gauss-Legendre rule on [0, 1].
constexpr std::array<double, 4> kGaussPoints{0.5 * (1.0 - 0.8611363115940526), 0.5 * (1.0 - 0.3399810435848563),
                                             0.5 * (1.0 + 0.3399810435848563), 0.5 * (1.0 + 0.8611363115940526)};
constexpr std::array<double, 4> kGaussWeights{0.5 * 0.3478548451374538, 0.5 * 0.6521451548625461,
                                              0.5 * 0.6521451548625461, 0.5 * 0.3478548451374538};

GalerkinPhysics reaction_physics(const Mesh& mesh, const FemMatrices& fem, double kappa,
                                 std::function<double(double)> coef) {
  GalerkinPhysics ph;
  ph.linear = kappa * fem.stiffness;
  ph.control = Matrix(fem.mass);
  auto elements = std::make_shared<const Mesh>(mesh);

  ph.nonlinear = [elements, coef](const Vector& u, Vector* residual, std::vector<Triplet>* jac) {
    const Mesh& msh = *elements;
    for (Index e = 0; e < msh.num_elements(); ++e) {
      const Index a = msh.elements(e, 0);
      const Index b = msh.elements(e, 1);
      const double x0 = msh.nodes(a, 0);
      const double h = msh.nodes(b, 0) - x0;
      double r0 = 0.0, r1 = 0.0, j00 = 0.0, j01 = 0.0, j11 = 0.0;
      for (std::size_t q = 0; q < kGaussPoints.size(); ++q) {
        const double xi = kGaussPoints[q];
        const double phi0 = 1.0 - xi;
        const double phi1 = xi;
        const double w = h * kGaussWeights[q] * coef(x0 + h * xi);
        const double uq = u(a) * phi0 + u(b) * phi1;
        r0 += w * uq * uq * phi0;
        r1 += w * uq * uq * phi1;
        j00 += 2.0 * w * uq * phi0 * phi0;
        j01 += 2.0 * w * uq * phi0 * phi1;
        j11 += 2.0 * w * uq * phi1 * phi1;
      }
      if (residual) {
        (*residual)(a) += r0;
        (*residual)(b) += r1;
      }
      if (jac) {
        jac->emplace_back(a, a, j00);
        jac->emplace_back(a, b, j01);
        jac->emplace_back(b, a, j01);
        jac->emplace_back(b, b, j11);
      }
    }
  };

  ph.second_derivative = [elements, coef](const Vector& /*u*/, const Vector& lambda, const Vector& du) {
    const Mesh& msh = *elements;
    Vector out = Vector::Zero(du.size());
    for (Index e = 0; e < msh.num_elements(); ++e) {
      const Index a = msh.elements(e, 0);
      const Index b = msh.elements(e, 1);
      const double x0 = msh.nodes(a, 0);
      const double h = msh.nodes(b, 0) - x0;
      for (std::size_t q = 0; q < kGaussPoints.size(); ++q) {
        const double xi = kGaussPoints[q];
        const double phi0 = 1.0 - xi;
        const double phi1 = xi;
        const double w = 2.0 * h * kGaussWeights[q] * coef(x0 + h * xi);
        const double lq = lambda(a) * phi0 + lambda(b) * phi1;
        const double dq = du(a) * phi0 + du(b) * phi1;
        out(a) += w * lq * dq * phi0;
        out(b) += w * lq * dq * phi1;
      }
    }
    return out;
  };

  const SparseMatrix mass = fem.mass;
  const double length = mesh.measure();
  ph.initial_guess = [mass, length](const Vector& z) -> Vector {
    const Vector mz = mass * z;
    if (mz.isZero(0.0)) return Vector::Zero(z.size());
    const double avg = mz.sum() / length;
    return Vector::Constant(z.size(), std::sqrt(avg > 0.0 ? avg : 1.0));
  };
  return ph;
}

}  // namespace

Benchmark make_diffusion_reaction(const DiffusionReactionParams& params) {
  require(params.kappa > 0.0, "diffusion-reaction: kappa must be positive");
  require(params.gamma >= 0.0, "diffusion-reaction: gamma must be non-negative");
  const Mesh mesh = build_interval_mesh(0.0, 1.0, params.elements);
  const FemMatrices fem = assemble(mesh);
  const double amp = params.amplitude;

  Benchmark bm;
  bm.name = "diffusion_reaction";
  bm.lofi = std::make_shared<GalerkinModel>(reaction_physics(mesh, fem, params.kappa, [](double) { return 1.0; }));
  bm.hifi = std::make_shared<GalerkinModel>(reaction_physics(
      mesh, fem, params.kappa, [amp](double x) { return 1.0 + amp * std::sin(2.0 * std::numbers::pi * x); }));

  const Index m = mesh.num_nodes();
  Vector target(m);
  for (Index i = 0; i < m; ++i) {
    const double x = mesh.nodes(i, 0);
    target(i) = 20.0 * (x + 0.5) * (1.3 - x);
  }
  bm.objective.q = fem.mass;
  bm.objective.b = fem.mass * target;
  bm.objective.c = 0.5 * target.dot(fem.mass * target);
  bm.objective.gamma = params.gamma;
  bm.objective.r = fem.mass;
  bm.control_mass = fem.mass;
  bm.state_mass = fem.mass;
  bm.state_stiffness = fem.stiffness;
  bm.control_stiffness = fem.stiffness;
  bm.state_coordinates = mesh.nodes;
  bm.control_coordinates = mesh.nodes;
  bm.state_columns = {"x"};
  bm.control_columns = {"x"};
  bm.z0 = Vector::Constant(m, params.z0);
  bm.settings = {{"elements", static_cast<double>(params.elements)},
                 {"kappa", params.kappa},
                 {"gamma", params.gamma},
                 {"amplitude", params.amplitude},
                 {"z0", params.z0}};
  return bm;
}

Matrix integrate_mass_spring(const MassSpringParams& p, const Vector& z, const Eigen::Vector4d& y0, bool coupled) {
  require(p.steps >= 1 && p.horizon > 0.0, "mass-spring: invalid time grid");
  require(p.m1 > 0.0 && p.m2 > 0.0, "mass-spring: masses must be positive");
  require_size(z.size(), p.steps + 1, "mass-spring forcing");
  const double dt = p.horizon / static_cast<double>(p.steps);
  Eigen::Matrix4d a = Eigen::Matrix4d::Zero();
  a(0, 1) = 1.0;
  a(1, 0) = -(p.k1 + p.k2) / p.m1;
  if (coupled) {
    a(1, 2) = p.k2 / p.m1;
    a(2, 3) = 1.0;
    a(3, 0) = p.k2 / p.m2;
    a(3, 2) = -(p.k2 + p.k3) / p.m2;
  }
  const Eigen::Matrix4d id = Eigen::Matrix4d::Identity();
  const Eigen::PartialPivLU<Eigen::Matrix4d> lhs(id - 0.5 * dt * a);
  const Eigen::Matrix4d rhs = id + 0.5 * dt * a;
  Matrix out(p.steps + 1, 4);
  Eigen::Vector4d y = y0;
  if (!coupled) y.tail<2>().setZero();
  out.row(0) = y.transpose();
  for (Index k = 0; k < p.steps; ++k) {
    Eigen::Vector4d f = rhs * y;
    f(1) += 0.5 * dt * (z(k) + z(k + 1)) / p.m1;
    y = lhs.solve(f);
    out.row(k + 1) = y.transpose();
  }
  return out;
}

namespace {

Matrix mass_spring_operator(const MassSpringParams& p, bool coupled) {
  const Index nt = p.steps + 1;
  Matrix s(2 * nt, nt);
  for (Index j = 0; j < nt; ++j) {
    const Matrix traj = integrate_mass_spring(p, Vector::Unit(nt, j), Eigen::Vector4d::Zero(), coupled);
    s.col(j).head(nt) = traj.col(0);
    s.col(j).tail(nt) = traj.col(1);
  }
  return s;
}

}  // namespace

Benchmark make_mass_spring(const MassSpringParams& params) {
  require(params.gamma >= 0.0, "mass-spring: gamma must be non-negative");
  const Mesh mesh = build_interval_mesh(0.0, params.horizon, params.steps);
  const FemMatrices fem = assemble(mesh);
  const Index nt = mesh.num_nodes();

  Benchmark bm;
  bm.name = "mass_spring";
  bm.lofi = std::make_shared<LinearStateModel>(mass_spring_operator(params, false));
  bm.hifi = std::make_shared<LinearStateModel>(mass_spring_operator(params, true));

  Vector target(nt);
  for (Index i = 0; i < nt; ++i) target(i) = 5.0 * mesh.nodes(i, 0) * mesh.nodes(i, 0);
  const SparseMatrix zero(nt, nt);
  bm.objective.q = block_diag(fem.mass, zero);
  bm.objective.b = Vector::Zero(2 * nt);
  bm.objective.b.head(nt) = fem.mass * target;
  bm.objective.c = 0.5 * target.dot(fem.mass * target);
  bm.objective.gamma = params.gamma;
  bm.objective.r = fem.mass;
  bm.control_mass = fem.mass;
  bm.state_mass = block_diag(fem.mass, fem.mass);
  bm.state_stiffness = block_diag(fem.stiffness, fem.stiffness);
  bm.control_stiffness = fem.stiffness;
  bm.state_coordinates.resize(2 * nt, 2);
  for (Index i = 0; i < nt; ++i) {
    bm.state_coordinates.row(i) << mesh.nodes(i, 0), 0.0;
    bm.state_coordinates.row(nt + i) << mesh.nodes(i, 0), 1.0;
  }
  bm.control_coordinates = mesh.nodes;
  bm.state_columns = {"t", "component"};
  bm.control_columns = {"t"};
  bm.z0 = Vector::Zero(nt);
  bm.settings = {{"steps", static_cast<double>(params.steps)}, {"horizon", params.horizon},
                 {"m1", params.m1},          {"m2", params.m2},
                 {"k1", params.k1},          {"k2", params.k2},
                 {"k3", params.k3},          {"gamma", params.gamma}};
  return bm;
}

namespace {

struct AdvectionMesh {
  Mesh mesh;
  std::vector<Eigen::Matrix<double, 3, 2>> grads;
  std::vector<double> area;
};

GalerkinPhysics advection_physics(const std::shared_ptr<const AdvectionMesh>& am, const FemMatrices& fem,
                                  const Matrix& control, const std::vector<Index>& free, double kappa,
                                  bool nonlinear) {
  const Mesh& mesh = am->mesh;
  GalerkinPhysics ph;
  ph.control = control;
  ph.free = free;
  if (!nonlinear) {
    // v = (1,1): A_ij = sum_T |T|/3 (d_x phi_j + d_y phi_j).
    std::vector<Triplet> t;
    for (Index e = 0; e < mesh.num_elements(); ++e) {
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          t.emplace_back(mesh.elements(e, i), mesh.elements(e, j),
                         am->area[e] / 3.0 * (am->grads[e](j, 0) + am->grads[e](j, 1)));
    }
    SparseMatrix adv(mesh.num_nodes(), mesh.num_nodes());
    adv.setFromTriplets(t.begin(), t.end());
    ph.linear = kappa * fem.stiffness + adv;
    return ph;
  }
  ph.linear = kappa * fem.stiffness;
  // v = (u,u): N(u)_i = sum_T s_T (M_T u)_i with s_T = u_x + u_y on T.
  ph.nonlinear = [am](const Vector& u, Vector* residual, std::vector<Triplet>* jac) {
    const Mesh& msh = am->mesh;
    for (Index e = 0; e < msh.num_elements(); ++e) {
      Eigen::Vector3d ul;
      Eigen::Vector3d gsum;
      for (int i = 0; i < 3; ++i) {
        ul(i) = u(msh.elements(e, i));
        gsum(i) = am->grads[e](i, 0) + am->grads[e](i, 1);
      }
      const double s = gsum.dot(ul);
      Eigen::Matrix3d mt = Eigen::Matrix3d::Constant(am->area[e] / 12.0);
      mt.diagonal().array() *= 2.0;
      const Eigen::Vector3d mu = mt * ul;
      for (int i = 0; i < 3; ++i) {
        if (residual) (*residual)(msh.elements(e, i)) += s * mu(i);
        if (jac)
          for (int j = 0; j < 3; ++j)
            jac->emplace_back(msh.elements(e, i), msh.elements(e, j), s * mt(i, j) + mu(i) * gsum(j));
      }
    }
  };
  ph.second_derivative = [am](const Vector& /*u*/, const Vector& lambda, const Vector& du) {
    const Mesh& msh = am->mesh;
    Vector out = Vector::Zero(du.size());
    for (Index e = 0; e < msh.num_elements(); ++e) {
      Eigen::Vector3d ll;
      Eigen::Vector3d dl;
      Eigen::Vector3d gsum;
      for (int i = 0; i < 3; ++i) {
        ll(i) = lambda(msh.elements(e, i));
        dl(i) = du(msh.elements(e, i));
        gsum(i) = am->grads[e](i, 0) + am->grads[e](i, 1);
      }
      Eigen::Matrix3d mt = Eigen::Matrix3d::Constant(am->area[e] / 12.0);
      mt.diagonal().array() *= 2.0;
      const Eigen::Vector3d ml = mt * ll;
      const Eigen::Vector3d local = gsum * ml.dot(dl) + ml * gsum.dot(dl);
      for (int i = 0; i < 3; ++i) out(msh.elements(e, i)) += local(i);
    }
    return out;
  };
  return ph;
}

}  // namespace

Benchmark make_advection_diffusion(const AdvectionDiffusionParams& params) {
  require(params.kappa > 0.0, "advection-diffusion: kappa must be positive");
  require(params.cells >= 2, "advection-diffusion: need at least two cells per axis");
  auto am = std::make_shared<AdvectionMesh>();
  am->mesh = build_rect_mesh({-1.0, 1.0}, {-1.0, 1.0}, params.cells, params.cells);
  const Mesh& mesh = am->mesh;
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    am->grads.push_back(p1_gradients(mesh, e));
    am->area.push_back(mesh.element_measure(e));
  }
  const FemMatrices fem = assemble(mesh);
  const Index m = mesh.num_nodes();

  std::vector<Index> free;
  for (Index i = 0; i < m; ++i)
    if (mesh.boundary[static_cast<std::size_t>(i)] != BoundaryTag::Dirichlet) free.push_back(i);

  Matrix centers(25, 2);
  for (Index iy = 0; iy < 5; ++iy)
    for (Index ix = 0; ix < 5; ++ix) centers.row(iy * 5 + ix) << -0.8 + 0.2 * ix, -0.8 + 0.2 * iy;
  Matrix basis(m, 25);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < 25; ++j) {
      const double dx = mesh.nodes(i, 0) - centers(j, 0);
      const double dy = mesh.nodes(i, 1) - centers(j, 1);
      basis(i, j) = std::exp(-30.0 * (dx * dx + dy * dy));
    }
  }
  const Matrix control = fem.mass * basis;

  auto in_target = [&mesh](Index e) {
    double cx = 0.0, cy = 0.0;
    for (int i = 0; i < 3; ++i) {
      cx += mesh.nodes(mesh.elements(e, i), 0) / 3.0;
      cy += mesh.nodes(mesh.elements(e, i), 1) / 3.0;
    }
    return cx > 0.6 && cx < 0.7 && cy > 0.8 && cy < 0.9;
  };
  const SparseMatrix mass_target = assemble_mass_subset(mesh, in_target);
  require(mass_target.nonZeros() > 0, "advection-diffusion: the mesh has no element inside the target region");

  Benchmark bm;
  bm.name = "advection_diffusion";
  auto lofi = std::make_shared<GalerkinModel>(advection_physics(am, fem, control, free, params.kappa, false));
  bm.lofi = lofi;
  GalerkinPhysics hifi_ph = advection_physics(am, fem, control, free, params.kappa, params.nonlinear_velocity);
  hifi_ph.initial_guess = [lofi](const Vector& z) { return lofi->solve(z, Vector()); };
  bm.hifi = std::make_shared<GalerkinModel>(std::move(hifi_ph));

  const Vector ones = Vector::Ones(m);
  bm.objective.q = mass_target;
  bm.objective.b = params.target * (mass_target * ones);
  bm.objective.c = 0.5 * params.target * params.target * ones.dot(mass_target * ones);
  bm.objective.gamma = params.gamma;
  Matrix gram = basis.transpose() * (fem.mass * basis);
  gram = 0.5 * (gram + gram.transpose()).eval();
  bm.objective.r = gram.sparseView();
  bm.control_mass = sparse_identity(25);
  bm.state_mass = fem.mass;
  bm.state_stiffness = fem.stiffness;
  bm.control_basis = basis;
  bm.gauss_newton = true;
  bm.state_coordinates = mesh.nodes;
  bm.control_coordinates = centers;
  bm.state_columns = {"x", "y"};
  bm.control_columns = {"x_center", "y_center"};
  bm.z0 = Vector::Zero(25);
  bm.settings = {{"cells", static_cast<double>(params.cells)},
                 {"kappa", params.kappa},
                 {"gamma", params.gamma},
                 {"target", params.target},
                 {"nonlinear_velocity", params.nonlinear_velocity ? 1.0 : 0.0}};
  return bm;
}

Vector sample_secondary_input(const OptPrior& wz, const Vector& z_tilde, Seed seed, double relative) {
  require_size(z_tilde.size(), wz.dim(), "sample_secondary_input");
  require(relative > 0.0, "sample_secondary_input: relative magnitude must be positive");
  const Vector p = wz.sample(seed);
  const SparseMatrix& mass = wz.mass();
  const double pn = std::sqrt(p.dot(mass * p));
  const double zn = std::sqrt(z_tilde.dot(mass * z_tilde));
  require(pn > 0.0, "sample_secondary_input: zero prior sample");
  const double scale = relative * (zn > 0.0 ? zn : 1.0) / pn;
  return z_tilde + scale * p;
}

}  // namespace hdsa
