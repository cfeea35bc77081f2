#include "hdsa/benchmarks.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace hdsa;

namespace {

double lofi_optimum(const Benchmark& bm) { return solve_lofi(bm.problem(), bm.z0).objective; }

}  // namespace

TEST(Newton, SolvesComponentwiseQuadratic) {
  const Vector target = Vector::LinSpaced(5, 1.0, 5.0);
  const auto residual = [&](const Vector& u) { return Vector(u.array().square() - target.array()); };
  const auto jacobian = [](const Vector& u) {
    SparseMatrix j(u.size(), u.size());
    for (Index i = 0; i < u.size(); ++i) j.insert(i, i) = 2.0 * u(i);
    return j;
  };
  const Vector u = newton_solve(residual, jacobian, Vector::Constant(5, 3.0));
  EXPECT_LT((u - target.cwiseSqrt()).norm(), 1e-12);
}

TEST(Newton, ReportsSingularJacobian) {
  const auto residual = [](const Vector& u) { return Vector(u.array().square() + 1.0); };
  const auto jacobian = [](const Vector& u) {
    SparseMatrix j(u.size(), u.size());
    for (Index i = 0; i < u.size(); ++i) j.insert(i, i) = 2.0 * u(i);
    return j;
  };
  EXPECT_THROW(newton_solve(residual, jacobian, Vector::Zero(2)), SolverFailure);
}

TEST(MassSpring, CrankNicolsonIsSecondOrder) {
  // x'' = -2x + 1 from rest: x = (1 - cos(sqrt(2) t)) / 2.
  double previous = 0.0;
  for (Index steps : {50, 100, 200, 400}) {
    MassSpringParams p;
    p.steps = steps;
    const Matrix y = integrate_mass_spring(p, Vector::Ones(steps + 1), Eigen::Vector4d::Zero(), false);
    double err = 0.0;
    for (Index i = 0; i <= steps; ++i) {
      const double t = p.horizon * static_cast<double>(i) / static_cast<double>(steps);
      err = std::max(err, std::abs(y(i, 0) - 0.5 * (1.0 - std::cos(std::sqrt(2.0) * t))));
    }
    if (previous > 0.0) EXPECT_GE(previous / err, 3.8) << steps;
    previous = err;
  }
  EXPECT_LT(previous, 1e-3);
}

TEST(MassSpring, DecoupledSpringRemovesDiscrepancy) {
  MassSpringParams p;
  p.steps = 80;
  p.k2 = 0.0;
  const Benchmark bm = make_mass_spring(p);
  const Vector z = standard_normal(81, 4);
  EXPECT_LT(bm.discrepancy(z).norm(), 1e-12 * bm.lofi->solve(z, Vector()).norm());
  const Benchmark coupled = make_mass_spring(MassSpringParams{80});
  EXPECT_GT(coupled.discrepancy(z).norm(), 1e-3 * coupled.lofi->solve(z, Vector()).norm());
}

TEST(MassSpring, StateStacksPositionAndVelocity) {
  MassSpringParams p;
  p.steps = 40;
  const Benchmark bm = make_mass_spring(p);
  const Vector z = standard_normal(41, 5);
  const Vector u = bm.hifi->solve(z, Vector());
  const Matrix y = integrate_mass_spring(p, z, Eigen::Vector4d::Zero(), true);
  EXPECT_LT((u.head(41) - y.col(0)).norm(), 1e-12 * y.col(0).norm());
  EXPECT_LT((u.tail(41) - y.col(1)).norm(), 1e-12 * y.col(1).norm());
}

TEST(DiffusionReaction, HighFidelityStateSolvesResidual) {
  DiffusionReactionParams p;
  p.elements = 50;
  const Benchmark bm = make_diffusion_reaction(p);
  const auto& model = dynamic_cast<const GalerkinModel&>(*bm.hifi);
  const Vector z = bm.z0 + standard_normal(51, 6);
  const Vector u = model.solve(z, Vector());
  EXPECT_LT(model.residual(u, z).norm(), 1e-9 * z.norm());
  EXPECT_GT(bm.discrepancy(z).norm(), 1e-3 * u.norm());
}

TEST(DiffusionReaction, ConstantReactionRemovesDiscrepancy) {
  DiffusionReactionParams p;
  p.elements = 50;
  p.amplitude = 0.0;
  const Benchmark bm = make_diffusion_reaction(p);
  EXPECT_LT(bm.discrepancy(bm.z0).norm(), 1e-12 * bm.lofi->solve(bm.z0, Vector()).norm());
}

TEST(AdvectionDiffusion, FrozenVelocityRemovesDiscrepancy) {
  AdvectionDiffusionParams p;
  p.cells = 20;
  p.nonlinear_velocity = false;
  const Benchmark bm = make_advection_diffusion(p);
  const Vector z = standard_normal(25, 7).cwiseAbs();
  EXPECT_LT(bm.discrepancy(z).norm(), 1e-11 * bm.lofi->solve(z, Vector()).norm());
}

TEST(AdvectionDiffusion, InflowBoundaryStaysAtZero) {
  AdvectionDiffusionParams p;
  p.cells = 20;
  const Benchmark bm = make_advection_diffusion(p);
  const Vector u = bm.hifi->solve(Vector::Ones(25), Vector());
  for (Index i = 0; i < u.size(); ++i)
    if (bm.state_coordinates(i, 0) == -1.0 || bm.state_coordinates(i, 1) == -1.0) EXPECT_EQ(u(i), 0.0);
  EXPECT_GT(u.maxCoeff(), 0.0);
  EXPECT_GT(bm.discrepancy(Vector::Ones(25)).norm(), 1e-3 * u.norm());
}

TEST(Benchmarks, DefaultResolutionsAreConverged) {
  DiffusionReactionParams dr_fine;
  dr_fine.elements = 200;
  EXPECT_LT(std::abs(lofi_optimum(make_diffusion_reaction()) / lofi_optimum(make_diffusion_reaction(dr_fine)) - 1.0),
            0.01);
  MassSpringParams ms_fine;
  ms_fine.steps = 400;
  EXPECT_LT(std::abs(lofi_optimum(make_mass_spring()) / lofi_optimum(make_mass_spring(ms_fine)) - 1.0), 0.01);
  AdvectionDiffusionParams ad_fine;
  ad_fine.cells = 80;
  EXPECT_LT(std::abs(lofi_optimum(make_advection_diffusion()) / lofi_optimum(make_advection_diffusion(ad_fine)) - 1.0),
            0.01);
}

TEST(Benchmarks, SecondaryInputHasRequestedRelativeSize) {
  const Benchmark bm = make_diffusion_reaction();
  const OptPriorPtr wz = bm.opt_prior(1e-10, 3e-2);
  const Vector zt = bm.z0;
  const Vector z2 = sample_secondary_input(*wz, zt, 3, 0.2);
  const Vector d = z2 - zt;
  EXPECT_NEAR(std::sqrt(d.dot(bm.control_mass * d)), 0.2 * std::sqrt(zt.dot(bm.control_mass * zt)), 1e-10);
  EXPECT_EQ(z2, sample_secondary_input(*wz, zt, 3, 0.2));
}
