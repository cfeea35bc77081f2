#include "oracle_support.hpp"

#include <gtest/gtest.h>

using namespace hdsa;

TEST(DenseOracle, FactorizationIdentitiesHoldOnRandomInstances) {
  for (Index k = 0; k < 20; ++k) {
    const Index m = 1 + k % 8, n = 1 + (3 * k) % 10, count = 1 + k % std::min<Index>(3, n + 1);
    const DenseInstance inst = random_instance(derive_seed(11, static_cast<std::uint64_t>(k)), m, n, count);
    for (const IdentityCheck& c : verify_identities(inst, 1e-10))
      EXPECT_TRUE(c.pass()) << c.name << " error " << c.error << " (m=" << m << ", n=" << n << ", N=" << count << ")";
  }
}

TEST(DenseOracle, ComplementBasisIsOrthonormalAndOrthogonalToData) {
  const DenseInstance inst = random_instance(5, 3, 6, 3);
  const DenseFactors f = build_factors(inst);
  const Index nb = f.z_breve.cols();
  ASSERT_EQ(nb, inst.n() - inst.count() + 1);
  EXPECT_LT((f.z_breve.transpose() * f.z_breve - Matrix::Identity(nb, nb)).cwiseAbs().maxCoeff(), 1e-12);
  for (Index l = 1; l < inst.count(); ++l) {
    const Vector dz = f.wz_inv_half * (inst.z.col(l) - inst.z_tilde);
    EXPECT_LT((f.z_breve.transpose() * dz).norm(), 1e-12 * dz.norm());
  }
}

TEST(DenseOracle, UninformedSamplesVanishAtTrainingInputs) {
  const DenseInstance inst = random_instance(6, 4, 5, 2);
  const DenseFactors f = build_factors(inst);
  const SparseMatrix mz = inst.mz.sparseView();
  const ThetaStructured breve = sample_theta_breve_dense(inst, f, 3);
  for (Index l = 0; l < inst.count(); ++l) EXPECT_LT(breve.evaluate(inst.z.col(l), mz).norm(), 1e-12);
  EXPECT_GT(breve.evaluate(inst.z_tilde + Vector::Ones(5), mz).norm(), 1e-6);
}

TEST(DenseOracle, StructuredSampleCovarianceMatchesPosterior) {
  const DenseInstance inst = random_instance(8, 3, 3, 2);
  const Calibration cal(inst.training_data(), state_prior_from_dense(inst.wu, inst.mu),
                        make_dense_prior(inst.wz, inst.mz), inst.alpha_d);
  const DenseFactors f = build_factors(inst);
  const Index p = inst.p();
  const Index samples = 30000;
  Matrix acc = Matrix::Zero(p, p);
  for (Index k = 0; k < samples; ++k) {
    const Seed s = derive_seed(1, static_cast<std::uint64_t>(k));
    const Vector x = cal.sample_theta_hat(derive_seed(s, 0)).to_dense() +
                     sample_theta_breve_dense(inst, f, derive_seed(s, 1)).to_dense();
    acc += x * x.transpose();
  }
  EXPECT_LT(relative_error(acc / static_cast<double>(samples), posterior_dense(inst).cov), 0.05);
}

TEST(DenseOracle, SensitivityMatrixMatchesStructuredApply) {
  const oracle::LinearProblem lp = oracle::linear_problem(9, 4, 5, 2);
  const ReducedProblem problem = lp.problem();
  const Calibration cal = lp.calibration();
  const SensitivityOperator b(problem.b_pieces(problem.evaluate(lp.inst.z_tilde)), cal);
  const Matrix dense = lp.b_dense();
  for (Seed s = 0; s < 4; ++s) {
    const ThetaStructured theta = cal.sample_theta_hat(s) + cal.posterior_mean();
    EXPECT_LT(relative_error(b.apply(theta), dense * theta.to_dense()), 1e-12);
  }
}

TEST(DenseOracle, RejectsOversizedInstances) {
  EXPECT_THROW(random_instance(1, 10, 10, 2), InvalidArgument);
  EXPECT_THROW(random_instance(1, 3, 2, 4), InvalidArgument);
}
