#include <gtest/gtest.h>

#include <random>

#include "glitchlab/pca.hpp"
#include "oracles.hpp"

using namespace glitchlab;
using namespace oracles;

TEST(Pca, MatchesClosedFormEigenpairsOnFiveByThree) {
  for (const auto& rows : pca_fixtures()) {
    const Mat3 c = covariance(rows);
    const Vec3 lambda = eigenvalues(c);
    const PcaModel m = pca_fit(to_matrix(rows), 2);
    for (int k = 0; k < 2; ++k) {
      EXPECT_NEAR(m.explained_variance[k], lambda[k], 1e-8);
      const Vec3 v = eigenvector(c, lambda[k]);
      double plus = 0, minus = 0;
      for (int j = 0; j < 3; ++j) {
        plus = std::max(plus, std::abs(m.components(k, j) - v[j]));
        minus = std::max(minus, std::abs(m.components(k, j) + v[j]));
      }
      EXPECT_LT(std::min(plus, minus), 1e-8) << "component " << k;
    }
  }
}

TEST(Pca, ComponentsAreOrthonormalWithDescendingVariance) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd x(40, 9);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng) * (1 + i % 9);
  const PcaModel m = pca_fit(x, 6);
  EXPECT_LT((m.components * m.components.transpose() - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-12);
  for (Eigen::Index k = 1; k < 6; ++k) EXPECT_GE(m.explained_variance[k - 1], m.explained_variance[k]);
  // Projected variance equals the reported eigenvalue.
  const Eigen::MatrixXd z = pca_transform(m, x);
  for (Eigen::Index k = 0; k < 6; ++k)
    EXPECT_NEAR(z.col(k).squaredNorm() / 39.0, m.explained_variance[k], 1e-9 * m.explained_variance[0]);
  EXPECT_LT(pca_transform(m, Eigen::VectorXd(m.mean)).norm(), 1e-12);
}

TEST(Pca, SignRuleMakesLargestEntryPositive) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd x(12, 5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  const PcaModel m = pca_fit(x, 4);
  for (Eigen::Index k = 0; k < 4; ++k) {
    Eigen::Index arg;
    m.components.row(k).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(m.components(k, arg), 0.0);
  }
  const PcaModel flipped = pca_fit(-x, 4);
  EXPECT_LT((flipped.components - m.components).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Pca, GramPathAgreesWithCovariancePath) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd x(8, 30);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  const PcaModel a = pca_fit(x, 7, PcaMethod::covariance);
  const PcaModel b = pca_fit(x, 7, PcaMethod::gram);
  EXPECT_LT((a.explained_variance - b.explained_variance).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((a.components - b.components).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Pca, RankDeficientInputCompletesTheBasis) {
  Eigen::MatrixXd x(4, 6);
  x.setZero();
  x(0, 0) = 1;
  x(1, 0) = -1;
  const PcaModel m = pca_fit(x, 3, PcaMethod::gram);
  EXPECT_NEAR(m.explained_variance[0], 2.0 / 3.0, 1e-12);
  EXPECT_EQ(m.explained_variance[1], 0.0);
  EXPECT_LT((m.components * m.components.transpose() - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pca, RejectsBadRequests) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 3);
  EXPECT_THROW(pca_fit(x, 4), std::invalid_argument);
  EXPECT_THROW(pca_fit(x, 0), std::invalid_argument);
  EXPECT_THROW(pca_fit(x.topRows(1), 1), std::invalid_argument);
  x(2, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(pca_fit(x, 2), NumericError);
  const PcaModel m = pca_fit(Eigen::MatrixXd::Random(5, 3), 2);
  EXPECT_THROW(pca_transform(m, Eigen::VectorXd(Eigen::VectorXd::Zero(4))), std::invalid_argument);
}
