#include <gtest/gtest.h>

#include <random>

#include "glitchlab/svm.hpp"
#include "oracles.hpp"

using namespace glitchlab;
using oracles::dual_form;

namespace {

struct Data {
  Eigen::MatrixXd x;
  std::vector<Label> y;
};

Data blobs(std::uint64_t seed, std::size_t n, double gap) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Data d;
  d.x.resize(static_cast<Eigen::Index>(n), 4);
  for (std::size_t i = 0; i < n; ++i) {
    const bool g = i % 3 == 0;
    for (Eigen::Index j = 0; j < 4; ++j) d.x(static_cast<Eigen::Index>(i), j) = nd(rng) + (g ? gap : 0.0);
    d.y.push_back(g ? Label::Glitch : Label::Normal);
  }
  return d;
}

// alpha per training row, recovered from the support vectors.
std::vector<double> alphas(const SvmModel& m, const Data& d) {
  std::vector<double> a(d.y.size(), 0.0);
  for (Eigen::Index s = 0; s < m.support_vectors.rows(); ++s)
    for (Eigen::Index i = 0; i < d.x.rows(); ++i)
      if (d.x.row(i) == m.support_vectors.row(s)) a[static_cast<std::size_t>(i)] = std::abs(m.dual_coefs[s]);
  return a;
}

}  // namespace

TEST(Svm, DecisionMatchesIndependentDualForm) {
  for (int degree : {1, 2, 3}) {
    const Data d = blobs(static_cast<std::uint64_t>(degree), 60, 1.0);
    SvmParams p;
    p.degree = degree;
    p.C = 0.7;
    const SvmModel m = svm_train(d.x, d.y, p);
    std::mt19937_64 rng(99);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 50; ++t) {
      Eigen::VectorXd x(4);
      for (Eigen::Index j = 0; j < 4; ++j) x[j] = 2 * nd(rng);
      const double ref = dual_form(m, x);
      EXPECT_NEAR(svm_decision(m, x), ref, 1e-9 * std::max(1.0, std::abs(ref)));
      EXPECT_EQ(svm_predict(m, x).label, ref >= 0 ? Label::Glitch : Label::Normal);
    }
  }
}

TEST(Svm, KktConditionsHoldAtConvergence) {
  const Data d = blobs(5, 90, 1.2);
  SvmParams p;
  p.C = 2.0;
  p.degree = 2;
  p.tolerance = 1e-4;
  const SvmModel m = svm_train(d.x, d.y, p);
  ASSERT_TRUE(m.converged);
  const std::vector<double> a = alphas(m, d);
  double balance = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double y = label_sign(d.y[i]);
    EXPECT_GE(a[i], 0.0);
    EXPECT_LE(a[i], p.C + 1e-12);
    balance += a[i] * y;
    const double margin = y * svm_decision(m, d.x.row(static_cast<Eigen::Index>(i)).transpose());
    if (a[i] == 0.0) EXPECT_GE(margin, 1.0 - 1e-3);
    else if (a[i] >= p.C) EXPECT_LE(margin, 1.0 + 1e-3);
    else EXPECT_NEAR(margin, 1.0, 1e-3);
  }
  EXPECT_NEAR(balance, 0.0, 1e-9);
}

TEST(Svm, SeparatesXorWithQuadraticKernel) {
  Eigen::MatrixXd x(4, 2);
  x << 1, 1, -1, -1, 1, -1, -1, 1;
  const std::vector<Label> y = {Label::Glitch, Label::Glitch, Label::Normal, Label::Normal};
  SvmParams p;
  p.degree = 2;
  p.C = 10;
  p.kernel_scale = 1.0;
  const SvmModel m = svm_train(x, y, p);
  for (Eigen::Index i = 0; i < 4; ++i)
    EXPECT_EQ(svm_predict(m, x.row(i).transpose()).label, y[static_cast<std::size_t>(i)]);
}

TEST(Svm, LinearMarginOnTwoPoints) {
  // Hard margin on {-1, +1} in one dimension: w = 1, b = 0.
  Eigen::MatrixXd x(2, 1);
  x << 1, -1;
  const std::vector<Label> y = {Label::Glitch, Label::Normal};
  SvmParams p;
  p.degree = 1;
  p.kernel_offset = 0;
  p.C = 100;
  const SvmModel m = svm_train(x, y, p);
  EXPECT_NEAR(svm_decision(m, Eigen::VectorXd::Constant(1, 1.0)), 1.0, 1e-9);
  EXPECT_NEAR(svm_decision(m, Eigen::VectorXd::Constant(1, 0.0)), 0.0, 1e-9);
  EXPECT_NEAR(m.dual_coefs.cwiseAbs().sum(), 1.0, 1e-9);
}

TEST(Svm, KernelScaleDefaultsToInverseDimension) {
  const Data d = blobs(2, 30, 2.0);
  const SvmModel m = svm_train(d.x, d.y, SvmParams{});
  ASSERT_TRUE(m.params.kernel_scale);
  EXPECT_DOUBLE_EQ(*m.params.kernel_scale, 0.25);
  const Eigen::VectorXd a = d.x.row(0), b = d.x.row(1);
  EXPECT_DOUBLE_EQ(svm_kernel(a, b, m.params), std::pow(0.25 * a.dot(b) + 1.0, 3));
}

TEST(Svm, ZeroDecisionIsGlitch) {
  SvmModel m;
  m.support_vectors.resize(0, 2);
  m.dual_coefs.resize(0);
  m.bias = 0.0;
  m.params.kernel_scale = 1.0;
  EXPECT_EQ(svm_predict(m, Eigen::VectorXd::Zero(2)).label, Label::Glitch);
  m.bias = -1e-300;
  EXPECT_EQ(svm_predict(m, Eigen::VectorXd::Zero(2)).label, Label::Normal);
}

TEST(Svm, RejectsDegenerateTrainingSets) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 2);
  const std::vector<Label> one = {Label::Normal, Label::Normal, Label::Normal};
  EXPECT_THROW(svm_train(x, one, SvmParams{}), std::invalid_argument);
  const std::vector<Label> short_labels = {Label::Normal, Label::Glitch};
  EXPECT_THROW(svm_train(x, short_labels, SvmParams{}), std::invalid_argument);
  SvmParams bad;
  bad.C = 0;
  const std::vector<Label> mixed = {Label::Normal, Label::Glitch, Label::Normal};
  EXPECT_THROW(svm_train(x, mixed, bad), std::invalid_argument);
  x(0, 0) = std::nan("");
  EXPECT_THROW(svm_train(x, mixed, SvmParams{}), NumericError);
}

TEST(Svm, GlitchWeightRaisesTheGlitchBound) {
  const Data d = blobs(7, 60, 0.3);
  SvmParams p;
  p.C = 0.1;
  p.glitch_weight = 5.0;
  const SvmModel m = svm_train(d.x, d.y, p);
  for (Eigen::Index s = 0; s < m.dual_coefs.size(); ++s) {
    if (m.dual_coefs[s] > 0) EXPECT_LE(m.dual_coefs[s], 0.5 + 1e-12);
    else EXPECT_LE(-m.dual_coefs[s], 0.1 + 1e-12);
  }
}
