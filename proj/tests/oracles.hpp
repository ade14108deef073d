#pragma once

// Reference computations written independently of the library: closed-form
// 3x3 symmetric eigenpairs, the SVM dual form term by term, W1 by quantile
// integration and the neuron-set definitions read literally.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "glitchlab/svm.hpp"

namespace oracles {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;

inline Mat3 covariance(const std::vector<Vec3>& rows) {
  Vec3 mean{};
  for (const auto& r : rows)
    for (int j = 0; j < 3; ++j) mean[j] += r[j] / static_cast<double>(rows.size());
  Mat3 c{};
  for (const auto& r : rows)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) c[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / static_cast<double>(rows.size() - 1);
  return c;
}

/// Roots of the characteristic cubic of a symmetric 3x3 matrix, descending.
inline Vec3 eigenvalues(const Mat3& a) {
  const double p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
  const double q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
  const double p2 = (a[0][0] - q) * (a[0][0] - q) + (a[1][1] - q) * (a[1][1] - q) + (a[2][2] - q) * (a[2][2] - q) + 2 * p1;
  const double p = std::sqrt(p2 / 6.0);
  Mat3 b;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) b[i][j] = (a[i][j] - (i == j ? q : 0.0)) / p;
  const double det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
                     b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
  const double r = std::clamp(det / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double e1 = q + 2 * p * std::cos(phi);
  const double e3 = q + 2 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  return {e1, 3 * q - e1 - e3, e3};
}

/// Null vector of A - lambda I from the best-conditioned cross product of two rows.
inline Vec3 eigenvector(const Mat3& a, double lambda) {
  Mat3 m = a;
  for (int i = 0; i < 3; ++i) m[i][i] -= lambda;
  Vec3 best{};
  double best_norm = -1;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) {
      const Vec3 c = {m[i][1] * m[j][2] - m[i][2] * m[j][1], m[i][2] * m[j][0] - m[i][0] * m[j][2],
                      m[i][0] * m[j][1] - m[i][1] * m[j][0]};
      const double n = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
      if (n > best_norm) best = c, best_norm = n;
    }
  for (double& v : best) v /= best_norm;
  return best;
}

inline Eigen::MatrixXd to_matrix(const std::vector<Vec3>& rows) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < 3; ++j) x(static_cast<Eigen::Index>(i), j) = rows[i][j];
  return x;
}

inline const std::vector<std::vector<Vec3>>& pca_fixtures() {
  static const std::vector<std::vector<Vec3>> f = {
      {{2.5, 2.4, 0.5}, {0.5, 0.7, 1.9}, {2.2, 2.9, -0.3}, {1.9, 2.2, 1.1}, {3.1, 3.0, 0.2}},
      {{1, 0, 0}, {0, 2, 0}, {0, 0, 3}, {1, 1, 1}, {-1, 2, 0.5}},
      {{4.0, -2.0, 1.0}, {3.5, -1.0, 0.0}, {-2.0, 0.5, 2.5}, {0.0, 0.0, 0.0}, {1.2, 3.3, -0.7}},
  };
  return f;
}

/// f(x) = sum_s c_s (g <sv_s, x> + r)^d + b, written out term by term.
inline double dual_form(const glitchlab::SvmModel& m, const Eigen::VectorXd& x) {
  const double g = *m.params.kernel_scale, r = m.params.kernel_offset;
  double f = m.bias;
  for (Eigen::Index s = 0; s < m.support_vectors.rows(); ++s) {
    double dot = 0;
    for (Eigen::Index j = 0; j < x.size(); ++j) dot += m.support_vectors(s, j) * x[j];
    double k = 1;
    for (int p = 0; p < m.params.degree; ++p) k *= g * dot + r;
    f += m.dual_coefs[s] * k;
  }
  return f;
}

/// Integral over u in (0, 1] of |Qa(u) - Qb(u)|, Q the left-continuous quantile.
inline double quantile_w1(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::vector<double> cuts = {0.0};
  for (std::size_t i = 1; i <= a.size(); ++i) cuts.push_back(static_cast<double>(i) / na);
  for (std::size_t j = 1; j <= b.size(); ++j) cuts.push_back(static_cast<double>(j) / nb);
  std::sort(cuts.begin(), cuts.end());
  double total = 0;
  for (std::size_t k = 1; k < cuts.size(); ++k) {
    const double lo = cuts[k - 1], hi = cuts[k];
    if (hi - lo <= 0) continue;
    const double mid = 0.5 * (lo + hi);
    const auto ia = static_cast<std::size_t>(std::ceil(mid * na)) - 1;
    const auto ib = static_cast<std::size_t>(std::ceil(mid * nb)) - 1;
    total += std::abs(a[ia] - b[ib]) * (hi - lo);
  }
  return total;
}

struct W1Case {
  std::vector<double> a, b;
  double expected;
};

/// Worked by hand from the two step quantile functions.
inline const std::vector<W1Case>& w1_hand_cases() {
  static const std::vector<W1Case> c = {
      {{0, 1}, {0, 0, 1, 1}, 0.0},
      {{0}, {1, 2}, 1.5},
      {{0, 2}, {1}, 1.0},
      {{0, 1, 3}, {0, 2}, 2.0 / 3.0},
  };
  return c;
}

using Table = std::vector<std::vector<Eigen::VectorXd>>;

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

/// Four normal tokens, one layer, five neurons.
inline Table hand_table() {
  return {{vec({2.0, 0.1, 1.5, 0.0, 3.0})},
          {vec({1.5, 0.2, 0.5, 0.0, 2.0})},
          {vec({3.0, -0.4, 1.2, 1.0, 1.1})},
          {vec({2.5, 0.0, 1.8, 1.3, 0.9})}};
}

/// Up: at least a quota share of tokens above m. Down: no token above m.
inline void brute_sets(const Table& t, double m, double quota, std::vector<std::size_t>& up,
                       std::vector<std::size_t>& down) {
  up.clear();
  down.clear();
  const auto width = static_cast<std::size_t>(t[0][0].size());
  for (std::size_t i = 0; i < width; ++i) {
    int above = 0;
    for (const auto& row : t) above += row[0][static_cast<Eigen::Index>(i)] > m ? 1 : 0;
    if (above >= quota * static_cast<double>(t.size())) up.push_back(i);
    if (above == 0) down.push_back(i);
  }
}

}  // namespace oracles
