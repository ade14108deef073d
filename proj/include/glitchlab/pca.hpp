#pragma once

#include <Eigen/Dense>

#include "glitchlab/common.hpp"

namespace glitchlab {

inline constexpr std::size_t kDefaultPcaDim = 75;

struct PcaModel {
  Eigen::VectorXd mean;                // cols
  Eigen::MatrixXd components;          // P x cols, orthonormal rows
  Eigen::VectorXd explained_variance;  // P, non-increasing

  std::size_t dim() const { return static_cast<std::size_t>(components.rows()); }
  std::size_t input_dim() const { return static_cast<std::size_t>(mean.size()); }
};

enum class PcaMethod : std::uint8_t {
  automatic,   // covariance when cols <= rows or cols is small, Gram matrix otherwise
  covariance,  // eigen-decompose the cols x cols covariance
  gram,        // eigen-decompose the rows x rows Gram matrix of the centred data
};

namespace pca_detail {

/// Flip so the largest-magnitude entry (first on ties) is positive.
inline void fix_sign(Eigen::MatrixXd& m, Eigen::Index row) {
  auto v = m.row(row);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  if (v[best] < 0) v = -v;
}

/// Completes rows [from, P) of `comp` to an orthonormal set by Gram-Schmidt
/// over the standard basis in index order.
inline void complete_basis(Eigen::MatrixXd& comp, Eigen::Index from) {
  const Eigen::Index cols = comp.cols();
  Eigen::Index next_axis = 0;
  for (Eigen::Index r = from; r < comp.rows(); ++r) {
    for (;; ++next_axis) {
      if (next_axis >= cols) throw std::logic_error("pca: cannot complete orthonormal basis");
      Eigen::RowVectorXd v = Eigen::RowVectorXd::Unit(cols, next_axis);
      for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index k = 0; k < r; ++k) v -= v.dot(comp.row(k)) * comp.row(k);
      if (v.norm() > 1e-6) {
        comp.row(r) = v / v.norm();
        ++next_axis;
        break;
      }
    }
  }
}

}  // namespace pca_detail

/// Top-P principal components of the rows of X (covariance with an n-1
/// denominator). Zero-variance components are allowed.
inline PcaModel pca_fit(const Eigen::MatrixXd& x, std::size_t p, PcaMethod method = PcaMethod::automatic) {
  const Eigen::Index n = x.rows();
  const Eigen::Index cols = x.cols();
  if (n < 2) throw std::invalid_argument("pca_fit: need at least 2 rows");
  if (p == 0) throw std::invalid_argument("pca_fit: P must be positive");
  if (p > static_cast<std::size_t>(std::min(n - 1, cols)))
    throw std::invalid_argument("pca_fit: P exceeds min(rows-1, cols)");
  if (!x.allFinite()) throw NumericError("pca_fit: non-finite input");
  const auto P = static_cast<Eigen::Index>(p);

  PcaModel model;
  model.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centred = x.rowwise() - model.mean.transpose();
  const double denom = static_cast<double>(n - 1);
  model.components.resize(P, cols);
  model.explained_variance.resize(P);

  if (method == PcaMethod::automatic) method = (cols <= n || cols <= 1024) ? PcaMethod::covariance : PcaMethod::gram;

  if (method == PcaMethod::covariance) {
    const Eigen::MatrixXd cov = (centred.transpose() * centred) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw NumericError("pca_fit: eigen-decomposition failed");
    for (Eigen::Index k = 0; k < P; ++k) {
      const Eigen::Index src = cols - 1 - k;  // eigenvalues ascend
      model.components.row(k) = es.eigenvectors().col(src).transpose();
      model.explained_variance[k] = std::max(0.0, es.eigenvalues()[src]);
    }
  } else {
    const Eigen::MatrixXd gram = (centred * centred.transpose()) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    if (es.info() != Eigen::Success) throw NumericError("pca_fit: eigen-decomposition failed");
    const double floor = 1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    Eigen::Index k = 0;
    for (; k < P; ++k) {
      const Eigen::Index src = n - 1 - k;
      const double lambda = es.eigenvalues()[src];
      if (lambda <= floor) break;
      Eigen::RowVectorXd v = (centred.transpose() * es.eigenvectors().col(src)).transpose();
      model.components.row(k) = v / v.norm();
      model.explained_variance[k] = lambda;
    }
    for (Eigen::Index r = k; r < P; ++r) model.explained_variance[r] = 0.0;
    pca_detail::complete_basis(model.components, k);
  }
  for (Eigen::Index k = 0; k < P; ++k) pca_detail::fix_sign(model.components, k);
  return model;
}

inline Eigen::VectorXd pca_transform(const PcaModel& m, const Eigen::VectorXd& x) {
  if (x.size() != m.mean.size()) throw std::invalid_argument("pca_transform: dimension mismatch");
  return m.components * (x - m.mean);
}

/// Row-wise transform of a matrix.
inline Eigen::MatrixXd pca_transform(const PcaModel& m, const Eigen::MatrixXd& x) {
  if (x.cols() != m.mean.size()) throw std::invalid_argument("pca_transform: dimension mismatch");
  return (x.rowwise() - m.mean.transpose()) * m.components.transpose();
}

}  // namespace glitchlab
