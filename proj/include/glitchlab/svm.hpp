#pragma once

// Soft-margin binary SVM with a polynomial kernel, trained by SMO on the dual
//   min 1/2 a'Qa - e'a   s.t. 0 <= a_i <= C_i,  y'a = 0,   Q_ij = y_i y_j K(x_i, x_j)
// Working pairs are the maximal violating pair, lowest index on ties.
// Classes: Normal = -1, Glitch = +1.

#include <Eigen/Dense>

#include <optional>
#include <span>

#include "glitchlab/common.hpp"

namespace glitchlab {

struct SvmParams {
  double C = 1.0;
  int degree = 3;
  std::optional<double> kernel_scale;  // unset: 1 / input dimension
  double kernel_offset = 1.0;
  double tolerance = 1e-3;
  std::size_t max_iters = 100000;
  double glitch_weight = 1.0;  // C multiplier for the Glitch class

  void validate() const {
    if (!(C > 0)) throw std::invalid_argument("svm: C must be positive");
    if (degree < 1) throw std::invalid_argument("svm: degree must be >= 1");
    if (kernel_scale && !(*kernel_scale > 0)) throw std::invalid_argument("svm: kernel_scale must be positive");
    if (!(tolerance > 0)) throw std::invalid_argument("svm: tolerance must be positive");
    if (max_iters == 0) throw std::invalid_argument("svm: max_iters must be positive");
    if (!(glitch_weight > 0)) throw std::invalid_argument("svm: glitch_weight must be positive");
  }

  double scale_for(std::size_t dim) const { return kernel_scale ? *kernel_scale : 1.0 / static_cast<double>(dim); }
};

struct SvmModel {
  Eigen::MatrixXd support_vectors;  // rows
  Eigen::VectorXd dual_coefs;       // a_i y_i
  double bias = 0.0;
  SvmParams params;                 // kernel_scale always resolved
  std::size_t iterations = 0;
  bool converged = false;
};

inline double svm_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const SvmParams& p) {
  if (x.size() != y.size()) throw std::invalid_argument("svm kernel: dimension mismatch");
  const double scale = p.scale_for(static_cast<std::size_t>(x.size()));
  return std::pow(scale * x.dot(y) + p.kernel_offset, p.degree);
}

inline double label_sign(Label l) { return l == Label::Glitch ? 1.0 : -1.0; }

inline SvmModel svm_train(const Eigen::MatrixXd& f, std::span<const Label> labels, SvmParams params) {
  params.validate();
  const Eigen::Index n = f.rows();
  if (static_cast<std::size_t>(n) != labels.size()) throw std::invalid_argument("svm_train: rows != labels");
  if (n == 0 || f.cols() == 0) throw std::invalid_argument("svm_train: empty input");
  if (!f.allFinite()) throw NumericError("svm_train: non-finite features");
  const bool has_glitch = std::find(labels.begin(), labels.end(), Label::Glitch) != labels.end();
  const bool has_normal = std::find(labels.begin(), labels.end(), Label::Normal) != labels.end();
  if (!has_glitch || !has_normal) throw std::invalid_argument("svm_train: both classes are required");
  params.kernel_scale = params.scale_for(static_cast<std::size_t>(f.cols()));

  Eigen::VectorXd y(n), c(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = label_sign(labels[static_cast<std::size_t>(i)]);
    c[i] = params.C * (y[i] > 0 ? params.glitch_weight : 1.0);
  }
  const Eigen::MatrixXd gram =
      ((*params.kernel_scale) * (f * f.transpose())).array() + params.kernel_offset;
  const Eigen::MatrixXd k = gram.array().pow(params.degree);
  if (!k.allFinite()) throw NumericError("svm_train: kernel overflow");
  const Eigen::MatrixXd q = (y * y.transpose()).cwiseProduct(k);

  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g = Eigen::VectorXd::Constant(n, -1.0);  // Qa - e
  constexpr double tau = 1e-12;
  auto in_up = [&](Eigen::Index t) { return (y[t] > 0 && a[t] < c[t]) || (y[t] < 0 && a[t] > 0); };
  auto in_low = [&](Eigen::Index t) { return (y[t] > 0 && a[t] > 0) || (y[t] < 0 && a[t] < c[t]); };

  SvmModel model;
  for (; model.iterations < params.max_iters; ++model.iterations) {
    Eigen::Index i = -1, j = -1;
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      const double v = -y[t] * g[t];
      if (in_up(t) && v > gmax) gmax = v, i = t;
      if (in_low(t) && v < gmin) gmin = v, j = t;
    }
    if (i < 0 || j < 0 || gmax - gmin < params.tolerance) {
      model.converged = true;
      break;
    }
    const double ai = a[i], aj = a[j];
    if (y[i] != y[j]) {
      const double quad = std::max(q(i, i) + q(j, j) + 2 * q(i, j), tau);
      const double delta = (-g[i] - g[j]) / quad;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0) {
        if (a[j] < 0) a[j] = 0, a[i] = diff;
      } else if (a[i] < 0) {
        a[i] = 0, a[j] = -diff;
      }
      if (diff > c[i] - c[j]) {
        if (a[i] > c[i]) a[i] = c[i], a[j] = c[i] - diff;
      } else if (a[j] > c[j]) {
        a[j] = c[j], a[i] = c[j] + diff;
      }
    } else {
      const double quad = std::max(q(i, i) + q(j, j) - 2 * q(i, j), tau);
      const double delta = (g[i] - g[j]) / quad;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > c[i]) {
        if (a[i] > c[i]) a[i] = c[i], a[j] = sum - c[i];
      } else if (a[j] < 0) {
        a[j] = 0, a[i] = sum;
      }
      if (sum > c[j]) {
        if (a[j] > c[j]) a[j] = c[j], a[i] = sum - c[j];
      } else if (a[i] < 0) {
        a[i] = 0, a[j] = sum;
      }
    }
    const double di = a[i] - ai, dj = a[j] - aj;
    g += q.col(i) * di + q.col(j) * dj;
  }

  // rho: mean of y_i g_i over free vectors, else the midpoint of the bounds.
  double sum_free = 0, ub = std::numeric_limits<double>::infinity(), lb = -ub;
  std::size_t n_free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y[t] * g[t];
    const bool at_upper = a[t] >= c[t], at_lower = a[t] <= 0;
    if (at_upper) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (at_lower) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      sum_free += yg;
      ++n_free;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2;

  std::vector<Eigen::Index> sv;
  for (Eigen::Index t = 0; t < n; ++t)
    if (a[t] > 0) sv.push_back(t);
  model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), f.cols());
  model.dual_coefs.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t s = 0; s < sv.size(); ++s) {
    model.support_vectors.row(static_cast<Eigen::Index>(s)) = f.row(sv[s]);
    model.dual_coefs[static_cast<Eigen::Index>(s)] = a[sv[s]] * y[sv[s]];
  }
  model.bias = -rho;
  model.params = params;
  return model;
}

struct SvmPrediction {
  Label label;
  double decision;
};

inline double svm_decision(const SvmModel& m, const Eigen::VectorXd& x) {
  if (x.size() != m.support_vectors.cols()) throw std::invalid_argument("svm_predict: dimension mismatch");
  const Eigen::VectorXd dots = m.support_vectors * x;
  double sum = m.bias;
  for (Eigen::Index s = 0; s < dots.size(); ++s)
    sum += m.dual_coefs[s] * std::pow(*m.params.kernel_scale * dots[s] + m.params.kernel_offset, m.params.degree);
  return sum;
}

/// Exact zero counts as Glitch.
inline SvmPrediction svm_predict(const SvmModel& m, const Eigen::VectorXd& x) {
  const double d = svm_decision(m, x);
  return {d >= 0 ? Label::Glitch : Label::Normal, d};
}

}  // namespace glitchlab
