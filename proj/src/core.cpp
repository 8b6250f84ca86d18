#include "splitlogit/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace splitlogit {

namespace {

constexpr double kConstantColumnTol = 1e-10;

void check_finite(const Eigen::Ref<const Vector>& x) {
  if (!x.allFinite()) {
    throw StructuralError("prediction input contains non-finite values");
  }
}

}  // namespace

Dataset Dataset::standardize(const Matrix& raw, const Vector& labels,
                             std::vector<std::string> names) {
  const Index n = raw.rows();
  const Index p = raw.cols();
  if (labels.size() != n) {
    throw StructuralError("label count does not match the number of rows");
  }
  if (n == 0) {
    throw StructuralError("dataset has no rows");
  }
  for (Index i = 0; i < n; ++i) {
    if (labels[i] != 1.0 && labels[i] != -1.0) {
      throw StructuralError("labels must be -1 or +1");
    }
  }
  if (!names.empty() && static_cast<Index>(names.size()) != p) {
    throw StructuralError("column name count does not match the number of columns");
  }

  Dataset d;
  d.x.resize(n, p);
  d.y = labels;
  d.col_means.resize(p);
  d.col_scales.resize(p);
  if (names.empty()) {
    names.reserve(p);
    for (Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
  }
  d.names = std::move(names);

  const double inv_n = 1.0 / static_cast<double>(n);
  for (Index j = 0; j < p; ++j) {
    const double mean = raw.col(j).sum() * inv_n;
    // Two passes: the second removes the residual mean left by rounding.
    Vector centered = raw.col(j).array() - mean;
    const double drift = centered.sum() * inv_n;
    centered.array() -= drift;
    const double scale = std::sqrt(centered.squaredNorm() * inv_n);
    d.col_means[j] = mean + drift;
    if (scale <= kConstantColumnTol * std::max(1.0, std::abs(mean))) {
      d.col_scales[j] = 0.0;
      d.x.col(j).setZero();
    } else {
      d.col_scales[j] = scale;
      d.x.col(j) = centered / scale;
    }
  }
  return d;
}

Dataset Dataset::subset(std::span<const Index> rows) const {
  Matrix raw(static_cast<Index>(rows.size()), p());
  Vector labels(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    raw.row(static_cast<Index>(r)) = x.row(rows[r]);
    labels[static_cast<Index>(r)] = y[rows[r]];
  }
  return standardize(raw, labels, names);
}

double Dataset::positive_fraction() const {
  if (y.size() == 0) return 0.0;
  return static_cast<double>((y.array() > 0.0).count()) / static_cast<double>(y.size());
}

bool Dataset::has_both_classes() const {
  const auto pos = (y.array() > 0.0).count();
  return pos > 0 && pos < y.size();
}

void HyperParams::validate() const {
  std::ostringstream msg;
  if (!(alpha >= 0.0 && alpha <= 1.0)) msg << "alpha must lie in [0,1]; ";
  if (!(lambda_s >= 0.0) || !std::isfinite(lambda_s)) msg << "lambda_s must be >= 0; ";
  if (!(lambda_d >= 0.0) || !std::isfinite(lambda_d)) msg << "lambda_d must be >= 0; ";
  if (groups < 1) msg << "groups must be >= 1; ";
  if (!(tol > 0.0)) msg << "tol must be > 0; ";
  if (max_sweeps < 1) msg << "max_sweeps must be >= 1; ";
  const std::string s = msg.str();
  if (!s.empty()) throw StructuralError("invalid hyperparameters: " + s);
}

Vector SplitFit::ensemble_coefs(bool original) const {
  const Matrix& c = original ? coefs_original : coefs;
  return c.rowwise().mean();
}

double SplitFit::ensemble_intercept(bool original) const {
  return original ? intercepts_original.mean() : intercepts.mean();
}

bool SplitFit::is_null() const { return (coefs.array() == 0.0).all(); }

void destandardize(SplitFit& fit, const Dataset& data) {
  if (fit.p() != data.p()) {
    throw StructuralError("fit and dataset disagree on the number of predictors");
  }
  const int G = fit.groups();
  fit.coefs_original.resize(fit.p(), G);
  fit.intercepts_original.resize(G);
  for (int g = 0; g < G; ++g) {
    double shift = 0.0;
    for (Index j = 0; j < fit.p(); ++j) {
      const double scale = data.col_scales[j];
      const double b = scale == 0.0 ? 0.0 : fit.coefs(j, g) / scale;
      fit.coefs_original(j, g) = b;
      shift += b * data.col_means[j];
    }
    fit.intercepts_original[g] = fit.intercepts[g] - shift;
  }
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double logistic_loss(double margin) {
  if (margin >= 0.0) return std::log1p(std::exp(-margin));
  return -margin + std::log1p(std::exp(margin));
}

double sparsity_penalty(const Eigen::Ref<const Vector>& beta, double alpha) {
  return 0.5 * (1.0 - alpha) * beta.squaredNorm() + alpha * beta.lpNorm<1>();
}

double diversity_penalty(const Matrix& coefs) {
  // Σ_{h≠g} |a_g||a_h| = (Σ_g |a_g|)² − Σ_g a_g², row by row so that a row
  // with a single nonzero contributes exactly zero.
  const Eigen::ArrayXXd a = coefs.array().abs();
  const Eigen::ArrayXd s = a.rowwise().sum();
  const Eigen::ArrayXd sq = a.square().rowwise().sum();
  return (s.square() - sq).sum();
}

double mean_logistic_loss(const Dataset& data, double intercept,
                          const Eigen::Ref<const Vector>& beta) {
  const Vector eta = (data.x * beta).array() + intercept;
  double total = 0.0;
  for (Index i = 0; i < data.n(); ++i) total += logistic_loss(data.y[i] * eta[i]);
  return total / static_cast<double>(data.n());
}

double objective(const Vector& intercepts, const Matrix& coefs,
                 const Dataset& data, const HyperParams& hyper) {
  if (coefs.rows() != data.p() || intercepts.size() != coefs.cols()) {
    throw StructuralError("objective: parameter dimensions do not match the data");
  }
  double total = 0.0;
  for (Index g = 0; g < coefs.cols(); ++g) {
    total += mean_logistic_loss(data, intercepts[g], coefs.col(g)) +
             hyper.lambda_s * sparsity_penalty(coefs.col(g), hyper.alpha);
  }
  return total + 0.25 * hyper.lambda_d * diversity_penalty(coefs);
}

double objective(const SplitFit& fit, const Dataset& data) {
  return objective(fit.intercepts, fit.coefs, data, fit.hyper);
}

double model_predict_proba(const SplitFit& fit, int g,
                           const Eigen::Ref<const Vector>& x, Scale scale) {
  check_finite(x);
  if (x.size() != fit.p()) throw StructuralError("prediction input has the wrong length");
  const bool orig = scale == Scale::original;
  const Matrix& c = orig ? fit.coefs_original : fit.coefs;
  const double b0 = orig ? fit.intercepts_original[g] : fit.intercepts[g];
  return sigmoid(b0 + x.dot(c.col(g)));
}

double ensemble_predict_proba(const SplitFit& fit,
                              const Eigen::Ref<const Vector>& x, Scale scale) {
  check_finite(x);
  if (x.size() != fit.p()) throw StructuralError("prediction input has the wrong length");
  const bool orig = scale == Scale::original;
  return sigmoid(fit.ensemble_intercept(orig) + x.dot(fit.ensemble_coefs(orig)));
}

ImportanceSets importance_sets(const SplitFit& fit) {
  ImportanceSets out;
  const int G = fit.groups();
  out.multiplicity.assign(static_cast<std::size_t>(fit.p()), 0);
  for (Index j = 0; j < fit.p(); ++j) {
    out.multiplicity[j] = static_cast<int>((fit.coefs.row(j).array() != 0.0).count());
  }
  out.sets.resize(static_cast<std::size_t>(G));
  for (int k = 1; k <= G; ++k) {
    for (Index j = 0; j < fit.p(); ++j) {
      if (out.multiplicity[j] >= k) out.sets[k - 1].push_back(j);
    }
  }
  return out;
}

}  // namespace splitlogit
