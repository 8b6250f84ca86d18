#pragma once

// Domain types and the pure math of split logistic regression: loss,
// penalties, objective, ensemble prediction and importance sets.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace splitlogit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Inputs with the wrong shape, invalid hyperparameters, single-class data.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Solver or search failures that are not the caller's fault.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed external data (parse failures, missing cells, bad labels).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Standardized design with ±1 labels.
///
/// Columns of `x` have mean 0 and mean-of-squares 1 (1/n convention).
/// Constant columns are kept as all-zero columns with `col_scales[j] == 0`;
/// the solver never moves their coefficients.
struct Dataset {
  Matrix x;
  Vector y;
  Vector col_means;
  Vector col_scales;
  std::vector<std::string> names;

  /// Standardizes `raw` column-wise. Labels must already be ±1.
  static Dataset standardize(const Matrix& raw, const Vector& labels,
                             std::vector<std::string> names = {});

  /// Rows of this dataset, re-standardized. The returned metadata maps the
  /// subset back onto this dataset's scale, not the original input scale.
  Dataset subset(std::span<const Index> rows) const;

  Index n() const { return x.rows(); }
  Index p() const { return x.cols(); }
  bool is_constant(Index j) const { return col_scales[j] == 0.0; }
  double positive_fraction() const;
  bool has_both_classes() const;
};

struct HyperParams {
  double alpha = 0.75;
  double lambda_s = 0.0;
  double lambda_d = 0.0;
  int groups = 1;
  double tol = 1e-8;
  int max_sweeps = 1000;

  /// Throws StructuralError when any field is out of range.
  void validate() const;
};

/// Fitted ensemble: G intercepts and a p×G coefficient matrix on the
/// standardized scale, plus the same parameters mapped to the input scale.
struct SplitFit {
  Vector intercepts;
  Matrix coefs;
  Vector intercepts_original;
  Matrix coefs_original;
  HyperParams hyper;
  bool converged = false;
  int sweeps_used = 0;
  double objective_value = 0.0;
  std::string diagnostic;

  int groups() const { return static_cast<int>(coefs.cols()); }
  Index p() const { return coefs.rows(); }

  Vector ensemble_coefs(bool original = false) const;
  double ensemble_intercept(bool original = false) const;
  bool is_null() const;
};

/// Fills `intercepts_original` / `coefs_original` from the standardized
/// parameters and the dataset's standardization metadata.
void destandardize(SplitFit& fit, const Dataset& data);

enum class Scale { standardized, original };

struct ImportanceSets {
  /// sets[k-1] holds the variables selected by at least k models.
  std::vector<std::vector<Index>> sets;
  std::vector<int> multiplicity;
};

/// S(t) = 1 / (1 + e^{-t}), evaluated without overflow.
double sigmoid(double t);

/// log(1 + e^{-margin}) for margin = y·f(x).
double logistic_loss(double margin);

/// (1-α)/2·‖β‖² + α‖β‖₁ for a single model (no intercept).
double sparsity_penalty(const Eigen::Ref<const Vector>& beta, double alpha);

/// Σ_g Σ_{h≠g} Σ_j |β_j^g||β_j^h|, every unordered pair counted twice.
double diversity_penalty(const Matrix& coefs);

/// Mean logistic loss of a single linear predictor over the data.
double mean_logistic_loss(const Dataset& data, double intercept,
                          const Eigen::Ref<const Vector>& beta);

/// Split objective
///   Σ_g [ mean loss_g + λ_s P_s(β^g) ] + (λ_d/2) Σ_{g<h} Σ_j |β_j^g||β_j^h|.
/// In terms of diversity_penalty() the last term is (λ_d/4)·diversity_penalty.
double objective(const Vector& intercepts, const Matrix& coefs,
                 const Dataset& data, const HyperParams& hyper);
double objective(const SplitFit& fit, const Dataset& data);

/// Probability that model g assigns to class +1.
double model_predict_proba(const SplitFit& fit, int g,
                           const Eigen::Ref<const Vector>& x,
                           Scale scale = Scale::standardized);

/// S(β̄_0 + xᵀβ̄) with the model-averaged parameters.
double ensemble_predict_proba(const SplitFit& fit,
                              const Eigen::Ref<const Vector>& x,
                              Scale scale = Scale::standardized);

/// +1 iff the probability is at least 0.5.
inline int classify(double probability) { return probability >= 0.5 ? 1 : -1; }

ImportanceSets importance_sets(const SplitFit& fit);

}  // namespace splitlogit
