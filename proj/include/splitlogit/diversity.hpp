#pragma once

// Ensemble diversity measures computed from per-model correctness on a
// labeled set, plus the coefficient overlap between models.

#include "splitlogit/core.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace splitlogit {

/// n×G matrix; entry (i, g) is true when model g classifies row i correctly.
using CorrectnessMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// ℓ(x) per row: how many models classify the row correctly.
std::vector<int> correct_counts(const CorrectnessMatrix& correct);

struct PerInputMeasure {
  std::vector<double> values;
  double mean = 0.0;
};

/// EM(x) = min(ℓ, G−ℓ) / (G − ⌈G/2⌉). Throws for G < 2.
PerInputMeasure entropy_measure(const std::vector<int>& counts, int g);

struct PairwiseMeasures {
  double dis = 0.0;
  double df = 0.0;
};

/// Disagreement and double-fault, averaged over ordered model pairs and rows.
PairwiseMeasures pairwise_measures(const CorrectnessMatrix& correct);

/// KW(x) = ℓ(G−ℓ)/G², averaged over rows.
double kw_variance(const std::vector<int>& counts, int g);

/// Generalized diversity from the empirical distribution of ℓ. Empty when
/// no row is classified correctly by any model.
std::optional<double> generalized_diversity(const std::vector<int>& counts, int g);

/// Mean selection fraction over variables selected by at least one model.
/// Empty when every coefficient is zero.
std::optional<double> overlap(const Matrix& coefs);

struct DiversityReport {
  int groups = 0;
  double em = 0.0;
  double dis = 0.0;
  double df = 0.0;
  double kw = 0.0;
  std::optional<double> gd;
  std::optional<double> ov;
  double mr_ensemble = 0.0;
  double mr_individual_mean = 0.0;
  std::vector<double> per_model_mr;

  /// Flat key/value view; missing values are rendered as "NA".
  std::vector<std::pair<std::string, std::string>> to_records() const;
};

/// Row-wise correctness of each model's own 0.5-threshold prediction.
CorrectnessMatrix model_correctness(const SplitFit& fit, const Matrix& x, const Vector& y,
                                    Scale scale);

/// Full report on a labeled set (x on the given scale, y in {−1, +1}).
DiversityReport diversity_report(const SplitFit& fit, const Matrix& x, const Vector& y,
                                 Scale scale);

}  // namespace splitlogit
