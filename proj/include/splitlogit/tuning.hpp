#pragma once

// Penalty grids, the λ_s / λ_d anchors, stratified K-fold cross-validation
// and the alternating grid search over (λ_s, λ_d).

#include "splitlogit/core.hpp"
#include "splitlogit/parallel.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace splitlogit {

enum class GridKind { sparsity, diversity };

const char* to_string(GridKind kind);

struct Grid {
  GridKind kind = GridKind::sparsity;
  std::vector<double> values;  // strictly descending
};

/// Ratio between the smallest and largest grid value: 1e-4 when p < n,
/// 1e-2 otherwise.
double grid_epsilon(Index n, Index p);

/// `l` log-equispaced values from lambda_max down to ε·lambda_max.
Grid make_grid(GridKind kind, int l, double lambda_max, Index n, Index p);

/// max_j |⟨x_j, z − q̄⟩| / (n·α), rounded up by a relative 1e-12: the smallest
/// λ_s whose λ_d = 0 fit is null.
double lambda_s_max_closed_form(const Dataset& data, double alpha);

/// Smallest λ_s that makes every model null at base.lambda_d.
///
/// Closed form when λ_d = 0 and α > 0; otherwise a bracketed bisection on
/// cold fits (≤ 20 halvings, stopping at 1% relative bracket width). With
/// α = 0 "null" means max |β_j| ≤ 1e-3. Throws StructuralError when the
/// data carries no signal (the closed form is zero).
double lambda_s_max(const Dataset& data, const HyperParams& base);

struct LambdaBound {
  double value = 0.0;
  bool degenerate = false;
  std::string warning;
};

/// Smallest λ_d at which the fitted models have pairwise disjoint supports,
/// at base.lambda_s. Requires G ≥ 2.
LambdaBound lambda_d_max(const Dataset& data, const HyperParams& base);

/// Fold ids in 1..k, stratified by class, from a seeded shuffle.
std::vector<int> stratified_folds(const Vector& y, int k, std::uint64_t seed);

struct CvEstimate {
  double mean = 0.0;
  double se = 0.0;
  std::vector<double> fold_losses;
};

/// Held-out row sets, one per usable fold. A fold whose training complement
/// lacks a class is left out and a warning is recorded.
std::vector<std::vector<Index>> resolve_folds(const Vector& y, std::span<const int> folds,
                                              int k, std::vector<std::string>* warnings);

/// Which penalty varies along a CV path.
enum class PathAxis { sparsity, diversity };

/// Fold-by-grid matrix of held-out ensemble losses. Each fold fits the whole
/// grid on its training rows, warm-starting down the (descending) values.
Matrix cv_fold_losses_serial(const Dataset& data, const HyperParams& base, PathAxis axis,
                             std::span<const double> values,
                             const std::vector<std::vector<Index>>& holdouts);
Matrix cv_fold_losses_parallel(const Dataset& data, const HyperParams& base, PathAxis axis,
                               std::span<const double> values,
                               const std::vector<std::vector<Index>>& holdouts, int threads);

std::vector<CvEstimate> cv_path(const Dataset& data, const HyperParams& base, PathAxis axis,
                                std::span<const double> values, int k,
                                std::span<const int> folds, const Execution& exec = {},
                                std::vector<std::string>* warnings = nullptr);

/// Mean held-out logistic loss of the ensemble at one (λ_s, λ_d), with its
/// standard error across folds.
CvEstimate cv_loss(const Dataset& data, const HyperParams& hyper, int k,
                   std::span<const int> folds, const Execution& exec = {},
                   std::vector<std::string>* warnings = nullptr);

struct SearchOptions {
  double alpha = 0.75;
  int groups = 10;
  int folds = 10;
  int grid_size_sparsity = 100;
  int grid_size_diversity = 100;
  std::uint64_t seed = 0;
  double tol = 1e-8;
  int max_sweeps = 1000;
  /// Tolerance of the final refit on all rows; tol / 100 when unset. The CV
  /// fits only rank grid points, the returned model is used as-is.
  std::optional<double> refit_tol;
  int pass_cap = 10;
  /// Relative amount by which a pass must lower the best CV loss to count.
  double min_relative_decrease = 1e-6;
  std::optional<double> fixed_lambda_s;
  std::optional<double> fixed_lambda_d;
  Execution exec;
};

struct PassRecord {
  GridKind kind = GridKind::sparsity;
  double lambda_max = 0.0;
  double other_lambda = 0.0;  // the penalty held fixed during this pass
  std::vector<double> values;
  std::vector<double> cv_mean;
  std::vector<double> cv_se;
  std::size_t best_index = 0;
  bool accepted = false;
};

struct CvReport {
  std::vector<int> fold_assignment;
  std::vector<PassRecord> passes;
  double lambda_s = 0.0;
  double lambda_d = 0.0;
  int pass_count = 0;
  double cv_loss = 0.0;
  std::vector<std::string> warnings;
};

struct SearchResult {
  CvReport report;
  SplitFit fit;
};

/// Alternating grid search: a λ_s pass at the current λ_d, then a λ_d pass
/// (λ_d = 0 always included) at the selected λ_s, and so on until a pass
/// fails to lower the CV loss or `pass_cap` passes have run. The returned
/// fit is recomputed on all rows along the grid of the last accepted pass.
SearchResult alternating_search(const Dataset& data, const SearchOptions& options);

}  // namespace splitlogit
