#pragma once

// Synthetic logistic scenarios (equicorrelated, two-group, block designs),
// classification metrics, and the replicated accuracy/diversity study.

#include "splitlogit/core.hpp"
#include "splitlogit/parallel.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <vector>

namespace splitlogit {

using Rng = std::mt19937_64;

/// Deterministic generator for (seed, stream); streams separate the
/// independent draws made inside one replication.
Rng make_rng(std::uint64_t seed, std::uint64_t stream);

struct ScenarioConfig {
  int scenario = 3;
  Index n = 50;
  Index p = 1500;
  double zeta = 0.2;
  /// Scenario 1 uses rho1 as its single correlation ρ.
  double rho1 = 0.2;
  double rho2 = 0.5;
  double pi1 = 0.4;
  Index block_size = 25;
  Index test_size = 2000;

  /// round(ζp).
  Index active_count() const;
  void validate() const;
};

/// Correlation law of the predictors for one scenario.
///
/// Factor form: x_j = a·F₀ + b·F_{group(j)} + c·e_j with independent standard
/// normals, where the groups are the active/inactive split (scenario 2) or
/// the active blocks plus the inactive set (scenario 3). Structures that the
/// factor form cannot express fall back to a dense Cholesky factor.
class CorrelationModel {
 public:
  explicit CorrelationModel(const ScenarioConfig& config);

  Index p() const { return p_; }
  bool uses_factors() const { return dense_factor_.size() == 0; }

  /// Target correlation from the scenario description.
  double target_correlation(Index i, Index j) const;
  /// Correlation actually produced by the sampling construction.
  double implied_correlation(Index i, Index j) const;

  /// n rows, each an independent draw.
  Matrix sample(Index n, Rng& rng) const;

  /// βᵀΣβ, the variance of xᵀβ.
  double quadratic_form(const Vector& beta) const;

 private:
  Index p_ = 0;
  int scenario_ = 1;
  Index active_ = 0;
  Index block_size_ = 25;
  double rho1_ = 0.0;
  double rho2_ = 0.0;
  double global_loading_ = 0.0;
  double group_loading_ = 0.0;
  double idio_sd_ = 1.0;
  std::vector<int> group_of_;  // -1 when the variable has no group factor
  int groups_ = 0;
  Matrix dense_factor_;  // lower Cholesky factor, empty in factor form

  int group(Index j) const;
};

/// count draws of (−1)^z·u, z ~ Bernoulli(0.3), u ~ Uniform(0, 1/2).
Vector generate_coefficients(Index count, Rng& rng);

Matrix generate_design(const CorrelationModel& law, Index n, Rng& rng);

/// β₀ such that the Monte Carlo mean of S(β₀ + xᵀβ) equals pi1, by
/// bisection. xᵀβ is drawn from its exact law N(0, βᵀΣβ).
double calibrate_intercept(const CorrelationModel& law, const Vector& beta, double pi1,
                           std::uint64_t seed, Index draws = 100000);

/// y_i = +1 with probability S(β₀ + x_iᵀβ), independently.
Vector generate_labels(const Matrix& x, double beta0, const Vector& beta, Rng& rng);

struct ScenarioTruth {
  Vector beta;  // length p, zero outside the active set
  double beta0 = 0.0;
};

/// Active coefficients occupy the first round(ζp) indices.
ScenarioTruth draw_truth(const ScenarioConfig& config, const CorrelationModel& law,
                         std::uint64_t seed);

struct MetricsRecord {
  double mr = 0.0;
  std::optional<double> se;
  std::optional<double> sp;
  double tl = 0.0;
  std::optional<double> rc;
  std::optional<double> pr;
  Index positives = 0;
  Index negatives = 0;
};

/// Ensemble metrics on a labeled test set whose rows are on the input
/// (original) scale. RC/PR need the true coefficient vector.
MetricsRecord evaluate(const SplitFit& fit, const Matrix& x, const Vector& y,
                       const std::optional<Vector>& true_beta = std::nullopt);

struct TradeoffOptions {
  double alpha = 0.75;
  int folds = 10;
  int grid_size_sparsity = 100;
  int grid_size_diversity = 100;
  double tol = 1e-8;
  int max_sweeps = 1000;
  Execution exec;
};

/// One (replication, G) cell.
struct TradeoffCell {
  int replication = 0;
  int groups = 0;
  double mr = 0.0;
  double mr_bar = 0.0;
  double em = 0.0;
  std::optional<double> ov;
  double dis = 0.0;
  double df = 0.0;
  double kw = 0.0;
  std::optional<double> gd;
  double lambda_s = 0.0;
  double lambda_d = 0.0;
  int passes = 0;
  bool converged = false;
  double kkt = 0.0;
};

struct TradeoffRow {
  int groups = 0;
  double mr = 0.0;
  double mr_bar = 0.0;
  double em = 0.0;
  std::optional<double> ov;
  double dis = 0.0;
  double df = 0.0;
  double kw = 0.0;
  std::optional<double> gd;
};

struct TradeoffStudy {
  ScenarioConfig config;
  std::vector<int> group_list;
  int replications = 0;
  std::uint64_t seed = 0;
  std::vector<TradeoffCell> cells;  // replication-major
  std::vector<TradeoffRow> rows;    // one per G, averaged over replications
};

/// All G values of one replication share the same training and test draws.
std::vector<TradeoffCell> run_replication(const ScenarioConfig& config,
                                          const std::vector<int>& group_list,
                                          std::uint64_t replication_seed, int replication,
                                          const TradeoffOptions& options);

/// Replication r uses seed `seed + r`.
std::vector<TradeoffCell> tradeoff_cells_serial(const ScenarioConfig& config,
                                                const std::vector<int>& group_list,
                                                int replications, std::uint64_t seed,
                                                const TradeoffOptions& options);
std::vector<TradeoffCell> tradeoff_cells_parallel(const ScenarioConfig& config,
                                                  const std::vector<int>& group_list,
                                                  int replications, std::uint64_t seed,
                                                  const TradeoffOptions& options);

TradeoffStudy run_tradeoff_study(const ScenarioConfig& config, const std::vector<int>& group_list,
                                 int replications, std::uint64_t seed,
                                 const TradeoffOptions& options = {});

/// Header: G,MR,MRbar,EM,OV,DIS,DF,KW,GD,n,p,zeta,rho1,rho2,pi1,reps,seed
void write_tradeoff_csv(std::ostream& out, const TradeoffStudy& study);

}  // namespace splitlogit
