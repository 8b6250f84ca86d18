#pragma once

// Block coordinate descent for the split logistic objective.
//
// Each model block is updated against a quadratic (IRLS) surrogate of the
// logistic loss that is frozen for the duration of the block: fitted
// probabilities p̃ and weights w̃ come from the parameters at block start and
// are refreshed once the block's intercept and coefficients have all been
// visited. Within a block the coordinates are updated in place, so each
// update sees the partial residual left by the updates before it.

#include "splitlogit/core.hpp"

#include <optional>
#include <span>
#include <vector>

namespace splitlogit {

/// Lower bound on IRLS weights; fitted probabilities are clipped to
/// [kProbClip, 1 - kProbClip] before the weight is formed.
inline constexpr double kMinWeight = 1e-5;
inline constexpr double kProbClip = 1e-5;

/// sign(v)·max(|v| − t, 0).
double soft_threshold(double v, double t);

class WorkingState {
 public:
  WorkingState(const Dataset& data, const HyperParams& hyper);
  WorkingState(const Dataset& data, const HyperParams& hyper, Vector intercepts,
               Matrix coefs);

  /// Recomputes η, p̃, w̃ for model g from the current parameters and resets
  /// the surrogate anchor to them.
  void refresh(int g);
  void refresh_all();

  /// Newton step on the intercept of model g against the frozen surrogate.
  /// Applies the new value and returns it.
  double update_intercept(int g);

  /// Exact minimizer of the 1-D surrogate in β_j^g with every other
  /// parameter held at its current value. Applies the new value and
  /// returns it. Constant columns always return 0.
  double update_coefficient(int g, Index j);

  /// u_{j,g} = αλ_s + (λ_d/2)·Σ_{h≠g} |β_j^h|.
  double l1_weight(int g, Index j) const;

  /// Intercept, then every listed coordinate, then refresh(g).
  void sweep_model(int g, std::span<const Index> coords);

  /// True objective at the current parameters.
  double objective() const;

  void set_parameters(const Vector& intercepts, const Matrix& coefs);

  /// Recomputes the per-variable |β| sums behind l1_weight() from scratch;
  /// updates keep them current incrementally between calls.
  void sync_rows();

  /// Variables with a nonzero coefficient in model g, ascending.
  std::vector<Index> active_set(int g) const;

  const Dataset& data() const { return *data_; }
  const HyperParams& hyper() const { return hyper_; }
  const Vector& intercepts() const { return intercepts_; }
  const Matrix& coefs() const { return coefs_; }
  int groups() const { return hyper_.groups; }

  /// Current linear predictor of model g.
  auto linear_predictor(int g) const { return eta_.col(g); }
  /// Surrogate anchor: p̃^g, w̃^g and the linear predictor they came from.
  auto probabilities(int g) const { return prob_.col(g); }
  auto weights(int g) const { return weight_.col(g); }
  auto anchor_predictor(int g) const { return anchor_eta_.col(g); }
  /// 0/1 response z = (y + 1) / 2.
  const Vector& response01() const { return z_; }

 private:
  const Dataset* data_;
  HyperParams hyper_;
  Vector z_;
  Vector intercepts_;
  Matrix coefs_;
  Matrix eta_;
  Matrix anchor_eta_;
  Matrix prob_;
  Matrix weight_;
  Matrix resid_;  // w̃∘(ỹ − η) = z − p̃ − w̃∘(η − η̃)
  Vector row_abs_;             // Σ_g |β_j^g|
  std::vector<int> row_nnz_;   // #{g : β_j^g ≠ 0}

  void track(Index j, double old_value, double new_value);
};

/// Block coordinate descent from `init` (or the null model).
///
/// Sweeps models 1..G in order, each block being intercept then j = 1..p.
/// After the first full sweep each model visits only its own nonzero
/// coordinates, with a full sweep every 10 restricted sweeps and before
/// convergence is declared. Convergence: max_j (Δβ̄_j)² < tol over the
/// ensemble-averaged parameters, intercept included.
SplitFit fit(const Dataset& data, const HyperParams& hyper,
             const std::optional<SplitFit>& init = std::nullopt);

/// Fits along a strictly descending λ_s grid, each point warm-started from
/// the previous one. `base.lambda_s` is ignored.
std::vector<SplitFit> solution_path(const Dataset& data, const HyperParams& base,
                                    std::span<const double> lambda_s_grid);

/// Same, along a descending λ_d grid at fixed `base.lambda_s`.
std::vector<SplitFit> diversity_path(const Dataset& data, const HyperParams& base,
                                     std::span<const double> lambda_d_grid);

/// Largest violation of the subgradient optimality conditions over all
/// (j, g), using the true (unclamped) fitted probabilities.
double kkt_residual(const SplitFit& fit, const Dataset& data);

}  // namespace splitlogit
