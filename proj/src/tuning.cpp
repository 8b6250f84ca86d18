#include "splitlogit/tuning.hpp"

#include "splitlogit/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace splitlogit {

namespace {

constexpr int kMaxBisections = 20;
constexpr double kBracketWidth = 0.01;
constexpr int kMaxBracketDoublings = 60;
constexpr double kRidgeNullLevel = 1e-3;
constexpr double kDiversityFloor = 1e-6;
// The coordinate update recomputes the KKT score through the IRLS weights, so
// at exactly score/α rounding can leave a coefficient of order 1e-16. Rounding
// the threshold up by this relative margin keeps the fit there null.
constexpr double kNullMargin = 1e-12;

bool is_null_like(const SplitFit& f, double alpha) {
  if (alpha > 0.0) return f.is_null();
  return f.coefs.cwiseAbs().maxCoeff() <= kRidgeNullLevel;
}

bool is_disjoint(const SplitFit& f) { return diversity_penalty(f.coefs) == 0.0; }

double max_score(const Dataset& data) {
  const double q = data.positive_fraction();
  const Vector centered = ((data.y.array() + 1.0) * 0.5 - q).matrix();
  double best = 0.0;
  for (Index j = 0; j < data.p(); ++j) {
    if (data.is_constant(j)) continue;
    best = std::max(best, std::abs(data.x.col(j).dot(centered)));
  }
  return best / static_cast<double>(data.n()) * (1.0 + kNullMargin);
}

/// Smallest λ with pred(λ) true, assuming pred is monotone, found by
/// doubling/halving to a bracket and then bisecting it.
template <class Pred>
double bisect_threshold(double start, Pred&& pred, const char* what) {
  double hi = start;
  int guard = 0;
  while (!pred(hi)) {
    hi *= 2.0;
    if (++guard > kMaxBracketDoublings) {
      throw NumericalError(std::string(what) + ": could not bracket the threshold from above");
    }
  }
  double lo = hi * 0.5;
  guard = 0;
  while (pred(lo)) {
    hi = lo;
    lo *= 0.5;
    if (++guard > kMaxBracketDoublings) return hi;
  }
  for (int step = 0; step < kMaxBisections && (hi - lo) > kBracketWidth * hi; ++step) {
    const double mid = 0.5 * (lo + hi);
    if (pred(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double fold_loss(const Dataset& data, std::span<const Index> holdout, const SplitFit& f) {
  const Vector beta = f.ensemble_coefs(true);
  const double b0 = f.ensemble_intercept(true);
  double total = 0.0;
  for (Index i : holdout) total += logistic_loss(data.y[i] * (b0 + data.x.row(i).dot(beta)));
  return total / static_cast<double>(holdout.size());
}

std::vector<Index> complement(Index n, std::span<const Index> holdout) {
  std::vector<char> held(static_cast<std::size_t>(n), 0);
  for (Index i : holdout) held[i] = 1;
  std::vector<Index> rest;
  rest.reserve(static_cast<std::size_t>(n) - holdout.size());
  for (Index i = 0; i < n; ++i) {
    if (!held[i]) rest.push_back(i);
  }
  return rest;
}

void fold_row(const Dataset& data, const HyperParams& base, PathAxis axis,
              std::span<const double> values, std::span<const Index> holdout,
              Eigen::Ref<Vector> losses) {
  const std::vector<Index> train_rows = complement(data.n(), holdout);
  const Dataset train = data.subset(train_rows);
  const std::vector<SplitFit> path = axis == PathAxis::sparsity
                                         ? solution_path(train, base, values)
                                         : diversity_path(train, base, values);
  for (std::size_t l = 0; l < path.size(); ++l) {
    losses[static_cast<Index>(l)] = fold_loss(data, holdout, path[l]);
  }
}

std::vector<CvEstimate> summarize(const Matrix& losses) {
  const Index k = losses.rows();
  std::vector<CvEstimate> out(static_cast<std::size_t>(losses.cols()));
  for (Index l = 0; l < losses.cols(); ++l) {
    CvEstimate& e = out[static_cast<std::size_t>(l)];
    e.fold_losses.assign(losses.col(l).data(), losses.col(l).data() + k);
    e.mean = losses.col(l).mean();
    if (k > 1) {
      const double ss = (losses.col(l).array() - e.mean).square().sum();
      e.se = std::sqrt(ss / static_cast<double>(k - 1)) / std::sqrt(static_cast<double>(k));
    }
  }
  return out;
}

std::size_t argmin(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

const char* to_string(GridKind kind) {
  return kind == GridKind::sparsity ? "sparsity" : "diversity";
}

double grid_epsilon(Index n, Index p) { return p < n ? 1e-4 : 1e-2; }

Grid make_grid(GridKind kind, int l, double lambda_max, Index n, Index p) {
  if (!(lambda_max > 0.0) || !std::isfinite(lambda_max)) {
    throw StructuralError("make_grid: lambda_max must be positive and finite");
  }
  if (l < 1) throw StructuralError("make_grid: grid size must be >= 1");
  Grid grid;
  grid.kind = kind;
  grid.values.resize(static_cast<std::size_t>(l));
  grid.values[0] = lambda_max;
  if (l > 1) {
    const double eps = grid_epsilon(n, p);
    const double log_eps = std::log(eps);
    for (int i = 1; i + 1 < l; ++i) {
      grid.values[i] = lambda_max * std::exp(log_eps * i / static_cast<double>(l - 1));
    }
    grid.values[l - 1] = lambda_max * eps;
  }
  return grid;
}

double lambda_s_max_closed_form(const Dataset& data, double alpha) {
  if (!(alpha > 0.0)) throw StructuralError("closed-form lambda_s_max requires alpha > 0");
  return max_score(data) / alpha;
}

double lambda_s_max(const Dataset& data, const HyperParams& base) {
  base.validate();
  const double score = max_score(data);
  if (!(score > 1e-12)) {
    throw StructuralError("lambda_s_max: no predictor is correlated with the labels");
  }
  if (base.alpha > 0.0 && base.lambda_d == 0.0) return score / base.alpha;

  HyperParams h = base;
  const double start = base.alpha > 0.0 ? score / base.alpha : score / kRidgeNullLevel;
  return bisect_threshold(
      start,
      [&](double ls) {
        h.lambda_s = ls;
        return is_null_like(fit(data, h), h.alpha);
      },
      "lambda_s_max");
}

LambdaBound lambda_d_max(const Dataset& data, const HyperParams& base) {
  base.validate();
  if (base.groups < 2) throw StructuralError("lambda_d_max: diversity needs at least two models");
  HyperParams h = base;
  h.lambda_d = 0.0;
  LambdaBound out;
  if (fit(data, h).is_null()) {
    out.value = kDiversityFloor;
    out.degenerate = true;
    out.warning = "lambda_d_max: all models are null at this lambda_s; disjointness is vacuous";
    return out;
  }
  const double start = std::max(base.lambda_s, 1e-3);
  out.value = bisect_threshold(
      start,
      [&](double ld) {
        h.lambda_d = ld;
        return is_disjoint(fit(data, h));
      },
      "lambda_d_max");
  return out;
}

std::vector<int> stratified_folds(const Vector& y, int k, std::uint64_t seed) {
  if (k < 2) throw StructuralError("cross-validation needs at least two folds");
  if (k > y.size()) throw StructuralError("more folds than observations");
  std::vector<Index> neg;
  std::vector<Index> pos;
  for (Index i = 0; i < y.size(); ++i) (y[i] > 0.0 ? pos : neg).push_back(i);
  std::mt19937_64 rng(seed);
  std::shuffle(neg.begin(), neg.end(), rng);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::vector<int> folds(static_cast<std::size_t>(y.size()), 0);
  int c = 0;
  for (const auto* group : {&neg, &pos}) {
    for (Index i : *group) folds[i] = (c++ % k) + 1;
  }
  return folds;
}

std::vector<std::vector<Index>> resolve_folds(const Vector& y, std::span<const int> folds, int k,
                                              std::vector<std::string>* warnings) {
  if (static_cast<Index>(folds.size()) != y.size()) {
    throw StructuralError("fold assignment length does not match the data");
  }
  std::vector<std::vector<Index>> sets(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < folds.size(); ++i) {
    if (folds[i] < 1 || folds[i] > k) throw StructuralError("fold id out of range 1..k");
    sets[folds[i] - 1].push_back(static_cast<Index>(i));
  }
  std::erase_if(sets, [](const auto& s) { return s.empty(); });

  const Index total_pos = (y.array() > 0.0).count();
  const Index total_neg = y.size() - total_pos;
  auto training_ok = [&](const std::vector<Index>& held) {
    Index pos = 0;
    for (Index i : held) pos += y[i] > 0.0 ? 1 : 0;
    const Index neg = static_cast<Index>(held.size()) - pos;
    return total_pos - pos > 0 && total_neg - neg > 0;
  };
  // A training set misses a class only when the holdout contains every row
  // of it; enlarging the holdout cannot repair that, so the fold is dropped.
  std::vector<std::vector<Index>> usable;
  for (std::size_t f = 0; f < sets.size(); ++f) {
    if (training_ok(sets[f])) {
      usable.push_back(std::move(sets[f]));
    } else if (warnings) {
      std::ostringstream msg;
      msg << "fold " << f + 1 << " holds every row of one class; left out of the estimate";
      warnings->push_back(msg.str());
    }
  }
  if (usable.size() < 2) {
    throw StructuralError("cross-validation: fewer than two folds leave both classes in training");
  }
  return usable;
}

Matrix cv_fold_losses_serial(const Dataset& data, const HyperParams& base, PathAxis axis,
                             std::span<const double> values,
                             const std::vector<std::vector<Index>>& holdouts) {
  Matrix losses(static_cast<Index>(holdouts.size()), static_cast<Index>(values.size()));
  serial_for(static_cast<long>(holdouts.size()), [&](long f) {
    Vector row(losses.cols());
    fold_row(data, base, axis, values, holdouts[f], row);
    losses.row(f) = row.transpose();
  });
  return losses;
}

Matrix cv_fold_losses_parallel(const Dataset& data, const HyperParams& base, PathAxis axis,
                               std::span<const double> values,
                               const std::vector<std::vector<Index>>& holdouts, int threads) {
  Matrix losses(static_cast<Index>(holdouts.size()), static_cast<Index>(values.size()));
  omp_for(static_cast<long>(holdouts.size()), threads, [&](long f) {
    Vector row(losses.cols());
    fold_row(data, base, axis, values, holdouts[f], row);
    losses.row(f) = row.transpose();
  });
  return losses;
}

std::vector<CvEstimate> cv_path(const Dataset& data, const HyperParams& base, PathAxis axis,
                                std::span<const double> values, int k, std::span<const int> folds,
                                const Execution& exec, std::vector<std::string>* warnings) {
  base.validate();
  if (k < 2) throw StructuralError("cross-validation needs at least two folds");
  const auto holdouts = resolve_folds(data.y, folds, k, warnings);
  const Matrix losses = exec.threads > 1
                            ? cv_fold_losses_parallel(data, base, axis, values, holdouts, exec.threads)
                            : cv_fold_losses_serial(data, base, axis, values, holdouts);
  return summarize(losses);
}

CvEstimate cv_loss(const Dataset& data, const HyperParams& hyper, int k, std::span<const int> folds,
                   const Execution& exec, std::vector<std::string>* warnings) {
  const double value = hyper.lambda_s;
  return cv_path(data, hyper, PathAxis::sparsity, std::span<const double>(&value, 1), k, folds,
                 exec, warnings)
      .front();
}

SearchResult alternating_search(const Dataset& data, const SearchOptions& opt) {
  HyperParams base;
  base.alpha = opt.alpha;
  base.groups = opt.groups;
  base.tol = opt.tol;
  base.max_sweeps = opt.max_sweeps;
  base.lambda_s = opt.fixed_lambda_s.value_or(0.0);
  base.lambda_d = opt.fixed_lambda_d.value_or(0.0);
  base.validate();
  if (!data.has_both_classes()) {
    throw StructuralError("alternating_search: both classes must be present");
  }
  if (opt.pass_cap < 1) throw StructuralError("alternating_search: pass cap must be >= 1");

  const bool tune_s = !opt.fixed_lambda_s.has_value();
  const bool tune_d = !opt.fixed_lambda_d.has_value() && opt.groups >= 2;
  if (!tune_s && !tune_d) {
    throw StructuralError("alternating_search: both penalties are fixed, nothing to tune");
  }

  SearchResult result;
  CvReport& report = result.report;
  report.fold_assignment = stratified_folds(data.y, opt.folds, opt.seed);

  double lambda_s = base.lambda_s;
  double lambda_d = base.lambda_d;
  double best = std::numeric_limits<double>::infinity();
  std::optional<std::size_t> last_accepted;
  bool sparsity = tune_s;

  for (int pass = 0; pass < opt.pass_cap; ++pass) {
    PassRecord rec;
    HyperParams h = base;
    h.lambda_s = lambda_s;
    h.lambda_d = lambda_d;
    std::vector<double> values;
    PathAxis axis;
    if (sparsity) {
      rec.kind = GridKind::sparsity;
      rec.other_lambda = lambda_d;
      rec.lambda_max = lambda_s_max(data, h);
      values = make_grid(GridKind::sparsity, opt.grid_size_sparsity, rec.lambda_max, data.n(),
                         data.p())
                   .values;
      axis = PathAxis::sparsity;
    } else {
      rec.kind = GridKind::diversity;
      rec.other_lambda = lambda_s;
      const LambdaBound bound = lambda_d_max(data, h);
      if (bound.degenerate) report.warnings.push_back(bound.warning);
      rec.lambda_max = bound.value;
      values = make_grid(GridKind::diversity, opt.grid_size_diversity, bound.value, data.n(),
                         data.p())
                   .values;
      values.push_back(0.0);
      axis = PathAxis::diversity;
    }

    const auto est =
        cv_path(data, h, axis, values, opt.folds, report.fold_assignment, opt.exec, &report.warnings);
    rec.values = values;
    for (const auto& e : est) {
      rec.cv_mean.push_back(e.mean);
      rec.cv_se.push_back(e.se);
    }
    rec.best_index = argmin(rec.cv_mean);
    const double candidate = rec.cv_mean[rec.best_index];
    rec.accepted = !std::isfinite(best) ||
                   candidate < best - opt.min_relative_decrease * std::abs(best);
    if (rec.accepted) {
      best = candidate;
      (sparsity ? lambda_s : lambda_d) = values[rec.best_index];
      last_accepted = report.passes.size();
    }
    report.passes.push_back(std::move(rec));
    if (!report.passes.back().accepted) break;
    if (tune_s && tune_d) {
      sparsity = !sparsity;
    } else {
      break;
    }
  }

  report.lambda_s = lambda_s;
  report.lambda_d = lambda_d;
  report.pass_count = static_cast<int>(report.passes.size());
  report.cv_loss = best;

  // Refit on all rows along the grid that produced the selection, so the
  // final fit follows the same warm-start trajectory the CV folds did.
  const PassRecord& chosen = report.passes[*last_accepted];
  const std::span<const double> prefix(chosen.values.data(), chosen.best_index + 1);
  HyperParams h = base;
  h.tol = opt.refit_tol.value_or(opt.tol * 1e-2);
  h.lambda_s = lambda_s;
  h.lambda_d = chosen.kind == GridKind::sparsity ? chosen.other_lambda : lambda_d;
  std::vector<SplitFit> path = chosen.kind == GridKind::sparsity
                                   ? solution_path(data, h, prefix)
                                   : diversity_path(data, h, prefix);
  result.fit = std::move(path.back());
  return result;
}

}  // namespace splitlogit
