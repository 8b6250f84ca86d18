#include "splitlogit/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace splitlogit {

namespace {

constexpr int kRestrictedSweepsPerFullSweep = 10;
constexpr int kMaxHalvings = 5;

void check_fit_inputs(const Dataset& data, const HyperParams& hyper) {
  hyper.validate();
  if (data.n() == 0) throw StructuralError("fit: empty dataset");
  if (!data.has_both_classes()) {
    throw StructuralError("fit: both classes must be present in the training data");
  }
}

bool increased(double next, double prev) {
  return next > prev + 1e-12 * (1.0 + std::abs(prev));
}

std::vector<Index> nonconstant_columns(const Dataset& data) {
  std::vector<Index> cols;
  cols.reserve(static_cast<std::size_t>(data.p()));
  for (Index j = 0; j < data.p(); ++j) {
    if (!data.is_constant(j)) cols.push_back(j);
  }
  return cols;
}

double ensemble_change(const Vector& b0_old, const Matrix& b_old, const Vector& b0_new,
                       const Matrix& b_new) {
  const double d0 = b0_new.mean() - b0_old.mean();
  const Vector d = b_new.rowwise().mean() - b_old.rowwise().mean();
  return std::max(d0 * d0, d.size() > 0 ? d.cwiseAbs2().maxCoeff() : 0.0);
}

}  // namespace

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

WorkingState::WorkingState(const Dataset& data, const HyperParams& hyper)
    : WorkingState(data, hyper, Vector::Zero(hyper.groups),
                   Matrix::Zero(data.p(), hyper.groups)) {}

WorkingState::WorkingState(const Dataset& data, const HyperParams& hyper,
                           Vector intercepts, Matrix coefs)
    : data_(&data),
      hyper_(hyper),
      z_((data.y.array() + 1.0) * 0.5),
      intercepts_(std::move(intercepts)),
      coefs_(std::move(coefs)) {
  const int G = hyper_.groups;
  if (intercepts_.size() != G || coefs_.cols() != G || coefs_.rows() != data.p()) {
    throw StructuralError("working state: parameter dimensions do not match (p, G)");
  }
  for (Index j = 0; j < data.p(); ++j) {
    if (data.is_constant(j)) coefs_.row(j).setZero();
  }
  const Index n = data.n();
  eta_.resize(n, G);
  anchor_eta_.resize(n, G);
  prob_.resize(n, G);
  weight_.resize(n, G);
  resid_.resize(n, G);
  refresh_all();
}

void WorkingState::sync_rows() {
  row_abs_ = coefs_.cwiseAbs().rowwise().sum();
  row_nnz_.assign(static_cast<std::size_t>(coefs_.rows()), 0);
  for (int g = 0; g < coefs_.cols(); ++g) {
    for (Index j = 0; j < coefs_.rows(); ++j) {
      if (coefs_(j, g) != 0.0) ++row_nnz_[static_cast<std::size_t>(j)];
    }
  }
}

void WorkingState::track(Index j, double old_value, double new_value) {
  row_abs_[j] += std::abs(new_value) - std::abs(old_value);
  row_nnz_[static_cast<std::size_t>(j)] += (new_value != 0.0) - (old_value != 0.0);
}

std::vector<Index> WorkingState::active_set(int g) const {
  std::vector<Index> cols;
  for (Index j = 0; j < coefs_.rows(); ++j) {
    if (coefs_(j, g) != 0.0) cols.push_back(j);
  }
  return cols;
}

void WorkingState::refresh(int g) {
  const Dataset& d = *data_;
  auto eta = eta_.col(g);
  eta.setConstant(intercepts_[g]);
  for (Index j = 0; j < d.p(); ++j) {
    const double b = coefs_(j, g);
    if (b != 0.0) eta.noalias() += b * d.x.col(j);
  }
  anchor_eta_.col(g) = eta;
  for (Index i = 0; i < d.n(); ++i) {
    const double pr = sigmoid(eta[i]);
    const double clipped = std::clamp(pr, kProbClip, 1.0 - kProbClip);
    prob_(i, g) = pr;
    weight_(i, g) = std::max(clipped * (1.0 - clipped), kMinWeight);
    resid_(i, g) = z_[i] - pr;
  }
}

void WorkingState::refresh_all() {
  for (int g = 0; g < hyper_.groups; ++g) refresh(g);
  sync_rows();
}

double WorkingState::update_intercept(int g) {
  const double wsum = weight_.col(g).sum();
  if (!(wsum > 0.0)) throw NumericalError("intercept update: all IRLS weights are zero");
  const double delta = resid_.col(g).sum() / wsum;
  if (delta != 0.0) {
    intercepts_[g] += delta;
    eta_.col(g).array() += delta;
    resid_.col(g).noalias() -= delta * weight_.col(g);
  }
  return intercepts_[g];
}

double WorkingState::l1_weight(int g, Index j) const {
  double u = hyper_.alpha * hyper_.lambda_s;
  if (hyper_.lambda_d > 0.0) {
    const double own = coefs_(j, g);
    const int shared = row_nnz_[static_cast<std::size_t>(j)] - (own != 0.0);
    // The running row sum carries rounding; "no other model" must be exact.
    if (shared > 0) u += 0.5 * hyper_.lambda_d * std::max(0.0, row_abs_[j] - std::abs(own));
  }
  return u;
}

double WorkingState::update_coefficient(int g, Index j) {
  const Dataset& d = *data_;
  if (d.is_constant(j)) return 0.0;
  const auto xj = d.x.col(j);
  const auto w = weight_.col(g);
  const double inv_n = 1.0 / static_cast<double>(d.n());
  const double old = coefs_(j, g);
  const double rj = xj.dot(resid_.col(g));
  const double u = l1_weight(g, j);
  // A zero coefficient whose gradient sits inside the dead zone stays zero.
  if (old == 0.0 && std::abs(rj) * inv_n <= u) return 0.0;

  const double xw2 = xj.cwiseAbs2().dot(w);
  const double denom = xw2 * inv_n + (1.0 - hyper_.alpha) * hyper_.lambda_s;
  double next = 0.0;
  if (denom > 0.0) {
    next = soft_threshold((rj + old * xw2) * inv_n, u) / denom;
  }
  const double delta = next - old;
  if (delta != 0.0) {
    coefs_(j, g) = next;
    track(j, old, next);
    eta_.col(g).noalias() += delta * xj;
    resid_.col(g).array() -= delta * w.array() * xj.array();
  }
  return next;
}

void WorkingState::sweep_model(int g, std::span<const Index> coords) {
  update_intercept(g);
  for (Index j : coords) update_coefficient(g, j);
  refresh(g);
}

double WorkingState::objective() const {
  const Dataset& d = *data_;
  const double inv_n = 1.0 / static_cast<double>(d.n());
  double total = 0.0;
  for (int g = 0; g < hyper_.groups; ++g) {
    double loss = 0.0;
    for (Index i = 0; i < d.n(); ++i) loss += logistic_loss(d.y[i] * eta_(i, g));
    total += loss * inv_n + hyper_.lambda_s * sparsity_penalty(coefs_.col(g), hyper_.alpha);
  }
  return total + 0.25 * hyper_.lambda_d * diversity_penalty(coefs_);
}

void WorkingState::set_parameters(const Vector& intercepts, const Matrix& coefs) {
  intercepts_ = intercepts;
  coefs_ = coefs;
  refresh_all();
}

SplitFit fit(const Dataset& data, const HyperParams& hyper,
             const std::optional<SplitFit>& init) {
  check_fit_inputs(data, hyper);
  const int G = hyper.groups;

  Vector b0 = Vector::Zero(G);
  Matrix beta = Matrix::Zero(data.p(), G);
  if (init) {
    if (init->groups() != G || init->p() != data.p()) {
      throw StructuralError("fit: warm start has the wrong (p, G) shape");
    }
    b0 = init->intercepts;
    beta = init->coefs;
  }

  WorkingState state(data, hyper, std::move(b0), std::move(beta));
  const std::vector<Index> all_coords = nonconstant_columns(data);

  SplitFit out;
  out.hyper = hyper;
  double prev_obj = state.objective();
  bool full_sweep = true;
  int restricted_run = 0;
  int sweeps = 0;
  bool converged = false;
  std::string diagnostic;

  Vector b0_old;
  Matrix beta_old;
  while (sweeps < hyper.max_sweeps) {
    b0_old = state.intercepts();
    beta_old = state.coefs();
    state.sync_rows();
    for (int g = 0; g < G; ++g) {
      if (full_sweep) {
        state.sweep_model(g, all_coords);
      } else {
        state.sweep_model(g, state.active_set(g));
      }
    }
    ++sweeps;

    double obj = state.objective();
    if (increased(obj, prev_obj)) {
      const Vector b0_new = state.intercepts();
      const Matrix beta_new = state.coefs();
      bool accepted = false;
      double t = 1.0;
      for (int k = 0; k < kMaxHalvings; ++k) {
        t *= 0.5;
        state.set_parameters(b0_old + t * (b0_new - b0_old),
                             beta_old + t * (beta_new - beta_old));
        obj = state.objective();
        if (!increased(obj, prev_obj)) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        state.set_parameters(b0_old, beta_old);
        std::ostringstream msg;
        msg << "objective increased at sweep " << sweeps << " and " << kMaxHalvings
            << " damped retries did not recover descent";
        diagnostic = msg.str();
        break;
      }
    }

    const double change = ensemble_change(b0_old, beta_old, state.intercepts(), state.coefs());
    prev_obj = obj;
    if (change < hyper.tol) {
      if (full_sweep) {
        converged = true;
        break;
      }
      full_sweep = true;
      continue;
    }
    if (full_sweep) {
      full_sweep = false;
      restricted_run = 0;
    } else if (++restricted_run >= kRestrictedSweepsPerFullSweep) {
      full_sweep = true;
      restricted_run = 0;
    }
  }
  if (!converged && diagnostic.empty()) {
    diagnostic = "no convergence within " + std::to_string(hyper.max_sweeps) + " sweeps";
  }

  out.intercepts = state.intercepts();
  out.coefs = state.coefs();
  out.converged = converged;
  out.sweeps_used = sweeps;
  out.objective_value = state.objective();
  out.diagnostic = diagnostic;
  destandardize(out, data);
  return out;
}

namespace {

void check_descending(std::span<const double> grid, const char* what) {
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] < grid[i - 1])) {
      throw StructuralError(std::string(what) + " grid must be strictly descending");
    }
  }
}

}  // namespace

std::vector<SplitFit> solution_path(const Dataset& data, const HyperParams& base,
                                    std::span<const double> lambda_s_grid) {
  check_descending(lambda_s_grid, "lambda_s");
  std::vector<SplitFit> path;
  path.reserve(lambda_s_grid.size());
  HyperParams h = base;
  for (double ls : lambda_s_grid) {
    h.lambda_s = ls;
    path.push_back(path.empty() ? fit(data, h) : fit(data, h, path.back()));
  }
  return path;
}

std::vector<SplitFit> diversity_path(const Dataset& data, const HyperParams& base,
                                     std::span<const double> lambda_d_grid) {
  check_descending(lambda_d_grid, "lambda_d");
  std::vector<SplitFit> path;
  path.reserve(lambda_d_grid.size());
  HyperParams h = base;
  for (double ld : lambda_d_grid) {
    h.lambda_d = ld;
    path.push_back(path.empty() ? fit(data, h) : fit(data, h, path.back()));
  }
  return path;
}

double kkt_residual(const SplitFit& fit, const Dataset& data) {
  const HyperParams& h = fit.hyper;
  const double inv_n = 1.0 / static_cast<double>(data.n());
  const Vector z = (data.y.array() + 1.0) * 0.5;
  double worst = 0.0;
  for (int g = 0; g < fit.groups(); ++g) {
    Vector resid(data.n());
    const Vector eta = (data.x * fit.coefs.col(g)).array() + fit.intercepts[g];
    for (Index i = 0; i < data.n(); ++i) resid[i] = z[i] - sigmoid(eta[i]);
    worst = std::max(worst, std::abs(resid.sum()) * inv_n);
    for (Index j = 0; j < data.p(); ++j) {
      if (data.is_constant(j)) continue;
      double others = 0.0;
      for (int k = 0; k < fit.groups(); ++k) {
        if (k != g) others += std::abs(fit.coefs(j, k));
      }
      const double u = h.alpha * h.lambda_s + 0.5 * h.lambda_d * others;
      const double score = data.x.col(j).dot(resid) * inv_n;  // −(1/n)·gradient
      const double b = fit.coefs(j, g);
      double violation;
      if (b != 0.0) {
        violation = std::abs(-score + (1.0 - h.alpha) * h.lambda_s * b +
                             u * (b > 0.0 ? 1.0 : -1.0));
      } else {
        violation = std::max(0.0, std::abs(score) - u);
      }
      worst = std::max(worst, violation);
    }
  }
  return worst;
}

}  // namespace splitlogit
