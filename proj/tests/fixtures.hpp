#pragma once

// Data and solver-state generators shared by the unit and acceptance tests.

#include "oracles.hpp"

#include "splitlogit/solver.hpp"

#include <cmath>
#include <random>

namespace fixtures {

using namespace splitlogit;

inline Dataset make_data(Index n, Index p, std::uint64_t seed, double rho = 0.0) {
  std::mt19937_64 rng(seed);
  Matrix raw = oracle::gaussian(n, p, rng);
  if (rho > 0.0) {
    const Matrix common = oracle::gaussian(n, 1, rng);
    for (Index j = 0; j < p; ++j) {
      raw.col(j) = std::sqrt(rho) * common.col(0) + std::sqrt(1.0 - rho) * raw.col(j);
    }
  }
  Vector beta = Vector::Zero(p);
  for (Index j = 0; j < std::min<Index>(p, 3); ++j) beta[j] = j % 2 == 0 ? 1.2 : -0.9;
  Vector y = oracle::logistic_labels(raw, 0.3, beta, rng);
  y[0] = 1.0;
  y[1] = -1.0;
  return Dataset::standardize(raw, y);
}

/// State with random parameters and a few in-block coordinate updates
/// already applied, so η differs from the surrogate anchor.
inline WorkingState scrambled_state(const Dataset& d, const HyperParams& h, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 0.7);
  std::bernoulli_distribution nz(0.6);
  Vector b0(h.groups);
  Matrix b = Matrix::Zero(d.p(), h.groups);
  for (int g = 0; g < h.groups; ++g) {
    b0[g] = nd(rng);
    for (Index j = 0; j < d.p(); ++j) {
      if (nz(rng)) b(j, g) = nd(rng);
    }
  }
  WorkingState s(d, h, b0, b);
  std::uniform_int_distribution<Index> pick(0, d.p() - 1);
  for (int k = 0; k < 3; ++k) s.update_coefficient(0, pick(rng));
  return s;
}

/// The 1-D surrogate in β_j^g, evaluated from the exposed state.
inline oracle::Real surrogate(const WorkingState& s, int g, Index j, oracle::Real b) {
  const Dataset& d = s.data();
  const HyperParams& h = s.hyper();
  const auto eta = s.linear_predictor(g);
  const auto anchor = s.anchor_predictor(g);
  const auto pr = s.probabilities(g);
  const auto w = s.weights(g);
  const Vector& z = s.response01();
  const oracle::Real old = s.coefs()(j, g);
  oracle::Real others = 0;
  for (int k = 0; k < s.groups(); ++k) {
    if (k != g) others += std::fabs(static_cast<oracle::Real>(s.coefs()(j, k)));
  }
  const oracle::Real u = h.alpha * static_cast<oracle::Real>(h.lambda_s) + h.lambda_d / 2.0L * others;
  oracle::Real sq = 0;
  for (Index i = 0; i < d.n(); ++i) {
    const oracle::Real work = anchor[i] + (z[i] - static_cast<oracle::Real>(pr[i])) / w[i];
    const oracle::Real fitted = eta[i] + (b - old) * d.x(i, j);
    sq += w[i] * (work - fitted) * (work - fitted);
  }
  return sq / (2 * d.n()) + h.lambda_s * (1 - h.alpha) / 2 * b * b + u * std::fabs(b);
}

}  // namespace fixtures
