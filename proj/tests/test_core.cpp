#include "oracles.hpp"

#include "splitlogit/core.hpp"
#include "splitlogit/solver.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace splitlogit;

namespace {

Dataset random_dataset(Index n, Index p, std::uint64_t seed, double shift = 0.0) {
  std::mt19937_64 rng(seed);
  Matrix raw = oracle::gaussian(n, p, rng);
  raw.array() += shift;
  Vector beta = Vector::Zero(p);
  beta[0] = 1.0;
  if (p > 1) beta[1] = -0.8;
  Vector y = oracle::logistic_labels(raw, 0.2, beta, rng);
  y[0] = 1.0;
  y[1] = -1.0;
  return Dataset::standardize(raw, y);
}

SplitFit random_fit(Index p, int G, std::uint64_t seed, double density = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::bernoulli_distribution keep(density);
  SplitFit f;
  f.intercepts = Vector(G);
  f.coefs = Matrix::Zero(p, G);
  for (int g = 0; g < G; ++g) {
    f.intercepts[g] = nd(rng);
    for (Index j = 0; j < p; ++j) {
      if (keep(rng)) f.coefs(j, g) = nd(rng);
    }
  }
  f.hyper.groups = G;
  return f;
}

}  // namespace

TEST_CASE("logistic loss at the reference margins") {
  CHECK(logistic_loss(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const double far = logistic_loss(50.0);
  CHECK(std::isfinite(far));
  CHECK(far == doctest::Approx(1.9287498479639178e-22).epsilon(1e-12));
  const double oracle_m3 = static_cast<double>(oracle::loss(-3.0L));
  CHECK(logistic_loss(-3.0) == doctest::Approx(oracle_m3).epsilon(1e-12));
  CHECK(oracle_m3 == doctest::Approx(3.048587351573742).epsilon(1e-14));
}

TEST_CASE("logistic loss keeps relative error below 1e-12 over a wide margin range") {
  for (double m = -700.0; m <= 700.0; m += 0.37) {
    const double exact = static_cast<double>(oracle::loss(m));
    const double got = logistic_loss(m);
    REQUIRE(std::isfinite(got));
    CHECK(std::abs(got - exact) <= 1e-12 * std::abs(exact));
  }
}

TEST_CASE("sparsity penalty examples") {
  Vector a(2);
  a << 1.0, -1.0;
  CHECK(sparsity_penalty(a, 1.0) == 2.0);
  CHECK(sparsity_penalty(a, 0.0) == 1.0);
  Vector b(3);
  b << 0.5, 0.0, -2.0;
  const double expected = static_cast<double>(oracle::elastic_net(b, 0.5L));
  CHECK(expected == doctest::Approx(2.3125).epsilon(1e-15));
  CHECK(sparsity_penalty(b, 0.5) == doctest::Approx(2.3125).epsilon(1e-15));
}

TEST_CASE("diversity penalty examples") {
  Matrix same(2, 2);
  same << 1, 1, 1, 1;
  CHECK(diversity_penalty(same) == 4.0);
  Matrix disjoint(2, 2);
  disjoint << 1, 0, 0, 1;
  CHECK(diversity_penalty(disjoint) == 0.0);
  Matrix three(1, 3);
  three << 1, 2, -3;
  const double ordered = static_cast<double>(2 * oracle::unordered_overlap(three));
  CHECK(ordered == 22.0);
  CHECK(diversity_penalty(three) == 22.0);
}

TEST_CASE("diversity penalty vanishes exactly when supports are pairwise disjoint") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> pick(0, 3);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 500; ++trial) {
    const Index p = 8;
    const int G = 2 + trial % 4;
    Matrix b = Matrix::Zero(p, G);
    const bool make_disjoint = trial % 2 == 0;
    for (Index j = 0; j < p; ++j) {
      if (make_disjoint) {
        const int owner = pick(rng);
        if (owner < G && pick(rng) != 0) b(j, owner) = nd(rng);
      } else {
        for (int g = 0; g < G; ++g) {
          if (pick(rng) == 0) b(j, g) = nd(rng);
        }
      }
    }
    bool shared = false;
    for (Index j = 0; j < p; ++j) shared = shared || (b.row(j).array() != 0.0).count() > 1;
    if (shared) {
      CHECK(diversity_penalty(b) > 0.0);
    } else {
      CHECK(diversity_penalty(b) == 0.0);
    }
  }
}

TEST_CASE("objective of the all-zero fit on balanced data is G log 2") {
  Matrix raw(4, 2);
  raw << 1, 2, 3, 1, 0, 5, 2, 2;
  Vector y(4);
  y << 1, -1, 1, -1;
  const Dataset d = Dataset::standardize(raw, y);
  HyperParams h;
  h.groups = 3;
  h.lambda_s = 0.3;
  h.lambda_d = 2.0;
  CHECK(objective(Vector::Zero(3), Matrix::Zero(2, 3), d, h) ==
        doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("objective with lambda_d = 0 and identical models doubles the single-model value") {
  const Dataset d = random_dataset(30, 4, 3);
  HyperParams one;
  one.alpha = 0.6;
  one.lambda_s = 0.05;
  one.lambda_d = 0.0;
  one.groups = 1;
  Vector beta(4);
  beta << 0.3, -0.1, 0.0, 0.7;
  const double single = objective(Vector::Constant(1, 0.2), beta, d, one);
  HyperParams two = one;
  two.groups = 2;
  Matrix both(4, 2);
  both << beta, beta;
  CHECK(objective(Vector::Constant(2, 0.2), both, d, two) == doctest::Approx(2.0 * single).epsilon(1e-14));
}

TEST_CASE("objective matches the scalar oracle on a tiny random instance") {
  const Dataset d = random_dataset(8, 3, 17);
  const SplitFit f = random_fit(3, 2, 4, 0.8);
  HyperParams h;
  h.alpha = 0.4;
  h.lambda_s = 0.21;
  h.lambda_d = 0.37;
  h.groups = 2;
  const double expected = static_cast<double>(
      oracle::objective(d.x, d.y, f.intercepts, f.coefs, 0.4L, 0.21L, 0.37L));
  CHECK(std::abs(objective(f.intercepts, f.coefs, d, h) - expected) <= 1e-12 * std::abs(expected));
}

TEST_CASE("objective with lambda_d = 0 decomposes into single-model objectives") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const Dataset d = random_dataset(15, 5, 100 + seed);
    const int G = 2 + static_cast<int>(seed % 4);
    const SplitFit f = random_fit(5, G, seed);
    HyperParams h;
    h.alpha = 0.3;
    h.lambda_s = 0.1;
    h.groups = G;
    double separate = 0.0;
    HyperParams single = h;
    single.groups = 1;
    for (int g = 0; g < G; ++g) {
      separate += objective(f.intercepts.segment(g, 1), f.coefs.col(g), d, single);
    }
    CHECK(std::abs(objective(f.intercepts, f.coefs, d, h) - separate) <= 1e-12 * (1.0 + separate));
  }
}

TEST_CASE("objective rejects mismatched dimensions") {
  const Dataset d = random_dataset(10, 3, 1);
  HyperParams h;
  h.groups = 2;
  CHECK_THROWS_AS(objective(Vector::Zero(2), Matrix::Zero(4, 2), d, h), StructuralError);
  CHECK_THROWS_AS(objective(Vector::Zero(3), Matrix::Zero(3, 2), d, h), StructuralError);
}

TEST_CASE("ensemble probability examples") {
  SplitFit zero;
  zero.intercepts = Vector::Zero(3);
  zero.coefs = Matrix::Zero(4, 3);
  Vector x(4);
  x << 1, -2, 3, 0.5;
  CHECK(ensemble_predict_proba(zero, x) == 0.5);
  CHECK(classify(0.5) == 1);
  CHECK(classify(std::nextafter(0.5, 0.0)) == -1);

  const SplitFit one = random_fit(4, 1, 9, 1.0);
  CHECK(ensemble_predict_proba(one, x) == model_predict_proba(one, 0, x));

  const Dataset d = random_dataset(12, 4, 5);
  const SplitFit three = random_fit(4, 3, 21, 1.0);
  const Vector row = d.x.row(0).transpose();
  oracle::Real mean_eta = 0;
  for (int g = 0; g < 3; ++g) {
    const double pg = model_predict_proba(three, g, row);
    const oracle::Real eta = std::log(pg / (1 - static_cast<oracle::Real>(pg)));
    const oracle::Real direct = three.intercepts[g] + row.dot(three.coefs.col(g));
    CHECK(std::abs(static_cast<double>(eta - direct)) <= 1e-9);
    mean_eta += direct / 3;
  }
  CHECK(ensemble_predict_proba(three, row) ==
        doctest::Approx(static_cast<double>(oracle::sigmoid(mean_eta))).epsilon(1e-14));
}

TEST_CASE("ensemble probability with every sign flipped is the complement") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const SplitFit f = random_fit(6, 1 + trial % 5, 300 + trial, 0.7);
    SplitFit flipped = f;
    flipped.intercepts = -f.intercepts;
    flipped.coefs = -f.coefs;
    const Vector x = oracle::gaussian(6, 1, rng);
    CHECK(std::abs(ensemble_predict_proba(f, x) + ensemble_predict_proba(flipped, x) - 1.0) <= 1e-12);
  }
}

TEST_CASE("ensemble probability rejects non-finite inputs") {
  const SplitFit f = random_fit(3, 2, 1);
  Vector x(3);
  x << 1.0, std::nan(""), 0.0;
  CHECK_THROWS_AS(ensemble_predict_proba(f, x), StructuralError);
  x[1] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(ensemble_predict_proba(f, x), StructuralError);
}

TEST_CASE("standardized columns have zero mean and unit mean square") {
  std::mt19937_64 rng(2);
  Matrix raw = oracle::gaussian(40, 5, rng) * 3.0;
  raw.col(1).array() += 1e4;
  raw.col(2).setConstant(7.25);
  Vector y = Vector::Ones(40);
  y.head(15).setConstant(-1.0);
  const Dataset d = Dataset::standardize(raw, y);
  for (Index j = 0; j < 5; ++j) {
    if (j == 2) {
      CHECK(d.is_constant(j));
      CHECK(d.x.col(j).cwiseAbs().maxCoeff() == 0.0);
      continue;
    }
    CHECK(std::abs(d.x.col(j).mean()) <= 1e-10);
    CHECK(std::abs(d.x.col(j).squaredNorm() / 40.0 - 1.0) <= 1e-10);
    CHECK(d.col_scales[j] > 0.0);
  }
  CHECK(d.has_both_classes());
  CHECK(d.positive_fraction() == doctest::Approx(25.0 / 40.0));
}

TEST_CASE("standardization rejects labels outside {-1, +1}") {
  Matrix raw = Matrix::Random(4, 2);
  Vector y(4);
  y << 1, 0, 1, -1;
  CHECK_THROWS_AS(Dataset::standardize(raw, y), StructuralError);
}

TEST_CASE("hyperparameter validation") {
  HyperParams h;
  CHECK_NOTHROW(h.validate());
  h.alpha = 1.5;
  CHECK_THROWS_AS(h.validate(), StructuralError);
  h = {};
  h.lambda_s = -1;
  CHECK_THROWS_AS(h.validate(), StructuralError);
  h = {};
  h.lambda_d = -1e-9;
  CHECK_THROWS_AS(h.validate(), StructuralError);
  h = {};
  h.groups = 0;
  CHECK_THROWS_AS(h.validate(), StructuralError);
  h = {};
  h.tol = 0;
  CHECK_THROWS_AS(h.validate(), StructuralError);
}

TEST_CASE("destandardized parameters reproduce standardized predictions") {
  std::mt19937_64 rng(8);
  Matrix raw = oracle::gaussian(25, 4, rng);
  raw.col(0) = raw.col(0) * 40.0 + Vector::Constant(25, 3.0);
  raw.col(3).array() -= 1e3;
  Vector y = oracle::logistic_labels(raw.col(0) / 40.0, 0.0, Vector::Ones(1), rng);
  y[0] = 1;
  y[1] = -1;
  const Dataset d = Dataset::standardize(raw, y);
  SplitFit f = random_fit(4, 3, 77, 0.9);
  destandardize(f, d);
  for (Index i = 0; i < 25; ++i) {
    const Vector xs = d.x.row(i).transpose();
    const Vector xo = raw.row(i).transpose();
    CHECK(std::abs(ensemble_predict_proba(f, xs, Scale::standardized) -
                   ensemble_predict_proba(f, xo, Scale::original)) <= 1e-8);
    for (int g = 0; g < 3; ++g) {
      CHECK(std::abs(model_predict_proba(f, g, xs, Scale::standardized) -
                     model_predict_proba(f, g, xo, Scale::original)) <= 1e-8);
    }
  }
  CHECK(f.ensemble_coefs().allFinite());
  CHECK(f.ensemble_coefs(true).allFinite());
}

TEST_CASE("importance set examples") {
  SplitFit zero;
  zero.intercepts = Vector::Zero(3);
  zero.coefs = Matrix::Zero(4, 3);
  const ImportanceSets none = importance_sets(zero);
  REQUIRE(none.sets.size() == 3);
  for (const auto& s : none.sets) CHECK(s.empty());

  SplitFit two;
  two.intercepts = Vector::Zero(2);
  two.coefs = Matrix::Zero(4, 2);
  two.coefs(0, 0) = 1;  // variable 1
  two.coefs(1, 0) = 1;  // variable 2
  two.coefs(1, 1) = -2;
  two.coefs(2, 1) = 3;  // variable 3
  const ImportanceSets s = importance_sets(two);
  CHECK(s.sets[0] == std::vector<Index>{0, 1, 2});
  CHECK(s.sets[1] == std::vector<Index>{1});
  CHECK(s.multiplicity == std::vector<int>{1, 2, 1, 0});
}

TEST_CASE("importance sets are nested and agree with multiplicities") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const int G = 1 + static_cast<int>(seed % 7);
    const SplitFit f = random_fit(20, G, seed, 0.4);
    const ImportanceSets s = importance_sets(f);
    REQUIRE(static_cast<int>(s.sets.size()) == G);
    for (int k = 1; k < G; ++k) {
      for (Index j : s.sets[k]) {
        CHECK(std::binary_search(s.sets[k - 1].begin(), s.sets[k - 1].end(), j));
      }
      CHECK(s.sets[k].size() <= s.sets[k - 1].size());
    }
    for (Index j = 0; j < 20; ++j) {
      for (int k = 1; k <= G; ++k) {
        const bool in = std::binary_search(s.sets[k - 1].begin(), s.sets[k - 1].end(), j);
        CHECK(in == (s.multiplicity[j] >= k));
      }
    }
  }
}
