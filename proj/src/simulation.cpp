#include "splitlogit/simulation.hpp"

#include "splitlogit/diversity.hpp"
#include "splitlogit/solver.hpp"
#include "splitlogit/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace splitlogit {

namespace {

// Stream ids inside one replication.
enum Stream : std::uint64_t {
  kTruthStream = 0,
  kCalibrationStream = 1,
  kTrainDesignStream = 2,
  kTrainLabelStream = 3,
  kTestDesignStream = 4,
  kTestLabelStream = 5,
};

constexpr double kNegativeSignProb = 0.3;
constexpr double kCoefficientBound = 0.5;

std::string describe(const ScenarioConfig& c) {
  std::ostringstream s;
  s << "(rho1=" << c.rho1 << ", rho2=" << c.rho2 << ", zeta=" << c.zeta << ")";
  return s.str();
}

}  // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

Index ScenarioConfig::active_count() const {
  return static_cast<Index>(std::llround(zeta * static_cast<double>(p)));
}

void ScenarioConfig::validate() const {
  std::ostringstream msg;
  if (scenario < 1 || scenario > 3) msg << "scenario must be 1, 2 or 3; ";
  if (n < 2) msg << "n must be >= 2; ";
  if (p < 1) msg << "p must be >= 1; ";
  if (!(zeta > 0.0 && zeta < 1.0)) msg << "zeta must lie in (0,1); ";
  if (!(pi1 > 0.0 && pi1 < 1.0)) msg << "pi1 must lie in (0,1); ";
  if (!(rho1 >= -1.0 && rho1 <= 1.0) || !(rho2 >= -1.0 && rho2 <= 1.0)) {
    msg << "correlations must lie in [-1,1]; ";
  }
  if (scenario >= 2 && !(rho1 < rho2)) msg << "scenarios 2 and 3 need rho1 < rho2; ";
  if (active_count() < 1) msg << "zeta*p rounds to zero active variables; ";
  if (scenario == 3) {
    if (block_size < 1) {
      msg << "block size must be >= 1; ";
    } else if (active_count() % block_size != 0) {
      msg << "zeta*p must be a multiple of the block size; ";
    }
  }
  if (test_size < 1) msg << "test size must be >= 1; ";
  const std::string s = msg.str();
  if (!s.empty()) throw StructuralError("invalid scenario: " + s);
}

CorrelationModel::CorrelationModel(const ScenarioConfig& c)
    : p_(c.p),
      scenario_(c.scenario),
      active_(c.active_count()),
      block_size_(c.block_size),
      rho1_(c.rho1),
      rho2_(c.rho2) {
  c.validate();
  group_of_.assign(static_cast<std::size_t>(p_), -1);
  const bool factor_ok = scenario_ == 1 ? rho1_ >= 0.0 : (rho1_ >= 0.0 && rho2_ <= 1.0);
  if (factor_ok) {
    if (scenario_ == 1) {
      global_loading_ = std::sqrt(rho1_);
      idio_sd_ = std::sqrt(1.0 - rho1_);
    } else {
      global_loading_ = std::sqrt(rho1_);
      group_loading_ = std::sqrt(rho2_ - rho1_);
      idio_sd_ = std::sqrt(1.0 - rho2_);
      const int active_groups = scenario_ == 2 ? 1 : static_cast<int>(active_ / block_size_);
      for (Index j = 0; j < p_; ++j) {
        if (j < active_) {
          group_of_[j] = scenario_ == 2 ? 0 : static_cast<int>(j / block_size_);
        } else {
          group_of_[j] = active_groups;
        }
      }
      groups_ = active_groups + (active_ < p_ ? 1 : 0);
    }
    return;
  }

  Matrix sigma(p_, p_);
  for (Index i = 0; i < p_; ++i) {
    for (Index j = 0; j < p_; ++j) sigma(i, j) = target_correlation(i, j);
  }
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw StructuralError("scenario correlation matrix is not positive definite " + describe(c));
  }
  dense_factor_ = llt.matrixL();
}

int CorrelationModel::group(Index j) const { return group_of_[j]; }

double CorrelationModel::target_correlation(Index i, Index j) const {
  if (i == j) return 1.0;
  if (scenario_ == 1) return rho1_;
  const bool ai = i < active_;
  const bool aj = j < active_;
  if (ai != aj) return rho1_;
  if (scenario_ == 2 || !ai) return rho2_;
  return i / block_size_ == j / block_size_ ? rho2_ : rho1_;
}

double CorrelationModel::implied_correlation(Index i, Index j) const {
  if (!uses_factors()) return dense_factor_.row(i).dot(dense_factor_.row(j));
  double c = global_loading_ * global_loading_;
  if (group(i) >= 0 && group(i) == group(j)) c += group_loading_ * group_loading_;
  if (i == j) c += idio_sd_ * idio_sd_;
  return c;
}

Matrix CorrelationModel::sample(Index n, Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(n, p_);
  if (!uses_factors()) {
    Vector z(p_);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < p_; ++j) z[j] = normal(rng);
      x.row(i) = (dense_factor_ * z).transpose();
    }
    return x;
  }
  Vector factors(std::max(groups_, 1));
  for (Index i = 0; i < n; ++i) {
    const double f0 = normal(rng);
    for (int k = 0; k < groups_; ++k) factors[k] = normal(rng);
    for (Index j = 0; j < p_; ++j) {
      double v = global_loading_ * f0 + idio_sd_ * normal(rng);
      if (group(j) >= 0) v += group_loading_ * factors[group(j)];
      x(i, j) = v;
    }
  }
  return x;
}

double CorrelationModel::quadratic_form(const Vector& beta) const {
  if (beta.size() != p_) throw StructuralError("quadratic_form: coefficient length mismatch");
  if (!uses_factors()) return (dense_factor_.transpose() * beta).squaredNorm();
  const double total = beta.sum();
  double q = global_loading_ * global_loading_ * total * total;
  std::vector<double> group_sums(static_cast<std::size_t>(groups_), 0.0);
  for (Index j = 0; j < p_; ++j) {
    if (group(j) >= 0) group_sums[group(j)] += beta[j];
  }
  for (double s : group_sums) q += group_loading_ * group_loading_ * s * s;
  return q + idio_sd_ * idio_sd_ * beta.squaredNorm();
}

Vector generate_coefficients(Index count, Rng& rng) {
  if (count < 1) throw StructuralError("generate_coefficients: count must be >= 1");
  std::bernoulli_distribution negative(kNegativeSignProb);
  std::uniform_real_distribution<double> magnitude(0.0, kCoefficientBound);
  Vector out(count);
  for (Index j = 0; j < count; ++j) {
    const bool neg = negative(rng);
    double u = 0.0;
    while (u == 0.0) u = magnitude(rng);
    out[j] = neg ? -u : u;
  }
  return out;
}

Matrix generate_design(const CorrelationModel& law, Index n, Rng& rng) {
  return law.sample(n, rng);
}

double calibrate_intercept(const CorrelationModel& law, const Vector& beta, double pi1,
                           std::uint64_t seed, Index draws) {
  if (!(pi1 > 0.0 && pi1 < 1.0)) throw StructuralError("calibrate_intercept: pi1 must lie in (0,1)");
  const double target = std::log(pi1 / (1.0 - pi1));
  const double sd = std::sqrt(std::max(0.0, law.quadratic_form(beta)));
  if (sd == 0.0) return target;

  Rng rng = make_rng(seed, kCalibrationStream);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector eta(draws);
  for (Index i = 0; i < draws; ++i) eta[i] = sd * normal(rng);
  auto mean_prob = [&](double b0) {
    double s = 0.0;
    for (Index i = 0; i < draws; ++i) s += sigmoid(b0 + eta[i]);
    return s / static_cast<double>(draws);
  };
  double lo = target - 10.0 * sd - 10.0;
  double hi = target + 10.0 * sd + 10.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * (1.0 + std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean_prob(mid) < pi1 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Vector generate_labels(const Matrix& x, double beta0, const Vector& beta, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Vector eta = (x * beta).array() + beta0;
  Vector y(x.rows());
  for (Index i = 0; i < x.rows(); ++i) y[i] = unif(rng) < sigmoid(eta[i]) ? 1.0 : -1.0;
  return y;
}

ScenarioTruth draw_truth(const ScenarioConfig& config, const CorrelationModel& law,
                         std::uint64_t seed) {
  Rng rng = make_rng(seed, kTruthStream);
  ScenarioTruth t;
  t.beta = Vector::Zero(config.p);
  t.beta.head(config.active_count()) = generate_coefficients(config.active_count(), rng);
  t.beta0 = calibrate_intercept(law, t.beta, config.pi1, seed);
  return t;
}

MetricsRecord evaluate(const SplitFit& fit, const Matrix& x, const Vector& y,
                       const std::optional<Vector>& true_beta) {
  if (x.rows() == 0) throw StructuralError("evaluate: empty test set");
  if (x.cols() != fit.p() || y.size() != x.rows()) {
    throw StructuralError("evaluate: test set shape does not match the fit");
  }
  const Vector beta = fit.ensemble_coefs(true);
  const double b0 = fit.ensemble_intercept(true);
  Index tp = 0, tn = 0, pos = 0, neg = 0;
  double loss = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    const double eta = b0 + x.row(i).dot(beta);
    const int pred = classify(sigmoid(eta));
    loss += logistic_loss(y[i] * eta);
    if (y[i] > 0.0) {
      ++pos;
      tp += pred == 1;
    } else {
      ++neg;
      tn += pred == -1;
    }
  }
  MetricsRecord m;
  const double total = static_cast<double>(x.rows());
  m.positives = pos;
  m.negatives = neg;
  m.mr = 1.0 - static_cast<double>(tp + tn) / total;
  m.tl = loss / total;
  if (pos > 0) m.se = static_cast<double>(tp) / static_cast<double>(pos);
  if (neg > 0) m.sp = static_cast<double>(tn) / static_cast<double>(neg);
  if (true_beta) {
    if (true_beta->size() != fit.p()) throw StructuralError("evaluate: true_beta length mismatch");
    const Vector est = fit.ensemble_coefs(false);
    Index truth = 0, selected = 0, hit = 0;
    for (Index j = 0; j < fit.p(); ++j) {
      const bool t = (*true_beta)[j] != 0.0;
      const bool s = est[j] != 0.0;
      truth += t;
      selected += s;
      hit += t && s;
    }
    if (truth > 0) m.rc = static_cast<double>(hit) / static_cast<double>(truth);
    if (selected > 0) m.pr = static_cast<double>(hit) / static_cast<double>(selected);
  }
  return m;
}

std::vector<TradeoffCell> run_replication(const ScenarioConfig& config,
                                          const std::vector<int>& group_list,
                                          std::uint64_t replication_seed, int replication,
                                          const TradeoffOptions& options) {
  const CorrelationModel law(config);
  const ScenarioTruth truth = draw_truth(config, law, replication_seed);

  Rng train_x_rng = make_rng(replication_seed, kTrainDesignStream);
  Rng train_y_rng = make_rng(replication_seed, kTrainLabelStream);
  Matrix x = generate_design(law, config.n, train_x_rng);
  Vector y = generate_labels(x, truth.beta0, truth.beta, train_y_rng);
  // A single-class training draw cannot be fitted; redraw from the same streams.
  while ((y.array() > 0.0).all() || (y.array() < 0.0).all()) {
    x = generate_design(law, config.n, train_x_rng);
    y = generate_labels(x, truth.beta0, truth.beta, train_y_rng);
  }
  const Dataset train = Dataset::standardize(x, y);

  Rng test_x_rng = make_rng(replication_seed, kTestDesignStream);
  Rng test_y_rng = make_rng(replication_seed, kTestLabelStream);
  const Matrix x_test = generate_design(law, config.test_size, test_x_rng);
  const Vector y_test = generate_labels(x_test, truth.beta0, truth.beta, test_y_rng);

  std::vector<TradeoffCell> cells;
  cells.reserve(group_list.size());
  for (int G : group_list) {
    SearchOptions so;
    so.alpha = options.alpha;
    so.groups = G;
    so.folds = options.folds;
    so.grid_size_sparsity = options.grid_size_sparsity;
    so.grid_size_diversity = options.grid_size_diversity;
    so.seed = replication_seed;
    so.tol = options.tol;
    so.max_sweeps = options.max_sweeps;
    const SearchResult sr = alternating_search(train, so);
    const DiversityReport dr = diversity_report(sr.fit, x_test, y_test, Scale::original);

    TradeoffCell c;
    c.replication = replication;
    c.groups = G;
    c.mr = dr.mr_ensemble;
    c.mr_bar = dr.mr_individual_mean;
    c.em = dr.em;
    c.ov = dr.ov;
    c.dis = dr.dis;
    c.df = dr.df;
    c.kw = dr.kw;
    c.gd = dr.gd;
    c.lambda_s = sr.report.lambda_s;
    c.lambda_d = sr.report.lambda_d;
    c.passes = sr.report.pass_count;
    c.converged = sr.fit.converged;
    c.kkt = kkt_residual(sr.fit, train);
    cells.push_back(c);
  }
  return cells;
}

namespace {

void check_study(const ScenarioConfig& config, const std::vector<int>& group_list,
                 int replications) {
  config.validate();
  if (replications < 1) throw StructuralError("trade-off study needs at least one replication");
  if (group_list.empty()) throw StructuralError("trade-off study needs at least one G");
  for (int g : group_list) {
    if (g < 2) throw StructuralError("trade-off study: every G must be >= 2");
  }
}

template <class Driver>
std::vector<TradeoffCell> collect(const ScenarioConfig& config, const std::vector<int>& group_list,
                                  int replications, std::uint64_t seed,
                                  const TradeoffOptions& options, Driver&& driver) {
  std::vector<std::vector<TradeoffCell>> per_rep(static_cast<std::size_t>(replications));
  driver(static_cast<long>(replications), [&](long r) {
    per_rep[r] = run_replication(config, group_list, seed + static_cast<std::uint64_t>(r),
                                 static_cast<int>(r), options);
  });
  std::vector<TradeoffCell> cells;
  for (auto& v : per_rep) cells.insert(cells.end(), v.begin(), v.end());
  return cells;
}

}  // namespace

std::vector<TradeoffCell> tradeoff_cells_serial(const ScenarioConfig& config,
                                                const std::vector<int>& group_list,
                                                int replications, std::uint64_t seed,
                                                const TradeoffOptions& options) {
  check_study(config, group_list, replications);
  return collect(config, group_list, replications, seed, options,
                 [](long count, auto&& body) { serial_for(count, body); });
}

std::vector<TradeoffCell> tradeoff_cells_parallel(const ScenarioConfig& config,
                                                  const std::vector<int>& group_list,
                                                  int replications, std::uint64_t seed,
                                                  const TradeoffOptions& options) {
  check_study(config, group_list, replications);
  const int threads = std::max(1, options.exec.threads);
  return collect(config, group_list, replications, seed, options,
                 [threads](long count, auto&& body) { omp_for(count, threads, body); });
}

TradeoffStudy run_tradeoff_study(const ScenarioConfig& config, const std::vector<int>& group_list,
                                 int replications, std::uint64_t seed,
                                 const TradeoffOptions& options) {
  TradeoffStudy study;
  study.config = config;
  study.group_list = group_list;
  study.replications = replications;
  study.seed = seed;
  study.cells = options.exec.threads > 1
                    ? tradeoff_cells_parallel(config, group_list, replications, seed, options)
                    : tradeoff_cells_serial(config, group_list, replications, seed, options);

  for (int G : group_list) {
    TradeoffRow row;
    row.groups = G;
    int count = 0, ov_count = 0, gd_count = 0;
    double ov = 0.0, gd = 0.0;
    for (const auto& c : study.cells) {
      if (c.groups != G) continue;
      ++count;
      row.mr += c.mr;
      row.mr_bar += c.mr_bar;
      row.em += c.em;
      row.dis += c.dis;
      row.df += c.df;
      row.kw += c.kw;
      if (c.ov) {
        ov += *c.ov;
        ++ov_count;
      }
      if (c.gd) {
        gd += *c.gd;
        ++gd_count;
      }
    }
    const double inv = 1.0 / count;
    row.mr *= inv;
    row.mr_bar *= inv;
    row.em *= inv;
    row.dis *= inv;
    row.df *= inv;
    row.kw *= inv;
    if (ov_count > 0) row.ov = ov / ov_count;
    if (gd_count > 0) row.gd = gd / gd_count;
    study.rows.push_back(row);
  }
  return study;
}

void write_tradeoff_csv(std::ostream& out, const TradeoffStudy& study) {
  const auto& c = study.config;
  auto opt = [](const std::optional<double>& v) {
    std::ostringstream s;
    if (v) {
      s << std::setprecision(10) << *v;
    } else {
      s << "NA";
    }
    return s.str();
  };
  out << "G,MR,MRbar,EM,OV,DIS,DF,KW,GD,n,p,zeta,rho1,rho2,pi1,reps,seed\n";
  out << std::setprecision(10);
  for (const auto& r : study.rows) {
    out << r.groups << ',' << r.mr << ',' << r.mr_bar << ',' << r.em << ',' << opt(r.ov) << ','
        << r.dis << ',' << r.df << ',' << r.kw << ',' << opt(r.gd) << ',' << c.n << ',' << c.p
        << ',' << c.zeta << ',' << c.rho1 << ',' << (c.scenario == 1 ? c.rho1 : c.rho2) << ','
        << c.pi1 << ',' << study.replications << ',' << study.seed << '\n';
  }
}

}  // namespace splitlogit
