#include "splitlogit/diversity.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace splitlogit {

namespace {

void require_groups(int g, const char* what) {
  if (g < 2) throw StructuralError(std::string(what) + ": needs at least two models");
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(12) << v;
  return s.str();
}

}  // namespace

std::vector<int> correct_counts(const CorrectnessMatrix& correct) {
  std::vector<int> counts(static_cast<std::size_t>(correct.rows()));
  for (Index i = 0; i < correct.rows(); ++i) {
    counts[i] = static_cast<int>(correct.row(i).count());
  }
  return counts;
}

PerInputMeasure entropy_measure(const std::vector<int>& counts, int g) {
  require_groups(g, "entropy_measure");
  const double denom = static_cast<double>(g - (g + 1) / 2);
  PerInputMeasure out;
  out.values.reserve(counts.size());
  double total = 0.0;
  for (int l : counts) {
    if (l < 0 || l > g) throw StructuralError("entropy_measure: count outside 0..G");
    const double v = static_cast<double>(std::min(l, g - l)) / denom;
    out.values.push_back(v);
    total += v;
  }
  out.mean = counts.empty() ? 0.0 : total / static_cast<double>(counts.size());
  return out;
}

PairwiseMeasures pairwise_measures(const CorrectnessMatrix& correct) {
  const Index G = correct.cols();
  require_groups(static_cast<int>(G), "pairwise_measures");
  PairwiseMeasures out;
  if (correct.rows() == 0) return out;
  // Ordered pairs per row: disagreements 2ℓ(G−ℓ), double faults (G−ℓ)(G−ℓ−1).
  long long disagree = 0;
  long long both_wrong = 0;
  for (Index i = 0; i < correct.rows(); ++i) {
    const long long l = correct.row(i).count();
    disagree += 2 * l * (G - l);
    both_wrong += (G - l) * (G - l - 1);
  }
  const double denom = static_cast<double>(G * (G - 1)) * static_cast<double>(correct.rows());
  out.dis = static_cast<double>(disagree) / denom;
  out.df = static_cast<double>(both_wrong) / denom;
  return out;
}

double kw_variance(const std::vector<int>& counts, int g) {
  if (counts.empty()) return 0.0;
  long long total = 0;
  for (int l : counts) total += static_cast<long long>(l) * (g - l);
  return static_cast<double>(total) /
         (static_cast<double>(g) * g * static_cast<double>(counts.size()));
}

std::optional<double> generalized_diversity(const std::vector<int>& counts, int g) {
  require_groups(g, "generalized_diversity");
  if (counts.empty()) return std::nullopt;
  std::vector<double> freq(static_cast<std::size_t>(g) + 1, 0.0);
  for (int l : counts) freq[l] += 1.0;
  const double m = static_cast<double>(counts.size());
  double num = 0.0;
  double den = 0.0;
  for (int k = 1; k <= g; ++k) {
    const double pk = freq[k] / m;
    num += static_cast<double>(k * (k - 1)) / static_cast<double>(g * (g - 1)) * pk;
    den += static_cast<double>(k) / g * pk;
  }
  if (!(den > 0.0)) return std::nullopt;
  return 1.0 - num / den;
}

std::optional<double> overlap(const Matrix& coefs) {
  const double G = static_cast<double>(coefs.cols());
  double sum = 0.0;
  Index selected = 0;
  for (Index j = 0; j < coefs.rows(); ++j) {
    const auto count = (coefs.row(j).array() != 0.0).count();
    if (count > 0) {
      sum += static_cast<double>(count) / G;
      ++selected;
    }
  }
  if (selected == 0) return std::nullopt;
  return sum / static_cast<double>(selected);
}

CorrectnessMatrix model_correctness(const SplitFit& fit, const Matrix& x, const Vector& y,
                                    Scale scale) {
  if (x.cols() != fit.p() || x.rows() != y.size()) {
    throw StructuralError("model_correctness: data shape does not match the fit");
  }
  CorrectnessMatrix correct(x.rows(), fit.groups());
  for (Index i = 0; i < x.rows(); ++i) {
    const Vector row = x.row(i).transpose();
    for (int g = 0; g < fit.groups(); ++g) {
      correct(i, g) = classify(model_predict_proba(fit, g, row, scale)) == static_cast<int>(y[i]);
    }
  }
  return correct;
}

DiversityReport diversity_report(const SplitFit& fit, const Matrix& x, const Vector& y,
                                 Scale scale) {
  const int G = fit.groups();
  require_groups(G, "diversity_report");
  if (x.rows() == 0) throw StructuralError("diversity_report: empty labeled set");
  const CorrectnessMatrix correct = model_correctness(fit, x, y, scale);
  const std::vector<int> counts = correct_counts(correct);

  DiversityReport r;
  r.groups = G;
  r.em = entropy_measure(counts, G).mean;
  const PairwiseMeasures pw = pairwise_measures(correct);
  r.dis = pw.dis;
  r.df = pw.df;
  r.kw = kw_variance(counts, G);
  r.gd = generalized_diversity(counts, G);
  r.ov = overlap(fit.coefs);

  const double m = static_cast<double>(x.rows());
  r.per_model_mr.resize(static_cast<std::size_t>(G));
  for (int g = 0; g < G; ++g) {
    r.per_model_mr[g] = 1.0 - static_cast<double>(correct.col(g).count()) / m;
  }
  double mean_mr = 0.0;
  for (double v : r.per_model_mr) mean_mr += v;
  r.mr_individual_mean = mean_mr / G;

  Index wrong = 0;
  for (Index i = 0; i < x.rows(); ++i) {
    const Vector row = x.row(i).transpose();
    if (classify(ensemble_predict_proba(fit, row, scale)) != static_cast<int>(y[i])) ++wrong;
  }
  r.mr_ensemble = static_cast<double>(wrong) / m;
  return r;
}

std::vector<std::pair<std::string, std::string>> DiversityReport::to_records() const {
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("NA"); };
  std::vector<std::pair<std::string, std::string>> out = {
      {"groups", std::to_string(groups)},
      {"em", fmt(em)},
      {"dis", fmt(dis)},
      {"df", fmt(df)},
      {"kw", fmt(kw)},
      {"gd", opt(gd)},
      {"ov", opt(ov)},
      {"mr_ensemble", fmt(mr_ensemble)},
      {"mr_individual_mean", fmt(mr_individual_mean)},
  };
  for (std::size_t g = 0; g < per_model_mr.size(); ++g) {
    out.emplace_back("mr_model_" + std::to_string(g + 1), fmt(per_model_mr[g]));
  }
  return out;
}

}  // namespace splitlogit
