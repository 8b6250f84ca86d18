#include "splitlogit/cli.hpp"

#include "splitlogit/diversity.hpp"
#include "splitlogit/io.hpp"
#include "splitlogit/simulation.hpp"
#include "splitlogit/solver.hpp"
#include "splitlogit/tuning.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

namespace splitlogit::cli {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string data;
  std::string model;
  std::string out;
  std::string report;
  std::string label = "y";
  std::string positive_label;
  std::string delimiter = ",";
  double alpha = 0.75;
  int groups = 10;
  double lambda_s = 0.0;
  double lambda_d = 0.0;
  double lambda_max = 0.0;
  int folds = 10;
  int grid_s = 100;
  int grid_d = 100;
  double tol = 1e-8;
  int max_sweeps = 1000;
  std::uint64_t seed = 0;
  int threads = 1;
  bool cv = false;

  // simulate
  int scenario = 3;
  long n = 50;
  long p = 1500;
  double zeta = 0.2;
  double rho1 = 0.2;
  double rho2 = 0.5;
  double pi1 = 0.4;
  long block_size = 25;
  long test_size = 2000;
  std::vector<int> group_list = {2, 5, 10};
  int reps = 10;
  std::string cells;

  CLI::Option* lambda_s_opt = nullptr;
  CLI::Option* lambda_d_opt = nullptr;
  CLI::Option* lambda_max_opt = nullptr;
  CLI::Option* positive_opt = nullptr;
  CLI::Option* rho_opt = nullptr;
};

char delimiter_char(const Options& o) {
  if (o.delimiter == "\\t" || o.delimiter == "tab") return '\t';
  if (o.delimiter.size() != 1) throw UsageError("--delimiter must be a single character");
  return o.delimiter[0];
}

std::optional<std::string> positive(const Options& o) {
  if (o.positive_opt && o.positive_opt->count() > 0) return o.positive_label;
  return std::nullopt;
}

bool given(const CLI::Option* opt) { return opt && opt->count() > 0; }

void emit(const std::string& path, std::ostream& fallback,
          const std::function<void(std::ostream&)>& write) {
  if (path.empty() || path == "-") {
    write(fallback);
    return;
  }
  std::ofstream f(path);
  if (!f) throw DataError("cannot write '" + path + "'");
  write(f);
}

void write_records(std::ostream& os,
                   const std::vector<std::pair<std::string, std::string>>& records) {
  for (const auto& [k, v] : records) os << k << '=' << v << '\n';
}

std::string num(double v, int digits) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

Ingested load_training(const Options& o, std::ostream& err) {
  if (o.data.empty()) throw UsageError("--data is required");
  Ingested in = ingest(o.data, o.label, positive(o), delimiter_char(o));
  for (const auto& w : in.warnings) err << "warning: " << w << '\n';
  return in;
}

HyperParams hyper_from(const Options& o) {
  HyperParams h;
  h.alpha = o.alpha;
  h.groups = o.groups;
  h.lambda_s = o.lambda_s;
  h.lambda_d = o.lambda_d;
  h.tol = o.tol;
  h.max_sweeps = o.max_sweeps;
  return h;
}

SearchOptions search_from(const Options& o) {
  SearchOptions s;
  s.alpha = o.alpha;
  s.groups = o.groups;
  s.folds = o.folds;
  s.grid_size_sparsity = o.grid_s;
  s.grid_size_diversity = o.grid_d;
  s.seed = o.seed;
  s.tol = o.tol;
  s.max_sweeps = o.max_sweeps;
  s.exec.threads = o.threads;
  if (given(o.lambda_s_opt)) s.fixed_lambda_s = o.lambda_s;
  if (given(o.lambda_d_opt)) s.fixed_lambda_d = o.lambda_d;
  return s;
}

void report_fit(const SplitFit& f, std::ostream& err) {
  err << "lambda_sparsity=" << num(f.hyper.lambda_s, 12) << '\n'
      << "lambda_diversity=" << num(f.hyper.lambda_d, 12) << '\n'
      << "converged=" << (f.converged ? "true" : "false") << '\n'
      << "sweeps=" << f.sweeps_used << '\n'
      << "objective=" << num(f.objective_value, 12) << '\n';
  if (!f.converged) err << "warning: " << f.diagnostic << '\n';
}

int cmd_fit(const Options& o, std::ostream& out, std::ostream& err) {
  const bool both = given(o.lambda_s_opt) && given(o.lambda_d_opt);
  if (o.cv && both) {
    throw UsageError("--cv conflicts with supplying both --lambda-sparsity and --lambda-diversity");
  }
  const Ingested in = load_training(o, err);
  SplitFit f;
  if (both || (o.groups == 1 && given(o.lambda_s_opt))) {
    f = fit(in.data, hyper_from(o));
  } else {
    SearchResult sr = alternating_search(in.data, search_from(o));
    for (const auto& w : sr.report.warnings) err << "warning: " << w << '\n';
    err << "cv_loss=" << num(sr.report.cv_loss, 12) << '\n';
    f = std::move(sr.fit);
  }
  emit(o.out, out, [&](std::ostream& os) { save_model(os, f, in.data); });
  report_fit(f, err);
  return f.converged ? kSuccess : kNumerical;
}

int cmd_cv(const Options& o, std::ostream& out, std::ostream& err) {
  if (given(o.lambda_s_opt) && given(o.lambda_d_opt)) {
    throw UsageError("cv needs at least one penalty left free to tune");
  }
  const Ingested in = load_training(o, err);
  const SearchResult sr = alternating_search(in.data, search_from(o));
  const CvReport& r = sr.report;
  emit(o.out, out, [&](std::ostream& os) {
    os << "pass,kind,lambda_s,lambda_d,cv_loss,cv_se,selected\n";
    for (std::size_t k = 0; k < r.passes.size(); ++k) {
      const PassRecord& pr = r.passes[k];
      for (std::size_t i = 0; i < pr.values.size(); ++i) {
        const bool sparse = pr.kind == GridKind::sparsity;
        const double ls = sparse ? pr.values[i] : pr.other_lambda;
        const double ld = sparse ? pr.other_lambda : pr.values[i];
        os << k + 1 << ',' << to_string(pr.kind) << ',' << num(ls, 12) << ',' << num(ld, 12)
           << ',' << num(pr.cv_mean[i], 12) << ',' << num(pr.cv_se[i], 12) << ','
           << (pr.accepted && i == pr.best_index ? 1 : 0) << '\n';
      }
    }
  });
  std::vector<std::pair<std::string, std::string>> summary = {
      {"lambda_sparsity", num(r.lambda_s, 12)},
      {"lambda_diversity", num(r.lambda_d, 12)},
      {"cv_loss", num(r.cv_loss, 12)},
      {"passes", std::to_string(r.pass_count)},
      {"folds", std::to_string(o.folds)},
      {"seed", std::to_string(o.seed)},
  };
  for (const auto& w : r.warnings) err << "warning: " << w << '\n';
  if (!o.report.empty()) {
    emit(o.report, err, [&](std::ostream& os) { write_records(os, summary); });
  } else {
    write_records(err, summary);
  }
  return kSuccess;
}

int cmd_predict(const Options& o, std::ostream& out, std::ostream&) {
  if (o.model.empty() || o.data.empty()) throw UsageError("predict needs --model and --data");
  const ModelFile m = load_model(o.model);
  const DelimitedTable table = read_delimited(o.data, delimiter_char(o));
  const Matrix x = numeric_columns(table, m.names);
  emit(o.out, out, [&](std::ostream& os) {
    os << "row,probability,class\n";
    for (Index i = 0; i < x.rows(); ++i) {
      const double pr = ensemble_predict_proba(m.fit, x.row(i).transpose(), Scale::original);
      os << i + 1 << ',' << num(pr, 10) << ',' << classify(pr) << '\n';
    }
  });
  return kSuccess;
}

int cmd_path(const Options& o, std::ostream& out, std::ostream& err) {
  const Ingested in = load_training(o, err);
  HyperParams base = hyper_from(o);
  if (!given(o.lambda_d_opt)) base.lambda_d = 0.0;
  const double top = given(o.lambda_max_opt) ? o.lambda_max : lambda_s_max(in.data, base);
  const Grid grid = make_grid(GridKind::sparsity, o.grid_s, top, in.data.n(), in.data.p());
  const std::vector<SplitFit> path = solution_path(in.data, base, grid.values);

  std::vector<Index> vars;
  for (Index j = 0; j < in.data.p(); ++j) {
    for (const auto& f : path) {
      if ((f.coefs.row(j).array() != 0.0).any()) {
        vars.push_back(j);
        break;
      }
    }
  }
  bool all_converged = true;
  emit(o.out, out, [&](std::ostream& os) {
    os << "lambda_s,model,variable,coefficient\n";
    for (std::size_t l = 0; l < path.size(); ++l) {
      const SplitFit& f = path[l];
      all_converged = all_converged && f.converged;
      const Vector mean = f.ensemble_coefs(true);
      const std::string ls = num(grid.values[l], 12);
      for (Index j : vars) os << ls << ",0," << in.data.names[j] << ',' << num(mean[j], 12) << '\n';
      for (int g = 0; g < f.groups(); ++g) {
        for (Index j : vars) {
          os << ls << ',' << g + 1 << ',' << in.data.names[j] << ','
             << num(f.coefs_original(j, g), 12) << '\n';
        }
      }
    }
  });
  err << "points=" << path.size() << "\nlambda_max=" << num(top, 12) << '\n';
  return all_converged ? kSuccess : kNumerical;
}

int cmd_diversity(const Options& o, std::ostream& out, std::ostream&) {
  if (o.model.empty() || o.data.empty()) throw UsageError("diversity needs --model and --data");
  const ModelFile m = load_model(o.model);
  const DelimitedTable table = read_delimited(o.data, delimiter_char(o));
  const Matrix x = numeric_columns(table, m.names);
  const Vector y = parse_labels(table, o.label, positive(o));
  if (m.fit.groups() < 2) throw UsageError("diversity measures need a model with at least two groups");
  const DiversityReport r = diversity_report(m.fit, x, y, Scale::original);
  emit(o.out, out, [&](std::ostream& os) { write_records(os, r.to_records()); });
  return kSuccess;
}

int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  ScenarioConfig c;
  c.scenario = o.scenario;
  c.n = o.n;
  c.p = o.p;
  c.zeta = o.zeta;
  c.rho1 = o.rho1;
  c.rho2 = o.rho2;
  c.pi1 = o.pi1;
  c.block_size = o.block_size;
  c.test_size = o.test_size;
  TradeoffOptions t;
  t.alpha = o.alpha;
  t.folds = o.folds;
  t.grid_size_sparsity = o.grid_s;
  t.grid_size_diversity = o.grid_d;
  t.tol = o.tol;
  t.max_sweeps = o.max_sweeps;
  t.exec.threads = o.threads;
  const TradeoffStudy study = run_tradeoff_study(c, o.group_list, o.reps, o.seed, t);
  emit(o.out, out, [&](std::ostream& os) { write_tradeoff_csv(os, study); });
  if (!o.cells.empty()) {
    emit(o.cells, err, [&](std::ostream& os) {
      os << "replication,G,MR,MRbar,EM,OV,lambda_s,lambda_d,passes,converged,kkt\n";
      for (const auto& cell : study.cells) {
        os << cell.replication << ',' << cell.groups << ',' << num(cell.mr, 10) << ','
           << num(cell.mr_bar, 10) << ',' << num(cell.em, 10) << ','
           << (cell.ov ? num(*cell.ov, 10) : "NA") << ',' << num(cell.lambda_s, 12) << ','
           << num(cell.lambda_d, 12) << ',' << cell.passes << ',' << cell.converged << ','
           << num(cell.kkt, 6) << '\n';
      }
    });
  }
  return kSuccess;
}

void add_data_flags(CLI::App* sub, Options& o) {
  sub->add_option("--data", o.data, "Delimited input with a header row");
  sub->add_option("--label", o.label, "Name of the label column")->capture_default_str();
  sub->add_option("--positive-label", o.positive_label, "Label value mapped to class +1");
  sub->add_option("--delimiter", o.delimiter, "Field delimiter (',' by default, 'tab' for tabs)");
}

void add_model_flags(CLI::App* sub, Options& o, bool tuning) {
  sub->add_option("--alpha", o.alpha, "Elastic-net mixing weight in [0,1]")->capture_default_str();
  sub->add_option("-G,--groups", o.groups, "Number of models")->capture_default_str();
  sub->add_option("--tol", o.tol, "Convergence tolerance on squared ensemble changes")
      ->capture_default_str();
  sub->add_option("--max-sweeps", o.max_sweeps, "Sweep cap per fit")->capture_default_str();
  if (tuning) {
    sub->add_option("--cv-folds", o.folds, "Cross-validation folds")->capture_default_str();
    sub->add_option("--grid-size-diversity", o.grid_d, "Diversity grid length")
        ->capture_default_str();
    sub->add_option("--seed", o.seed, "Seed for fold assignment")->capture_default_str();
    sub->add_option("--threads", o.threads, "Worker threads for CV folds")->capture_default_str();
  }
  sub->add_option("--grid-size-sparsity", o.grid_s, "Sparsity grid length")->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Split logistic regression: sparse, diverse ensembles of logistic models"};
  app.name("splitlogit");
  app.require_subcommand(1);

  auto* fit_cmd = app.add_subcommand("fit", "Fit an ensemble and write a model file");
  auto* cv_cmd = app.add_subcommand("cv", "Tune the penalties by alternating grid search");
  auto* predict_cmd = app.add_subcommand("predict", "Ensemble probabilities for new rows");
  auto* path_cmd = app.add_subcommand("path", "Coefficient paths along the sparsity grid");
  auto* div_cmd = app.add_subcommand("diversity", "Diversity report on a labeled set");
  auto* sim_cmd = app.add_subcommand("simulate", "Accuracy/diversity study on synthetic data");

  std::vector<CLI::Option*> positive_opts;
  std::vector<CLI::Option*> lambda_s_opts;
  std::vector<CLI::Option*> lambda_d_opts;
  for (auto* sub : {fit_cmd, cv_cmd, path_cmd}) {
    add_data_flags(sub, o);
    positive_opts.push_back(sub->get_option("--positive-label"));
    add_model_flags(sub, o, sub != path_cmd);
    lambda_s_opts.push_back(sub->add_option("--lambda-sparsity", o.lambda_s, "Fix the sparsity penalty"));
    lambda_d_opts.push_back(sub->add_option("--lambda-diversity", o.lambda_d, "Fix the diversity penalty"));
    sub->add_option("--out", o.out, "Output path (stdout when omitted)");
    if (sub == cv_cmd) sub->add_option("--report", o.report, "Write the key=value summary here");
  }
  o.lambda_max_opt = path_cmd->add_option("--lambda-max", o.lambda_max, "Top of the sparsity grid");
  fit_cmd->add_flag("--cv", o.cv, "Tune whichever penalties are not supplied");

  for (auto* sub : {predict_cmd, div_cmd}) {
    sub->add_option("--model", o.model, "Model file written by `fit`")->required();
    add_data_flags(sub, o);
    positive_opts.push_back(sub->get_option("--positive-label"));
    sub->add_option("--out", o.out, "Output path (stdout when omitted)");
  }

  sim_cmd->add_option("--scenario", o.scenario, "Scenario 1, 2 or 3")->capture_default_str();
  sim_cmd->add_option("--n", o.n, "Training rows")->capture_default_str();
  sim_cmd->add_option("--p", o.p, "Predictors")->capture_default_str();
  sim_cmd->add_option("--zeta", o.zeta, "Proportion of active predictors")->capture_default_str();
  o.rho_opt = sim_cmd->add_option("--rho", o.rho1, "Scenario 1 correlation");
  sim_cmd->add_option("--rho1", o.rho1, "Cross-group correlation")->capture_default_str();
  sim_cmd->add_option("--rho2", o.rho2, "Within-group correlation")->capture_default_str();
  sim_cmd->add_option("--pi1", o.pi1, "Target P(Y = 1)")->capture_default_str();
  sim_cmd->add_option("--block-size", o.block_size, "Scenario 3 block size")->capture_default_str();
  sim_cmd->add_option("--test-size", o.test_size, "Test rows per replication")
      ->capture_default_str();
  sim_cmd->add_option("--groups-list", o.group_list, "Values of G")->delimiter(',');
  sim_cmd->add_option("--reps", o.reps, "Replications")->capture_default_str();
  sim_cmd->add_option("--seed", o.seed, "Base seed (replication r uses seed + r)")
      ->capture_default_str();
  sim_cmd->add_option("--alpha", o.alpha, "Elastic-net mixing weight")->capture_default_str();
  sim_cmd->add_option("--cv-folds", o.folds, "Cross-validation folds")->capture_default_str();
  sim_cmd->add_option("--grid-size-sparsity", o.grid_s, "Sparsity grid length")
      ->capture_default_str();
  sim_cmd->add_option("--grid-size-diversity", o.grid_d, "Diversity grid length")
      ->capture_default_str();
  sim_cmd->add_option("--tol", o.tol, "Convergence tolerance")->capture_default_str();
  sim_cmd->add_option("--max-sweeps", o.max_sweeps, "Sweep cap per fit")->capture_default_str();
  sim_cmd->add_option("--threads", o.threads, "Worker threads for replications")
      ->capture_default_str();
  sim_cmd->add_option("--cells", o.cells, "Also write per-replication cells here");
  sim_cmd->add_option("--out", o.out, "Output path (stdout when omitted)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsage;
  }
  for (auto* opt : positive_opts) {
    if (opt && opt->count() > 0) o.positive_opt = opt;
  }
  for (auto* opt : lambda_s_opts) {
    if (opt->count() > 0) o.lambda_s_opt = opt;
  }
  for (auto* opt : lambda_d_opts) {
    if (opt->count() > 0) o.lambda_d_opt = opt;
  }

  try {
    if (o.threads < 1) throw UsageError("--threads must be >= 1");
    if (*fit_cmd) return cmd_fit(o, out, err);
    if (*cv_cmd) return cmd_cv(o, out, err);
    if (*predict_cmd) return cmd_predict(o, out, err);
    if (*path_cmd) return cmd_path(o, out, err);
    if (*div_cmd) return cmd_diversity(o, out, err);
    if (*sim_cmd) return cmd_simulate(o, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const StructuralError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  }
  return kUsage;
}

}  // namespace splitlogit::cli
