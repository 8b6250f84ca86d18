#include "splitlogit/cli.hpp"
#include "splitlogit/io.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace splitlogit;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  return out;
}

class Workspace {
 public:
  Workspace() {
    dir_ = fs::temp_directory_path() / ("splitlogit_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir_);
    std::mt19937_64 rng(42);
    std::normal_distribution<double> nd;
    std::ofstream csv(path("train.csv"));
    csv << "g1,g2,g3,g4,g5,g6,status\n";
    for (int i = 0; i < 60; ++i) {
      double x[6];
      for (double& v : x) v = nd(rng);
      x[1] = 0.6 * x[0] + 0.8 * x[1];
      const double eta = 1.5 * x[0] - 1.2 * x[2] + 0.5 * nd(rng);
      for (double v : x) csv << v * 3.0 + 1.0 << ',';
      csv << (eta > 0 ? 1 : 0) << '\n';
    }
  }
  ~Workspace() { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

 private:
  fs::path dir_;
};

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"frobnicate"}).code == cli::kUsage);
  CHECK(run({"fit", "--alpha"}).code == cli::kUsage);
  CHECK(run({"predict", "--data", "x.csv"}).code == cli::kUsage);
  CHECK(run({"--help"}).code == cli::kSuccess);
  Workspace ws;
  const Result both = run({"fit", "--data", ws.path("train.csv"), "--label", "status", "--cv",
                           "--lambda-sparsity", "0.1", "--lambda-diversity", "0.1"});
  CHECK(both.code == cli::kUsage);
  CHECK(both.err.find("--cv") != std::string::npos);
  CHECK(run({"cv", "--data", ws.path("train.csv"), "--label", "status", "--lambda-sparsity", "0.1",
             "--lambda-diversity", "0.1"})
            .code == cli::kUsage);
}

TEST_CASE("data errors exit with 2") {
  Workspace ws;
  CHECK(run({"fit", "--data", ws.path("missing.csv"), "--lambda-sparsity", "0.1"}).code == cli::kData);
  const Result wrong_label = run({"fit", "--data", ws.path("train.csv"), "--label", "y",
                                  "--lambda-sparsity", "0.1", "--lambda-diversity", "0"});
  CHECK(wrong_label.code == cli::kData);
  CHECK(wrong_label.err.find("'y'") != std::string::npos);
  std::ofstream(ws.path("bad.json")) << R"({"format":"splitlogit-model","version":9})";
  CHECK(run({"predict", "--model", ws.path("bad.json"), "--data", ws.path("train.csv")}).code ==
        cli::kData);
}

TEST_CASE("non-converged fit exits with 3") {
  Workspace ws;
  const Result r = run({"fit", "--data", ws.path("train.csv"), "--label", "status", "-G", "2",
                        "--lambda-sparsity", "0.001", "--lambda-diversity", "0.01", "--max-sweeps",
                        "1", "--out", ws.path("m.json")});
  CHECK(r.code == cli::kNumerical);
  CHECK(r.err.find("converged=false") != std::string::npos);
}

TEST_CASE("fit with lambda_d = 0 gives identical models and predict reproduces them") {
  Workspace ws;
  const Result r = run({"fit", "--data", ws.path("train.csv"), "--label", "status", "-G", "3",
                        "--lambda-sparsity", "0.03", "--lambda-diversity", "0", "--out",
                        ws.path("m.json")});
  REQUIRE(r.code == cli::kSuccess);
  CHECK(r.err.find("converged=true") != std::string::npos);
  const ModelFile m = load_model(ws.path("m.json"));
  REQUIRE(m.fit.groups() == 3);
  for (int g = 1; g < 3; ++g) {
    CHECK((m.fit.coefs_original.col(g) - m.fit.coefs_original.col(0)).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(std::abs(m.fit.intercepts_original[g] - m.fit.intercepts_original[0]) <= 1e-6);
  }

  const Result p = run({"predict", "--model", ws.path("m.json"), "--data", ws.path("train.csv")});
  REQUIRE(p.code == cli::kSuccess);
  const auto out = lines(p.out);
  REQUIRE(out.size() == 61);
  CHECK(out[0] == "row,probability,class");
  const DelimitedTable table = read_delimited(ws.path("train.csv"), ',');
  const Matrix x = numeric_columns(table, m.names);
  for (Index i = 0; i < 60; ++i) {
    const auto f = fields(out[i + 1]);
    const double pr = ensemble_predict_proba(m.fit, x.row(i).transpose(), Scale::original);
    CHECK(f[0] == std::to_string(i + 1));
    CHECK(std::abs(std::stod(f[1]) - pr) <= 1e-10 * std::max(1.0, pr) + 5e-11);
    CHECK(std::stoi(f[2]) == classify(pr));
  }
}

TEST_CASE("fit tunes whatever is not supplied and is repeatable") {
  Workspace ws;
  const std::vector<std::string> args = {"fit", "--data", ws.path("train.csv"), "--label", "status",
                                         "-G", "2", "--cv-folds", "3", "--grid-size-sparsity", "6",
                                         "--grid-size-diversity", "4", "--seed", "5"};
  const Result a = run(args);
  const Result b = run(args);
  REQUIRE(a.code == cli::kSuccess);
  CHECK(a.out == b.out);
  CHECK(a.err == b.err);
  CHECK(a.err.find("cv_loss=") != std::string::npos);
  CHECK(a.out.find("\"format\": \"splitlogit-model\"") != std::string::npos);
}

TEST_CASE("cv writes the grid table and a summary") {
  Workspace ws;
  const Result r = run({"cv", "--data", ws.path("train.csv"), "--label", "status", "-G", "2",
                        "--cv-folds", "3", "--grid-size-sparsity", "5", "--grid-size-diversity",
                        "3", "--seed", "1", "--report", ws.path("summary.txt")});
  REQUIRE(r.code == cli::kSuccess);
  const auto out = lines(r.out);
  CHECK(out[0] == "pass,kind,lambda_s,lambda_d,cv_loss,cv_se,selected");
  CHECK(fields(out[1])[1] == "sparsity");
  int selected = 0;
  for (std::size_t i = 1; i < out.size(); ++i) selected += fields(out[i])[6] == "1";
  CHECK(selected >= 1);
  const std::string summary = slurp(ws.path("summary.txt"));
  for (const char* key : {"lambda_sparsity=", "lambda_diversity=", "cv_loss=", "passes=", "folds=3",
                          "seed=1"}) {
    CHECK(summary.find(key) != std::string::npos);
  }
}

TEST_CASE("path output is ordered by descending lambda, model, then variable") {
  Workspace ws;
  const Result r = run({"path", "--data", ws.path("train.csv"), "--label", "status", "-G", "2",
                        "--lambda-diversity", "0.05", "--grid-size-sparsity", "8"});
  REQUIRE(r.code == cli::kSuccess);
  CHECK(r.err.find("points=8") != std::string::npos);
  const auto out = lines(r.out);
  CHECK(out[0] == "lambda_s,model,variable,coefficient");
  std::vector<std::string> order = {"g1", "g2", "g3", "g4", "g5", "g6"};
  double prev_ls = INFINITY;
  int prev_model = -1;
  std::size_t prev_var = 0;
  for (std::size_t i = 1; i < out.size(); ++i) {
    const auto f = fields(out[i]);
    REQUIRE(f.size() == 4);
    const double ls = std::stod(f[0]);
    const int model = std::stoi(f[1]);
    const std::size_t var = std::find(order.begin(), order.end(), f[2]) - order.begin();
    CHECK(var < order.size());
    CHECK(model >= 0);
    CHECK(model <= 2);
    if (ls != prev_ls) {
      CHECK(ls < prev_ls);
    } else if (model != prev_model) {
      CHECK(model > prev_model);
    } else {
      CHECK(var > prev_var);
    }
    prev_ls = ls;
    prev_model = model;
    prev_var = var;
  }
  // First grid point is the null model.
  for (std::size_t i = 1; i < out.size() && std::stod(fields(out[i])[0]) == std::stod(fields(out[1])[0]); ++i) {
    CHECK(std::stod(fields(out[i])[3]) == 0.0);
  }
}

TEST_CASE("diversity report from a model file") {
  Workspace ws;
  REQUIRE(run({"fit", "--data", ws.path("train.csv"), "--label", "status", "-G", "3",
               "--lambda-sparsity", "0.02", "--lambda-diversity", "0.2", "--out", ws.path("m.json")})
              .code == cli::kSuccess);
  const Result r = run({"diversity", "--model", ws.path("m.json"), "--data", ws.path("train.csv"),
                        "--label", "status"});
  REQUIRE(r.code == cli::kSuccess);
  const auto out = lines(r.out);
  CHECK(out[0] == "groups=3");
  for (const char* key : {"em=", "dis=", "df=", "kw=", "gd=", "ov=", "mr_ensemble=", "mr_model_3="}) {
    CHECK(r.out.find(key) != std::string::npos);
  }

  REQUIRE(run({"fit", "--data", ws.path("train.csv"), "--label", "status", "-G", "1",
               "--lambda-sparsity", "0.02", "--out", ws.path("one.json")})
              .code == cli::kSuccess);
  CHECK(run({"diversity", "--model", ws.path("one.json"), "--data", ws.path("train.csv"), "--label",
             "status"})
            .code == cli::kUsage);
}

TEST_CASE("simulate writes the trade-off table") {
  Workspace ws;
  const std::vector<std::string> args = {
      "simulate", "--scenario", "1", "--n", "40", "--p", "20", "--zeta", "0.25", "--rho", "0.3",
      "--test-size", "100", "--groups-list", "2,3", "--reps", "1", "--seed", "3", "--cv-folds", "3",
      "--grid-size-sparsity", "5", "--grid-size-diversity", "3", "--cells", ws.path("cells.csv")};
  const Result r = run(args);
  REQUIRE(r.code == cli::kSuccess);
  const auto out = lines(r.out);
  REQUIRE(out.size() == 3);
  CHECK(out[0] == "G,MR,MRbar,EM,OV,DIS,DF,KW,GD,n,p,zeta,rho1,rho2,pi1,reps,seed");
  CHECK(fields(out[1])[0] == "2");
  CHECK(fields(out[2])[0] == "3");
  CHECK(lines(slurp(ws.path("cells.csv"))).size() == 3);
  CHECK(run(args).out == r.out);
  CHECK(run({"simulate", "--scenario", "4"}).code == cli::kData);
}
