#include "splitlogit/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace splitlogit {

namespace {

using json = nlohmann::ordered_json;

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  std::string out = s.substr(first, last - first + 1);
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') {
    out = out.substr(1, out.size() - 2);
  }
  return out;
}

std::vector<std::string> split(const std::string& line, char delimiter) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') quoted = !quoted;
    if (ch == delimiter && !quoted) {
      fields.push_back(trim(field));
      field.clear();
    } else {
      field.push_back(ch);
    }
  }
  fields.push_back(trim(field));
  return fields;
}

bool is_missing(const std::string& cell) {
  static const std::set<std::string> markers = {"", "NA", "na", "NaN", "nan", "?", "null", "NULL"};
  return markers.count(cell) > 0;
}

std::optional<double> parse_number(const std::string& cell) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string where(std::size_t row, const std::string& column) {
  // Row numbers count the header as line 1.
  return "line " + std::to_string(row + 2) + ", column '" + column + "'";
}

}  // namespace

std::size_t DelimitedTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError("column '" + name + "' not found in header");
  return static_cast<std::size_t>(it - header.begin());
}

DelimitedTable parse_delimited(std::istream& in, char delimiter) {
  DelimitedTable t;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line, delimiter);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw DataError("line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                      " fields, header has " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  if (!have_header) throw DataError("input has no header row");
  return t;
}

DelimitedTable read_delimited(const std::string& path, char delimiter) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_delimited(in, delimiter);
}

Matrix numeric_columns(const DelimitedTable& table, const std::vector<std::string>& names) {
  std::vector<std::size_t> cols;
  cols.reserve(names.size());
  for (const auto& n : names) cols.push_back(table.column(n));
  Matrix x(static_cast<Index>(table.rows.size()), static_cast<Index>(cols.size()));
  std::vector<std::string> missing;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const std::string& cell = table.rows[r][cols[c]];
      if (is_missing(cell)) {
        missing.push_back(where(r, names[c]));
        continue;
      }
      const auto v = parse_number(cell);
      if (!v) throw DataError("non-numeric value '" + cell + "' at " + where(r, names[c]));
      x(static_cast<Index>(r), static_cast<Index>(c)) = *v;
    }
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << missing.size() << " missing value(s): ";
    for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 20); ++i) {
      msg << (i ? "; " : "") << missing[i];
    }
    if (missing.size() > 20) msg << "; ...";
    throw DataError(msg.str());
  }
  return x;
}

Vector parse_labels(const DelimitedTable& table, const std::string& label_column,
                    const std::optional<std::string>& positive_label) {
  const std::size_t col = table.column(label_column);
  Vector y(static_cast<Index>(table.rows.size()));
  std::set<std::string> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string& cell = table.rows[r][col];
    if (is_missing(cell)) throw DataError("missing label at " + where(r, label_column));
    double v;
    if (positive_label) {
      seen.insert(cell);
      if (seen.size() > 2) {
        throw DataError("label '" + cell + "' at " + where(r, label_column) +
                        " is a third class; labels must be binary");
      }
      v = cell == *positive_label ? 1.0 : -1.0;
    } else {
      const auto num = parse_number(cell);
      if (!num || !(*num == 1.0 || *num == 0.0 || *num == -1.0)) {
        throw DataError("unparseable label '" + cell + "' at " + where(r, label_column) +
                        " (expected 0/1 or -1/+1, or pass a positive label)");
      }
      v = *num == 1.0 ? 1.0 : -1.0;
    }
    y[static_cast<Index>(r)] = v;
  }
  return y;
}

Ingested ingest(const DelimitedTable& table, const std::string& label_column,
                const std::optional<std::string>& positive_label) {
  const std::size_t label_col = table.column(label_column);
  std::vector<std::string> names;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c != label_col) names.push_back(table.header[c]);
  }
  if (names.empty()) throw DataError("input has no predictor columns");
  if (table.rows.empty()) throw DataError("input has no data rows");

  const Matrix raw = numeric_columns(table, names);
  const Vector y = parse_labels(table, label_column, positive_label);
  Ingested out{Dataset::standardize(raw, y, names), {}};
  for (Index j = 0; j < out.data.p(); ++j) {
    if (out.data.is_constant(j)) {
      out.warnings.push_back("column '" + out.data.names[j] +
                             "' is constant; its coefficients are fixed at zero");
    }
  }
  return out;
}

Ingested ingest(const std::string& path, const std::string& label_column,
                const std::optional<std::string>& positive_label, char delimiter) {
  return ingest(read_delimited(path, delimiter), label_column, positive_label);
}

void save_model(std::ostream& out, const SplitFit& fit, const Dataset& data) {
  if (fit.p() != data.p()) throw StructuralError("save_model: fit and data disagree on p");
  json j;
  j["format"] = "splitlogit-model";
  j["version"] = kModelFormatVersion;
  j["alpha"] = fit.hyper.alpha;
  j["lambda_sparsity"] = fit.hyper.lambda_s;
  j["lambda_diversity"] = fit.hyper.lambda_d;
  j["groups"] = fit.groups();
  j["tol"] = fit.hyper.tol;
  j["max_sweeps"] = fit.hyper.max_sweeps;
  j["intercepts"] = std::vector<double>(fit.intercepts_original.data(),
                                        fit.intercepts_original.data() + fit.groups());
  json triplets = json::array();
  for (int g = 0; g < fit.groups(); ++g) {
    for (Index k = 0; k < fit.p(); ++k) {
      const double v = fit.coefs_original(k, g);
      if (v != 0.0) triplets.push_back({{"model", g + 1}, {"variable", data.names[k]}, {"value", v}});
    }
  }
  j["coefficients"] = std::move(triplets);
  j["standardization"] = {
      {"variables", data.names},
      {"means", std::vector<double>(data.col_means.data(), data.col_means.data() + data.p())},
      {"scales", std::vector<double>(data.col_scales.data(), data.col_scales.data() + data.p())}};
  j["diagnostics"] = {{"converged", fit.converged},
                      {"sweeps", fit.sweeps_used},
                      {"objective", fit.objective_value}};
  out << j.dump(2) << '\n';
}

void save_model(const std::string& path, const SplitFit& fit, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  save_model(out, fit, data);
}

ModelFile load_model(std::istream& in) {
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("format", std::string()) != "splitlogit-model") {
      throw DataError("not a splitlogit model file");
    }
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw DataError("unsupported model format version " + std::to_string(version));
    }
    ModelFile m;
    m.names = j.at("standardization").at("variables").get<std::vector<std::string>>();
    const auto means = j.at("standardization").at("means").get<std::vector<double>>();
    const auto scales = j.at("standardization").at("scales").get<std::vector<double>>();
    const Index p = static_cast<Index>(m.names.size());
    if (static_cast<Index>(means.size()) != p || static_cast<Index>(scales.size()) != p) {
      throw DataError("model file: standardization arrays disagree in length");
    }
    m.col_means = Eigen::Map<const Vector>(means.data(), p);
    m.col_scales = Eigen::Map<const Vector>(scales.data(), p);

    SplitFit& f = m.fit;
    f.hyper.alpha = j.at("alpha").get<double>();
    f.hyper.lambda_s = j.at("lambda_sparsity").get<double>();
    f.hyper.lambda_d = j.at("lambda_diversity").get<double>();
    f.hyper.groups = j.at("groups").get<int>();
    f.hyper.tol = j.value("tol", 1e-8);
    f.hyper.max_sweeps = j.value("max_sweeps", 1000);
    const int G = f.hyper.groups;
    const auto b0 = j.at("intercepts").get<std::vector<double>>();
    if (static_cast<int>(b0.size()) != G) throw DataError("model file: intercept count != groups");
    f.intercepts_original = Eigen::Map<const Vector>(b0.data(), G);
    f.coefs_original = Matrix::Zero(p, G);

    std::map<std::string, Index> index;
    for (Index k = 0; k < p; ++k) index[m.names[k]] = k;
    for (const auto& t : j.at("coefficients")) {
      const int g = t.at("model").get<int>();
      const auto name = t.at("variable").get<std::string>();
      const auto it = index.find(name);
      if (g < 1 || g > G || it == index.end()) {
        throw DataError("model file: coefficient refers to unknown model or variable '" + name + "'");
      }
      f.coefs_original(it->second, g - 1) = t.at("value").get<double>();
    }

    f.coefs = Matrix::Zero(p, G);
    f.intercepts = f.intercepts_original;
    for (int g = 0; g < G; ++g) {
      for (Index k = 0; k < p; ++k) {
        f.coefs(k, g) = f.coefs_original(k, g) * m.col_scales[k];
        f.intercepts[g] += f.coefs_original(k, g) * m.col_means[k];
      }
    }
    const auto& diag = j.at("diagnostics");
    f.converged = diag.value("converged", false);
    f.sweeps_used = diag.value("sweeps", 0);
    f.objective_value = diag.value("objective", 0.0);
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("model file is malformed: ") + e.what());
  }
}

ModelFile load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  return load_model(in);
}

}  // namespace splitlogit
