#pragma once

// Delimited-text ingestion and the versioned model file.

#include "splitlogit/core.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace splitlogit {

inline constexpr int kModelFormatVersion = 1;

struct DelimitedTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Throws DataError naming the column when it is absent.
  std::size_t column(const std::string& name) const;
};

DelimitedTable parse_delimited(std::istream& in, char delimiter);
DelimitedTable read_delimited(const std::string& path, char delimiter);

struct Ingested {
  Dataset data;
  std::vector<std::string> warnings;
};

/// Every column except the label becomes a predictor. Labels are mapped to
/// ±1: with `positive_label`, that value is +1 and the one other value is
/// −1; otherwise the numeric values 1 → +1 and 0 or −1 → −1.
Ingested ingest(const DelimitedTable& table, const std::string& label_column,
                const std::optional<std::string>& positive_label);
Ingested ingest(const std::string& path, const std::string& label_column,
                const std::optional<std::string>& positive_label, char delimiter);

/// Numeric matrix of the named columns, in the given order.
Matrix numeric_columns(const DelimitedTable& table, const std::vector<std::string>& names);

/// Labels of an already-parsed table, mapped as in ingest().
Vector parse_labels(const DelimitedTable& table, const std::string& label_column,
                    const std::optional<std::string>& positive_label);

struct ModelFile {
  SplitFit fit;
  std::vector<std::string> names;
  Vector col_means;
  Vector col_scales;
};

/// Writes the input-scale parameters as sparse (model, variable, value)
/// triplets with round-trip precision, plus standardization metadata and
/// fit diagnostics.
void save_model(std::ostream& out, const SplitFit& fit, const Dataset& data);
void save_model(const std::string& path, const SplitFit& fit, const Dataset& data);

/// Rebuilds both parameter scales from the file. Rejects unknown versions.
ModelFile load_model(std::istream& in);
ModelFile load_model(const std::string& path);

}  // namespace splitlogit
