#pragma once

#include <cstddef>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bvlmc/core.hpp"

namespace bvlmc {

enum class Transform { None, LogReturn, BinarizeSign };

Transform transform_from_string(const std::string& name);

/// A CSV column and the transforms applied to it, in order.
struct ColumnSpec {
  std::string column;
  std::vector<Transform> transforms;
};

/// Which CSV columns form the state sequence and the covariates.
///
/// JSON form:
///   { "target": {"column": "hsi", "transform": ["log_return", "binarize_sign"]},
///     "covariates": [ {"column": "nyci", "transform": "log_return"} ],
///     "states": 2 }
/// "transform" is a name or a list of names (none | log_return |
/// binarize_sign); "states" is optional (default: max state + 1, at least 2).
struct IngestSpec {
  ColumnSpec target;
  std::vector<ColumnSpec> covariates;
  int states = 0;
};

IngestSpec ingest_spec_from_json(const nlohmann::json& j);
IngestSpec load_ingest_spec(const std::string& path);

/// Comma-separated, header row required, '.' decimal separator.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column_index(const std::string& name) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

struct IngestResult {
  Dataset data;
  /// CSV data row (0-based, header excluded) behind each Dataset row.
  std::vector<std::size_t> source_rows;
};

/// Builds a Dataset from a CSV table. Row t holds the transformed values
/// of source row source_rows[t]; the model's lag structure makes the
/// covariates of row t-1 predict the state of row t. Rows lost to
/// differencing are dropped.
IngestResult ingest(const CsvTable& table, const IngestSpec& spec);
IngestResult ingest(const std::string& csv_path, const IngestSpec& spec);

/// Default spec: first column is the state, every other column a
/// covariate, no transforms.
IngestSpec default_ingest_spec(const CsvTable& table);

/// Converts a chronological sequence (oldest first) to reverse time.
std::vector<int> to_reverse_time(std::span<const int> chronological);
/// Chronological covariate rows (oldest first) to most-recent-first rows.
Eigen::MatrixXd to_reverse_time(const Eigen::MatrixXd& chronological);

/// Writes a Dataset as CSV with columns y, x1..xd.
void write_dataset_csv(const Dataset& data, std::ostream& out);

}  // namespace bvlmc
