#include "bvlmc/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "bvlmc/error.hpp"

namespace bvlmc {

using nlohmann::json;

Transform transform_from_string(const std::string& name) {
  if (name == "none") return Transform::None;
  if (name == "log_return") return Transform::LogReturn;
  if (name == "binarize_sign") return Transform::BinarizeSign;
  throw UsageError("unknown transform \"" + name + "\" (expected none, log_return or binarize_sign)");
}

namespace {

ColumnSpec column_spec_from_json(const json& j) {
  ColumnSpec spec;
  if (j.is_string()) {
    spec.column = j.get<std::string>();
    return spec;
  }
  if (!j.is_object() || !j.contains("column") || !j["column"].is_string())
    throw UsageError("column spec needs a \"column\" name");
  spec.column = j["column"].get<std::string>();
  if (j.contains("transform")) {
    const auto& t = j["transform"];
    if (t.is_string()) {
      spec.transforms.push_back(transform_from_string(t.get<std::string>()));
    } else if (t.is_array()) {
      for (const auto& name : t) spec.transforms.push_back(transform_from_string(name.get<std::string>()));
    } else {
      throw UsageError("\"transform\" must be a name or a list of names");
    }
  }
  return spec;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(trim(std::move(cell)));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  cells.push_back(trim(std::move(cell)));
  return cells;
}

std::optional<double> parse_number(const std::string& text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || first == last) return std::nullopt;
  return value;
}

// Transformed column; entry t is empty where differencing consumed it.
std::vector<std::optional<double>> transformed_column(const CsvTable& table, const ColumnSpec& spec) {
  const std::size_t col = table.column_index(spec.column);
  std::vector<std::optional<double>> values;
  values.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string cell = col < row.size() ? row[col] : std::string();
    auto v = parse_number(cell);
    if (!v) throw NonNumericCell(r + 1, spec.column, cell);
    values.push_back(v);
  }
  for (Transform t : spec.transforms) {
    switch (t) {
      case Transform::None:
        break;
      case Transform::LogReturn: {
        std::vector<std::optional<double>> next(values.size());
        for (std::size_t r = 1; r < values.size(); ++r) {
          if (!values[r] || !values[r - 1]) continue;
          if (!(*values[r] > 0.0) || !(*values[r - 1] > 0.0))
            throw DataError("log_return needs positive values in column \"" + spec.column + "\" (row " +
                            std::to_string(r + 1) + ")");
          next[r] = std::log(*values[r] / *values[r - 1]);
        }
        values = std::move(next);
        break;
      }
      case Transform::BinarizeSign:
        for (auto& v : values)
          if (v) v = *v > 0.0 ? 1.0 : 0.0;
        break;
    }
  }
  return values;
}

}  // namespace

IngestSpec ingest_spec_from_json(const json& j) {
  if (!j.is_object() || !j.contains("target")) throw UsageError("ingest spec needs a \"target\"");
  IngestSpec spec;
  spec.target = column_spec_from_json(j["target"]);
  if (j.contains("covariates")) {
    if (!j["covariates"].is_array()) throw UsageError("\"covariates\" must be an array");
    for (const auto& c : j["covariates"]) spec.covariates.push_back(column_spec_from_json(c));
  }
  if (j.contains("states")) spec.states = j["states"].get<int>();
  return spec;
}

IngestSpec load_ingest_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ingest spec " + path);
  try {
    return ingest_spec_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw UsageError("ingest spec " + path + " is not valid: " + e.what());
  }
}

std::size_t CsvTable::column_index(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw MissingColumn("column \"" + name + "\" not in CSV header");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      // Strip a UTF-8 byte-order mark.
      if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
      if (trim(line).empty()) continue;
      table.header = split_line(line);
      have_header = true;
      continue;
    }
    if (trim(line).empty()) continue;
    table.rows.push_back(split_line(line));
  }
  if (!have_header) throw DataError("CSV has no header row");
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_csv(in);
}

IngestResult ingest(const CsvTable& table, const IngestSpec& spec) {
  const auto target = transformed_column(table, spec.target);
  std::vector<std::vector<std::optional<double>>> covs;
  for (const auto& c : spec.covariates) covs.push_back(transformed_column(table, c));

  IngestResult out;
  std::vector<int> states;
  std::vector<std::vector<double>> rows;
  int max_state = 0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    bool complete = target[r].has_value();
    for (const auto& c : covs) complete = complete && c[r].has_value();
    if (!complete) continue;
    const double y = *target[r];
    if (y < 0.0 || y != std::floor(y) || y > 1e6)
      throw DataError("target column \"" + spec.target.column + "\" row " + std::to_string(r + 1) +
                      " is not a state index: " + std::to_string(y));
    states.push_back(static_cast<int>(y));
    max_state = std::max(max_state, states.back());
    std::vector<double> x;
    for (const auto& c : covs) x.push_back(*c[r]);
    rows.push_back(std::move(x));
    out.source_rows.push_back(r);
  }
  if (states.empty()) throw EmptyAfterTransform("no rows left after applying the transforms");

  out.data.p = spec.states > 0 ? spec.states : std::max(2, max_state + 1);
  out.data.states = std::move(states);
  out.data.covariates.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(covs.size()));
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t j = 0; j < covs.size(); ++j)
      out.data.covariates(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = rows[t][j];
  out.data.validate();
  return out;
}

IngestResult ingest(const std::string& csv_path, const IngestSpec& spec) { return ingest(read_csv_file(csv_path), spec); }

IngestSpec default_ingest_spec(const CsvTable& table) {
  if (table.header.empty()) throw DataError("CSV header is empty");
  IngestSpec spec;
  spec.target.column = table.header.front();
  for (std::size_t i = 1; i < table.header.size(); ++i) spec.covariates.push_back({table.header[i], {}});
  return spec;
}

std::vector<int> to_reverse_time(std::span<const int> chronological) {
  return std::vector<int>(chronological.rbegin(), chronological.rend());
}

Eigen::MatrixXd to_reverse_time(const Eigen::MatrixXd& chronological) { return chronological.colwise().reverse(); }

void write_dataset_csv(const Dataset& data, std::ostream& out) {
  out << 'y';
  for (int j = 0; j < data.dim(); ++j) out << ",x" << j + 1;
  out << '\n';
  std::ostringstream line;
  line << std::setprecision(17);
  for (std::size_t t = 0; t < data.size(); ++t) {
    line.str("");
    line << data.states[t];
    for (int j = 0; j < data.dim(); ++j) line << ',' << data.covariates(static_cast<Eigen::Index>(t), j);
    out << line.str() << '\n';
  }
}

}  // namespace bvlmc
