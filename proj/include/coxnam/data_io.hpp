#pragma once

// CSV ingestion for survival data: a small key-value schema file names the
// time/event columns and the feature columns with their kinds; categorical
// columns are one-hot encoded, binary ones become a single 0/1 column, and
// numeric columns are z-scored with statistics from a training split.
//
// Schema grammar, one `key = value` per line, `#` starts a comment:
//   time        = <column>
//   event       = <column>
//   event_true  = <token>[, <token>...]   # default: 1
//   event_false = <token>[, <token>...]   # default: 0
//   numeric     = <column>[, <column>...]
//   categorical = <column>[, ...]         # one 0/1 column per level
//   binary      = <column>[, ...]         # exactly two levels, one column
// Keys other than time/event may repeat; lists accumulate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "coxnam/errors.hpp"
#include "coxnam/survival.hpp"

namespace coxnam {

enum class ColumnKind { numeric, categorical, binary };

inline const char* to_string(ColumnKind k) {
  switch (k) {
    case ColumnKind::numeric:
      return "numeric";
    case ColumnKind::categorical:
      return "categorical";
    case ColumnKind::binary:
      return "binary";
  }
  return "numeric";
}

struct FeatureColumn {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
};

struct DatasetSchema {
  std::string time_column;
  std::string event_column;
  std::vector<std::string> event_true{"1"};
  std::vector<std::string> event_false{"0"};
  std::vector<FeatureColumn> features;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" ||
         cell == "?";
}

inline bool parse_number(const std::string& cell, double& out) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end != begin && *end == '\0' && std::isfinite(out);
}

}  // namespace detail

inline DatasetSchema parse_schema(const std::string& text) {
  DatasetSchema schema;
  bool event_true_set = false;
  bool event_false_set = false;
  std::stringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError("schema line " + std::to_string(lineno) +
                      ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key == "time") {
      schema.time_column = value;
    } else if (key == "event") {
      schema.event_column = value;
    } else if (key == "event_true") {
      if (!event_true_set) schema.event_true.clear();
      event_true_set = true;
      for (auto& v : detail::split_list(value)) schema.event_true.push_back(v);
    } else if (key == "event_false") {
      if (!event_false_set) schema.event_false.clear();
      event_false_set = true;
      for (auto& v : detail::split_list(value)) schema.event_false.push_back(v);
    } else if (key == "numeric" || key == "categorical" || key == "binary") {
      const ColumnKind kind = key == "numeric"       ? ColumnKind::numeric
                              : key == "categorical" ? ColumnKind::categorical
                                                     : ColumnKind::binary;
      for (auto& v : detail::split_list(value)) {
        schema.features.push_back({v, kind});
      }
    } else {
      throw DataError("schema line " + std::to_string(lineno) +
                      ": unknown key '" + key + "'");
    }
  }
  if (schema.time_column.empty()) throw DataError("schema has no time column");
  if (schema.event_column.empty()) {
    throw DataError("schema has no event column");
  }
  if (schema.features.empty()) throw DataError("schema lists no features");
  for (std::size_t i = 0; i < schema.features.size(); ++i) {
    const auto& name = schema.features[i].name;
    if (name == schema.time_column || name == schema.event_column) {
      throw DataError("feature '" + name + "' is also the time/event column");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (schema.features[j].name == name) {
        throw DataError("feature '" + name + "' is listed twice");
      }
    }
  }
  return schema;
}

inline DatasetSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_schema(ss.str());
}

inline std::string format_schema(const DatasetSchema& schema) {
  std::ostringstream out;
  out << "time = " << schema.time_column << "\n";
  out << "event = " << schema.event_column << "\n";
  out << "event_true = ";
  for (std::size_t i = 0; i < schema.event_true.size(); ++i) {
    out << (i ? ", " : "") << schema.event_true[i];
  }
  out << "\n";
  out << "event_false = ";
  for (std::size_t i = 0; i < schema.event_false.size(); ++i) {
    out << (i ? ", " : "") << schema.event_false[i];
  }
  out << "\n";
  for (const auto& f : schema.features) {
    out << to_string(f.kind) << " = " << f.name << "\n";
  }
  return out.str();
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

// RFC-4180-style fields: comma separated, optional double quotes.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(detail::trim(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  out.push_back(detail::trim(cell));
  return out;
}

inline CsvTable parse_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV file is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
    line.erase(0, 3);
  }
  table.header = split_csv_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != table.header.size()) {
      throw DataError("CSV line " + std::to_string(lineno) + " has " +
                      std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  return table;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file: " + path);
  return parse_csv(in);
}

// Schema plus everything learned from data: category levels and z-score
// statistics. Applying it to new data never re-fits.
struct FittedSchema {
  DatasetSchema schema;
  std::map<std::string, std::vector<std::string>> levels;
  std::vector<std::string> feature_names;
  std::vector<FeatureKind> feature_kinds;
  std::vector<double> mean;  // per encoded feature; 0 for category columns
  std::vector<double> scale;  // per encoded feature; 1 for category columns
  bool standardized = false;
};

inline FittedSchema fit_levels(const CsvTable& table,
                               const DatasetSchema& schema) {
  FittedSchema fitted;
  fitted.schema = schema;
  table.column(schema.time_column);
  table.column(schema.event_column);
  for (const auto& f : schema.features) {
    const std::size_t c = table.column(f.name);
    if (f.kind == ColumnKind::numeric) {
      fitted.feature_names.push_back(f.name);
      fitted.feature_kinds.push_back(FeatureKind::numeric);
      continue;
    }
    std::vector<std::string> lv;
    for (const auto& row : table.rows) {
      if (!detail::is_missing(row[c])) lv.push_back(row[c]);
    }
    std::sort(lv.begin(), lv.end());
    lv.erase(std::unique(lv.begin(), lv.end()), lv.end());
    if (f.kind == ColumnKind::binary) {
      if (lv.size() != 2) {
        throw DataError("binary column '" + f.name + "' has " +
                        std::to_string(lv.size()) + " levels, expected 2");
      }
      fitted.feature_names.push_back(f.name + "=" + lv[1]);
      fitted.feature_kinds.push_back(FeatureKind::category);
    } else {
      if (lv.empty()) {
        throw DataError("categorical column '" + f.name + "' has no values");
      }
      for (const auto& l : lv) {
        fitted.feature_names.push_back(f.name + "=" + l);
        fitted.feature_kinds.push_back(FeatureKind::category);
      }
    }
    fitted.levels[f.name] = std::move(lv);
  }
  fitted.mean.assign(fitted.feature_names.size(), 0.0);
  fitted.scale.assign(fitted.feature_names.size(), 1.0);
  return fitted;
}

// Encodes rows with the fitted levels and (if present) the fitted z-scores.
// Rows with a missing time or event are dropped and reported to `warnings`.
inline SurvivalDataset encode(const CsvTable& table, const FittedSchema& fitted,
                              std::ostream* warnings = &std::cerr) {
  const DatasetSchema& schema = fitted.schema;
  const std::size_t tc = table.column(schema.time_column);
  const std::size_t ec = table.column(schema.event_column);
  std::vector<std::size_t> fc;
  for (const auto& f : schema.features) fc.push_back(table.column(f.name));

  std::vector<Sample> samples;
  std::size_t dropped = 0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = "row " + std::to_string(r + 1);
    if (detail::is_missing(row[tc]) || detail::is_missing(row[ec])) {
      ++dropped;
      continue;
    }
    Sample s;
    if (!detail::parse_number(row[tc], s.time) || s.time < 0.0) {
      throw DataError(where + ": unparseable time '" + row[tc] + "'");
    }
    const std::string& ev = row[ec];
    if (std::find(schema.event_true.begin(), schema.event_true.end(), ev) !=
        schema.event_true.end()) {
      s.event = true;
    } else if (std::find(schema.event_false.begin(), schema.event_false.end(),
                         ev) != schema.event_false.end()) {
      s.event = false;
    } else {
      double v = 0.0;
      if (!detail::parse_number(ev, v) || (v != 0.0 && v != 1.0)) {
        throw DataError(where + ": event value '" + ev +
                        "' is not 0/1 or an event_true/event_false token");
      }
      s.event = v == 1.0;
    }
    for (std::size_t i = 0; i < schema.features.size(); ++i) {
      const auto& f = schema.features[i];
      const std::string& cell = row[fc[i]];
      if (detail::is_missing(cell)) {
        throw DataError(where + ": missing value in feature '" + f.name + "'");
      }
      if (f.kind == ColumnKind::numeric) {
        double v = 0.0;
        if (!detail::parse_number(cell, v)) {
          throw DataError(where + ": unparseable value '" + cell +
                          "' in column '" + f.name + "'");
        }
        s.features.push_back(v);
        continue;
      }
      const auto& lv = fitted.levels.at(f.name);
      const auto it = std::find(lv.begin(), lv.end(), cell);
      if (it == lv.end()) {
        throw DataError(where + ": unseen level '" + cell + "' in column '" +
                        f.name + "'");
      }
      const auto idx = static_cast<std::size_t>(it - lv.begin());
      if (f.kind == ColumnKind::binary) {
        s.features.push_back(idx == 1 ? 1.0 : 0.0);
      } else {
        for (std::size_t l = 0; l < lv.size(); ++l) {
          s.features.push_back(l == idx ? 1.0 : 0.0);
        }
      }
    }
    for (std::size_t k = 0; k < s.features.size(); ++k) {
      s.features[k] = (s.features[k] - fitted.mean[k]) / fitted.scale[k];
    }
    samples.push_back(std::move(s));
  }
  if (dropped > 0 && warnings) {
    *warnings << "warning: dropped " << dropped
              << " row(s) with missing time or event\n";
  }
  return SurvivalDataset(std::move(samples), fitted.feature_names,
                         fitted.feature_kinds);
}

// Population mean / standard deviation of numeric features. A constant
// column keeps scale 1.
inline void fit_standardization(FittedSchema& fitted,
                                const SurvivalDataset& train) {
  const std::size_t m = fitted.feature_names.size();
  fitted.mean.assign(m, 0.0);
  fitted.scale.assign(m, 1.0);
  const double n = static_cast<double>(train.size());
  for (std::size_t k = 0; k < m; ++k) {
    if (fitted.feature_kinds[k] != FeatureKind::numeric) continue;
    double sum = 0.0;
    for (const auto& s : train.samples()) sum += s.features[k];
    const double mu = sum / n;
    double ss = 0.0;
    for (const auto& s : train.samples()) {
      ss += (s.features[k] - mu) * (s.features[k] - mu);
    }
    const double sd = std::sqrt(ss / n);
    fitted.mean[k] = mu;
    fitted.scale[k] = sd > 0.0 ? sd : 1.0;
  }
  fitted.standardized = true;
}

inline SurvivalDataset standardize(const SurvivalDataset& data,
                                   const FittedSchema& fitted) {
  std::vector<Sample> samples = data.samples();
  for (auto& s : samples) {
    for (std::size_t k = 0; k < s.features.size(); ++k) {
      s.features[k] = (s.features[k] - fitted.mean[k]) / fitted.scale[k];
    }
  }
  return SurvivalDataset(std::move(samples), data.feature_names(),
                         data.feature_kinds());
}

struct LoadOptions {
  bool standardize = true;
};

// Loads a whole file as one dataset, fitting levels and z-scores on it.
inline SurvivalDataset load_csv(const std::string& path,
                                const DatasetSchema& schema,
                                LoadOptions options = {},
                                FittedSchema* fitted_out = nullptr) {
  const CsvTable table = read_csv(path);
  FittedSchema fitted = fit_levels(table, schema);
  SurvivalDataset raw = encode(table, fitted);
  if (options.standardize) {
    fit_standardization(fitted, raw);
    raw = standardize(raw, fitted);
  }
  if (fitted_out) *fitted_out = std::move(fitted);
  return raw;
}

// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const FittedSchema& f) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : f.schema.features) {
    cols.push_back({{"name", c.name}, {"kind", to_string(c.kind)}});
  }
  return {{"time", f.schema.time_column},
          {"event", f.schema.event_column},
          {"event_true", f.schema.event_true},
          {"event_false", f.schema.event_false},
          {"columns", cols},
          {"levels", f.levels},
          {"feature_names", f.feature_names},
          {"mean", f.mean},
          {"scale", f.scale},
          {"standardized", f.standardized}};
}

inline FittedSchema fitted_schema_from_json(const nlohmann::json& j) {
  try {
    FittedSchema f;
    f.schema.time_column = j.at("time").get<std::string>();
    f.schema.event_column = j.at("event").get<std::string>();
    f.schema.event_true = j.at("event_true").get<std::vector<std::string>>();
    f.schema.event_false = j.value("event_false", std::vector<std::string>{"0"});
    for (const auto& c : j.at("columns")) {
      const std::string kind = c.at("kind").get<std::string>();
      ColumnKind k = ColumnKind::numeric;
      if (kind == "categorical") k = ColumnKind::categorical;
      else if (kind == "binary") k = ColumnKind::binary;
      else if (kind != "numeric") throw DataError("unknown column kind " + kind);
      f.schema.features.push_back({c.at("name").get<std::string>(), k});
    }
    f.levels = j.at("levels").get<std::map<std::string, std::vector<std::string>>>();
    f.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    f.mean = j.at("mean").get<std::vector<double>>();
    f.scale = j.at("scale").get<std::vector<double>>();
    f.standardized = j.at("standardized").get<bool>();
    for (const auto& c : f.schema.features) {
      if (c.kind == ColumnKind::numeric) {
        f.feature_kinds.push_back(FeatureKind::numeric);
      } else {
        const auto& lv = f.levels.at(c.name);
        const std::size_t cols = c.kind == ColumnKind::binary ? 1 : lv.size();
        f.feature_kinds.insert(f.feature_kinds.end(), cols,
                               FeatureKind::category);
      }
    }
    if (f.feature_kinds.size() != f.feature_names.size() ||
        f.mean.size() != f.feature_names.size() ||
        f.scale.size() != f.feature_names.size()) {
      throw DataError("fitted schema is inconsistent");
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed fitted schema: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

struct DatasetSplit {
  SurvivalDataset train;
  SurvivalDataset test;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

inline DatasetSplit train_test_split(const SurvivalDataset& dataset,
                                     double test_fraction, std::uint64_t seed,
                                     int max_retries = 100) {
  if (!(test_fraction > 0.0) || !(test_fraction < 1.0)) {
    throw UsageError("test fraction must lie strictly between 0 and 1");
  }
  const std::size_t n = dataset.size();
  const auto n_test = static_cast<std::size_t>(
      std::llround(test_fraction * static_cast<double>(n)));
  if (n_test < 2 || n - n_test < 2) {
    throw DataError("dataset too small for a train/test split");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    auto has_event = [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        if (dataset[order[i]].event) return true;
      }
      return false;
    };
    if (!has_event(0, n - n_test) || !has_event(n - n_test, n)) continue;

    DatasetSplit split;
    split.train_rows.assign(order.begin(), order.end() - n_test);
    split.test_rows.assign(order.end() - n_test, order.end());
    auto take = [&](const std::vector<std::size_t>& rows) {
      std::vector<Sample> s;
      s.reserve(rows.size());
      for (std::size_t r : rows) s.push_back(dataset[r]);
      return SurvivalDataset(std::move(s), dataset.feature_names(),
                             dataset.feature_kinds());
    };
    split.train = take(split.train_rows);
    split.test = take(split.test_rows);
    return split;
  }
  throw DataError("could not draw a split with events on both sides");
}

// Writes feature columns then time,event with round-trip precision.
inline void export_csv(const SurvivalDataset& dataset, std::ostream& out,
                       const std::string& time_column = "time",
                       const std::string& event_column = "event") {
  std::ostringstream buf;
  buf.precision(17);
  for (const auto& name : dataset.feature_names()) buf << name << ",";
  buf << time_column << "," << event_column << "\n";
  for (const auto& s : dataset.samples()) {
    for (double v : s.features) buf << v << ",";
    buf << s.time << "," << (s.event ? 1 : 0) << "\n";
  }
  out << buf.str();
}

inline void export_csv(const SurvivalDataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write CSV file: " + path);
  export_csv(dataset, out);
}

// Schema describing an exported all-numeric dataset.
inline DatasetSchema numeric_schema(const SurvivalDataset& dataset,
                                    const std::string& time_column = "time",
                                    const std::string& event_column = "event") {
  DatasetSchema schema;
  schema.time_column = time_column;
  schema.event_column = event_column;
  for (const auto& name : dataset.feature_names()) {
    schema.features.push_back({name, ColumnKind::numeric});
  }
  return schema;
}

}  // namespace coxnam
