#pragma once

#include <Eigen/Core>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "groupenet/data.hpp"
#include "groupenet/errors.hpp"
#include "groupenet/partition.hpp"

namespace groupenet {

using ordered_json = nlohmann::ordered_json;

// Shortest decimal representation that round-trips a double exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = 0.0;
  std::sscanf(buf, "%lf", &back);
  if (back == v) {
    for (int prec = 1; prec <= 16; ++prec) {
      char shorter[40];
      std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
      std::sscanf(shorter, "%lf", &back);
      if (back == v) return shorter;
    }
  }
  return buf;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

inline double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw validation_error(context + ": cannot parse number '" + s + "'");
  }
}

}  // namespace detail

struct CsvTable {
  std::vector<std::string> ids;
  std::vector<std::string> columns;
  Eigen::MatrixXd values;
};

// Plain UTF-8 CSV with a header row; the first column is a row id, remaining
// columns are numeric.
inline CsvTable read_csv_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw validation_error("'" + path + "' is empty");
  CsvTable table;
  auto header = detail::split_csv_line(detail::strip_cr(line));
  if (header.size() < 2) {
    throw validation_error("'" + path + "': expected an id column plus data columns");
  }
  table.columns.assign(header.begin() + 1, header.end());
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) {
      throw validation_error("'" + path + "': row " + std::to_string(rows.size() + 1) +
                             " has " + std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(header.size()));
    }
    table.ids.push_back(fields[0]);
    std::vector<double> row(fields.size() - 1);
    for (std::size_t k = 1; k < fields.size(); ++k) {
      row[k - 1] = detail::parse_double(fields[k], "'" + path + "'");
    }
    rows.push_back(std::move(row));
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(table.columns.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return table;
}

inline void write_csv_table(const std::string& path, const std::vector<std::string>& ids,
                            const std::vector<std::string>& columns,
                            const Eigen::MatrixXd& values) {
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write '" + path + "'");
  out << "id";
  for (const auto& c : columns) out << ',' << c;
  out << '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    out << ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      out << ',' << format_double(values(i, j));
    }
    out << '\n';
  }
}

struct ResponseTable {
  std::vector<std::string> ids;
  Eigen::VectorXd y;
  Eigen::VectorXd m;
};

// Response CSV with columns (id, y, m); m defaults to 1 when absent.
inline ResponseTable read_response_csv(const std::string& path) {
  CsvTable table = read_csv_table(path);
  int y_col = -1, m_col = -1;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (table.columns[c] == "y") y_col = static_cast<int>(c);
    if (table.columns[c] == "m") m_col = static_cast<int>(c);
  }
  if (y_col < 0) throw validation_error("'" + path + "': missing 'y' column");
  ResponseTable resp;
  resp.ids = table.ids;
  resp.y = table.values.col(y_col);
  resp.m = m_col >= 0 ? table.values.col(m_col).eval()
                      : Eigen::VectorXd::Ones(table.values.rows()).eval();
  return resp;
}

inline void write_response_csv(const std::string& path, const std::vector<std::string>& ids,
                               const Eigen::VectorXd& y, const Eigen::VectorXd& m) {
  Eigen::MatrixXd values(y.size(), 2);
  values.col(0) = y;
  values.col(1) = m;
  write_csv_table(path, ids, {"y", "m"}, values);
}

// Partition JSON:
//   {"partitions": [{"name": str,
//                    "groups": {feature_name: group_label, ...},
//                    "monotone": [group_label, ...] | null}, ...]}
// Group indices follow first appearance in document order; multiple entries
// engage the multiplicative multi-partition model.
inline PartitionSet read_partition_json(const std::string& path,
                                        const std::vector<std::string>& feature_names) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open '" + path + "'");
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const std::exception& e) {
    throw validation_error("'" + path + "': invalid JSON (" + e.what() + ")");
  }
  if (!doc.contains("partitions") || !doc["partitions"].is_array() ||
      doc["partitions"].empty()) {
    throw validation_error("'" + path + "': expected a non-empty 'partitions' array");
  }
  std::unordered_map<std::string, int> feature_index;
  for (std::size_t j = 0; j < feature_names.size(); ++j) {
    feature_index[feature_names[j]] = static_cast<int>(j);
  }
  PartitionSet set;
  for (const auto& entry : doc["partitions"]) {
    Partition part;
    part.name = entry.value("name", "partition" + std::to_string(set.partitions.size() + 1));
    if (!entry.contains("groups") || !entry["groups"].is_object()) {
      throw validation_error("'" + path + "': partition '" + part.name +
                             "' needs a 'groups' object");
    }
    std::unordered_map<std::string, int> group_index;
    part.assignment.assign(feature_names.size(), -1);
    for (auto it = entry["groups"].begin(); it != entry["groups"].end(); ++it) {
      const std::string& feature = it.key();
      const std::string label = it.value().get<std::string>();
      auto fit = feature_index.find(feature);
      if (fit == feature_index.end()) {
        throw validation_error("partition '" + part.name + "' references feature '" +
                               feature + "' absent from the feature matrix");
      }
      auto git = group_index.find(label);
      if (git == group_index.end()) {
        git = group_index.emplace(label, static_cast<int>(part.group_labels.size())).first;
        part.group_labels.push_back(label);
      }
      if (part.assignment[static_cast<std::size_t>(fit->second)] != -1) {
        throw validation_error("partition '" + part.name + "' assigns feature '" +
                               feature + "' twice");
      }
      part.assignment[static_cast<std::size_t>(fit->second)] = git->second;
    }
    for (std::size_t j = 0; j < part.assignment.size(); ++j) {
      if (part.assignment[j] == -1) {
        throw validation_error("partition '" + part.name + "' does not cover feature '" +
                               feature_names[j] + "'");
      }
    }
    if (entry.contains("monotone") && !entry["monotone"].is_null()) {
      std::vector<int> order;
      for (const auto& label : entry["monotone"]) {
        auto git = group_index.find(label.get<std::string>());
        if (git == group_index.end()) {
          throw validation_error("partition '" + part.name + "': monotone list names unknown group '" +
                                 label.get<std::string>() + "'");
        }
        order.push_back(git->second);
      }
      part.monotone_order = std::move(order);
    }
    set.partitions.push_back(std::move(part));
  }
  return set;
}

inline void write_partition_json(const std::string& path, const PartitionSet& set,
                                 const std::vector<std::string>& feature_names) {
  ordered_json doc;
  doc["partitions"] = ordered_json::array();
  for (const auto& part : set.partitions) {
    ordered_json entry;
    entry["name"] = part.name;
    ordered_json groups = ordered_json::object();
    for (std::size_t j = 0; j < part.assignment.size(); ++j) {
      groups[feature_names[j]] =
          part.group_labels[static_cast<std::size_t>(part.assignment[j])];
    }
    entry["groups"] = std::move(groups);
    if (part.monotone_order) {
      ordered_json order = ordered_json::array();
      for (int g : *part.monotone_order) {
        order.push_back(part.group_labels[static_cast<std::size_t>(g)]);
      }
      entry["monotone"] = std::move(order);
    } else {
      entry["monotone"] = nullptr;
    }
    doc["partitions"].push_back(std::move(entry));
  }
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write '" + path + "'");
  out << doc.dump(2) << '\n';
}

namespace detail {

inline ordered_json vector_to_json(const Eigen::VectorXd& v) {
  ordered_json arr = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline Eigen::VectorXd vector_from_json(const ordered_json& arr) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
  Eigen::Index i = 0;
  for (const auto& x : arr) v[i++] = x.get<double>();
  return v;
}

}  // namespace detail

// Self-contained fitted model: prediction needs only this file plus new
// features. The schema version is checked on load.
struct ModelFile {
  static constexpr int kSchemaVersion = 1;

  double alpha = 0.5;
  double lambda_global = 1.0;
  struct PartitionEntry {
    std::string name;
    std::vector<std::string> group_labels;
    std::vector<double> multipliers;
    std::optional<std::vector<std::string>> monotone;
  };
  std::vector<PartitionEntry> partitions;
  std::vector<std::string> feature_names;
  Coefficients coefficients;
  bool intercept = true;
  struct Selected {
    int k = 0;
    double lambda = 0.0;
    Eigen::VectorXd unpenalized_part;
    Eigen::VectorXd penalized_part;
  };
  std::optional<Selected> selected;
  ordered_json diagnostics = ordered_json::object();
  std::uint64_t seed = 0;
  ordered_json config_echo = ordered_json::object();

  ordered_json to_json() const {
    ordered_json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["alpha"] = alpha;
    doc["lambda_global"] = lambda_global;
    doc["partitions"] = ordered_json::array();
    for (const auto& part : partitions) {
      ordered_json entry;
      entry["name"] = part.name;
      entry["group_labels"] = part.group_labels;
      entry["multipliers"] = part.multipliers;
      if (part.monotone) {
        entry["monotone"] = *part.monotone;
      } else {
        entry["monotone"] = nullptr;
      }
      doc["partitions"].push_back(std::move(entry));
    }
    doc["feature_names"] = feature_names;
    doc["coefficients"] = ordered_json::object();
    doc["coefficients"]["unpenalized"] = detail::vector_to_json(coefficients.unpenalized_part);
    doc["coefficients"]["penalized"] = detail::vector_to_json(coefficients.penalized_part);
    doc["scale"] = ordered_json::object();
    doc["scale"]["mean"] = detail::vector_to_json(coefficients.scale.mean);
    doc["scale"]["rms"] = detail::vector_to_json(coefficients.scale.scale);
    doc["unpenalized_scale"] = ordered_json::object();
    doc["unpenalized_scale"]["mean"] =
        detail::vector_to_json(coefficients.unpenalized_scale.mean);
    doc["unpenalized_scale"]["rms"] =
        detail::vector_to_json(coefficients.unpenalized_scale.scale);
    doc["intercept"] = intercept;
    if (selected) {
      ordered_json sel;
      sel["k"] = selected->k;
      sel["lambda"] = selected->lambda;
      sel["unpenalized"] = detail::vector_to_json(selected->unpenalized_part);
      sel["penalized"] = detail::vector_to_json(selected->penalized_part);
      doc["selected"] = std::move(sel);
    } else {
      doc["selected"] = nullptr;
    }
    doc["diagnostics"] = diagnostics;
    doc["seed"] = seed;
    doc["config_echo"] = config_echo;
    return doc;
  }

  static ModelFile from_json(const ordered_json& doc) {
    if (!doc.contains("schema_version") ||
        doc["schema_version"].get<int>() != kSchemaVersion) {
      throw validation_error("model file: unsupported schema version");
    }
    ModelFile model;
    model.alpha = doc["alpha"].get<double>();
    model.lambda_global = doc["lambda_global"].get<double>();
    for (const auto& entry : doc["partitions"]) {
      PartitionEntry part;
      part.name = entry["name"].get<std::string>();
      part.group_labels = entry["group_labels"].get<std::vector<std::string>>();
      part.multipliers = entry["multipliers"].get<std::vector<double>>();
      if (!entry["monotone"].is_null()) {
        part.monotone = entry["monotone"].get<std::vector<std::string>>();
      }
      model.partitions.push_back(std::move(part));
    }
    model.feature_names = doc["feature_names"].get<std::vector<std::string>>();
    model.coefficients.unpenalized_part =
        detail::vector_from_json(doc["coefficients"]["unpenalized"]);
    model.coefficients.penalized_part =
        detail::vector_from_json(doc["coefficients"]["penalized"]);
    model.coefficients.scale.mean = detail::vector_from_json(doc["scale"]["mean"]);
    model.coefficients.scale.scale = detail::vector_from_json(doc["scale"]["rms"]);
    model.coefficients.unpenalized_scale.mean =
        detail::vector_from_json(doc["unpenalized_scale"]["mean"]);
    model.coefficients.unpenalized_scale.scale =
        detail::vector_from_json(doc["unpenalized_scale"]["rms"]);
    model.intercept = doc["intercept"].get<bool>();
    if (!doc["selected"].is_null()) {
      Selected sel;
      sel.k = doc["selected"]["k"].get<int>();
      sel.lambda = doc["selected"]["lambda"].get<double>();
      sel.unpenalized_part = detail::vector_from_json(doc["selected"]["unpenalized"]);
      sel.penalized_part = detail::vector_from_json(doc["selected"]["penalized"]);
      model.selected = std::move(sel);
    }
    model.diagnostics = doc["diagnostics"];
    model.seed = doc["seed"].get<std::uint64_t>();
    model.config_echo = doc["config_echo"];
    return model;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw validation_error("cannot write '" + path + "'");
    out << to_json().dump(2) << '\n';
  }

  static ModelFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open '" + path + "'");
    ordered_json doc;
    try {
      doc = ordered_json::parse(in);
    } catch (const std::exception& e) {
      throw validation_error("'" + path + "': invalid JSON (" + e.what() + ")");
    }
    return from_json(doc);
  }
};

}  // namespace groupenet
