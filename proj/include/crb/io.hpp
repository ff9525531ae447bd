#ifndef CRB_IO_HPP
#define CRB_IO_HPP

#include <Eigen/Dense>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "crb/errors.hpp"
#include "crb/fim.hpp"
#include "crb/models.hpp"

namespace crb {

// File schemas (all JSON, row-major nested arrays for matrices):
//
// matrix file:  { "matrix": [[...], ...],
//                 "labels": ["a", ...],            optional, default p0..p{k-1}
//                 "partition": {"alpha": [0, 1]} } optional, default scalar blocks
//
// lmm config:   { "model": "lmm", "A": [[...]], "B": [[...]], "v": 1.0 }
// sine config:  { "model": "sine", "A": 0.0, "B": 1.0, "C": 0.5,
//                 "omega": 0.9424, "v": 0.01, "n": 1024 }
// loglik config:{ "model": "custom-loglik", "name": "gaussian-mean",
//                 "n": 10, "v": 1.0, "theta": [0.0] }

namespace detail {

inline nlohmann::ordered_json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError("'" + path + "' is not valid JSON: " + ex.what());
  }
}

inline Eigen::MatrixXd matrix_from(const nlohmann::ordered_json& rows, const std::string& key) {
  if (!rows.is_array() || rows.empty())
    throw ConfigError("'" + key + "' must be a non-empty array of rows");
  const std::size_t cols = rows[0].is_array() ? rows[0].size() : 0;
  if (cols == 0) throw ConfigError("'" + key + "' rows must be non-empty arrays");
  Eigen::MatrixXd m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!rows[r].is_array() || rows[r].size() != cols)
      throw ConfigError("'" + key + "' rows must all have " + std::to_string(cols) +
                        " entries");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!rows[r][c].is_number())
        throw ConfigError("'" + key + "' entries must be numbers");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows[r][c].get<double>();
    }
  }
  return m;
}

template <typename T>
T require(const nlohmann::ordered_json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("missing required key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("key '" + key + "' has the wrong type");
  }
}

}  // namespace detail

struct MatrixFile {
  FisherMatrix fisher;
  Partition partition;
};

inline MatrixFile matrix_from_json(const nlohmann::ordered_json& j) {
  const Eigen::MatrixXd m = detail::matrix_from(
      j.contains("matrix") ? j.at("matrix")
                           : throw ConfigError("matrix file needs a 'matrix' key"),
      "matrix");
  std::vector<std::string> labels;
  if (j.contains("labels")) {
    labels = detail::require<std::vector<std::string>>(j, "labels");
  } else {
    for (Eigen::Index i = 0; i < m.rows(); ++i) labels.push_back("p" + std::to_string(i));
  }
  FisherMatrix fisher = make_fisher(m, labels);

  if (j.contains("partition")) {
    if (!j.at("partition").is_object())
      throw ConfigError("'partition' must be an object of {name: [indices]}");
    std::vector<Block> blocks;
    for (const auto& [name, idx] : j.at("partition").items()) {
      if (!idx.is_array()) throw ConfigError("partition block '" + name + "' must be an array");
      Block b{name, {}};
      for (const auto& i : idx) {
        if (!i.is_number_integer())
          throw ConfigError("partition block '" + name + "' must hold integer indices");
        b.indices.push_back(i.get<Eigen::Index>());
      }
      blocks.push_back(std::move(b));
    }
    return {std::move(fisher), Partition(std::move(blocks), m.rows())};
  }
  return {std::move(fisher), Partition::scalar(labels)};
}

inline MatrixFile load_matrix_file(const std::string& path) {
  return matrix_from_json(detail::parse_file(path));
}

inline nlohmann::ordered_json fisher_to_json(const FisherMatrix& fisher,
                                             const Partition& partition) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < fisher.size(); ++r) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index c = 0; c < fisher.size(); ++c) row.push_back(fisher.entries()(r, c));
    rows.push_back(std::move(row));
  }
  j["matrix"] = std::move(rows);
  j["labels"] = fisher.labels();
  nlohmann::ordered_json part = nlohmann::ordered_json::object();
  for (const auto& b : partition.blocks()) {
    nlohmann::ordered_json idx = nlohmann::ordered_json::array();
    for (const auto i : b.indices) idx.push_back(i);
    part[b.name] = std::move(idx);
  }
  j["partition"] = std::move(part);
  return j;
}

/// Named built-in log-likelihood test models selectable from configs.
struct CustomLoglikConfig {
  std::string name;  // gaussian-mean | lmm | sine
  nlohmann::ordered_json raw;
};

struct ModelConfig {
  std::variant<CustomLoglikConfig, LmmSpec, SineSpec> model;
  std::optional<std::vector<double>> theta;
};

inline ModelConfig model_from_json(const nlohmann::ordered_json& j) {
  const std::string kind = detail::require<std::string>(j, "model");
  ModelConfig out;
  if (j.contains("theta"))
    out.theta = detail::require<std::vector<double>>(j, "theta");
  if (kind == "lmm") {
    out.model = LmmSpec(detail::matrix_from(detail::require<nlohmann::ordered_json>(j, "A"), "A"),
                        detail::matrix_from(detail::require<nlohmann::ordered_json>(j, "B"), "B"),
                        detail::require<double>(j, "v"));
  } else if (kind == "sine") {
    out.model = SineSpec(detail::require<double>(j, "A"), detail::require<double>(j, "B"),
                         detail::require<double>(j, "C"), detail::require<double>(j, "omega"),
                         detail::require<double>(j, "v"),
                         detail::require<Eigen::Index>(j, "n"));
  } else if (kind == "custom-loglik") {
    CustomLoglikConfig cfg;
    cfg.name = detail::require<std::string>(j, "name");
    cfg.raw = j;
    out.model = std::move(cfg);
  } else {
    throw ConfigError("unknown model '" + kind + "' (expected lmm, sine or custom-loglik)");
  }
  return out;
}

inline ModelConfig load_model_config(const std::string& path) {
  return model_from_json(detail::parse_file(path));
}

}  // namespace crb

#endif
