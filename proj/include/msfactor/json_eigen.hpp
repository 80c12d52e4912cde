#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "msfactor/errors.hpp"

// Vectors as flat arrays, matrices as arrays of rows.
namespace nlohmann {

template <>
struct adl_serializer<Eigen::VectorXd> {
  static void to_json(json& j, const Eigen::VectorXd& v) {
    j = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  }
  static void from_json(const json& j, Eigen::VectorXd& v) {
    v.resize(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
  }
};

template <>
struct adl_serializer<Eigen::MatrixXd> {
  static void to_json(json& j, const Eigen::MatrixXd& m) {
    j = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      j.push_back(std::move(row));
    }
  }
  static void from_json(const json& j, Eigen::MatrixXd& m) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
    m.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (static_cast<Eigen::Index>(j.at(r).size()) != cols) throw msf::ValidationError("ragged matrix in JSON");
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
    }
  }
};

}  // namespace nlohmann
