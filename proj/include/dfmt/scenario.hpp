#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dfmt/world.hpp"

namespace dfmt {

struct ScenarioError : std::runtime_error {
  explicit ScenarioError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline Eigen::VectorXd parse_vector(const nlohmann::json& j, const std::string& name) {
  if (!j.is_array()) throw ScenarioError("scenario: '" + name + "' must be an array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

inline Eigen::MatrixXd parse_matrix(const nlohmann::json& j, const std::string& name) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ScenarioError("scenario: '" + name + "' must be a nested array (row-major)");
  const std::size_t rows = j.size(), cols = j[0].size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (j[r].size() != cols) throw ScenarioError("scenario: ragged rows in '" + name + "'");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

inline Box parse_box(const nlohmann::json& j, const std::string& name) {
  Box b;
  b.lo = parse_vector(j.at("lo"), name + ".lo");
  b.hi = parse_vector(j.at("hi"), name + ".hi");
  if (b.lo.size() != b.hi.size() || !(b.lo.array() < b.hi.array()).all())
    throw ScenarioError("scenario: '" + name + "' requires lo < hi componentwise");
  return b;
}

}  // namespace detail

inline ProblemInstance scenario_from_json(const nlohmann::json& j) {
  ProblemInstance p;
  try {
    const auto& s = j.at("system");
    p.sys.A = detail::parse_matrix(s.at("A"), "system.A");
    p.sys.B = detail::parse_matrix(s.at("B"), "system.B");
    p.sys.c = detail::parse_vector(s.at("c"), "system.c");
    p.sys.R = detail::parse_matrix(s.at("R"), "system.R");
    p.bounds = detail::parse_box(j.at("bounds"), "bounds");
    for (const auto& d : j.at("position_dims")) p.position_dims.push_back(d.get<int>());
    if (j.contains("obstacles")) {
      for (const auto& o : j.at("obstacles")) {
        Obstacle obs;
        obs.lo = detail::parse_vector(o.at("lo"), "obstacle.lo");
        obs.hi = detail::parse_vector(o.at("hi"), "obstacle.hi");
        if (obs.lo.size() != static_cast<long>(p.position_dims.size()) ||
            obs.hi.size() != obs.lo.size() || !(obs.lo.array() < obs.hi.array()).all())
          throw ScenarioError("scenario: obstacle boxes must have lo < hi over position dims");
        p.obstacles.push_back(std::move(obs));
      }
    }
    p.x_init = detail::parse_vector(j.at("x_init"), "x_init");
    p.goal = detail::parse_box(j.at("goal"), "goal");
    if (j.contains("tau_max")) p.tau_max = j.at("tau_max").get<double>();
    if (j.contains("collision_dt")) p.collision_dt = j.at("collision_dt").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("scenario: ") + e.what());
  }

  const auto rep = validate(p.sys);
  if (!rep.ok()) throw ScenarioError("scenario: system invalid: " + rep.detail);
  const int n = p.sys.n();
  if (p.bounds.dim() != n || p.x_init.size() != n || p.goal.dim() != n)
    throw ScenarioError("scenario: bounds/x_init/goal dimension mismatch with system");
  for (int d : p.position_dims)
    if (d < 0 || d >= n) throw ScenarioError("scenario: position_dims out of range");
  if (!state_free(p, p.x_init)) throw ScenarioError("scenario: x_init not in free space");
  if (!p.bounds.contains(p.goal.lo) || !p.bounds.contains(p.goal.hi))
    throw ScenarioError("scenario: goal region must lie within bounds");
  if (!(p.tau_max > 0.0) || !(p.collision_dt > 0.0))
    throw ScenarioError("scenario: tau_max and collision_dt must be positive");
  return p;
}

// Loads a scenario file; parse failures carry nlohmann's line/byte diagnostic.
inline ProblemInstance load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("scenario: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError("scenario: parse failure in '" + path + "': " + e.what());
  }
  return scenario_from_json(j);
}

}  // namespace dfmt
