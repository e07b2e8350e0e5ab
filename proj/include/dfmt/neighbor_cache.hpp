#pragma once

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dfmt/steering.hpp"
#include "dfmt/system.hpp"

namespace dfmt {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Stable identity of a system across runs (matrix entries at full precision).
inline std::string system_hash(const LinearAffineSystem& sys) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const std::string& s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ull;
    }
  };
  mix(std::to_string(sys.n()) + "x" + std::to_string(sys.m()));
  auto mix_mat = [&](const Eigen::MatrixXd& M) {
    for (long i = 0; i < M.rows(); ++i)
      for (long j = 0; j < M.cols(); ++j) mix(format_double(M(i, j)) + ",");
  };
  mix_mat(sys.A);
  mix_mat(sys.B);
  mix_mat(sys.c);
  mix_mat(sys.R);
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

// Precomputed directed near-neighbor sets with exact connection costs,
// keyed by everything that determines them. Obstacle configuration is
// deliberately not part of the key: collision checking happens per run.
struct NeighborCache {
  static constexpr int kVersion = 1;
  std::string system_hash;
  int N = 0;
  std::uint64_t seed = 0;
  double radius = 0.0;
  std::string variant;
  // forward[i] = sorted (j, c*(i,j)) pairs with c* < radius
  std::vector<std::vector<std::pair<int, double>>> forward;

  bool matches(const std::string& hash, int n_samples, std::uint64_t s, double r,
               const std::string& var) const {
    return system_hash == hash && N == n_samples && seed == s && radius == r &&
           variant == var;
  }

  void save(const std::string& path) const {
    nlohmann::json j;
    j["version"] = kVersion;
    j["header"] = {{"system_hash", system_hash}, {"N", N}, {"seed", seed},
                   {"radius", format_double(radius)}, {"variant", variant}};
    nlohmann::json adj = nlohmann::json::array();
    for (const auto& row : forward) {
      nlohmann::json r_json = nlohmann::json::array();
      for (const auto& [to, cost] : row) r_json.push_back({to, format_double(cost)});
      adj.push_back(std::move(r_json));
    }
    j["forward"] = std::move(adj);
    std::ofstream out(path);
    out << j.dump();
  }

  static std::optional<NeighborCache> load(const std::string& path) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
      if (j.at("version").get<int>() != kVersion) return std::nullopt;
      NeighborCache c;
      const auto& h = j.at("header");
      c.system_hash = h.at("system_hash").get<std::string>();
      c.N = h.at("N").get<int>();
      c.seed = h.at("seed").get<std::uint64_t>();
      c.radius = std::stod(h.at("radius").get<std::string>());
      c.variant = h.at("variant").get<std::string>();
      for (const auto& row : j.at("forward")) {
        std::vector<std::pair<int, double>> entries;
        for (const auto& e : row) {
          entries.emplace_back(e.at(0).get<int>(), std::stod(e.at(1).get<std::string>()));
        }
        c.forward.push_back(std::move(entries));
      }
      return c;
    } catch (...) {
      return std::nullopt;
    }
  }
};

}  // namespace dfmt
