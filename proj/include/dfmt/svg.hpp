#pragma once

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include "dfmt/planner.hpp"
#include "dfmt/world.hpp"

namespace dfmt {

struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::string fmt_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace detail

// Standalone SVG of a plan: bounds, obstacle boxes, tree edges (each steering
// segment sampled at 32 points and projected onto the two chosen position
// coordinates), the solution trajectory, start and goal markers.
inline std::string emit_svg(const Plan& plan, const ProblemInstance& p,
                            std::pair<int, int> dims = {-1, -1},
                            Variant variant = Variant::OptimalTau,
                            double fixed_tau = 1.0) {
  if (p.position_dims.size() < 2) {
    throw DimensionError("emit_svg: at least two position dimensions required");
  }
  if (dims.first < 0) dims = {p.position_dims[0], p.position_dims[1]};
  auto is_position = [&](int d) {
    return std::find(p.position_dims.begin(), p.position_dims.end(), d) !=
           p.position_dims.end();
  };
  if (!is_position(dims.first) || !is_position(dims.second) || dims.first == dims.second) {
    throw DimensionError("emit_svg: dims must name two distinct position coordinates");
  }
  const int ox = static_cast<int>(std::find(p.position_dims.begin(), p.position_dims.end(),
                                            dims.first) - p.position_dims.begin());
  const int oy = static_cast<int>(std::find(p.position_dims.begin(), p.position_dims.end(),
                                            dims.second) - p.position_dims.begin());

  const double W = 640.0, H = 640.0, pad = 16.0;
  const double lx = p.bounds.lo[dims.first], hx = p.bounds.hi[dims.first];
  const double ly = p.bounds.lo[dims.second], hy = p.bounds.hi[dims.second];
  auto X = [&](double v) { return pad + (v - lx) / (hx - lx) * (W - 2 * pad); };
  auto Y = [&](double v) { return H - pad - (v - ly) / (hy - ly) * (H - 2 * pad); };
  using detail::fmt_coord;

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  out << "<rect x=\"" << fmt_coord(X(lx)) << "\" y=\"" << fmt_coord(Y(hy)) << "\" width=\""
      << fmt_coord(X(hx) - X(lx)) << "\" height=\"" << fmt_coord(Y(ly) - Y(hy))
      << "\" fill=\"white\" stroke=\"black\" stroke-width=\"1.5\"/>\n";

  for (const auto& obs : p.obstacles) {
    out << "<rect x=\"" << fmt_coord(X(obs.lo[ox])) << "\" y=\"" << fmt_coord(Y(obs.hi[oy]))
        << "\" width=\"" << fmt_coord(X(obs.hi[ox]) - X(obs.lo[ox])) << "\" height=\""
        << fmt_coord(Y(obs.lo[oy]) - Y(obs.hi[oy])) << "\" fill=\"#666666\"/>\n";
  }
  out << "<rect x=\"" << fmt_coord(X(p.goal.lo[dims.first])) << "\" y=\""
      << fmt_coord(Y(p.goal.hi[dims.second])) << "\" width=\""
      << fmt_coord(X(p.goal.hi[dims.first]) - X(p.goal.lo[dims.first])) << "\" height=\""
      << fmt_coord(Y(p.goal.lo[dims.second]) - Y(p.goal.hi[dims.second]))
      << "\" fill=\"#d8f0d8\" stroke=\"#2a7a2a\" stroke-width=\"1\"/>\n";

  SteeringKernel kernel(p.sys, {SteerOptions{.tau_max = p.tau_max}});
  auto polyline = [&](const SteeringResult& seg, const char* style) {
    out << "<polyline fill=\"none\" " << style << " points=\"";
    for (int s = 0; s <= 32; ++s) {
      const double t = seg.tau_star * s / 32.0;
      const Eigen::VectorXd x = s == 32 ? seg.x1 : kernel.state_at(seg, t);
      out << fmt_coord(X(x[dims.first])) << "," << fmt_coord(Y(x[dims.second]));
      if (s != 32) out << " ";
    }
    out << "\"/>\n";
  };
  auto segment_of = [&](int from, int to) {
    if (variant == Variant::FixedTau)
      return kernel.fixed_time_steer(plan.graph.vertices[from], plan.graph.vertices[to],
                                     fixed_tau);
    return kernel.optimal_steer(plan.graph.vertices[from], plan.graph.vertices[to],
                                p.tau_max);
  };

  out << "<g stroke=\"#9db8d2\" stroke-width=\"0.6\">\n";
  for (const auto& e : plan.graph.edges) {
    polyline(segment_of(e.from, e.to), "");
  }
  out << "</g>\n";
  for (const auto& seg : plan.trajectory.segments) {
    polyline(seg, "stroke=\"#1040c0\" stroke-width=\"2.5\"");
  }

  out << "<circle cx=\"" << fmt_coord(X(p.x_init[dims.first])) << "\" cy=\""
      << fmt_coord(Y(p.x_init[dims.second]))
      << "\" r=\"5\" fill=\"#c03030\" stroke=\"black\" stroke-width=\"1\"/>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace dfmt
