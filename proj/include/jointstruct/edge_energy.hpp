#pragma once

#include <cmath>
#include <vector>

#include "jointstruct/errors.hpp"
#include "jointstruct/instance.hpp"

namespace jointstruct {

// Per-candidate strong-edge statistics averaged over the evidence pixels:
//   orientation = (1/Z) sum cos(theta - theta_e) * strength_e
//   distance    = (1/Z) sum d_min_e * strength_e
// No evidence forces both to zero.
struct EdgeScores {
  double orientation = 0;
  double distance = 0;
};

inline EdgeScores edge_scores(const Candidate& c) {
  if (c.edge_pixels.empty()) return {};
  constexpr double deg = 3.14159265358979323846 / 180.0;
  EdgeScores s;
  for (const auto& ep : c.edge_pixels) {
    s.orientation += std::cos((c.box.theta - ep.theta_e) * deg) * ep.strength;
    s.distance += ep.d_min * ep.strength;
  }
  const double z = static_cast<double>(c.edge_pixels.size());
  s.orientation /= z;
  s.distance /= z;
  return s;
}

inline double part_energy(const Candidate& c, double beta) {
  const EdgeScores s = edge_scores(c);
  return s.orientation + beta * s.distance;
}

// Q(x, p): decomposes over parts, so it folds into the per-part DP scores.
inline double pose_energy(const Instance& inst, const std::vector<int>& pose /*1-based*/, double beta) {
  if (pose.size() != inst.ensembles.size()) fail(ErrorCode::DimMismatch, "pose length != part count");
  double q = 0;
  for (std::size_t i = 0; i < pose.size(); ++i)
    q += part_energy(inst.candidate(static_cast<int>(i), pose[i]), beta);
  return q;
}

}  // namespace jointstruct
