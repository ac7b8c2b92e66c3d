#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "jointstruct/errors.hpp"
#include "jointstruct/instance.hpp"
#include "jointstruct/model.hpp"
#include "jointstruct/weights.hpp"

namespace jointstruct {

// Feature zeroing applied when scoring or assembling J(x, y).
// attr_missing[k] zeroes every block touching attribute k (its cross block
// and the co-occurrence blocks on attribute-tree edges incident to k),
// which is how unlabeled attributes are excluded from training constraints.
// cross_masked zeroes all cross blocks; it drives the attribute-free pose
// initialization and the separated-model ablation.
struct ScoreMask {
  bool cross_masked = false;
  std::vector<char> attr_missing;  // empty or size n

  bool missing(int k) const { return !attr_missing.empty() && attr_missing[k]; }
  bool cross_active(int k) const { return !cross_masked && !missing(k); }
  bool cooc_active(int k, int l) const { return !missing(k) && !missing(l); }
};

namespace detail {

inline double dot(const double* w, const double* f, std::size_t n) {
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += w[i] * f[i];
  return s;
}

inline double dot(const double* w, const std::vector<double>& f) { return dot(w, f.data(), f.size()); }

}  // namespace detail

inline const std::vector<double>& unary_feature(const Instance& inst, int part, int p /*1-based*/) {
  return inst.candidate(part, p).unary;
}

inline int find_tree_edge(const ModelSpec& spec, int i, int j) {
  for (std::size_t e = 0; e < spec.parts.tree_edges.size(); ++e)
    if (spec.parts.tree_edges[e] == std::pair<int, int>{i, j}) return static_cast<int>(e);
  fail(ErrorCode::InvalidArgument,
       "(" + std::to_string(i) + "," + std::to_string(j) + ") is not a tree edge");
}

inline int find_symmetric_pair(const ModelSpec& spec, int i, int j) {
  const auto key = std::minmax(i, j);
  for (std::size_t p = 0; p < spec.parts.symmetric_pairs.size(); ++p)
    if (spec.parts.symmetric_pairs[p] == std::pair<int, int>{key.first, key.second})
      return static_cast<int>(p);
  fail(ErrorCode::InvalidArgument,
       "(" + std::to_string(i) + "," + std::to_string(j) + ") is not a symmetric pair");
}

// Relative-position cell of a point against a box's axis-aligned hull.
// The central cell is the hull itself; the other eight extend to the image
// borders. Cells index row-major by (y-band, x-band); boundary ties resolve
// to the lower band.
inline int relative_position_cell(double px, double py, const Box& ref, double width_ratio) {
  const double th = ref.theta * 3.14159265358979323846 / 180.0;
  const double half_s = 0.5 * ref.s;
  const double half_w = 0.5 * width_ratio * ref.s;
  const double hx = half_s * std::abs(std::cos(th)) + half_w * std::abs(std::sin(th));
  const double hy = half_s * std::abs(std::sin(th)) + half_w * std::abs(std::cos(th));
  const double xmin = ref.x - hx, xmax = ref.x + hx;
  const double ymin = ref.y - hy, ymax = ref.y + hy;
  const int col = (px <= xmin) ? 0 : (px <= xmax ? 1 : 2);
  const int row = (py <= ymin) ? 0 : (py <= ymax ? 1 : 2);
  return row * 3 + col;
}

inline int relative_rotation_bin(double theta_i, double theta_j) {
  double d = std::fmod(theta_i - theta_j, 360.0);
  if (d < 0) d += 360.0;
  int bin = static_cast<int>(d / 18.0);
  return bin >= kDeformRotationBins ? kDeformRotationBins - 1 : bin;
}

// Geometry of candidate p_i relative to candidate p_j for tree edge (i, j):
// 9-bin one-hot relative position, 20-bin one-hot relative rotation, and
// center distance normalized by the image diagonal.
inline std::array<double, kDeformDim> deformation_feature(const Instance& inst, const ModelSpec& spec,
                                                          int i, int j, int p_i, int p_j) {
  find_tree_edge(spec, i, j);
  const Candidate& ci = inst.candidate(i, p_i);
  const Candidate& cj = inst.candidate(j, p_j);
  std::array<double, kDeformDim> f{};
  f[relative_position_cell(ci.box.x, ci.box.y, cj.box, spec.parts.box_width_ratio[j])] = 1.0;
  f[kDeformPositionBins + relative_rotation_bin(ci.box.theta, cj.box.theta)] = 1.0;
  const double diag = inst.diagonal();
  f[kDeformDim - 1] = diag > 0 ? std::hypot(ci.box.x - cj.box.x, ci.box.y - cj.box.y) / diag : 0.0;
  return f;
}

inline double chi_squared(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) fail(ErrorCode::DimMismatch, "chi-squared over unequal dims");
  constexpr double eps = 1e-10;
  double s = 0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const double d = a[t] - b[t];
    s += d * d / (a[t] + b[t] + eps);
  }
  return 0.5 * s;
}

inline std::array<double, kConsistencyDim> consistency_feature(const Instance& inst, const ModelSpec& spec,
                                                               int i, int j, int p_i, int p_j) {
  find_symmetric_pair(spec, i, j);
  const Candidate& ci = inst.candidate(i, p_i);
  const Candidate& cj = inst.candidate(j, p_j);
  return {chi_squared(ci.hist_rgb, cj.hist_rgb), chi_squared(ci.hist_lab, cj.hist_lab)};
}

inline int cooccurrence_hot_index(int c_k, int c_l, int t_k, int t_l) {
  if (c_k < 1 || c_k > t_k || c_l < 1 || c_l > t_l)
    fail(ErrorCode::IndexOutOfRange, "co-occurrence value out of range");
  return (c_k - 1) * t_l + (c_l - 1);
}

inline std::vector<double> cooccurrence_feature(int c_k, int c_l, int t_k, int t_l) {
  std::vector<double> f(static_cast<std::size_t>(t_k) * t_l, 0.0);
  f[cooccurrence_hot_index(c_k, c_l, t_k, t_l)] = 1.0;
  return f;
}

// F_k: per-part descriptors of the selected candidates, concatenated in
// dependency (part-index) order.
inline std::vector<double> cross_part_concat(const Instance& inst, const ModelSpec& spec, int attr,
                                             const std::vector<int>& part_cands /*1-based, dep order*/) {
  const auto& dep = spec.attrs.dependency[attr];
  if (part_cands.size() != dep.size())
    fail(ErrorCode::InvalidArgument, "cross assignment must cover exactly the dependent parts");
  std::vector<double> f;
  f.reserve(dep.size() * spec.attrs.feature_dims[attr]);
  for (std::size_t m = 0; m < dep.size(); ++m) {
    const Candidate& c = inst.candidate(dep[m], part_cands[m]);
    auto it = c.attr_feats.find(attr);
    if (it == c.attr_feats.end())
      fail(ErrorCode::MissingAttrFeature,
           "candidate lacks feature for attribute " + spec.attrs.names[attr]);
    f.insert(f.end(), it->second.begin(), it->second.end());
  }
  return f;
}

// F_k placed into the c_k-th of T_k slots, zeros elsewhere.
inline std::vector<double> cross_feature(const Instance& inst, const ModelSpec& spec, int attr,
                                         const std::vector<int>& part_cands, int c_k) {
  const int t_k = spec.attrs.cardinalities[attr];
  if (c_k < 1 || c_k > t_k) fail(ErrorCode::IndexOutOfRange, "attribute value out of range");
  const std::vector<double> concat = cross_part_concat(inst, spec, attr, part_cands);
  std::vector<double> f(concat.size() * t_k, 0.0);
  std::copy(concat.begin(), concat.end(), f.begin() + static_cast<std::ptrdiff_t>(c_k - 1) * concat.size());
  return f;
}

inline std::vector<int> label_cross_assignment(const ModelSpec& spec, const JointLabel& y, int attr) {
  std::vector<int> cands;
  cands.reserve(spec.attrs.dependency[attr].size());
  for (int part : spec.attrs.dependency[attr]) cands.push_back(y.pose[part]);
  return cands;
}

// Dense J(x, y): every feature summed into its layout block.
inline std::vector<double> assemble_joint(const Instance& inst, const ModelSpec& spec, const JointLabel& y,
                                          const ScoreMask& mask = {}) {
  check_label(y, inst, spec);
  std::vector<double> J(spec.layout.total_dim, 0.0);

  for (int i = 0; i < spec.parts.part_count; ++i) {
    const auto& u = unary_feature(inst, i, y.pose[i]);
    std::copy(u.begin(), u.end(), J.begin() + static_cast<std::ptrdiff_t>(spec.layout.unary(i).offset));
  }
  for (std::size_t e = 0; e < spec.parts.tree_edges.size(); ++e) {
    const auto& [i, j] = spec.parts.tree_edges[e];
    const auto f = deformation_feature(inst, spec, i, j, y.pose[i], y.pose[j]);
    std::copy(f.begin(), f.end(), J.begin() + static_cast<std::ptrdiff_t>(spec.layout.deform(e).offset));
  }
  for (std::size_t p = 0; p < spec.parts.symmetric_pairs.size(); ++p) {
    const auto& [i, j] = spec.parts.symmetric_pairs[p];
    const auto f = consistency_feature(inst, spec, i, j, y.pose[i], y.pose[j]);
    std::copy(f.begin(), f.end(),
              J.begin() + static_cast<std::ptrdiff_t>(spec.layout.consistency(p).offset));
  }
  for (std::size_t e = 0; e < spec.attrs.tree_edges.size(); ++e) {
    const auto& [k, l] = spec.attrs.tree_edges[e];
    if (!mask.cooc_active(k, l)) continue;
    J[spec.layout.cooccurrence(e).offset +
      cooccurrence_hot_index(y.attrs[k], y.attrs[l], spec.attrs.cardinalities[k],
                             spec.attrs.cardinalities[l])] = 1.0;
  }
  for (int k = 0; k < spec.attrs.attribute_count; ++k) {
    if (!mask.cross_active(k)) continue;
    const auto f = cross_feature(inst, spec, k, label_cross_assignment(spec, y, k), y.attrs[k]);
    std::copy(f.begin(), f.end(), J.begin() + static_cast<std::ptrdiff_t>(spec.layout.cross(k).offset));
  }
  return J;
}

// w . J(x, y), evaluated block by block without materializing J.
inline double score_joint(const WeightVector& w, const Instance& inst, const ModelSpec& spec,
                          const JointLabel& y, const ScoreMask& mask = {}) {
  check_label(y, inst, spec);
  if (w.size() != spec.layout.total_dim) fail(ErrorCode::DimMismatch, "weight vector length");
  double s = 0;

  for (int i = 0; i < spec.parts.part_count; ++i)
    s += detail::dot(w.block(spec.layout.unary(i)), unary_feature(inst, i, y.pose[i]));
  for (std::size_t e = 0; e < spec.parts.tree_edges.size(); ++e) {
    const auto& [i, j] = spec.parts.tree_edges[e];
    const auto f = deformation_feature(inst, spec, i, j, y.pose[i], y.pose[j]);
    s += detail::dot(w.block(spec.layout.deform(e)), f.data(), f.size());
  }
  for (std::size_t p = 0; p < spec.parts.symmetric_pairs.size(); ++p) {
    const auto& [i, j] = spec.parts.symmetric_pairs[p];
    const auto f = consistency_feature(inst, spec, i, j, y.pose[i], y.pose[j]);
    s += detail::dot(w.block(spec.layout.consistency(p)), f.data(), f.size());
  }
  for (std::size_t e = 0; e < spec.attrs.tree_edges.size(); ++e) {
    const auto& [k, l] = spec.attrs.tree_edges[e];
    if (!mask.cooc_active(k, l)) continue;
    s += w.block(spec.layout.cooccurrence(e))[cooccurrence_hot_index(
        y.attrs[k], y.attrs[l], spec.attrs.cardinalities[k], spec.attrs.cardinalities[l])];
  }
  for (int k = 0; k < spec.attrs.attribute_count; ++k) {
    if (!mask.cross_active(k)) continue;
    const auto& dep = spec.attrs.dependency[k];
    const std::size_t d = spec.attrs.feature_dims[k];
    for (std::size_t m = 0; m < dep.size(); ++m) {
      const Candidate& c = inst.candidate(dep[m], y.pose[dep[m]]);
      auto it = c.attr_feats.find(k);
      if (it == c.attr_feats.end())
        fail(ErrorCode::MissingAttrFeature, "candidate lacks feature for " + spec.attrs.names[k]);
      s += detail::dot(w.values.data() + cross_segment_offset(spec, k, y.attrs[k], static_cast<int>(m)),
                       it->second.data(), d);
    }
  }
  return s;
}

}  // namespace jointstruct
