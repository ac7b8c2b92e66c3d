#pragma once

// Shared test fixtures: hand-built random instances and exhaustive
// enumeration oracles that stay independent of the DP implementation.

#include <limits>
#include <vector>

#include "jointstruct/jointstruct.hpp"

namespace testutil {

namespace js = jointstruct;

inline js::ModelSpec small_spec() { return js::build_default_model(6, 4, {}, {2, 3, 2, 3, 2}); }

inline std::vector<double> random_hist(js::Rng& rng, int dim) {
  std::vector<double> h(dim);
  double sum = 0;
  for (auto& v : h) {
    v = rng.uniform() + 1e-3;
    sum += v;
  }
  for (auto& v : h) v /= sum;
  return h;
}

inline js::Candidate random_candidate(const js::ModelSpec& spec, js::Rng& rng, int part) {
  js::Candidate c;
  c.box.x = rng.uniform(10.0, 190.0);
  c.box.y = rng.uniform(10.0, 190.0);
  c.box.theta = rng.uniform(0.0, 360.0);
  c.box.s = rng.uniform(5.0, 40.0);
  c.unary.resize(spec.d_u);
  for (auto& v : c.unary) v = rng.normal();
  c.hist_rgb = random_hist(rng, spec.d_hist);
  c.hist_lab = random_hist(rng, spec.d_hist);
  for (int k = 0; k < spec.attrs.attribute_count; ++k) {
    const auto& dep = spec.attrs.dependency[k];
    if (std::find(dep.begin(), dep.end(), part) == dep.end()) continue;
    std::vector<double> f(spec.attrs.feature_dims[k]);
    for (auto& v : f) v = rng.normal();
    c.attr_feats[k] = std::move(f);
  }
  const int z = rng.uniform_int(0, 4);
  for (int e = 0; e < z; ++e)
    c.edge_pixels.push_back({rng.uniform(0.0, 360.0), rng.uniform(0.0, 2.0), rng.uniform(0.0, 5.0)});
  return c;
}

inline js::Instance random_instance(const js::ModelSpec& spec, js::Rng& rng, int k_min, int k_max,
                                    const std::string& id = "t") {
  js::Instance inst;
  inst.id = id;
  inst.width = 200;
  inst.height = 200;
  inst.ensembles.resize(spec.parts.part_count);
  for (int i = 0; i < spec.parts.part_count; ++i) {
    const int k = rng.uniform_int(k_min, k_max);
    for (int a = 0; a < k; ++a) inst.ensembles[i].push_back(random_candidate(spec, rng, i));
  }
  return inst;
}

inline js::WeightVector random_weights(const js::ModelSpec& spec, js::Rng& rng, double scale = 1.0) {
  js::WeightVector w = js::WeightVector::zeros(spec);
  for (auto& v : w.values) v = scale * rng.normal();
  return w;
}

inline js::JointLabel random_label(const js::Instance& inst, const js::ModelSpec& spec, js::Rng& rng) {
  js::JointLabel y;
  y.pose.resize(spec.parts.part_count);
  y.attrs.resize(spec.attrs.attribute_count);
  for (int i = 0; i < spec.parts.part_count; ++i) y.pose[i] = rng.uniform_int(1, inst.candidate_count(i));
  for (int k = 0; k < spec.attrs.attribute_count; ++k)
    y.attrs[k] = rng.uniform_int(1, spec.attrs.cardinalities[k]);
  return y;
}

// Exhaustive conditional maxima, scored through score_full only.
inline double exhaustive_best_pose_score(const js::WeightVector& w, const js::Instance& inst,
                                         const js::ModelSpec& spec, const std::vector<int>& attrs,
                                         double alpha, double beta) {
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> p(spec.parts.part_count, 1);
  for (;;) {
    best = std::max(best, js::score_full(w, inst, spec, {p, attrs}, alpha, beta));
    int i = spec.parts.part_count - 1;
    while (i >= 0 && ++p[i] > inst.candidate_count(i)) p[i--] = 1;
    if (i < 0) break;
  }
  return best;
}

inline double exhaustive_best_attr_score(const js::WeightVector& w, const js::Instance& inst,
                                         const js::ModelSpec& spec, const std::vector<int>& pose,
                                         double alpha, double beta) {
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> c(spec.attrs.attribute_count, 1);
  for (;;) {
    best = std::max(best, js::score_full(w, inst, spec, {pose, c}, alpha, beta));
    int k = spec.attrs.attribute_count - 1;
    while (k >= 0 && ++c[k] > spec.attrs.cardinalities[k]) c[k--] = 1;
    if (k < 0) break;
  }
  return best;
}

inline double dense_dot(const js::WeightVector& w, const std::vector<double>& j) {
  double s = 0;
  for (std::size_t i = 0; i < j.size(); ++i) s += w.values[i] * j[i];
  return s;
}

inline bool close(double a, double b, double tol = 1e-9) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace testutil
