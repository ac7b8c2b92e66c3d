#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "jointstruct/errors.hpp"
#include "jointstruct/features.hpp"
#include "jointstruct/inference.hpp"
#include "jointstruct/instance.hpp"
#include "jointstruct/metrics.hpp"
#include "jointstruct/model.hpp"
#include "jointstruct/rng.hpp"
#include "jointstruct/weights.hpp"

namespace jointstruct {

struct TrainConfig {
  double C = 0.01;
  int epochs = 200;
  double eta0 = 0.5;
  double eta_decay = 0.05;
  int negatives_per_instance = 8;
  int hard_negative_rounds = 2;
  std::uint64_t seed = 1;
};

// One positive pose binding per instance plus one label per attribute group.
// missing[g][k] marks attributes the g-th group leaves unlabeled; their
// feature blocks are zeroed in the constraint built from that label.
struct BoundPositives {
  std::vector<int> pose;  // 1-based candidate indices
  std::vector<JointLabel> labels;
  std::vector<std::vector<char>> missing;
};

// Binds ground truth to candidate indices: per part, the candidate with the
// smallest endpoint error against the truth box. Instances where some part
// has no candidate within the threshold are unbindable.
inline std::optional<BoundPositives> bind_ground_truth(const Instance& inst, const ModelSpec& spec,
                                                       double pcp_threshold = kDefaultPcpThreshold) {
  if (!inst.ground_truth) fail(ErrorCode::NoGroundTruth, "instance " + inst.id + " has no ground truth");
  const auto& gt = *inst.ground_truth;
  const int m = spec.parts.part_count;
  BoundPositives out;
  out.pose.resize(m);
  for (int i = 0; i < m; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = -1;
    for (int a = 0; a < inst.candidate_count(i); ++a) {
      const double err = box_endpoint_error(inst.ensembles[i][a].box, gt.pose[i]);
      if (err < best) {
        best = err;
        arg = a;
      }
    }
    if (arg < 0 || best > pcp_threshold * gt.pose[i].s) return std::nullopt;
    out.pose[i] = arg + 1;
  }
  const int n = spec.attrs.attribute_count;
  for (const auto& group : gt.attribute_groups) {
    JointLabel y;
    y.pose = out.pose;
    y.attrs.resize(n);
    std::vector<char> missing(n, 0);
    for (int k = 0; k < n; ++k) {
      if (group[k] == kMissingAttr) {
        y.attrs[k] = 1;  // placeholder; the mask removes its features
        missing[k] = 1;
      } else {
        y.attrs[k] = group[k];
      }
    }
    out.labels.push_back(std::move(y));
    out.missing.push_back(std::move(missing));
  }
  return out;
}

namespace detail {

inline bool equals_any(const JointLabel& y, const std::vector<JointLabel>& set) {
  for (const auto& p : set)
    if (p == y) return true;
  return false;
}

inline JointLabel random_label(const Instance& inst, const ModelSpec& spec, Rng& rng) {
  JointLabel y;
  y.pose.resize(spec.parts.part_count);
  y.attrs.resize(spec.attrs.attribute_count);
  for (int i = 0; i < spec.parts.part_count; ++i) y.pose[i] = rng.uniform_int(1, inst.candidate_count(i));
  for (int k = 0; k < spec.attrs.attribute_count; ++k)
    y.attrs[k] = rng.uniform_int(1, spec.attrs.cardinalities[k]);
  return y;
}

// Changes one coordinate with more than one option to a different value.
inline JointLabel perturb_label(const JointLabel& base, const Instance& inst, const ModelSpec& spec,
                                Rng& rng) {
  std::vector<int> open;
  for (int i = 0; i < spec.parts.part_count; ++i)
    if (inst.candidate_count(i) > 1) open.push_back(i);
  for (int k = 0; k < spec.attrs.attribute_count; ++k)
    if (spec.attrs.cardinalities[k] > 1) open.push_back(spec.parts.part_count + k);
  JointLabel y = base;
  if (open.empty()) return y;
  const int pick = open[rng.uniform_int(0, static_cast<int>(open.size()) - 1)];
  if (pick < spec.parts.part_count) {
    const int hi = inst.candidate_count(pick);
    y.pose[pick] = 1 + (y.pose[pick] - 1 + rng.uniform_int(1, hi - 1)) % hi;
  } else {
    const int k = pick - spec.parts.part_count;
    const int hi = spec.attrs.cardinalities[k];
    y.attrs[k] = 1 + (y.attrs[k] - 1 + rng.uniform_int(1, hi - 1)) % hi;
  }
  return y;
}

}  // namespace detail

// R negatives per instance: half uniform-random labels, half hard labels
// harvested from coordinate-ascent iterates under the current weights. Every
// negative differs from every positive; duplicates are dropped.
inline std::vector<JointLabel> generate_negatives(const Instance& inst, const ModelSpec& spec,
                                                  const std::vector<JointLabel>& positives,
                                                  const WeightVector& w, int count, Rng& rng,
                                                  double alpha, double beta) {
  if (positives.empty()) fail(ErrorCode::InvalidArgument, "generate_negatives needs positives");
  std::vector<JointLabel> out;
  std::set<std::pair<std::vector<int>, std::vector<int>>> seen;
  auto push = [&](const JointLabel& y) {
    if (detail::equals_any(y, positives)) return false;
    if (!seen.insert({y.pose, y.attrs}).second) return false;
    out.push_back(y);
    return true;
  };

  const int n_hard = count / 2;
  const int n_random = count - n_hard;

  for (int r = 0; r < n_random; ++r) {
    bool ok = false;
    for (int attempt = 0; attempt < 64 && !ok; ++attempt)
      ok = push(detail::random_label(inst, spec, rng));
    for (int attempt = 0; attempt < 64 && !ok; ++attempt)
      ok = push(detail::perturb_label(positives[0], inst, spec, rng));
  }

  if (n_hard > 0) {
    InferOptions opt;
    opt.alpha = alpha;
    opt.beta = beta;
    const InferenceResult res = infer_joint(w, inst, spec, opt);
    int taken = 0;
    for (auto it = res.trace_labels.rbegin(); it != res.trace_labels.rend() && taken < n_hard; ++it)
      if (push(*it)) ++taken;
    for (int attempt = 0; attempt < 64 * n_hard && taken < n_hard; ++attempt)
      if (push(detail::perturb_label(res.label, inst, spec, rng))) ++taken;
    for (int attempt = 0; attempt < 64 * n_hard && taken < n_hard; ++attempt)
      if (push(detail::perturb_label(positives[0], inst, spec, rng))) ++taken;
  }
  return out;
}

struct MarginConstraint {
  std::vector<double> feature;
  bool positive;
};

struct SolveResult {
  WeightVector w;
  std::vector<double> objective;  // index 0 = initial value, then per epoch
};

inline double hinge_objective(const std::vector<double>& w, const std::vector<MarginConstraint>& cons,
                              double C) {
  double obj = 0;
  for (double v : w) obj += 0.5 * v * v;
  for (const auto& c : cons) {
    double margin = 0;
    for (std::size_t i = 0; i < w.size(); ++i) margin += w[i] * c.feature[i];
    obj += C * std::max(0.0, c.positive ? 1.0 - margin : 1.0 + margin);
  }
  return obj;
}

// Deterministic full-batch subgradient descent on
//   0.5 ||w||^2 + C * sum_r hinge(r)
// with step eta0 / (1 + decay * t). Returns the best iterate seen, so the
// final objective never exceeds the initial one.
inline SolveResult solve_hinge(const std::vector<MarginConstraint>& cons, std::size_t dim, double C,
                               int epochs, double eta0, double eta_decay,
                               const std::vector<double>* init = nullptr) {
  std::vector<double> w = init ? *init : std::vector<double>(dim, 0.0);
  if (w.size() != dim) fail(ErrorCode::DimMismatch, "solver init dimension");
  for (const auto& c : cons)
    if (c.feature.size() != dim) fail(ErrorCode::DimMismatch, "constraint dimension");

  SolveResult res;
  res.objective.push_back(hinge_objective(w, cons, C));
  std::vector<double> best = w;
  double best_obj = res.objective[0];

  std::vector<double> grad(dim);
  for (int t = 1; t <= epochs; ++t) {
    grad = w;
    for (const auto& c : cons) {
      double margin = 0;
      for (std::size_t i = 0; i < dim; ++i) margin += w[i] * c.feature[i];
      if (c.positive && margin < 1.0)
        for (std::size_t i = 0; i < dim; ++i) grad[i] -= C * c.feature[i];
      else if (!c.positive && margin > -1.0)
        for (std::size_t i = 0; i < dim; ++i) grad[i] += C * c.feature[i];
    }
    const double eta = eta0 / (1.0 + eta_decay * t);
    for (std::size_t i = 0; i < dim; ++i) w[i] -= eta * grad[i];
    const double obj = hinge_objective(w, cons, C);
    res.objective.push_back(obj);
    if (obj < best_obj) {
      best_obj = obj;
      best = w;
    }
  }
  res.w.values = std::move(best);
  return res;
}

struct TrainResult {
  WeightVector w;
  std::vector<std::vector<double>> objective_per_round;
  int used_instances = 0;
  int unbindable = 0;
  int positive_count = 0;
  int negative_count = 0;
};

// Structured SVM training with explicit positive and negative constraints.
// Hard negatives are regenerated from the current model between rounds.
inline TrainResult train(const std::vector<Instance>& data, const ModelSpec& spec,
                         const TrainConfig& cfg, double alpha, double beta,
                         bool cross_masked = false) {
  struct Bound {
    int index;
    const Instance* inst;
    BoundPositives pos;
    std::vector<char> instance_missing;  // attrs unlabeled in every group
  };
  std::vector<Bound> bound;
  int unbindable = 0;
  for (std::size_t idx = 0; idx < data.size(); ++idx) {
    const Instance& inst = data[idx];
    if (!inst.ground_truth) continue;
    auto bp = bind_ground_truth(inst, spec);
    if (!bp) {
      ++unbindable;
      continue;
    }
    std::vector<char> inst_missing(spec.attrs.attribute_count, 1);
    for (const auto& miss : bp->missing)
      for (int k = 0; k < spec.attrs.attribute_count; ++k)
        if (!miss[k]) inst_missing[k] = 0;
    bound.push_back({static_cast<int>(idx), &inst, std::move(*bp), std::move(inst_missing)});
  }
  if (bound.empty()) fail(ErrorCode::EmptyTrainingSet, "no bindable training instances");

  TrainResult out;
  out.used_instances = static_cast<int>(bound.size());
  out.unbindable = unbindable;

  std::vector<MarginConstraint> cons;
  for (const auto& b : bound)
    for (std::size_t g = 0; g < b.pos.labels.size(); ++g) {
      ScoreMask mask;
      mask.cross_masked = cross_masked;
      mask.attr_missing = b.pos.missing[g];
      cons.push_back({assemble_joint(*b.inst, spec, b.pos.labels[g], mask), true});
    }
  out.positive_count = static_cast<int>(cons.size());
  const std::size_t positive_end = cons.size();

  std::vector<double> w(spec.layout.total_dim, 0.0);
  const int rounds = std::max(1, cfg.hard_negative_rounds);
  for (int round = 0; round < rounds; ++round) {
    cons.resize(positive_end);
    WeightVector wv{w};
    out.negative_count = 0;
    for (const auto& b : bound) {
      Rng rng(Rng::mix(Rng::mix(cfg.seed, static_cast<std::uint64_t>(b.index)),
                       static_cast<std::uint64_t>(round)));
      const auto negs = generate_negatives(*b.inst, spec, b.pos.labels, wv,
                                           cfg.negatives_per_instance, rng, alpha, beta);
      ScoreMask mask;
      mask.cross_masked = cross_masked;
      mask.attr_missing = b.instance_missing;
      for (const auto& y : negs) cons.push_back({assemble_joint(*b.inst, spec, y, mask), false});
      out.negative_count += static_cast<int>(negs.size());
    }
    auto solved = solve_hinge(cons, spec.layout.total_dim, cfg.C, cfg.epochs, cfg.eta0, cfg.eta_decay, &w);
    w = std::move(solved.w.values);
    out.objective_per_round.push_back(std::move(solved.objective));
  }
  out.w.values = std::move(w);
  return out;
}

}  // namespace jointstruct
