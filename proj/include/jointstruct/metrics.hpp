#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include <json.hpp>

#include "jointstruct/errors.hpp"
#include "jointstruct/instance.hpp"
#include "jointstruct/model.hpp"

namespace jointstruct {

constexpr double kDefaultPcpThreshold = 0.5;

// Worst endpoint distance between two oriented boxes treated as undirected
// segments: the endpoint correspondence (direct or 180-degree flipped) that
// minimizes the max error is used.
inline double box_endpoint_error(const Box& a, const Box& b) {
  constexpr double deg = 3.14159265358979323846 / 180.0;
  const double ax = 0.5 * a.s * std::cos(a.theta * deg), ay = 0.5 * a.s * std::sin(a.theta * deg);
  const double bx = 0.5 * b.s * std::cos(b.theta * deg), by = 0.5 * b.s * std::sin(b.theta * deg);
  const double a1x = a.x + ax, a1y = a.y + ay, a2x = a.x - ax, a2y = a.y - ay;
  const double b1x = b.x + bx, b1y = b.y + by, b2x = b.x - bx, b2y = b.y - by;
  const double direct = std::max(std::hypot(a1x - b1x, a1y - b1y), std::hypot(a2x - b2x, a2y - b2y));
  const double flipped = std::max(std::hypot(a1x - b2x, a1y - b2y), std::hypot(a2x - b1x, a2y - b1y));
  return std::min(direct, flipped);
}

// A part is correct when both predicted endpoints lie within threshold * L
// of the ground-truth endpoints, L being the ground-truth part length.
inline std::vector<bool> pcp(const std::vector<Box>& predicted, const std::vector<Box>& truth,
                             double threshold = kDefaultPcpThreshold) {
  if (predicted.size() != truth.size()) fail(ErrorCode::DimMismatch, "pcp: pose sizes differ");
  std::vector<bool> out(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i)
    out[i] = box_endpoint_error(predicted[i], truth[i]) <= threshold * truth[i].s;
  return out;
}

// Per-attribute outcome: nullopt when the attribute is unlabeled in every
// group; otherwise correct when the prediction matches any group's value.
inline std::vector<std::optional<bool>> gap(const std::vector<int>& predicted,
                                            const std::vector<std::vector<int>>& groups,
                                            const std::vector<int>& cardinalities) {
  const std::size_t n = cardinalities.size();
  if (predicted.size() != n) fail(ErrorCode::DimMismatch, "gap: attribute count");
  std::vector<std::optional<bool>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (predicted[k] < 1 || predicted[k] > cardinalities[k])
      fail(ErrorCode::IndexOutOfRange, "gap: predicted value out of range");
    bool any_labeled = false, hit = false;
    for (const auto& g : groups) {
      if (static_cast<std::size_t>(g.size()) != n) fail(ErrorCode::DimMismatch, "gap: group size");
      if (g[k] == kMissingAttr) continue;
      any_labeled = true;
      if (g[k] == predicted[k]) hit = true;
    }
    if (any_labeled) out[k] = hit;
  }
  return out;
}

struct PartStat {
  long correct = 0;
  long count = 0;
  double rate() const { return count ? static_cast<double>(correct) / count : 0.0; }
};

struct AttrStat {
  long correct = 0;
  long evaluated = 0;
  long skipped = 0;
  double rate() const { return evaluated ? static_cast<double>(correct) / evaluated : 0.0; }
};

struct InstanceEval {
  std::vector<bool> part_correct;                  // size m
  std::vector<std::optional<bool>> attr_correct;   // size n, nullopt = skipped
};

struct EvalReport {
  std::vector<PartStat> per_part;
  std::vector<PartStat> pooled;  // one entry per symmetric pair
  PartStat pose_total;           // unweighted over parts
  std::vector<AttrStat> per_attr;
  AttrStat attr_total;  // over evaluated decisions
};

inline EvalReport aggregate(const std::vector<InstanceEval>& evals, const ModelSpec& spec) {
  if (evals.empty()) fail(ErrorCode::EmptyInput, "aggregate: no instances");
  const int m = spec.parts.part_count;
  const int n = spec.attrs.attribute_count;
  EvalReport r;
  r.per_part.resize(m);
  r.per_attr.resize(n);
  for (const auto& ev : evals) {
    if (static_cast<int>(ev.part_correct.size()) != m || static_cast<int>(ev.attr_correct.size()) != n)
      fail(ErrorCode::DimMismatch, "aggregate: evaluation sizes");
    for (int i = 0; i < m; ++i) {
      ++r.per_part[i].count;
      if (ev.part_correct[i]) ++r.per_part[i].correct;
    }
    for (int k = 0; k < n; ++k) {
      if (!ev.attr_correct[k]) {
        ++r.per_attr[k].skipped;
        continue;
      }
      ++r.per_attr[k].evaluated;
      if (*ev.attr_correct[k]) ++r.per_attr[k].correct;
    }
  }
  for (const auto& [a, b] : spec.parts.symmetric_pairs) {
    PartStat p;
    p.correct = r.per_part[a].correct + r.per_part[b].correct;
    p.count = r.per_part[a].count + r.per_part[b].count;
    r.pooled.push_back(p);
  }
  for (const auto& p : r.per_part) {
    r.pose_total.correct += p.correct;
    r.pose_total.count += p.count;
  }
  for (const auto& a : r.per_attr) {
    r.attr_total.correct += a.correct;
    r.attr_total.evaluated += a.evaluated;
    r.attr_total.skipped += a.skipped;
  }
  return r;
}

inline ordered_json report_to_json(const EvalReport& r, const ModelSpec& spec, double pcp_threshold) {
  ordered_json j;
  j["format"] = "jointstruct-eval";
  j["version"] = 1;
  j["pcp_threshold"] = pcp_threshold;
  j["note"] = "pose total is the unweighted mean over parts; attribute total is over evaluated decisions";
  ordered_json pose;
  ordered_json per_part = ordered_json::object();
  for (int i = 0; i < spec.parts.part_count; ++i)
    per_part[spec.parts.part_names[i]] = {{"correct", r.per_part[i].correct},
                                          {"count", r.per_part[i].count},
                                          {"rate", r.per_part[i].rate()}};
  pose["per_part"] = std::move(per_part);
  ordered_json pooled = ordered_json::object();
  for (std::size_t p = 0; p < spec.parts.symmetric_pairs.size(); ++p) {
    const auto& [a, b] = spec.parts.symmetric_pairs[p];
    pooled[spec.parts.part_names[a] + "+" + spec.parts.part_names[b]] = {
        {"correct", r.pooled[p].correct}, {"count", r.pooled[p].count}, {"rate", r.pooled[p].rate()}};
  }
  pose["pooled"] = std::move(pooled);
  pose["total"] = {{"correct", r.pose_total.correct},
                   {"count", r.pose_total.count},
                   {"rate", r.pose_total.rate()}};
  j["pose"] = std::move(pose);

  ordered_json attrs;
  ordered_json per_attr = ordered_json::object();
  for (int k = 0; k < spec.attrs.attribute_count; ++k)
    per_attr[spec.attrs.names[k]] = {{"correct", r.per_attr[k].correct},
                                     {"evaluated", r.per_attr[k].evaluated},
                                     {"skipped", r.per_attr[k].skipped},
                                     {"rate", r.per_attr[k].rate()}};
  attrs["per_attribute"] = std::move(per_attr);
  attrs["total"] = {{"correct", r.attr_total.correct},
                    {"evaluated", r.attr_total.evaluated},
                    {"skipped", r.attr_total.skipped},
                    {"rate", r.attr_total.rate()}};
  j["attributes"] = std::move(attrs);
  return j;
}

// Pose boxes referenced by a label, for scoring predictions against truth.
inline std::vector<Box> label_pose_boxes(const Instance& inst, const std::vector<int>& pose) {
  std::vector<Box> out;
  out.reserve(pose.size());
  for (std::size_t i = 0; i < pose.size(); ++i)
    out.push_back(inst.candidate(static_cast<int>(i), pose[i]).box);
  return out;
}

inline InstanceEval evaluate_instance(const Instance& inst, const ModelSpec& spec, const JointLabel& y,
                                      double pcp_threshold = kDefaultPcpThreshold) {
  if (!inst.ground_truth) fail(ErrorCode::NoGroundTruth, "instance " + inst.id + " has no ground truth");
  InstanceEval ev;
  ev.part_correct = pcp(label_pose_boxes(inst, y.pose), inst.ground_truth->pose, pcp_threshold);
  ev.attr_correct = gap(y.attrs, inst.ground_truth->attribute_groups, spec.attrs.cardinalities);
  return ev;
}

}  // namespace jointstruct
