#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "jointstruct/errors.hpp"
#include "jointstruct/model.hpp"

namespace jointstruct {

// Oriented bounding box: center, angle in degrees, major-axis length in px.
struct Box {
  double x = 0;
  double y = 0;
  double theta = 0;  // [0, 360)
  double s = 0;      // > 0
};

struct EdgePixel {
  double theta_e = 0;   // edge orientation at the pixel, degrees
  double strength = 0;  // >= 0
  double d_min = 0;     // min distance to the candidate's two long edges, px
};

struct Candidate {
  Box box;
  std::vector<double> unary;
  std::vector<double> hist_rgb;
  std::vector<double> hist_lab;
  std::map<int, std::vector<double>> attr_feats;  // attribute -> descriptor
  std::vector<EdgePixel> edge_pixels;
};

// Attribute value 0 encodes "cannot be labeled" in ground-truth groups.
constexpr int kMissingAttr = 0;

struct GroundTruth {
  std::vector<Box> pose;
  std::vector<std::vector<int>> attribute_groups;  // each of size n, 0 = missing
};

struct JointLabel {
  std::vector<int> pose;   // 1-based candidate indices, size m
  std::vector<int> attrs;  // 1-based attribute values, size n

  bool operator==(const JointLabel&) const = default;
};

struct Instance {
  std::string id;
  int width = 0;
  int height = 0;
  std::vector<std::vector<Candidate>> ensembles;  // per part
  std::optional<GroundTruth> ground_truth;

  double diagonal() const { return std::hypot(static_cast<double>(width), static_cast<double>(height)); }
  int candidate_count(int part) const { return static_cast<int>(ensembles[part].size()); }

  const Candidate& candidate(int part, int index1) const {
    if (part < 0 || part >= static_cast<int>(ensembles.size()))
      fail(ErrorCode::IndexOutOfRange, "part index " + std::to_string(part));
    if (index1 < 1 || index1 > static_cast<int>(ensembles[part].size()))
      fail(ErrorCode::IndexOutOfRange,
           "candidate " + std::to_string(index1) + " for part " + std::to_string(part));
    return ensembles[part][index1 - 1];
  }
};

inline double point_segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  if (len2 == 0.0) return std::hypot(px - ax, py - ay);
  double t = ((px - ax) * dx + (py - ay) * dy) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(px - (ax + t * dx), py - (ay + t * dy));
}

// Distance from a pixel to the nearer of the two long box edges, the
// segments parallel to the major axis at offset +-width/2 from the center.
inline double derive_d_min(double px, double py, const Box& box, double width_ratio) {
  const double th = box.theta * 3.14159265358979323846 / 180.0;
  const double ux = std::cos(th), uy = std::sin(th);
  const double nx = -uy, ny = ux;
  const double half_w = 0.5 * width_ratio * box.s;
  const double half_s = 0.5 * box.s;
  double best = std::numeric_limits<double>::infinity();
  for (double sign : {1.0, -1.0}) {
    const double cx = box.x + sign * half_w * nx;
    const double cy = box.y + sign * half_w * ny;
    best = std::min(best, point_segment_distance(px, py, cx - half_s * ux, cy - half_s * uy,
                                                 cx + half_s * ux, cy + half_s * uy));
  }
  return best;
}

inline bool label_in_bounds(const JointLabel& y, const Instance& inst, const ModelSpec& spec) {
  if (static_cast<int>(y.pose.size()) != spec.parts.part_count) return false;
  if (static_cast<int>(y.attrs.size()) != spec.attrs.attribute_count) return false;
  for (int i = 0; i < spec.parts.part_count; ++i)
    if (y.pose[i] < 1 || y.pose[i] > inst.candidate_count(i)) return false;
  for (int k = 0; k < spec.attrs.attribute_count; ++k)
    if (y.attrs[k] < 1 || y.attrs[k] > spec.attrs.cardinalities[k]) return false;
  return true;
}

inline void check_label(const JointLabel& y, const Instance& inst, const ModelSpec& spec) {
  if (!label_in_bounds(y, inst, spec))
    fail(ErrorCode::IndexOutOfRange, "label out of bounds for instance " + inst.id);
}

constexpr int kDefaultCandidateCap = 40;

inline std::vector<Violation> validate_instance(const Instance& inst, const ModelSpec& spec,
                                                int candidate_cap = kDefaultCandidateCap) {
  std::vector<Violation> out;
  const int m = spec.parts.part_count;
  const int n = spec.attrs.attribute_count;
  auto ctx = [&](int part) { return inst.id + " part " + std::to_string(part); };

  if (inst.width <= 0 || inst.height <= 0)
    out.push_back({ErrorCode::InvalidArgument, inst.id + ": image dims must be positive"});
  if (static_cast<int>(inst.ensembles.size()) != m) {
    out.push_back({ErrorCode::DimMismatch, inst.id + ": ensemble count != part_count"});
    return out;
  }

  for (int i = 0; i < m; ++i) {
    const auto& list = inst.ensembles[i];
    if (list.empty()) out.push_back({ErrorCode::InvalidArgument, ctx(i) + ": empty candidate ensemble"});
    if (candidate_cap > 0 && static_cast<int>(list.size()) > candidate_cap)
      out.push_back({ErrorCode::InvalidArgument,
                     ctx(i) + ": " + std::to_string(list.size()) + " candidates exceed cap " +
                         std::to_string(candidate_cap)});
    for (std::size_t a = 0; a < list.size(); ++a) {
      const auto& c = list[a];
      auto where = [&] { return ctx(i) + " candidate " + std::to_string(a + 1); };
      if (!(c.box.s > 0)) out.push_back({ErrorCode::InvalidArgument, where() + ": s must be > 0"});
      if (!(c.box.theta >= 0 && c.box.theta < 360))
        out.push_back({ErrorCode::InvalidArgument, where() + ": theta outside [0,360)"});
      if (static_cast<int>(c.unary.size()) != spec.d_u)
        out.push_back({ErrorCode::DimMismatch, where() + ": unary dim"});
      for (const auto* h : {&c.hist_rgb, &c.hist_lab}) {
        if (static_cast<int>(h->size()) != spec.d_hist) {
          out.push_back({ErrorCode::DimMismatch, where() + ": histogram dim"});
          continue;
        }
        double sum = 0;
        bool nonneg = true;
        for (double v : *h) {
          sum += v;
          if (v < 0) nonneg = false;
        }
        if (!nonneg) out.push_back({ErrorCode::DimMismatch, where() + ": histogram has negative bin"});
        if (std::abs(sum - 1.0) > 1e-6)
          out.push_back({ErrorCode::DimMismatch, where() + ": histogram sum != 1"});
      }
      for (const auto& ep : c.edge_pixels) {
        if (ep.strength < 0) out.push_back({ErrorCode::InvalidArgument, where() + ": edge strength < 0"});
        if (ep.d_min < 0) out.push_back({ErrorCode::InvalidArgument, where() + ": edge d_min < 0"});
      }
      // attr_feats present exactly for attributes depending on this part
      for (int k = 0; k < n; ++k) {
        const auto& dep = spec.attrs.dependency[k];
        const bool needed = std::find(dep.begin(), dep.end(), i) != dep.end();
        auto it = c.attr_feats.find(k);
        if (needed && it == c.attr_feats.end())
          out.push_back({ErrorCode::MissingAttrFeature,
                         where() + ": missing feature for attribute " + spec.attrs.names[k]});
        else if (!needed && it != c.attr_feats.end())
          out.push_back({ErrorCode::DimMismatch,
                         where() + ": unexpected feature for attribute " + spec.attrs.names[k]});
        else if (needed && static_cast<int>(it->second.size()) != spec.attrs.feature_dims[k])
          out.push_back({ErrorCode::DimMismatch,
                         where() + ": feature dim for attribute " + spec.attrs.names[k]});
      }
    }
  }

  if (inst.ground_truth) {
    const auto& gt = *inst.ground_truth;
    if (static_cast<int>(gt.pose.size()) != m)
      out.push_back({ErrorCode::DimMismatch, inst.id + ": ground-truth pose size"});
    if (gt.attribute_groups.empty())
      out.push_back({ErrorCode::InvalidArgument, inst.id + ": ground truth needs >= 1 attribute group"});
    for (const auto& g : gt.attribute_groups) {
      if (static_cast<int>(g.size()) != n) {
        out.push_back({ErrorCode::DimMismatch, inst.id + ": attribute group size"});
        continue;
      }
      for (int k = 0; k < n; ++k)
        if (g[k] != kMissingAttr && (g[k] < 1 || g[k] > spec.attrs.cardinalities[k]))
          out.push_back({ErrorCode::IndexOutOfRange,
                         inst.id + ": attribute value out of range for " + spec.attrs.names[k]});
    }
  }
  return out;
}

namespace detail {

inline ordered_json candidate_to_json(const Candidate& c) {
  ordered_json j;
  j["box"] = {c.box.x, c.box.y, c.box.theta, c.box.s};
  j["unary"] = c.unary;
  j["hist_rgb"] = c.hist_rgb;
  j["hist_lab"] = c.hist_lab;
  ordered_json af = ordered_json::object();
  for (const auto& [k, v] : c.attr_feats) af[std::to_string(k)] = v;
  j["attr_feats"] = std::move(af);
  ordered_json eps = ordered_json::array();
  for (const auto& ep : c.edge_pixels) eps.push_back({ep.theta_e, ep.strength, ep.d_min});
  j["edge_pixels"] = std::move(eps);
  return j;
}

// Edge pixels serialize as [theta_e, strength, d_min]; the 4-element form
// [theta_e, strength, px, py] carries raw pixel coordinates and d_min is
// derived from the candidate geometry at ingestion.
inline Candidate candidate_from_json(const ordered_json& j, double width_ratio) {
  Candidate c;
  const auto& b = j.at("box");
  c.box = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
  c.unary = j.at("unary").get<std::vector<double>>();
  c.hist_rgb = j.at("hist_rgb").get<std::vector<double>>();
  c.hist_lab = j.at("hist_lab").get<std::vector<double>>();
  for (const auto& [key, val] : j.at("attr_feats").items())
    c.attr_feats[std::stoi(key)] = val.get<std::vector<double>>();
  for (const auto& e : j.at("edge_pixels")) {
    EdgePixel ep;
    ep.theta_e = e.at(0).get<double>();
    ep.strength = e.at(1).get<double>();
    if (e.size() == 3)
      ep.d_min = e.at(2).get<double>();
    else if (e.size() == 4)
      ep.d_min = derive_d_min(e.at(2).get<double>(), e.at(3).get<double>(), c.box, width_ratio);
    else
      fail(ErrorCode::ParseError, "edge pixel entry must have 3 or 4 elements");
    c.edge_pixels.push_back(ep);
  }
  return c;
}

inline ordered_json instance_to_json(const Instance& inst) {
  ordered_json j;
  j["id"] = inst.id;
  j["width"] = inst.width;
  j["height"] = inst.height;
  ordered_json ens = ordered_json::array();
  for (const auto& list : inst.ensembles) {
    ordered_json l = ordered_json::array();
    for (const auto& c : list) l.push_back(candidate_to_json(c));
    ens.push_back(std::move(l));
  }
  j["ensembles"] = std::move(ens);
  if (inst.ground_truth) {
    ordered_json gt;
    gt["pose"] = ordered_json::array();
    for (const auto& b : inst.ground_truth->pose) gt["pose"].push_back({b.x, b.y, b.theta, b.s});
    gt["attribute_groups"] = inst.ground_truth->attribute_groups;
    j["ground_truth"] = std::move(gt);
  } else {
    j["ground_truth"] = nullptr;
  }
  return j;
}

inline Instance instance_from_json(const ordered_json& j, const ModelSpec& spec) {
  Instance inst;
  inst.id = j.at("id").get<std::string>();
  inst.width = j.at("width").get<int>();
  inst.height = j.at("height").get<int>();
  const auto& ens = j.at("ensembles");
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const double ratio =
        i < spec.parts.box_width_ratio.size() ? spec.parts.box_width_ratio[i] : 1.0 / 3.0;
    std::vector<Candidate> list;
    for (const auto& cj : ens[i]) list.push_back(candidate_from_json(cj, ratio));
    inst.ensembles.push_back(std::move(list));
  }
  if (j.contains("ground_truth") && !j.at("ground_truth").is_null()) {
    GroundTruth gt;
    for (const auto& b : j.at("ground_truth").at("pose"))
      gt.pose.push_back({b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                         b.at(3).get<double>()});
    gt.attribute_groups = j.at("ground_truth").at("attribute_groups").get<std::vector<std::vector<int>>>();
    inst.ground_truth = std::move(gt);
  }
  return inst;
}

}  // namespace detail

inline ordered_json dataset_to_json(const ModelSpec& spec, const std::vector<Instance>& instances) {
  ordered_json j;
  j["format"] = "jointstruct-dataset";
  j["version"] = 1;
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(model_hash(spec)));
  j["model_hash"] = hex;
  j["m"] = spec.parts.part_count;
  j["n"] = spec.attrs.attribute_count;
  ordered_json dims;
  dims["unary"] = spec.d_u;
  dims["hist"] = spec.d_hist;
  dims["attr_feature_dims"] = spec.attrs.feature_dims;
  j["dims"] = std::move(dims);
  ordered_json arr = ordered_json::array();
  for (const auto& inst : instances) arr.push_back(detail::instance_to_json(inst));
  j["instances"] = std::move(arr);
  return j;
}

inline std::vector<Instance> dataset_from_json(const ordered_json& j, const ModelSpec& spec,
                                               int candidate_cap = kDefaultCandidateCap) {
  try {
    if (j.at("format").get<std::string>() != "jointstruct-dataset")
      fail(ErrorCode::ParseError, "not a dataset document");
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(model_hash(spec)));
    if (j.at("model_hash").get<std::string>() != hex)
      fail(ErrorCode::ParseError, "dataset model hash does not match the supplied model");
    if (j.at("m").get<int>() != spec.parts.part_count || j.at("n").get<int>() != spec.attrs.attribute_count)
      fail(ErrorCode::DimMismatch, "dataset header m/n disagree with model");
    if (j.at("dims").at("unary").get<int>() != spec.d_u ||
        j.at("dims").at("hist").get<int>() != spec.d_hist)
      fail(ErrorCode::DimMismatch, "dataset header dims disagree with model");

    std::vector<Instance> out;
    for (const auto& ij : j.at("instances")) out.push_back(detail::instance_from_json(ij, spec));
    std::sort(out.begin(), out.end(), [](const Instance& a, const Instance& b) { return a.id < b.id; });
    for (const auto& inst : out) {
      auto violations = validate_instance(inst, spec, candidate_cap);
      if (!violations.empty()) throw Error(violations.front().code, violations.front().message);
    }
    return out;
  } catch (const ordered_json::exception& e) {
    fail(ErrorCode::ParseError, std::string("dataset json: ") + e.what());
  }
}

inline void save_dataset(const std::string& path, const ModelSpec& spec,
                         const std::vector<Instance>& instances) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::IoError, "cannot open for writing: " + path);
  f << dataset_to_json(spec, instances).dump(2) << "\n";
}

inline std::vector<Instance> load_dataset(const std::string& path, const ModelSpec& spec,
                                          int candidate_cap = kDefaultCandidateCap) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::IoError, "cannot open: " + path);
  ordered_json j;
  try {
    f >> j;
  } catch (const ordered_json::exception& e) {
    fail(ErrorCode::ParseError, std::string(path) + ": " + e.what());
  }
  return dataset_from_json(j, spec, candidate_cap);
}

}  // namespace jointstruct
