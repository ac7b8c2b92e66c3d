#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "jointstruct/errors.hpp"
#include "jointstruct/features.hpp"
#include "jointstruct/instance.hpp"
#include "jointstruct/model.hpp"
#include "jointstruct/rng.hpp"
#include "jointstruct/weights.hpp"

namespace jointstruct {

struct SynthConfig {
  int train_count = 300;
  int test_count = 700;
  int k_per_part = 10;
  double weight_scale = 1.0;
  double sigma = 0.05;        // feature noise level
  double rho = 0.95;          // attribute-to-candidate coupling strength
  double edge_fidelity = 0.9; // probability a correct candidate gets aligned edges
  std::uint64_t seed = 1;
};

struct SynthData {
  std::vector<Instance> train;
  std::vector<Instance> test;
  WeightVector planted;
};

namespace synth_detail {

constexpr int kImageSize = 512;

// Fixed body layout; rotation differences sit mid-bin and parent centers sit
// well inside their relative-position cells, so small jitter never moves the
// true configuration across a feature bin.
inline std::array<Box, 6> template_layout() {
  return {Box{256, 300, 90, 56},   // torso
          Box{180, 260, 81, 36},   // ru_arm
          Box{332, 260, 99, 36},   // lu_arm
          Box{150, 340, 54, 36},   // rl_arm
          Box{362, 340, 126, 36},  // ll_arm
          Box{256, 180, 99, 28}};  // head
}

inline double wrap_angle(double deg) {
  double d = std::fmod(deg, 360.0);
  if (d < 0) d += 360.0;
  return d;
}

inline std::vector<double> unit_gauss(Rng& rng, int dim) {
  std::vector<double> v(dim);
  double norm2 = 0;
  for (auto& x : v) {
    x = rng.normal();
    norm2 += x * x;
  }
  const double inv = 1.0 / std::max(std::sqrt(norm2), 1e-12);
  for (auto& x : v) x *= inv;
  return v;
}

inline std::vector<double> dirichlet_flat(Rng& rng, int dim) {
  std::vector<double> v(dim);
  double sum = 0;
  for (auto& x : v) {
    x = -std::log(std::max(rng.uniform(), 1e-300));
    sum += x;
  }
  for (auto& x : v) x /= sum;
  return v;
}

inline void add_noise_renormalize(std::vector<double>& hist, double sigma, Rng& rng) {
  if (sigma <= 0) return;
  double sum = 0;
  for (auto& x : hist) {
    x = std::max(0.0, x + sigma * 0.1 * rng.normal());
    sum += x;
  }
  if (sum <= 0) {
    const double u = 1.0 / hist.size();
    for (auto& x : hist) x = u;
  } else {
    for (auto& x : hist) x /= sum;
  }
}

inline int compat_value(int a, int t_to) { return (a % t_to) + 1; }

}  // namespace synth_detail

// Planted weights: unary prototypes per part, deformation bonus on the
// template geometry bins, negative consistency weight on histogram
// divergence, a co-occurrence bonus on style-compatible value pairs, and
// cross weights selecting the basis prototype of each attribute value.
inline WeightVector planted_weights(const ModelSpec& spec, double scale, std::uint64_t seed) {
  WeightVector w = WeightVector::zeros(spec);
  Rng proto_rng(Rng::mix(seed, 0x70726f746fULL));
  const auto tmpl = synth_detail::template_layout();

  for (int i = 0; i < spec.parts.part_count; ++i) {
    const auto u = synth_detail::unit_gauss(proto_rng, spec.d_u);
    double* wb = w.block(spec.layout.unary(i));
    for (int t = 0; t < spec.d_u; ++t) wb[t] = scale * u[t];
  }
  for (std::size_t e = 0; e < spec.parts.tree_edges.size(); ++e) {
    const auto& [i, j] = spec.parts.tree_edges[e];
    double* wb = w.block(spec.layout.deform(static_cast<int>(e)));
    const int cell = relative_position_cell(tmpl[i].x, tmpl[i].y, tmpl[j], spec.parts.box_width_ratio[j]);
    const int rbin = relative_rotation_bin(tmpl[i].theta, tmpl[j].theta);
    wb[cell] = 0.2 * scale;
    wb[kDeformPositionBins + rbin] = 0.2 * scale;
  }
  for (std::size_t p = 0; p < spec.parts.symmetric_pairs.size(); ++p) {
    double* wb = w.block(spec.layout.consistency(static_cast<int>(p)));
    wb[0] = -0.2 * scale;
    wb[1] = -0.2 * scale;
  }
  for (std::size_t e = 0; e < spec.attrs.tree_edges.size(); ++e) {
    const auto& [k, l] = spec.attrs.tree_edges[e];
    double* wb = w.block(spec.layout.cooccurrence(static_cast<int>(e)));
    for (int a = 1; a <= spec.attrs.cardinalities[k]; ++a)
      wb[(a - 1) * spec.attrs.cardinalities[l] +
         (synth_detail::compat_value(a, spec.attrs.cardinalities[l]) - 1)] = 0.1 * scale;
  }
  for (int k = 0; k < spec.attrs.attribute_count; ++k) {
    const auto& dep = spec.attrs.dependency[k];
    for (int t = 1; t <= spec.attrs.cardinalities[k]; ++t)
      for (std::size_t m = 0; m < dep.size(); ++m)
        w.values[cross_segment_offset(spec, k, t, static_cast<int>(m)) + (t - 1)] = 0.6 * scale;
  }
  return w;
}

namespace synth_detail {

inline Instance make_instance(const SynthConfig& cfg, const ModelSpec& spec, std::uint64_t global_index,
                              const std::string& id,
                              const std::vector<std::vector<double>>& unary_protos) {
  Rng rng(Rng::mix(cfg.seed, global_index));
  const auto tmpl = template_layout();
  const int m = spec.parts.part_count;
  const int n = spec.attrs.attribute_count;

  Instance inst;
  inst.id = id;
  inst.width = kImageSize;
  inst.height = kImageSize;
  inst.ensembles.resize(m);

  // True attribute assignment: chain-sampled so compatible pairs are common.
  std::vector<int> truth_attr(n);
  truth_attr[0] = rng.uniform_int(1, spec.attrs.cardinalities[0]);
  for (const auto& [k, l] : spec.attrs.tree_edges)
    truth_attr[l] = rng.uniform() < 0.6 ? compat_value(truth_attr[k], spec.attrs.cardinalities[l])
                                        : rng.uniform_int(1, spec.attrs.cardinalities[l]);

  std::vector<Box> gt_boxes(m);
  std::vector<int> gt_index(m);
  for (int i = 0; i < m; ++i) {
    gt_boxes[i] = tmpl[i];
    gt_boxes[i].x += rng.uniform(-2.0, 2.0);
    gt_boxes[i].y += rng.uniform(-2.0, 2.0);
    gt_boxes[i].theta = wrap_angle(gt_boxes[i].theta + rng.uniform(-3.0, 3.0));
    gt_index[i] = rng.uniform_int(0, cfg.k_per_part - 1);
  }

  // Shared appearance inside each symmetric pair.
  std::vector<int> pair_of_part(m, -1);
  for (std::size_t p = 0; p < spec.parts.symmetric_pairs.size(); ++p) {
    pair_of_part[spec.parts.symmetric_pairs[p].first] = static_cast<int>(p);
    pair_of_part[spec.parts.symmetric_pairs[p].second] = static_cast<int>(p);
  }
  std::vector<std::vector<double>> pair_rgb, pair_lab;
  for (std::size_t p = 0; p < spec.parts.symmetric_pairs.size(); ++p) {
    pair_rgb.push_back(dirichlet_flat(rng, spec.d_hist));
    pair_lab.push_back(dirichlet_flat(rng, spec.d_hist));
  }

  for (int i = 0; i < m; ++i) {
    for (int a = 0; a < cfg.k_per_part; ++a) {
      const bool correct = a == gt_index[i];
      Candidate c;
      if (correct) {
        c.box = gt_boxes[i];
      } else {
        const double s_gt = gt_boxes[i].s;
        double cx = gt_boxes[i].x, cy = gt_boxes[i].y;
        for (int attempt = 0; attempt < 32; ++attempt) {
          const double dir = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
          const double mag = rng.uniform(2.0 * s_gt, 3.0 * s_gt);
          cx = std::clamp(gt_boxes[i].x + mag * std::cos(dir), 4.0, kImageSize - 4.0);
          cy = std::clamp(gt_boxes[i].y + mag * std::sin(dir), 4.0, kImageSize - 4.0);
          if (std::hypot(cx - gt_boxes[i].x, cy - gt_boxes[i].y) >= 2.0 * s_gt) break;
        }
        c.box.x = cx;
        c.box.y = cy;
        c.box.theta = wrap_angle(rng.uniform(0.0, 360.0));
        c.box.s = s_gt * rng.uniform(0.85, 1.15);
      }

      c.unary.resize(spec.d_u);
      if (correct) {
        for (int t = 0; t < spec.d_u; ++t) c.unary[t] = unary_protos[i][t] + cfg.sigma * rng.normal();
      } else {
        // Direction orthogonal to the part prototype, so the planted unary
        // weight scores it zero before noise.
        std::vector<double> g(spec.d_u);
        double dot_u = 0;
        for (int t = 0; t < spec.d_u; ++t) {
          g[t] = rng.normal();
          dot_u += g[t] * unary_protos[i][t];
        }
        double norm2 = 0;
        for (int t = 0; t < spec.d_u; ++t) {
          g[t] -= dot_u * unary_protos[i][t];
          norm2 += g[t] * g[t];
        }
        const double inv = 1.0 / std::max(std::sqrt(norm2), 1e-12);
        for (int t = 0; t < spec.d_u; ++t) c.unary[t] = g[t] * inv + cfg.sigma * rng.normal();
      }

      if (correct && pair_of_part[i] >= 0) {
        c.hist_rgb = pair_rgb[pair_of_part[i]];
        c.hist_lab = pair_lab[pair_of_part[i]];
      } else {
        c.hist_rgb = dirichlet_flat(rng, spec.d_hist);
        c.hist_lab = dirichlet_flat(rng, spec.d_hist);
      }
      add_noise_renormalize(c.hist_rgb, cfg.sigma, rng);
      add_noise_renormalize(c.hist_lab, cfg.sigma, rng);

      for (int k = 0; k < n; ++k) {
        const auto& dep = spec.attrs.dependency[k];
        if (std::find(dep.begin(), dep.end(), i) == dep.end()) continue;
        int value;
        if (correct) {
          const bool coupled = rng.uniform() < cfg.rho;
          const int alt = rng.uniform_int(1, spec.attrs.cardinalities[k]);
          value = coupled ? truth_attr[k] : alt;
        } else {
          value = rng.uniform_int(1, spec.attrs.cardinalities[k]);
        }
        std::vector<double> f(spec.attrs.feature_dims[k], 0.0);
        f[value - 1] = 1.0;
        for (auto& x : f) x += cfg.sigma * rng.normal();
        c.attr_feats[k] = std::move(f);
      }

      const bool aligned = correct && rng.uniform() < cfg.edge_fidelity;
      for (int z = 0; z < 6; ++z) {
        EdgePixel ep;
        if (aligned) {
          ep.theta_e = wrap_angle(c.box.theta + cfg.sigma * 10.0 * rng.normal());
          ep.strength = 1.0;
          ep.d_min = std::abs(cfg.sigma * 0.5 * rng.normal());
        } else {
          ep.theta_e = rng.uniform(0.0, 360.0);
          ep.strength = 1.0;
          ep.d_min = rng.uniform(0.5, 2.0);
        }
        c.edge_pixels.push_back(ep);
      }
      inst.ensembles[i].push_back(std::move(c));
    }
  }

  GroundTruth gt;
  gt.pose = gt_boxes;
  gt.attribute_groups = {truth_attr};
  inst.ground_truth = std::move(gt);
  return inst;
}

}  // namespace synth_detail

inline SynthData generate(const SynthConfig& cfg, const ModelSpec& spec) {
  if (cfg.train_count < 0 || cfg.test_count < 0 || cfg.k_per_part < 1)
    fail(ErrorCode::InvalidArgument, "invalid synth counts");
  if (cfg.sigma < 0 || cfg.rho < 0 || cfg.rho > 1 || cfg.edge_fidelity < 0 || cfg.edge_fidelity > 1)
    fail(ErrorCode::InvalidArgument, "invalid synth noise parameters");
  if (spec.parts.part_count != 6 ||
      spec.parts.tree_edges != std::vector<std::pair<int, int>>{{0, 5}, {0, 1}, {0, 2}, {1, 3}, {2, 4}})
    fail(ErrorCode::InvalidArgument, "synthetic generator requires the default part structure");
  for (int k = 0; k < spec.attrs.attribute_count; ++k)
    if (spec.attrs.feature_dims[k] < spec.attrs.cardinalities[k])
      fail(ErrorCode::InvalidArgument,
           "attribute feature dim must be >= cardinality for " + spec.attrs.names[k]);

  Rng proto_rng(Rng::mix(cfg.seed, 0x70726f746fULL));
  std::vector<std::vector<double>> unary_protos;
  for (int i = 0; i < spec.parts.part_count; ++i)
    unary_protos.push_back(synth_detail::unit_gauss(proto_rng, spec.d_u));

  SynthData out;
  out.planted = planted_weights(spec, cfg.weight_scale, cfg.seed);
  char buf[64];
  for (int i = 0; i < cfg.train_count; ++i) {
    std::snprintf(buf, sizeof(buf), "train-%06d", i);
    out.train.push_back(synth_detail::make_instance(cfg, spec, static_cast<std::uint64_t>(i), buf,
                                                    unary_protos));
  }
  for (int i = 0; i < cfg.test_count; ++i) {
    std::snprintf(buf, sizeof(buf), "test-%06d", i);
    out.test.push_back(synth_detail::make_instance(
        cfg, spec, static_cast<std::uint64_t>(cfg.train_count + i), buf, unary_protos));
  }
  return out;
}

inline ordered_json synth_config_to_json(const SynthConfig& c) {
  ordered_json j;
  j["train_count"] = c.train_count;
  j["test_count"] = c.test_count;
  j["k_per_part"] = c.k_per_part;
  j["weight_scale"] = c.weight_scale;
  j["sigma"] = c.sigma;
  j["rho"] = c.rho;
  j["edge_fidelity"] = c.edge_fidelity;
  j["seed"] = c.seed;
  return j;
}

inline SynthConfig synth_config_from_json(const ordered_json& j) {
  SynthConfig c;
  try {
    if (j.contains("train_count")) c.train_count = j.at("train_count").get<int>();
    if (j.contains("test_count")) c.test_count = j.at("test_count").get<int>();
    if (j.contains("k_per_part")) c.k_per_part = j.at("k_per_part").get<int>();
    if (j.contains("weight_scale")) c.weight_scale = j.at("weight_scale").get<double>();
    if (j.contains("sigma")) c.sigma = j.at("sigma").get<double>();
    if (j.contains("rho")) c.rho = j.at("rho").get<double>();
    if (j.contains("edge_fidelity")) c.edge_fidelity = j.at("edge_fidelity").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const ordered_json::exception& e) {
    fail(ErrorCode::ParseError, std::string("synth config: ") + e.what());
  }
  return c;
}

}  // namespace jointstruct
