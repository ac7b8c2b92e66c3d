#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "jointstruct/edge_energy.hpp"
#include "jointstruct/errors.hpp"
#include "jointstruct/features.hpp"
#include "jointstruct/instance.hpp"
#include "jointstruct/model.hpp"
#include "jointstruct/weights.hpp"

namespace jointstruct {

struct ConditionalResult {
  std::vector<int> assignment;  // 1-based
  double score = 0;
};

struct InferenceResult {
  JointLabel label;
  double score = 0;
  std::vector<std::pair<int, double>> trace;  // (iteration, S)
  std::vector<JointLabel> trace_labels;       // iterate per trace entry
  int iterations = 0;
  bool converged = false;
};

struct InferOptions {
  double alpha = 0.1;
  double beta = 1.0;
  int max_iter = 10;
  bool cross_masked = false;  // separated-model ablation
};

// Full compatibility score: w . J(x, y) + alpha * Q(x, p).
inline double score_full(const WeightVector& w, const Instance& inst, const ModelSpec& spec,
                         const JointLabel& y, double alpha, double beta, const ScoreMask& mask = {}) {
  return score_joint(w, inst, spec, y, mask) + alpha * pose_energy(inst, y.pose, beta);
}

namespace detail {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Exact max-product over the super-node tree. Ties break toward the
// lexicographically smallest candidate-index vector: configurations are
// enumerated in ascending order everywhere and maxima update strictly.
class PoseDP {
 public:
  PoseDP(const WeightVector& w, const Instance& inst, const ModelSpec& spec,
         const std::optional<std::vector<int>>& attrs, double alpha, double beta)
      : w_(w), inst_(inst), spec_(spec) {
    const int m = spec.parts.part_count;
    k_.resize(m);
    for (int i = 0; i < m; ++i) k_[i] = inst.candidate_count(i);
    super_of_part_.assign(m, -1);
    for (std::size_t s = 0; s < spec.supers.nodes.size(); ++s)
      for (int p : spec.supers.nodes[s].parts) super_of_part_[p] = static_cast<int>(s);

    build_base(attrs, alpha, beta);
    build_deform_tables();
    build_node_tables(attrs);
    if (attrs) route_edge_cross(*attrs);
  }

  ConditionalResult run() {
    const auto& supers = spec_.supers;
    children_.assign(supers.nodes.size(), {});
    parent_.assign(supers.nodes.size(), -1);
    for (const auto& [u, v] : supers.edges) {
      children_[u].push_back(v);
      parent_[v] = u;
    }
    // Leaves-first order: reverse BFS from the root.
    std::vector<int> order{supers.root};
    for (std::size_t i = 0; i < order.size(); ++i)
      for (int c : children_[order[i]]) order.push_back(c);

    messages_.assign(supers.nodes.size(), {});
    ptr_single_.assign(supers.nodes.size(), {});
    ptr_stage0_.assign(supers.nodes.size(), {});
    ptr_stage1_.assign(supers.nodes.size(), {});
    stage_dims_.assign(supers.nodes.size(), {0, 0});
    for (auto it = order.rbegin(); it != order.rend(); ++it)
      if (*it != supers.root) send_message(*it);

    // Root decision.
    const int root = supers.root;
    std::vector<double> total = node_table_[root];
    for (int c : children_[root])
      for (std::size_t cfg = 0; cfg < total.size(); ++cfg) total[cfg] += messages_[c][cfg];
    int best_cfg = 0;
    double best = kNegInf;
    for (std::size_t cfg = 0; cfg < total.size(); ++cfg)
      if (total[cfg] > best) {
        best = total[cfg];
        best_cfg = static_cast<int>(cfg);
      }

    std::vector<int> pose(spec_.parts.part_count, 1);
    assign_config(root, best_cfg, pose);
    decode(root, best_cfg, pose);
    return {pose, best};
  }

 private:
  int config_count(int sn) const {
    const auto& parts = spec_.supers.nodes[sn].parts;
    int c = 1;
    for (int p : parts) c *= k_[p];
    return c;
  }

  // Candidate index (0-based) of the given member ordinal inside a config.
  int extract(int sn, int cfg, int ordinal) const {
    const auto& parts = spec_.supers.nodes[sn].parts;
    if (parts.size() == 1) return cfg;
    return ordinal == 0 ? cfg / k_[parts[1]] : cfg % k_[parts[1]];
  }

  int ordinal_of(int sn, int part) const {
    const auto& parts = spec_.supers.nodes[sn].parts;
    for (std::size_t o = 0; o < parts.size(); ++o)
      if (parts[o] == part) return static_cast<int>(o);
    fail(ErrorCode::InvalidArgument, "part not in super-node");
  }

  void build_base(const std::optional<std::vector<int>>& attrs, double alpha, double beta) {
    base_.resize(k_.size());
    for (std::size_t i = 0; i < k_.size(); ++i) {
      base_[i].resize(k_[i]);
      const double* wu = w_.block(spec_.layout.unary(static_cast<int>(i)));
      for (int a = 0; a < k_[i]; ++a) {
        const Candidate& c = inst_.ensembles[i][a];
        base_[i][a] = dot(wu, c.unary) + alpha * part_energy(c, beta);
      }
    }
    if (!attrs) return;

    // Cross-term scores decompose per dependent part because F_k is a
    // concatenation; compute each part's segment score once.
    seg_.assign(spec_.attrs.attribute_count, {});
    for (int k = 0; k < spec_.attrs.attribute_count; ++k) {
      const auto& dep = spec_.attrs.dependency[k];
      const std::size_t d = spec_.attrs.feature_dims[k];
      const int value = (*attrs)[k];
      seg_[k].resize(dep.size());
      for (std::size_t m = 0; m < dep.size(); ++m) {
        seg_[k][m].resize(k_[dep[m]]);
        const double* ws = w_.values.data() + cross_segment_offset(spec_, k, value, static_cast<int>(m));
        for (int a = 0; a < k_[dep[m]]; ++a) {
          const auto& feats = inst_.ensembles[dep[m]][a].attr_feats.at(k);
          seg_[k][m][a] = dot(ws, feats.data(), d);
        }
      }
    }

    // Routing: inside one super-node they join its table; spanning exactly a
    // singleton-singleton super edge they join that edge; anything else is
    // folded per part into the base scores.
    route_node_.assign(spec_.attrs.attribute_count, -1);
    route_edge_.assign(spec_.attrs.attribute_count, -1);
    for (int k = 0; k < spec_.attrs.attribute_count; ++k) {
      const auto& dep = spec_.attrs.dependency[k];
      bool routed = false;
      for (std::size_t s = 0; s < spec_.supers.nodes.size() && !routed; ++s) {
        const auto& parts = spec_.supers.nodes[s].parts;
        if (std::includes(parts.begin(), parts.end(), dep.begin(), dep.end())) {
          route_node_[k] = static_cast<int>(s);
          routed = true;
        }
      }
      for (std::size_t e = 0; e < spec_.supers.edges.size() && !routed; ++e) {
        const auto& [u, v] = spec_.supers.edges[e];
        const auto& pu = spec_.supers.nodes[u].parts;
        const auto& pv = spec_.supers.nodes[v].parts;
        if (pu.size() != 1 || pv.size() != 1) continue;
        std::vector<int> uni = {pu[0], pv[0]};
        std::sort(uni.begin(), uni.end());
        if (uni == dep) {
          route_edge_[k] = static_cast<int>(e);
          routed = true;
        }
      }
      if (!routed)
        for (std::size_t m = 0; m < dep.size(); ++m)
          for (int a = 0; a < k_[dep[m]]; ++a) base_[dep[m]][a] += seg_[k][m][a];
    }
  }

  void build_deform_tables() {
    const auto& edges = spec_.parts.tree_edges;
    deform_.resize(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const auto& [i, j] = edges[e];
      const double* wd = w_.block(spec_.layout.deform(static_cast<int>(e)));
      deform_[e].assign(static_cast<std::size_t>(k_[i]) * k_[j], 0.0);
      for (int a = 0; a < k_[i]; ++a)
        for (int b = 0; b < k_[j]; ++b) {
          const auto f = deformation_feature(inst_, spec_, i, j, a + 1, b + 1);
          deform_[e][static_cast<std::size_t>(a) * k_[j] + b] = dot(wd, f.data(), f.size());
        }
    }
  }

  void build_node_tables(const std::optional<std::vector<int>>& attrs) {
    const auto& supers = spec_.supers;
    node_table_.resize(supers.nodes.size());
    for (std::size_t s = 0; s < supers.nodes.size(); ++s) {
      const auto& parts = supers.nodes[s].parts;
      std::vector<double>& t = node_table_[s];
      if (parts.size() == 1) {
        t = base_[parts[0]];
      } else {
        const int p = parts[0], q = parts[1];
        t.assign(static_cast<std::size_t>(k_[p]) * k_[q], 0.0);
        const int pair = find_symmetric_pair(spec_, p, q);
        const double* wc = w_.block(spec_.layout.consistency(pair));
        for (int a = 0; a < k_[p]; ++a)
          for (int b = 0; b < k_[q]; ++b) {
            const auto f = consistency_feature(inst_, spec_, p, q, a + 1, b + 1);
            t[static_cast<std::size_t>(a) * k_[q] + b] =
                base_[p][a] + base_[q][b] + dot(wc, f.data(), f.size());
          }
        // A tree edge between paired parts stays inside the node.
        for (std::size_t e = 0; e < spec_.parts.tree_edges.size(); ++e) {
          const auto& [i, j] = spec_.parts.tree_edges[e];
          if (super_of_part_[i] == static_cast<int>(s) && super_of_part_[j] == static_cast<int>(s))
            for (int a = 0; a < k_[p]; ++a)
              for (int b = 0; b < k_[q]; ++b)
                t[static_cast<std::size_t>(a) * k_[q] + b] +=
                    deform_[e][static_cast<std::size_t>(i == p ? a : b) * k_[j] + (j == q ? b : a)];
        }
      }
      if (attrs)
        for (int k = 0; k < spec_.attrs.attribute_count; ++k) {
          if (route_node_[k] != static_cast<int>(s)) continue;
          const auto& dep = spec_.attrs.dependency[k];
          for (std::size_t cfg = 0; cfg < t.size(); ++cfg)
            for (std::size_t m = 0; m < dep.size(); ++m)
              t[cfg] += seg_[k][m][extract(static_cast<int>(s), static_cast<int>(cfg),
                                           ordinal_of(static_cast<int>(s), dep[m]))];
        }
    }
  }

  void route_edge_cross(const std::vector<int>&) {
    edge_cross_.assign(spec_.supers.edges.size(), {});
    for (int k = 0; k < spec_.attrs.attribute_count; ++k) {
      if (route_edge_[k] < 0) continue;
      const std::size_t e = route_edge_[k];
      const auto& [u, v] = spec_.supers.edges[e];
      const int pu = spec_.supers.nodes[u].parts[0];
      const int pv = spec_.supers.nodes[v].parts[0];
      const auto& dep = spec_.attrs.dependency[k];
      auto& tab = edge_cross_[e];
      if (tab.empty()) tab.assign(static_cast<std::size_t>(k_[pu]) * k_[pv], 0.0);
      const int mu = dep[0] == pu ? 0 : 1;  // ordinal of pu's segment
      const int mv = 1 - mu;
      for (int a = 0; a < k_[pu]; ++a)
        for (int b = 0; b < k_[pv]; ++b)
          tab[static_cast<std::size_t>(a) * k_[pv] + b] += seg_[k][mu][a] + seg_[k][mv][b];
    }
  }

  // Crossing part edges between super-nodes u (parent) and v (child).
  struct Crossing {
    int edge;         // part tree edge index
    int parent_part;  // its endpoint inside u
    int child_part;   // its endpoint inside v
    bool forward;     // true when the part-tree parent lies in u
  };

  std::vector<Crossing> crossings(int u, int v) const {
    std::vector<Crossing> out;
    for (std::size_t e = 0; e < spec_.parts.tree_edges.size(); ++e) {
      const auto& [a, b] = spec_.parts.tree_edges[e];
      if (super_of_part_[a] == u && super_of_part_[b] == v)
        out.push_back({static_cast<int>(e), a, b, true});
      else if (super_of_part_[a] == v && super_of_part_[b] == u)
        out.push_back({static_cast<int>(e), b, a, false});
    }
    return out;
  }

  double deform_value(const Crossing& c, int parent_cand, int child_cand) const {
    const auto& [i, j] = spec_.parts.tree_edges[c.edge];
    const int a = c.forward ? parent_cand : child_cand;
    const int b = c.forward ? child_cand : parent_cand;
    return deform_[c.edge][static_cast<std::size_t>(a) * k_[j] + b];
  }

  void send_message(int v) {
    const int u = parent_[v];
    const auto& vparts = spec_.supers.nodes[v].parts;
    const auto& uparts = spec_.supers.nodes[u].parts;
    const int ucount = config_count(u);

    std::vector<double> M = node_table_[v];
    for (int c : children_[v])
      for (std::size_t cfg = 0; cfg < M.size(); ++cfg) M[cfg] += messages_[c][cfg];

    int edge_idx = -1;
    for (std::size_t e = 0; e < spec_.supers.edges.size(); ++e)
      if (spec_.supers.edges[e] == std::pair<int, int>{u, v}) edge_idx = static_cast<int>(e);
    const auto cross = crossings(u, v);
    const std::vector<double>* xtab =
        (edge_idx >= 0 && !edge_cross_.empty() && !edge_cross_[edge_idx].empty())
            ? &edge_cross_[edge_idx]
            : nullptr;

    auto& B = messages_[v];
    B.assign(ucount, kNegInf);

    if (vparts.size() == 1) {
      const int q = vparts[0];
      auto& ptr = ptr_single_[v];
      ptr.assign(ucount, 0);
      for (int cu = 0; cu < ucount; ++cu) {
        double best = kNegInf;
        int arg = 0;
        for (int b = 0; b < k_[q]; ++b) {
          double s = M[b];
          for (const auto& c : cross)
            s += deform_value(c, extract(u, cu, ordinal_of(u, c.parent_part)), b);
          if (xtab) s += (*xtab)[static_cast<std::size_t>(cu) * k_[q] + b];
          if (s > best) {
            best = s;
            arg = b;
          }
        }
        B[cu] = best;
        ptr[cu] = arg;
      }
      return;
    }

    // Pair child: eliminate the second member, then the first. Valid when
    // each child member's crossing edges touch at most one parent member;
    // otherwise fall back to direct enumeration.
    const int q0 = vparts[0], q1 = vparts[1];
    std::vector<Crossing> e0, e1;
    int pm0 = -1, pm1 = -1;
    bool staged = xtab == nullptr;
    for (const auto& c : cross) {
      const int pm = ordinal_of(u, c.parent_part);
      if (c.child_part == q0) {
        if (pm0 >= 0 && pm0 != pm) staged = false;
        pm0 = pm;
        e0.push_back(c);
      } else {
        if (pm1 >= 0 && pm1 != pm) staged = false;
        pm1 = pm;
        e1.push_back(c);
      }
    }

    if (!staged) {
      auto& ptr = ptr_single_[v];
      ptr.assign(ucount, 0);
      const int vcount = config_count(v);
      for (int cu = 0; cu < ucount; ++cu) {
        double best = kNegInf;
        int arg = 0;
        for (int cv = 0; cv < vcount; ++cv) {
          double s = M[cv];
          for (const auto& c : cross)
            s += deform_value(c, extract(u, cu, ordinal_of(u, c.parent_part)),
                              extract(v, cv, ordinal_of(v, c.child_part)));
          if (s > best) {
            best = s;
            arg = cv;
          }
        }
        B[cu] = best;
        ptr[cu] = arg;
      }
      return;
    }

    const int kx0 = pm0 >= 0 ? k_[uparts[pm0]] : 1;
    const int kx1 = pm1 >= 0 ? k_[uparts[pm1]] : 1;
    stage_dims_[v] = {pm0, pm1};

    // T[b0][x1] = max_{b1} M(b0, b1) + deform terms tied to member 1.
    auto& ptr1 = ptr_stage1_[v];
    std::vector<double> T(static_cast<std::size_t>(k_[q0]) * kx1, kNegInf);
    ptr1.assign(T.size(), 0);
    for (int b0 = 0; b0 < k_[q0]; ++b0)
      for (int x1 = 0; x1 < kx1; ++x1) {
        double best = kNegInf;
        int arg = 0;
        for (int b1 = 0; b1 < k_[q1]; ++b1) {
          double s = M[static_cast<std::size_t>(b0) * k_[q1] + b1];
          for (const auto& c : e1) s += deform_value(c, x1, b1);
          if (s > best) {
            best = s;
            arg = b1;
          }
        }
        T[static_cast<std::size_t>(b0) * kx1 + x1] = best;
        ptr1[static_cast<std::size_t>(b0) * kx1 + x1] = arg;
      }

    // S[x0][x1] = max_{b0} T(b0, x1) + deform terms tied to member 0.
    auto& ptr0 = ptr_stage0_[v];
    std::vector<double> S(static_cast<std::size_t>(kx0) * kx1, kNegInf);
    ptr0.assign(S.size(), 0);
    for (int x0 = 0; x0 < kx0; ++x0)
      for (int x1 = 0; x1 < kx1; ++x1) {
        double best = kNegInf;
        int arg = 0;
        for (int b0 = 0; b0 < k_[q0]; ++b0) {
          double s = T[static_cast<std::size_t>(b0) * kx1 + x1];
          for (const auto& c : e0) s += deform_value(c, x0, b0);
          if (s > best) {
            best = s;
            arg = b0;
          }
        }
        S[static_cast<std::size_t>(x0) * kx1 + x1] = best;
        ptr0[static_cast<std::size_t>(x0) * kx1 + x1] = arg;
      }

    for (int cu = 0; cu < ucount; ++cu) {
      const int x0 = pm0 >= 0 ? extract(u, cu, pm0) : 0;
      const int x1 = pm1 >= 0 ? extract(u, cu, pm1) : 0;
      B[cu] = S[static_cast<std::size_t>(x0) * kx1 + x1];
    }
  }

  void assign_config(int sn, int cfg, std::vector<int>& pose) const {
    const auto& parts = spec_.supers.nodes[sn].parts;
    for (std::size_t o = 0; o < parts.size(); ++o) pose[parts[o]] = extract(sn, cfg, static_cast<int>(o)) + 1;
  }

  void decode(int u, int cu, std::vector<int>& pose) {
    for (int v : children_[u]) {
      const auto& vparts = spec_.supers.nodes[v].parts;
      int cv;
      if (vparts.size() == 1 || !ptr_single_[v].empty()) {
        cv = ptr_single_[v][cu];
      } else {
        const auto [pm0, pm1] = stage_dims_[v];
        const int kx1 = pm1 >= 0 ? k_[spec_.supers.nodes[u].parts[pm1]] : 1;
        const int x0 = pm0 >= 0 ? extract(u, cu, pm0) : 0;
        const int x1 = pm1 >= 0 ? extract(u, cu, pm1) : 0;
        const int b0 = ptr_stage0_[v][static_cast<std::size_t>(x0) * kx1 + x1];
        const int b1 = ptr_stage1_[v][static_cast<std::size_t>(b0) * kx1 + x1];
        cv = b0 * k_[vparts[1]] + b1;
      }
      assign_config(v, cv, pose);
      decode(v, cv, pose);
    }
  }

  const WeightVector& w_;
  const Instance& inst_;
  const ModelSpec& spec_;
  std::vector<int> k_;
  std::vector<int> super_of_part_;
  std::vector<std::vector<double>> base_;                  // [part][cand]
  std::vector<std::vector<std::vector<double>>> seg_;      // [attr][member][cand]
  std::vector<int> route_node_, route_edge_;
  std::vector<std::vector<double>> deform_;                // [edge][a*Kj+b]
  std::vector<std::vector<double>> node_table_;            // [super][config]
  std::vector<std::vector<double>> edge_cross_;            // [super edge][a*Kv+b]
  std::vector<std::vector<int>> children_;
  std::vector<int> parent_;
  std::vector<std::vector<double>> messages_;
  std::vector<std::vector<int>> ptr_single_, ptr_stage0_, ptr_stage1_;
  std::vector<std::pair<int, int>> stage_dims_;
};

}  // namespace detail

// Exact pose maximizer of w_p.J_p + alpha Q + w_pc.J_pc(., p, c). Passing no
// attributes zeroes every cross term, which is the attribute-free
// initialization of the joint loop.
inline ConditionalResult infer_pose_given_attrs(const WeightVector& w, const Instance& inst,
                                                const ModelSpec& spec,
                                                const std::optional<std::vector<int>>& attrs,
                                                double alpha, double beta) {
  if (w.size() != spec.layout.total_dim) fail(ErrorCode::DimMismatch, "weight vector length");
  if (attrs) {
    if (static_cast<int>(attrs->size()) != spec.attrs.attribute_count)
      fail(ErrorCode::DimMismatch, "attribute assignment length");
    for (int k = 0; k < spec.attrs.attribute_count; ++k)
      if ((*attrs)[k] < 1 || (*attrs)[k] > spec.attrs.cardinalities[k])
        fail(ErrorCode::IndexOutOfRange, "attribute value out of range");
  }
  detail::PoseDP dp(w, inst, spec, attrs, alpha, beta);
  return dp.run();
}

// Exact attribute maximizer of w_c.J_c + w_pc.J_pc(x, p, .) on the attribute
// tree. With the pose fixed each cross term is a T_k-dimensional unary.
inline ConditionalResult infer_attrs_given_pose(const WeightVector& w, const Instance& inst,
                                                const ModelSpec& spec, const std::vector<int>& pose,
                                                bool cross_masked = false) {
  if (w.size() != spec.layout.total_dim) fail(ErrorCode::DimMismatch, "weight vector length");
  const int n = spec.attrs.attribute_count;
  if (static_cast<int>(pose.size()) != spec.parts.part_count)
    fail(ErrorCode::DimMismatch, "pose length");
  for (int i = 0; i < spec.parts.part_count; ++i)
    if (pose[i] < 1 || pose[i] > inst.candidate_count(i))
      fail(ErrorCode::IndexOutOfRange, "pose index out of range");

  std::vector<std::vector<double>> unary(n);
  for (int k = 0; k < n; ++k) {
    unary[k].assign(spec.attrs.cardinalities[k], 0.0);
    if (cross_masked) continue;
    const auto& dep = spec.attrs.dependency[k];
    const std::size_t d = spec.attrs.feature_dims[k];
    for (int t = 1; t <= spec.attrs.cardinalities[k]; ++t)
      for (std::size_t m = 0; m < dep.size(); ++m) {
        const auto& feats = inst.candidate(dep[m], pose[dep[m]]).attr_feats.at(k);
        unary[k][t - 1] += detail::dot(
            w.values.data() + cross_segment_offset(spec, k, t, static_cast<int>(m)), feats.data(), d);
      }
  }

  // Orient the attribute tree away from attribute 0.
  std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbor, edge index)
  for (std::size_t e = 0; e < spec.attrs.tree_edges.size(); ++e) {
    const auto& [k, l] = spec.attrs.tree_edges[e];
    adj[k].emplace_back(l, static_cast<int>(e));
    adj[l].emplace_back(k, static_cast<int>(e));
  }
  std::vector<int> parent(n, -1), parent_edge(n, -1), order;
  std::vector<char> seen(n, 0);
  order.push_back(0);
  seen[0] = 1;
  for (std::size_t i = 0; i < order.size(); ++i)
    for (const auto& [nb, e] : adj[order[i]])
      if (!seen[nb]) {
        seen[nb] = 1;
        parent[nb] = order[i];
        parent_edge[nb] = e;
        order.push_back(nb);
      }

  auto pair_score = [&](int e, int par, int tp, int tc) {
    const auto& [k, l] = spec.attrs.tree_edges[e];
    const double* wc = w.block(spec.layout.cooccurrence(e));
    if (k == par) return wc[(tp - 1) * spec.attrs.cardinalities[l] + (tc - 1)];
    return wc[(tc - 1) * spec.attrs.cardinalities[par] + (tp - 1)];
  };

  std::vector<std::vector<double>> msg(n);
  std::vector<std::vector<int>> ptr(n);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int k = *it;
    if (k == 0) continue;
    const int par = parent[k];
    std::vector<double> M = unary[k];
    for (const auto& [nb, e] : adj[k])
      if (nb != par)
        for (int t = 0; t < spec.attrs.cardinalities[k]; ++t) M[t] += msg[nb][t];
    msg[k].assign(spec.attrs.cardinalities[par], detail::kNegInf);
    ptr[k].assign(spec.attrs.cardinalities[par], 1);
    for (int tp = 1; tp <= spec.attrs.cardinalities[par]; ++tp) {
      double best = detail::kNegInf;
      int arg = 1;
      for (int tc = 1; tc <= spec.attrs.cardinalities[k]; ++tc) {
        const double s = M[tc - 1] + pair_score(parent_edge[k], par, tp, tc);
        if (s > best) {
          best = s;
          arg = tc;
        }
      }
      msg[k][tp - 1] = best;
      ptr[k][tp - 1] = arg;
    }
  }

  std::vector<double> total = unary[0];
  for (const auto& [nb, e] : adj[0])
    for (int t = 0; t < spec.attrs.cardinalities[0]; ++t) total[t] += msg[nb][t];
  int best0 = 1;
  double best = detail::kNegInf;
  for (int t = 1; t <= spec.attrs.cardinalities[0]; ++t)
    if (total[t - 1] > best) {
      best = total[t - 1];
      best0 = t;
    }

  std::vector<int> attrs(n, 1);
  attrs[0] = best0;
  for (std::size_t i = 1; i < order.size(); ++i) {
    const int k = order[i];
    attrs[k] = ptr[k][attrs[parent[k]] - 1];
  }
  return {attrs, best};
}

// Coordinate ascent alternating exact conditional maximizations, tracking
// the best score seen. Stops on a pose fixed point or when the best score
// stops changing.
inline InferenceResult infer_joint(const WeightVector& w, const Instance& inst, const ModelSpec& spec,
                                   const InferOptions& opt = {}) {
  if (opt.max_iter < 1) fail(ErrorCode::InvalidArgument, "max_iter must be >= 1");
  ScoreMask mask;
  mask.cross_masked = opt.cross_masked;

  InferenceResult out;
  std::vector<int> pose =
      infer_pose_given_attrs(w, inst, spec, std::nullopt, opt.alpha, opt.beta).assignment;
  double best = detail::kNegInf;
  for (int t = 1; t <= opt.max_iter; ++t) {
    const auto ar = infer_attrs_given_pose(w, inst, spec, pose, opt.cross_masked);
    const auto pr = opt.cross_masked
                        ? infer_pose_given_attrs(w, inst, spec, std::nullopt, opt.alpha, opt.beta)
                        : infer_pose_given_attrs(w, inst, spec, ar.assignment, opt.alpha, opt.beta);
    const JointLabel y{pr.assignment, ar.assignment};
    const double s = score_full(w, inst, spec, y, opt.alpha, opt.beta, mask);
    out.trace.emplace_back(t, s);
    out.trace_labels.push_back(y);
    const double prev_best = best;
    if (s > best) {
      best = s;
      out.label = y;
    }
    out.iterations = t;
    const bool fixed_point = pr.assignment == pose;
    pose = pr.assignment;
    if (fixed_point || std::abs(best - prev_best) <= 1e-12) {
      out.converged = true;
      break;
    }
  }
  out.score = best;
  return out;
}

struct BruteForceResult {
  JointLabel label;
  double score = 0;
};

// Exhaustive global argmax with the same lexicographic tie-break. Scores are
// accumulated from per-part and per-edge tables rather than the DP machinery.
inline BruteForceResult brute_force_joint(const WeightVector& w, const Instance& inst,
                                          const ModelSpec& spec, double alpha, double beta,
                                          std::uint64_t cap = 10000000ULL) {
  if (w.size() != spec.layout.total_dim) fail(ErrorCode::DimMismatch, "weight vector length");
  const int m = spec.parts.part_count;
  const int n = spec.attrs.attribute_count;

  long double space = 1;
  for (int i = 0; i < m; ++i) space *= inst.candidate_count(i);
  for (int k = 0; k < n; ++k) space *= spec.attrs.cardinalities[k];
  if (space > static_cast<long double>(cap))
    fail(ErrorCode::SpaceTooLarge, "joint label space exceeds cap");

  std::vector<int> K(m);
  for (int i = 0; i < m; ++i) K[i] = inst.candidate_count(i);

  std::vector<std::vector<double>> part(m);
  for (int i = 0; i < m; ++i) {
    part[i].resize(K[i]);
    const double* wu = w.block(spec.layout.unary(i));
    for (int a = 0; a < K[i]; ++a) {
      const Candidate& c = inst.ensembles[i][a];
      part[i][a] = detail::dot(wu, c.unary) + alpha * part_energy(c, beta);
    }
  }
  std::vector<std::vector<double>> dtab(spec.parts.tree_edges.size());
  for (std::size_t e = 0; e < spec.parts.tree_edges.size(); ++e) {
    const auto& [i, j] = spec.parts.tree_edges[e];
    const double* wd = w.block(spec.layout.deform(static_cast<int>(e)));
    dtab[e].resize(static_cast<std::size_t>(K[i]) * K[j]);
    for (int a = 0; a < K[i]; ++a)
      for (int b = 0; b < K[j]; ++b) {
        const auto f = deformation_feature(inst, spec, i, j, a + 1, b + 1);
        dtab[e][static_cast<std::size_t>(a) * K[j] + b] = detail::dot(wd, f.data(), f.size());
      }
  }
  std::vector<std::vector<double>> ctab(spec.parts.symmetric_pairs.size());
  for (std::size_t p = 0; p < spec.parts.symmetric_pairs.size(); ++p) {
    const auto& [i, j] = spec.parts.symmetric_pairs[p];
    const double* wc = w.block(spec.layout.consistency(static_cast<int>(p)));
    ctab[p].resize(static_cast<std::size_t>(K[i]) * K[j]);
    for (int a = 0; a < K[i]; ++a)
      for (int b = 0; b < K[j]; ++b) {
        const auto f = consistency_feature(inst, spec, i, j, a + 1, b + 1);
        ctab[p][static_cast<std::size_t>(a) * K[j] + b] = detail::dot(wc, f.data(), f.size());
      }
  }
  // seg[k][member][cand][value-1]
  std::vector<std::vector<std::vector<std::vector<double>>>> seg(n);
  for (int k = 0; k < n; ++k) {
    const auto& dep = spec.attrs.dependency[k];
    const std::size_t d = spec.attrs.feature_dims[k];
    seg[k].resize(dep.size());
    for (std::size_t mm = 0; mm < dep.size(); ++mm) {
      seg[k][mm].resize(K[dep[mm]]);
      for (int a = 0; a < K[dep[mm]]; ++a) {
        seg[k][mm][a].resize(spec.attrs.cardinalities[k]);
        const auto& feats = inst.ensembles[dep[mm]][a].attr_feats.at(k);
        for (int t = 1; t <= spec.attrs.cardinalities[k]; ++t)
          seg[k][mm][a][t - 1] = detail::dot(
              w.values.data() + cross_segment_offset(spec, k, t, static_cast<int>(mm)), feats.data(), d);
      }
    }
  }

  BruteForceResult best;
  double best_score = detail::kNegInf;
  std::vector<int> p(m, 0);  // 0-based odometer
  std::vector<std::vector<double>> u(n);
  for (;;) {
    double pose_score = 0;
    for (int i = 0; i < m; ++i) pose_score += part[i][p[i]];
    for (std::size_t e = 0; e < spec.parts.tree_edges.size(); ++e) {
      const auto& [i, j] = spec.parts.tree_edges[e];
      pose_score += dtab[e][static_cast<std::size_t>(p[i]) * K[j] + p[j]];
    }
    for (std::size_t pr = 0; pr < spec.parts.symmetric_pairs.size(); ++pr) {
      const auto& [i, j] = spec.parts.symmetric_pairs[pr];
      pose_score += ctab[pr][static_cast<std::size_t>(p[i]) * K[j] + p[j]];
    }
    for (int k = 0; k < n; ++k) {
      u[k].assign(spec.attrs.cardinalities[k], 0.0);
      const auto& dep = spec.attrs.dependency[k];
      for (std::size_t mm = 0; mm < dep.size(); ++mm)
        for (int t = 0; t < spec.attrs.cardinalities[k]; ++t) u[k][t] += seg[k][mm][p[dep[mm]]][t];
    }

    std::vector<int> c(n, 0);
    for (;;) {
      double s = pose_score;
      for (int k = 0; k < n; ++k) s += u[k][c[k]];
      for (std::size_t e = 0; e < spec.attrs.tree_edges.size(); ++e) {
        const auto& [k, l] = spec.attrs.tree_edges[e];
        s += w.block(spec.layout.cooccurrence(static_cast<int>(e)))[c[k] * spec.attrs.cardinalities[l] +
                                                                    c[l]];
      }
      if (s > best_score) {
        best_score = s;
        best.label.pose.assign(m, 0);
        best.label.attrs.assign(n, 0);
        for (int i = 0; i < m; ++i) best.label.pose[i] = p[i] + 1;
        for (int k = 0; k < n; ++k) best.label.attrs[k] = c[k] + 1;
      }
      int k = n - 1;
      while (k >= 0 && ++c[k] == spec.attrs.cardinalities[k]) c[k--] = 0;
      if (k < 0) break;
    }
    int i = m - 1;
    while (i >= 0 && ++p[i] == K[i]) p[i--] = 0;
    if (i < 0) break;
  }
  best.score = best_score;
  return best;
}

}  // namespace jointstruct
