#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "jointstruct/errors.hpp"

namespace jointstruct {

using ordered_json = nlohmann::ordered_json;

// Part-level structure: a spanning tree of body parts plus unordered pairs
// of symmetric parts that carry appearance-consistency potentials.
struct PartGraph {
  int part_count = 0;
  std::vector<std::string> part_names;
  std::vector<std::pair<int, int>> tree_edges;       // (parent, child)
  std::vector<std::pair<int, int>> symmetric_pairs;  // stored (lo, hi)
  int root = 0;
  std::vector<double> box_width_ratio;  // box width = ratio * s, per part
};

// Symmetric pairs collapse into single DP variables so the structure over
// super-nodes stays a tree.
struct SuperNode {
  std::vector<int> parts;  // sorted ascending
};

struct SuperNodeTree {
  std::vector<SuperNode> nodes;              // sorted by smallest member
  std::vector<std::pair<int, int>> edges;    // (parent, child) node indices
  int root = 0;
};

struct AttributeSpec {
  int attribute_count = 0;
  std::vector<std::string> names;
  std::vector<int> cardinalities;             // T_k
  std::vector<std::vector<int>> dependency;   // k -> sorted part indices
  std::vector<std::string> feature_kind;      // shape | color | texture
  std::vector<std::pair<int, int>> tree_edges;
  std::vector<int> feature_dims;              // per-part descriptor dim for k
};

struct FeatureBlock {
  enum class Kind { Unary, Deform, Consistency, Cooccurrence, Cross };
  Kind kind;
  int index;  // part / edge / pair / attr-edge / attribute index
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;
};

constexpr int kDeformPositionBins = 9;
constexpr int kDeformRotationBins = 20;
constexpr int kDeformDim = kDeformPositionBins + kDeformRotationBins + 1;
constexpr int kConsistencyDim = 2;

// Deterministic partition of the weight vector into named blocks. Block
// order: unary per part, deformation per tree edge, consistency per
// symmetric pair, co-occurrence per attribute-tree edge, cross per attribute.
struct FeatureLayout {
  std::vector<FeatureBlock> blocks;
  std::size_t total_dim = 0;
  std::vector<int> unary_block;   // part index -> block position
  std::vector<int> deform_block;  // tree-edge index -> block position
  std::vector<int> cons_block;    // symmetric-pair index -> block position
  std::vector<int> cooc_block;    // attribute-tree-edge index -> block position
  std::vector<int> cross_block;   // attribute index -> block position

  const FeatureBlock& unary(int part) const { return blocks[unary_block[part]]; }
  const FeatureBlock& deform(int edge) const { return blocks[deform_block[edge]]; }
  const FeatureBlock& consistency(int pair) const { return blocks[cons_block[pair]]; }
  const FeatureBlock& cooccurrence(int attr_edge) const { return blocks[cooc_block[attr_edge]]; }
  const FeatureBlock& cross(int attr) const { return blocks[cross_block[attr]]; }
};

struct ModelSpec {
  PartGraph parts;
  SuperNodeTree supers;  // derived from parts, kept for direct access
  AttributeSpec attrs;
  int d_u = 0;
  int d_hist = 0;
  int d_cons = kConsistencyDim;
  FeatureLayout layout;
};

namespace detail {

inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 14695981039346656037ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 14695981039346656037ULL) {
  return fnv1a(s.data(), s.size(), h);
}

}  // namespace detail

inline SuperNodeTree derive_super_nodes(const PartGraph& g) {
  const int m = g.part_count;
  std::vector<int> group(m);
  for (int i = 0; i < m; ++i) group[i] = i;
  for (const auto& [a, b] : g.symmetric_pairs) group[std::max(a, b)] = std::min(a, b);

  // Nodes keyed by their smallest member, sorted ascending.
  std::map<int, SuperNode> by_min;
  for (int i = 0; i < m; ++i) by_min[group[i]].parts.push_back(i);

  SuperNodeTree t;
  std::vector<int> node_of_part(m, -1);
  for (auto& [key, node] : by_min) {
    std::sort(node.parts.begin(), node.parts.end());
    for (int p : node.parts) node_of_part[p] = static_cast<int>(t.nodes.size());
    t.nodes.push_back(std::move(node));
  }
  t.root = node_of_part[g.root];

  std::set<std::pair<int, int>> seen;
  std::vector<std::vector<int>> adj(t.nodes.size());
  for (const auto& [a, b] : g.tree_edges) {
    int u = node_of_part[a], v = node_of_part[b];
    if (u == v) continue;  // edge inside a pair collapses away
    auto key = std::minmax(u, v);
    if (seen.insert(key).second) {
      adj[u].push_back(v);
      adj[v].push_back(u);
    }
  }
  // Orient away from the root, children visited in ascending node order.
  std::vector<int> stack{t.root};
  std::vector<char> visited(t.nodes.size(), 0);
  visited[t.root] = 1;
  std::vector<int> order;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    order.push_back(u);
    std::sort(adj[u].begin(), adj[u].end());
    for (int v : adj[u]) {
      if (!visited[v]) {
        visited[v] = 1;
        t.edges.emplace_back(u, v);
        stack.push_back(v);
      }
    }
  }
  std::sort(t.edges.begin(), t.edges.end());
  return t;
}

inline FeatureLayout build_layout(const PartGraph& parts, const AttributeSpec& attrs, int d_u,
                                  int d_cons = kConsistencyDim) {
  FeatureLayout layout;
  std::size_t off = 0;
  auto add = [&](FeatureBlock::Kind kind, int index, std::string name, std::size_t len) {
    layout.blocks.push_back({kind, index, std::move(name), off, len});
    off += len;
    return static_cast<int>(layout.blocks.size()) - 1;
  };

  layout.unary_block.resize(parts.part_count);
  for (int i = 0; i < parts.part_count; ++i)
    layout.unary_block[i] = add(FeatureBlock::Kind::Unary, i, "unary/" + parts.part_names[i], d_u);

  layout.deform_block.resize(parts.tree_edges.size());
  for (std::size_t e = 0; e < parts.tree_edges.size(); ++e) {
    const auto& [a, b] = parts.tree_edges[e];
    layout.deform_block[e] = add(FeatureBlock::Kind::Deform, static_cast<int>(e),
                                 "deform/" + parts.part_names[a] + "-" + parts.part_names[b], kDeformDim);
  }

  layout.cons_block.resize(parts.symmetric_pairs.size());
  for (std::size_t p = 0; p < parts.symmetric_pairs.size(); ++p) {
    const auto& [a, b] = parts.symmetric_pairs[p];
    layout.cons_block[p] = add(FeatureBlock::Kind::Consistency, static_cast<int>(p),
                               "cons/" + parts.part_names[a] + "~" + parts.part_names[b], d_cons);
  }

  layout.cooc_block.resize(attrs.tree_edges.size());
  for (std::size_t e = 0; e < attrs.tree_edges.size(); ++e) {
    const auto& [k, l] = attrs.tree_edges[e];
    layout.cooc_block[e] = add(FeatureBlock::Kind::Cooccurrence, static_cast<int>(e),
                               "cooc/" + attrs.names[k] + "-" + attrs.names[l],
                               static_cast<std::size_t>(attrs.cardinalities[k]) * attrs.cardinalities[l]);
  }

  layout.cross_block.resize(attrs.attribute_count);
  for (int k = 0; k < attrs.attribute_count; ++k) {
    const std::size_t seg = static_cast<std::size_t>(attrs.dependency[k].size()) * attrs.feature_dims[k];
    layout.cross_block[k] = add(FeatureBlock::Kind::Cross, k, "cross/" + attrs.names[k],
                                seg * attrs.cardinalities[k]);
  }

  layout.total_dim = off;
  return layout;
}

// Segment span of one part's contribution inside a cross block: the block
// holds T_k slots, each the concatenation of per-part descriptors in
// dependency order.
inline std::size_t cross_segment_offset(const ModelSpec& spec, int attr, int value /*1-based*/,
                                        int member_ordinal) {
  const auto& block = spec.layout.cross(attr);
  const std::size_t d = spec.attrs.feature_dims[attr];
  const std::size_t seg_total = spec.attrs.dependency[attr].size() * d;
  return block.offset + static_cast<std::size_t>(value - 1) * seg_total + member_ordinal * d;
}

inline ModelSpec build_default_model(int d_u, int d_hist, const std::map<int, int>& d_attr_feats = {},
                                     std::vector<int> cardinalities = {4, 8, 4, 5, 3}) {
  if (d_u <= 0 || d_hist <= 0) fail(ErrorCode::InvalidArgument, "feature dims must be positive");
  for (const auto& [k, d] : d_attr_feats)
    if (d <= 0) fail(ErrorCode::InvalidArgument, "attribute feature dims must be positive");

  ModelSpec spec;
  spec.d_u = d_u;
  spec.d_hist = d_hist;

  spec.parts.part_count = 6;
  spec.parts.part_names = {"torso", "ru_arm", "lu_arm", "rl_arm", "ll_arm", "head"};
  spec.parts.tree_edges = {{0, 5}, {0, 1}, {0, 2}, {1, 3}, {2, 4}};
  spec.parts.symmetric_pairs = {{1, 2}, {3, 4}};
  spec.parts.root = 0;
  spec.parts.box_width_ratio.assign(6, 1.0 / 3.0);

  spec.attrs.attribute_count = 5;
  spec.attrs.names = {"collar", "color", "neckline", "pattern", "sleeve"};
  if (cardinalities.size() != 5) fail(ErrorCode::InvalidArgument, "expected 5 cardinalities");
  for (int t : cardinalities)
    if (t <= 0) fail(ErrorCode::InvalidArgument, "cardinalities must be positive");
  spec.attrs.cardinalities = std::move(cardinalities);
  spec.attrs.dependency = {{0, 5}, {0}, {0, 5}, {0}, {1, 2, 3, 4}};
  spec.attrs.feature_kind = {"shape", "color", "shape", "texture", "color"};
  spec.attrs.tree_edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}};
  spec.attrs.feature_dims.resize(5);
  for (int k = 0; k < 5; ++k) {
    auto it = d_attr_feats.find(k);
    if (it != d_attr_feats.end())
      spec.attrs.feature_dims[k] = it->second;
    else
      spec.attrs.feature_dims[k] = (spec.attrs.feature_kind[k] == "color") ? d_hist : d_u;
  }

  spec.supers = derive_super_nodes(spec.parts);
  spec.layout = build_layout(spec.parts, spec.attrs, d_u, spec.d_cons);
  return spec;
}

inline std::vector<Violation> validate_model(const ModelSpec& spec) {
  std::vector<Violation> out;
  const int m = spec.parts.part_count;
  const int n = spec.attrs.attribute_count;

  auto part_ok = [&](int i) { return i >= 0 && i < m; };

  if (m <= 0) out.push_back({ErrorCode::InvalidArgument, "part_count must be positive"});
  if (static_cast<int>(spec.parts.part_names.size()) != m)
    out.push_back({ErrorCode::DimMismatch, "part_names size != part_count"});
  if (!part_ok(spec.parts.root)) out.push_back({ErrorCode::DanglingPartIndex, "root out of range"});
  if (static_cast<int>(spec.parts.box_width_ratio.size()) != m)
    out.push_back({ErrorCode::DimMismatch, "box_width_ratio size != part_count"});

  // Spanning tree over parts: m-1 edges, all indices valid, connected, acyclic.
  if (static_cast<int>(spec.parts.tree_edges.size()) != m - 1)
    out.push_back({ErrorCode::CyclicTree, "tree_edges must contain exactly part_count-1 edges"});
  bool edges_valid = true;
  for (const auto& [a, b] : spec.parts.tree_edges) {
    if (!part_ok(a) || !part_ok(b) || a == b) {
      out.push_back({ErrorCode::DanglingPartIndex, "tree edge references invalid part"});
      edges_valid = false;
    }
  }
  if (edges_valid && m > 0) {
    std::vector<std::vector<int>> adj(m);
    for (const auto& [a, b] : spec.parts.tree_edges) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    std::vector<char> seen(m, 0);
    std::vector<int> stack{spec.parts.root >= 0 && spec.parts.root < m ? spec.parts.root : 0};
    seen[stack[0]] = 1;
    int reached = 0;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      ++reached;
      for (int v : adj[u])
        if (!seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
    }
    if (reached != m && static_cast<int>(spec.parts.tree_edges.size()) == m - 1)
      out.push_back({ErrorCode::CyclicTree, "part tree is not connected"});
  }

  std::set<int> paired;
  for (const auto& [a, b] : spec.parts.symmetric_pairs) {
    if (!part_ok(a) || !part_ok(b) || a == b)
      out.push_back({ErrorCode::DanglingPartIndex, "symmetric pair references invalid part"});
    else if (!paired.insert(a).second || !paired.insert(b).second)
      out.push_back({ErrorCode::InvalidArgument, "part appears in two symmetric pairs"});
  }

  if (static_cast<int>(spec.attrs.cardinalities.size()) != n ||
      static_cast<int>(spec.attrs.dependency.size()) != n ||
      static_cast<int>(spec.attrs.feature_dims.size()) != n ||
      static_cast<int>(spec.attrs.names.size()) != n)
    out.push_back({ErrorCode::DimMismatch, "attribute field sizes disagree with attribute_count"});
  else {
    for (int k = 0; k < n; ++k) {
      if (spec.attrs.cardinalities[k] <= 0)
        out.push_back({ErrorCode::InvalidArgument, "cardinality must be positive: " + spec.attrs.names[k]});
      if (spec.attrs.feature_dims[k] <= 0)
        out.push_back({ErrorCode::InvalidArgument, "feature dim must be positive: " + spec.attrs.names[k]});
      if (spec.attrs.dependency[k].empty())
        out.push_back({ErrorCode::InvalidArgument, "empty dependency set: " + spec.attrs.names[k]});
      for (int p : spec.attrs.dependency[k])
        if (!part_ok(p))
          out.push_back({ErrorCode::DanglingPartIndex,
                         "dependency of " + spec.attrs.names[k] + " references part " + std::to_string(p)});
    }
    if (n > 1 && static_cast<int>(spec.attrs.tree_edges.size()) != n - 1)
      out.push_back({ErrorCode::CyclicTree, "attribute tree must contain attribute_count-1 edges"});
    std::vector<std::vector<int>> adj(n);
    bool attr_edges_valid = true;
    for (const auto& [k, l] : spec.attrs.tree_edges) {
      if (k < 0 || k >= n || l < 0 || l >= n || k == l) {
        out.push_back({ErrorCode::DanglingPartIndex, "attribute tree edge references invalid attribute"});
        attr_edges_valid = false;
      } else {
        adj[k].push_back(l);
        adj[l].push_back(k);
      }
    }
    if (attr_edges_valid && n > 0 && static_cast<int>(spec.attrs.tree_edges.size()) == n - 1) {
      std::vector<char> seen(n, 0);
      std::vector<int> stack{0};
      seen[0] = 1;
      int reached = 0;
      while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        ++reached;
        for (int v : adj[u])
          if (!seen[v]) {
            seen[v] = 1;
            stack.push_back(v);
          }
      }
      if (reached != n) out.push_back({ErrorCode::CyclicTree, "attribute tree is not connected"});
    }
  }

  // Super-node tree must match the collapse of the part tree.
  if (out.empty()) {
    SuperNodeTree expect = derive_super_nodes(spec.parts);
    bool same = expect.root == spec.supers.root && expect.edges == spec.supers.edges &&
                expect.nodes.size() == spec.supers.nodes.size();
    if (same)
      for (std::size_t i = 0; i < expect.nodes.size(); ++i)
        if (expect.nodes[i].parts != spec.supers.nodes[i].parts) same = false;
    if (!same) out.push_back({ErrorCode::InvalidArgument, "super-node tree does not match part graph"});
  }

  // Layout must partition [0, D) exactly in block order.
  std::size_t off = 0;
  for (const auto& b : spec.layout.blocks) {
    if (b.offset != off) {
      out.push_back({ErrorCode::OverlappingBlocks, "layout block " + b.name + " misaligned"});
      break;
    }
    off += b.length;
  }
  if (off != spec.layout.total_dim)
    out.push_back({ErrorCode::OverlappingBlocks, "layout blocks do not cover total_dim"});
  if (out.empty()) {
    FeatureLayout expect = build_layout(spec.parts, spec.attrs, spec.d_u, spec.d_cons);
    if (expect.total_dim != spec.layout.total_dim)
      out.push_back({ErrorCode::OverlappingBlocks, "layout disagrees with model dims"});
  }

  return out;
}

inline ordered_json model_to_json(const ModelSpec& spec) {
  ordered_json j;
  j["format"] = "jointstruct-model";
  j["version"] = 1;
  ordered_json p;
  p["count"] = spec.parts.part_count;
  p["names"] = spec.parts.part_names;
  p["root"] = spec.parts.root;
  p["tree_edges"] = ordered_json::array();
  for (const auto& [a, b] : spec.parts.tree_edges) p["tree_edges"].push_back({a, b});
  p["symmetric_pairs"] = ordered_json::array();
  for (const auto& [a, b] : spec.parts.symmetric_pairs) p["symmetric_pairs"].push_back({a, b});
  p["box_width_ratio"] = spec.parts.box_width_ratio;
  j["parts"] = std::move(p);

  ordered_json a;
  a["count"] = spec.attrs.attribute_count;
  a["names"] = spec.attrs.names;
  a["cardinalities"] = spec.attrs.cardinalities;
  a["dependency"] = spec.attrs.dependency;
  a["feature_kind"] = spec.attrs.feature_kind;
  a["tree_edges"] = ordered_json::array();
  for (const auto& [k, l] : spec.attrs.tree_edges) a["tree_edges"].push_back({k, l});
  a["feature_dims"] = spec.attrs.feature_dims;
  j["attributes"] = std::move(a);

  ordered_json d;
  d["unary"] = spec.d_u;
  d["hist"] = spec.d_hist;
  d["consistency"] = spec.d_cons;
  j["dims"] = std::move(d);
  return j;
}

inline ModelSpec model_from_json(const ordered_json& j) {
  try {
    if (j.at("format").get<std::string>() != "jointstruct-model")
      fail(ErrorCode::ParseError, "not a model document");
    ModelSpec spec;
    const auto& p = j.at("parts");
    spec.parts.part_count = p.at("count").get<int>();
    spec.parts.part_names = p.at("names").get<std::vector<std::string>>();
    spec.parts.root = p.at("root").get<int>();
    for (const auto& e : p.at("tree_edges")) spec.parts.tree_edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    for (const auto& e : p.at("symmetric_pairs"))
      spec.parts.symmetric_pairs.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    spec.parts.box_width_ratio = p.at("box_width_ratio").get<std::vector<double>>();

    const auto& a = j.at("attributes");
    spec.attrs.attribute_count = a.at("count").get<int>();
    spec.attrs.names = a.at("names").get<std::vector<std::string>>();
    spec.attrs.cardinalities = a.at("cardinalities").get<std::vector<int>>();
    spec.attrs.dependency = a.at("dependency").get<std::vector<std::vector<int>>>();
    spec.attrs.feature_kind = a.at("feature_kind").get<std::vector<std::string>>();
    for (const auto& e : a.at("tree_edges")) spec.attrs.tree_edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    spec.attrs.feature_dims = a.at("feature_dims").get<std::vector<int>>();

    const auto& d = j.at("dims");
    spec.d_u = d.at("unary").get<int>();
    spec.d_hist = d.at("hist").get<int>();
    spec.d_cons = d.at("consistency").get<int>();

    spec.supers = derive_super_nodes(spec.parts);
    spec.layout = build_layout(spec.parts, spec.attrs, spec.d_u, spec.d_cons);
    return spec;
  } catch (const ordered_json::exception& e) {
    fail(ErrorCode::ParseError, std::string("model json: ") + e.what());
  }
}

// Canonical text form: fixed key order, two-space indent, trailing newline.
inline std::string canonical_model_text(const ModelSpec& spec) { return model_to_json(spec).dump(2) + "\n"; }

inline std::uint64_t model_hash(const ModelSpec& spec) { return detail::fnv1a(canonical_model_text(spec)); }

inline std::uint64_t layout_checksum(const FeatureLayout& layout) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto& b : layout.blocks) {
    h = detail::fnv1a(b.name, h);
    const std::uint64_t packed[2] = {b.offset, b.length};
    h = detail::fnv1a(packed, sizeof(packed), h);
  }
  return h;
}

inline void save_model(const std::string& path, const ModelSpec& spec) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::IoError, "cannot open for writing: " + path);
  f << canonical_model_text(spec);
}

inline ModelSpec load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::IoError, "cannot open: " + path);
  ordered_json j;
  try {
    f >> j;
  } catch (const ordered_json::exception& e) {
    fail(ErrorCode::ParseError, std::string(path) + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace jointstruct
