#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "jointstruct/jointstruct.hpp"

namespace js = jointstruct;

TEST_CASE("default model structure") {
  const auto spec = js::build_default_model(16, 8);
  CHECK(spec.parts.part_count == 6);
  CHECK(spec.attrs.attribute_count == 5);
  CHECK(spec.parts.tree_edges.size() == 5);
  CHECK(spec.parts.symmetric_pairs.size() == 2);
  CHECK(spec.attrs.cardinalities == std::vector<int>{4, 8, 4, 5, 3});
  CHECK(js::validate_model(spec).empty());
}

TEST_CASE("super-node grouping") {
  const auto spec = js::build_default_model(4, 4);
  const auto& t = spec.supers;
  REQUIRE(t.nodes.size() == 4);
  CHECK(t.nodes[0].parts == std::vector<int>{0});
  CHECK(t.nodes[1].parts == std::vector<int>{1, 2});
  CHECK(t.nodes[2].parts == std::vector<int>{3, 4});
  CHECK(t.nodes[3].parts == std::vector<int>{5});
  CHECK(t.root == 0);
  // root {0} has children {1,2} and {5}; {3,4} hangs off {1,2}
  CHECK(t.edges == std::vector<std::pair<int, int>>{{0, 1}, {0, 3}, {1, 2}});

  // collapsing the part tree reproduces the stored super edges
  const auto derived = js::derive_super_nodes(spec.parts);
  CHECK(derived.edges == t.edges);
  CHECK(derived.root == t.root);
}

TEST_CASE("layout arithmetic for unit dims") {
  std::map<int, int> dims;
  for (int k = 0; k < 5; ++k) dims[k] = 1;
  const auto spec = js::build_default_model(1, 1, dims, {1, 1, 1, 1, 1});
  // 6 unary + 5*30 deformation + 2*2 consistency + 4 co-occurrence + cross
  // concatenation dims 2+1+2+1+4
  CHECK(spec.layout.total_dim == 6 + 150 + 4 + 4 + 10);
}

TEST_CASE("layout partitions the weight vector exactly") {
  const auto spec = js::build_default_model(16, 8);
  std::vector<int> covered(spec.layout.total_dim, 0);
  for (const auto& b : spec.layout.blocks)
    for (std::size_t i = b.offset; i < b.offset + b.length; ++i) ++covered[i];
  for (std::size_t i = 0; i < covered.size(); ++i) CHECK(covered[i] == 1);
}

TEST_CASE("validation flags broken structures") {
  auto spec = js::build_default_model(8, 4);

  SECTION("extra tree edge") {
    spec.parts.tree_edges.emplace_back(1, 2);
    const auto v = js::validate_model(spec);
    REQUIRE(!v.empty());
    bool cyclic = false;
    for (const auto& x : v) cyclic |= x.code == js::ErrorCode::CyclicTree;
    CHECK(cyclic);
  }

  SECTION("dangling dependency part") {
    spec.attrs.dependency[3] = {7};
    const auto v = js::validate_model(spec);
    bool dangling = false;
    for (const auto& x : v) dangling |= x.code == js::ErrorCode::DanglingPartIndex;
    CHECK(dangling);
  }

  SECTION("misaligned layout block") {
    spec.layout.blocks[1].offset += 1;
    const auto v = js::validate_model(spec);
    bool overlap = false;
    for (const auto& x : v) overlap |= x.code == js::ErrorCode::OverlappingBlocks;
    CHECK(overlap);
  }
}

TEST_CASE("rejects non-positive dims") {
  CHECK_THROWS_AS(js::build_default_model(0, 4), js::Error);
  CHECK_THROWS_AS(js::build_default_model(4, 4, {{0, -1}}), js::Error);
}

TEST_CASE("model serialization round-trips byte-identically") {
  const auto spec = js::build_default_model(16, 8, {{0, 12}, {4, 6}});
  const std::string text = js::canonical_model_text(spec);
  const auto back = js::model_from_json(js::ordered_json::parse(text));
  CHECK(js::canonical_model_text(back) == text);
  CHECK(js::model_hash(back) == js::model_hash(spec));
  CHECK(js::layout_checksum(back.layout) == js::layout_checksum(spec.layout));
}

TEST_CASE("model file io") {
  const auto spec = js::build_default_model(8, 4);
  const std::string path = "test_model_io.json";
  js::save_model(path, spec);
  const auto back = js::load_model(path);
  CHECK(js::model_hash(back) == js::model_hash(spec));
  std::remove(path.c_str());
}
