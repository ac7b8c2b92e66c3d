#include <catch2/catch_amalgamated.hpp>

#include <cstdio>

#include "helpers.hpp"
#include "jointstruct/jointstruct.hpp"

namespace js = jointstruct;
using testutil::small_spec;

TEST_CASE("derive_d_min basics") {
  js::Box box{50, 50, 30, 24};
  const double ratio = 1.0 / 3.0;
  const double th = 30 * 3.14159265358979323846 / 180.0;
  const double half_w = 0.5 * ratio * box.s;

  SECTION("pixel on an edge gives zero") {
    // point on edge l: center + (w/2) * normal
    const double px = box.x - half_w * std::sin(th);
    const double py = box.y + half_w * std::cos(th);
    CHECK(js::derive_d_min(px, py, box, ratio) == Catch::Approx(0.0).margin(1e-12));
  }

  SECTION("box center sits half a width from both edges") {
    CHECK(js::derive_d_min(box.x, box.y, box, ratio) == Catch::Approx(half_w).margin(1e-12));
  }

  SECTION("matches a dense sampling oracle") {
    js::Rng rng(42);
    for (int trial = 0; trial < 12; ++trial) {
      js::Box b{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0, 360), rng.uniform(0.5, 2.0)};
      const double px = rng.uniform(-3, 3), py = rng.uniform(-3, 3);
      const double got = js::derive_d_min(px, py, b, ratio);

      const double t = b.theta * 3.14159265358979323846 / 180.0;
      const double ux = std::cos(t), uy = std::sin(t);
      const double nx = -uy, ny = ux;
      const double hw = 0.5 * ratio * b.s, hs = 0.5 * b.s;
      double best = 1e300;
      const int n = 1000000;
      for (double sign : {1.0, -1.0}) {
        const double cx = b.x + sign * hw * nx, cy = b.y + sign * hw * ny;
        for (int i = 0; i <= n; ++i) {
          const double a = -hs + (2 * hs * i) / n;
          best = std::min(best, std::hypot(px - (cx + a * ux), py - (cy + a * uy)));
        }
      }
      CHECK(std::abs(got - best) < 1e-6);
    }
  }
}

TEST_CASE("instance validation catches malformed candidates") {
  const auto spec = small_spec();
  js::Rng rng(7);
  auto inst = testutil::random_instance(spec, rng, 2, 3, "a");
  REQUIRE(js::validate_instance(inst, spec).empty());

  SECTION("histogram off unit sum") {
    inst.ensembles[0][0].hist_rgb[0] += 0.5;
    const auto v = js::validate_instance(inst, spec);
    REQUIRE(!v.empty());
    CHECK(v.front().code == js::ErrorCode::DimMismatch);
  }

  SECTION("missing attribute feature on a dependent part") {
    inst.ensembles[0][0].attr_feats.erase(3);  // pattern depends on torso
    const auto v = js::validate_instance(inst, spec);
    REQUIRE(!v.empty());
    CHECK(v.front().code == js::ErrorCode::MissingAttrFeature);
  }

  SECTION("theta outside range") {
    inst.ensembles[1][0].box.theta = 360.0;
    CHECK(!js::validate_instance(inst, spec).empty());
  }

  SECTION("candidate cap") {
    while (static_cast<int>(inst.ensembles[2].size()) <= js::kDefaultCandidateCap)
      inst.ensembles[2].push_back(inst.ensembles[2][0]);
    CHECK(!js::validate_instance(inst, spec).empty());
  }
}

TEST_CASE("dataset io round-trip") {
  const auto spec = small_spec();
  js::Rng rng(11);
  std::vector<js::Instance> data;
  for (int i = 0; i < 3; ++i) {
    auto inst = testutil::random_instance(spec, rng, 1, 3, "inst-" + std::to_string(2 - i));
    js::GroundTruth gt;
    for (int p = 0; p < spec.parts.part_count; ++p) gt.pose.push_back(inst.ensembles[p][0].box);
    gt.attribute_groups = {{1, js::kMissingAttr, 2, 1, 1}};
    inst.ground_truth = gt;
    data.push_back(std::move(inst));
  }

  const std::string path = "test_dataset_io.json";
  js::save_dataset(path, spec, data);
  const auto loaded = js::load_dataset(path, spec);
  REQUIRE(loaded.size() == 3);
  // sorted by id on load
  CHECK(loaded[0].id == "inst-0");
  CHECK(loaded[2].id == "inst-2");

  // save(load(x)) is idempotent byte for byte
  const std::string path2 = "test_dataset_io2.json";
  js::save_dataset(path2, spec, loaded);
  const auto reloaded = js::load_dataset(path2, spec);
  REQUIRE(reloaded.size() == loaded.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    const auto& a = loaded[i];
    const auto& b = reloaded[i];
    CHECK(a.id == b.id);
    for (int p = 0; p < spec.parts.part_count; ++p) {
      REQUIRE(a.ensembles[p].size() == b.ensembles[p].size());
      for (std::size_t c = 0; c < a.ensembles[p].size(); ++c) {
        CHECK(a.ensembles[p][c].box.x == b.ensembles[p][c].box.x);
        CHECK(a.ensembles[p][c].unary == b.ensembles[p][c].unary);
        CHECK(a.ensembles[p][c].hist_rgb == b.ensembles[p][c].hist_rgb);
        CHECK(a.ensembles[p][c].attr_feats == b.ensembles[p][c].attr_feats);
        REQUIRE(a.ensembles[p][c].edge_pixels.size() == b.ensembles[p][c].edge_pixels.size());
        for (std::size_t e = 0; e < a.ensembles[p][c].edge_pixels.size(); ++e) {
          CHECK(a.ensembles[p][c].edge_pixels[e].theta_e == b.ensembles[p][c].edge_pixels[e].theta_e);
          CHECK(a.ensembles[p][c].edge_pixels[e].d_min == b.ensembles[p][c].edge_pixels[e].d_min);
        }
      }
    }
    CHECK(a.ground_truth->attribute_groups == b.ground_truth->attribute_groups);
  }
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("edge pixels with raw coordinates get d_min at ingestion") {
  const auto spec = small_spec();
  js::Rng rng(13);
  auto inst = testutil::random_instance(spec, rng, 1, 1, "raw");
  inst.ensembles[0][0].edge_pixels.clear();
  auto j = js::dataset_to_json(spec, {inst});
  auto& cand = j["instances"][0]["ensembles"][0][0];
  const double bx = cand["box"][0].get<double>();
  const double by = cand["box"][1].get<double>();
  cand["edge_pixels"] = js::ordered_json::array();
  cand["edge_pixels"].push_back({45.0, 1.0, bx, by});  // pixel at the box center

  const auto loaded = js::dataset_from_json(j, spec);
  const auto& c = loaded[0].ensembles[0][0];
  REQUIRE(c.edge_pixels.size() == 1);
  const double expect = 0.5 * (1.0 / 3.0) * c.box.s;
  CHECK(c.edge_pixels[0].d_min == Catch::Approx(expect).margin(1e-9));
}

TEST_CASE("dataset hash mismatch is rejected") {
  const auto spec = small_spec();
  js::Rng rng(5);
  const auto inst = testutil::random_instance(spec, rng, 1, 2, "x");
  auto j = js::dataset_to_json(spec, {inst});
  const auto other = js::build_default_model(6, 4, {}, {2, 3, 2, 3, 3});
  CHECK_THROWS_AS(js::dataset_from_json(j, other), js::Error);
}
