#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "jointstruct/jointstruct.hpp"

namespace js = jointstruct;

TEST_CASE("edge scores per candidate") {
  js::Candidate c;
  c.box = {0, 0, 40, 10};

  SECTION("empty evidence forces zero") {
    const auto s = js::edge_scores(c);
    CHECK(s.orientation == 0.0);
    CHECK(s.distance == 0.0);
  }

  SECTION("perfectly aligned pixel") {
    c.edge_pixels.push_back({40.0, 1.0, 0.0});
    const auto s = js::edge_scores(c);
    CHECK(s.orientation == Catch::Approx(1.0).margin(1e-12));
    CHECK(s.distance == 0.0);
  }

  SECTION("perpendicular pixel contributes nothing to orientation") {
    c.edge_pixels.push_back({130.0, 1.0, 2.0});
    const auto s = js::edge_scores(c);
    CHECK(s.orientation == Catch::Approx(0.0).margin(1e-12));
    CHECK(s.distance == Catch::Approx(2.0).margin(1e-12));
  }

  SECTION("orientation bounded by max strength") {
    js::Rng rng(3);
    for (int t = 0; t < 100; ++t) {
      js::Candidate r;
      r.box = {0, 0, rng.uniform(0, 360), 5};
      double max_strg = 0;
      const int z = rng.uniform_int(1, 6);
      for (int e = 0; e < z; ++e) {
        const double strg = rng.uniform(0, 3);
        max_strg = std::max(max_strg, strg);
        r.edge_pixels.push_back({rng.uniform(0, 360), strg, rng.uniform(0, 4)});
      }
      const auto s = js::edge_scores(r);
      CHECK(std::abs(s.orientation) <= max_strg + 1e-12);
      CHECK(s.distance >= 0.0);
    }
  }

  SECTION("scaling strengths scales both scores") {
    c.edge_pixels.push_back({10.0, 0.7, 1.5});
    c.edge_pixels.push_back({200.0, 1.1, 0.5});
    const auto s1 = js::edge_scores(c);
    for (auto& ep : c.edge_pixels) ep.strength *= 3.0;
    const auto s3 = js::edge_scores(c);
    CHECK(s3.orientation == Catch::Approx(3.0 * s1.orientation).margin(1e-12));
    CHECK(s3.distance == Catch::Approx(3.0 * s1.distance).margin(1e-12));
  }
}

TEST_CASE("pose energy decomposes over parts") {
  const auto spec = testutil::small_spec();
  js::Rng rng(9);

  SECTION("all-empty evidence gives zero for any beta") {
    auto inst = testutil::random_instance(spec, rng, 1, 3);
    for (auto& ens : inst.ensembles)
      for (auto& c : ens) c.edge_pixels.clear();
    std::vector<int> pose(spec.parts.part_count, 1);
    CHECK(js::pose_energy(inst, pose, 0.0) == 0.0);
    CHECK(js::pose_energy(inst, pose, -2.5) == 0.0);
  }

  SECTION("matches an independent per-part sum") {
    for (int t = 0; t < 30; ++t) {
      const auto inst = testutil::random_instance(spec, rng, 1, 4);
      const auto pose = testutil::random_label(inst, spec, rng).pose;
      const double beta = rng.uniform(-2, 2);
      double expect = 0;
      for (int i = 0; i < spec.parts.part_count; ++i) {
        const auto& c = inst.candidate(i, pose[i]);
        const auto s = js::edge_scores(c);
        expect += s.orientation + beta * s.distance;
      }
      CHECK(std::abs(js::pose_energy(inst, pose, beta) - expect) <= 1e-12 * std::max(1.0, std::abs(expect)));
    }
  }

  SECTION("beta zero keeps only the orientation part") {
    const auto inst = testutil::random_instance(spec, rng, 1, 2);
    const auto pose = testutil::random_label(inst, spec, rng).pose;
    double expect = 0;
    for (int i = 0; i < spec.parts.part_count; ++i)
      expect += js::edge_scores(inst.candidate(i, pose[i])).orientation;
    CHECK(js::pose_energy(inst, pose, 0.0) == Catch::Approx(expect).margin(1e-12));
  }

  SECTION("changing one part changes only its summand") {
    auto inst = testutil::random_instance(spec, rng, 2, 3);
    auto pose = testutil::random_label(inst, spec, rng).pose;
    const double beta = 0.7;
    const double before = js::pose_energy(inst, pose, beta);
    const int j = 3;
    const double old_term = js::edge_scores(inst.candidate(j, pose[j])).orientation +
                            beta * js::edge_scores(inst.candidate(j, pose[j])).distance;
    pose[j] = pose[j] == 1 ? 2 : 1;
    const double new_term = js::edge_scores(inst.candidate(j, pose[j])).orientation +
                            beta * js::edge_scores(inst.candidate(j, pose[j])).distance;
    CHECK(js::pose_energy(inst, pose, beta) ==
          Catch::Approx(before - old_term + new_term).margin(1e-10));
  }
}
