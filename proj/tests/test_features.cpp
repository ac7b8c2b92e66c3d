#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "jointstruct/jointstruct.hpp"

namespace js = jointstruct;
using testutil::small_spec;

TEST_CASE("unary feature is a pass-through") {
  const auto spec = js::build_default_model(16, 4);
  js::Rng rng(1);
  auto inst = testutil::random_instance(spec, rng, 2, 2);
  std::fill(inst.ensembles[0][0].unary.begin(), inst.ensembles[0][0].unary.end(), 0.0);
  inst.ensembles[0][0].unary[3] = 1.0;

  const auto& f = js::unary_feature(inst, 0, 1);
  CHECK(static_cast<int>(f.size()) == spec.d_u);
  CHECK(f[3] == 1.0);
  CHECK_THROWS_AS(js::unary_feature(inst, 0, inst.candidate_count(0) + 1), js::Error);
}

TEST_CASE("deformation feature geometry") {
  const auto spec = small_spec();
  js::Rng rng(2);
  auto inst = testutil::random_instance(spec, rng, 1, 1);
  inst.width = 5;
  inst.height = 5;
  auto& parent = inst.ensembles[0][0];
  auto& child = inst.ensembles[5][0];

  SECTION("identity configuration hits the center cell") {
    parent.box = {50, 50, 15, 10};
    child.box = {50, 50, 15, 12};
    const auto f = js::deformation_feature(inst, spec, 0, 5, 1, 1);
    CHECK(f[4] == 1.0);   // center cell
    CHECK(f[9] == 1.0);   // rotation bin 0
    CHECK(f[29] == 0.0);  // zero distance
  }

  SECTION("rotation difference of 30 degrees lands in bin 1") {
    parent.box = {50, 50, 35, 10};
    child.box = {50, 50, 5, 12};
    const auto f = js::deformation_feature(inst, spec, 0, 5, 1, 1);
    CHECK(f[9 + 1] == 1.0);
  }

  SECTION("distance is normalized by the image diagonal") {
    parent.box = {0, 0, 0, 1};
    child.box = {3, 4, 0, 1};
    const auto f = js::deformation_feature(inst, spec, 0, 5, 1, 1);
    CHECK(f[29] == Catch::Approx(5.0 / std::sqrt(50.0)).margin(1e-12));
  }

  SECTION("one-hot sub-blocks have unit L1 norm") {
    js::Rng r2(3);
    for (int t = 0; t < 50; ++t) {
      const auto ri = testutil::random_instance(spec, r2, 2, 4);
      const auto f = js::deformation_feature(ri, spec, 0, 1, 1, 1);
      double pos = 0, rot = 0;
      for (int i = 0; i < 9; ++i) pos += f[i];
      for (int i = 9; i < 29; ++i) rot += f[i];
      CHECK(pos == 1.0);
      CHECK(rot == 1.0);
      CHECK(f[29] >= 0.0);
    }
  }

  SECTION("non-edge raises") { CHECK_THROWS_AS(js::deformation_feature(inst, spec, 3, 4, 1, 1), js::Error); }
}

TEST_CASE("consistency feature is a chi-squared pair") {
  const auto spec = small_spec();
  js::Rng rng(4);
  auto inst = testutil::random_instance(spec, rng, 1, 1);

  SECTION("identical histograms give zero") {
    inst.ensembles[2][0].hist_rgb = inst.ensembles[1][0].hist_rgb;
    inst.ensembles[2][0].hist_lab = inst.ensembles[1][0].hist_lab;
    const auto f = js::consistency_feature(inst, spec, 1, 2, 1, 1);
    CHECK(f[0] == 0.0);
    CHECK(f[1] == 0.0);
  }

  SECTION("disjoint unit masses give one") {
    // dim-4 histograms: all mass in different bins
    inst.ensembles[1][0].hist_rgb = {1, 0, 0, 0};
    inst.ensembles[2][0].hist_rgb = {0, 1, 0, 0};
    const auto f = js::consistency_feature(inst, spec, 1, 2, 1, 1);
    CHECK(f[0] == Catch::Approx(1.0).margin(1e-9));
  }

  SECTION("symmetry") {
    const auto f = js::consistency_feature(inst, spec, 1, 2, 1, 1);
    const auto g = js::consistency_feature(inst, spec, 2, 1, 1, 1);
    CHECK(f[0] == g[0]);
    CHECK(f[1] == g[1]);
  }
}

TEST_CASE("co-occurrence indexing") {
  CHECK(js::cooccurrence_hot_index(1, 1, 4, 8) == 0);
  CHECK(js::cooccurrence_hot_index(2, 3, 2, 3) == 5);
  const auto f = js::cooccurrence_feature(2, 3, 2, 3);
  int nonzero = 0;
  for (double v : f) nonzero += v != 0.0;
  CHECK(nonzero == 1);
  CHECK(f[5] == 1.0);
  CHECK_THROWS_AS(js::cooccurrence_hot_index(3, 1, 2, 3), js::Error);
}

TEST_CASE("cross feature slot selection") {
  const auto spec = js::build_default_model(4, 4, {}, {2, 2, 2, 2, 3});
  js::Rng rng(5);
  auto inst = testutil::random_instance(spec, rng, 1, 1);
  // color depends on torso only
  inst.ensembles[0][0].attr_feats[1] = {2.0, -1.0, 0.5, 0.0};

  const auto f1 = js::cross_feature(inst, spec, 1, {1}, 1);
  REQUIRE(f1.size() == 8);
  CHECK(f1[0] == 2.0);
  CHECK(f1[1] == -1.0);
  CHECK(f1[4] == 0.0);
  const auto f2 = js::cross_feature(inst, spec, 1, {1}, 2);
  CHECK(f2[0] == 0.0);
  CHECK(f2[4] == 2.0);
  CHECK(f2[5] == -1.0);

  SECTION("sleeve concatenates all four arm descriptors") {
    const auto f = js::cross_feature(inst, spec, 4, {1, 1, 1, 1}, 2);
    CHECK(f.size() == static_cast<std::size_t>(4 * spec.attrs.feature_dims[4] * 3));
  }

  SECTION("slot selection identity against the weight block") {
    const auto w = testutil::random_weights(spec, rng);
    for (int trial = 0; trial < 20; ++trial) {
      const int c = rng.uniform_int(1, 3);
      const auto full = js::cross_feature(inst, spec, 4, {1, 1, 1, 1}, c);
      const auto& blk = spec.layout.cross(4);
      double lhs = 0;
      for (std::size_t i = 0; i < blk.length; ++i) lhs += w.values[blk.offset + i] * full[i];
      double rhs = 0;
      const auto concat = js::cross_part_concat(inst, spec, 4, {1, 1, 1, 1});
      const std::size_t seg = concat.size();
      for (std::size_t i = 0; i < seg; ++i)
        rhs += w.values[blk.offset + (c - 1) * seg + i] * concat[i];
      CHECK(testutil::close(lhs, rhs, 1e-12));
    }
  }
}

TEST_CASE("assemble and score agree") {
  const auto spec = small_spec();
  js::Rng rng(6);

  SECTION("zero weights score zero") {
    const auto inst = testutil::random_instance(spec, rng, 2, 3);
    const auto w = js::WeightVector::zeros(spec);
    const auto y = testutil::random_label(inst, spec, rng);
    CHECK(js::score_joint(w, inst, spec, y) == 0.0);
  }

  SECTION("blockwise equals dense dot on random cases") {
    for (int trial = 0; trial < 100; ++trial) {
      const auto inst = testutil::random_instance(spec, rng, 1, 4);
      const auto w = testutil::random_weights(spec, rng);
      const auto y = testutil::random_label(inst, spec, rng);
      const double lhs = js::score_joint(w, inst, spec, y);
      const double rhs = testutil::dense_dot(w, js::assemble_joint(inst, spec, y));
      CHECK(testutil::close(lhs, rhs));
    }
  }

  SECTION("missing attribute zeroes every touching block") {
    const auto inst = testutil::random_instance(spec, rng, 2, 3);
    const auto y = testutil::random_label(inst, spec, rng);
    js::ScoreMask mask;
    mask.attr_missing.assign(spec.attrs.attribute_count, 0);
    mask.attr_missing[2] = 1;
    const auto J = js::assemble_joint(inst, spec, y, mask);
    for (std::size_t e = 0; e < spec.attrs.tree_edges.size(); ++e) {
      const auto& [k, l] = spec.attrs.tree_edges[e];
      if (k != 2 && l != 2) continue;
      const auto& b = spec.layout.cooccurrence(e);
      for (std::size_t i = 0; i < b.length; ++i) CHECK(J[b.offset + i] == 0.0);
    }
    const auto& cb = spec.layout.cross(2);
    for (std::size_t i = 0; i < cb.length; ++i) CHECK(J[cb.offset + i] == 0.0);
    // untouched attribute blocks survive
    double untouched = 0;
    const auto& ub = spec.layout.cross(0);
    for (std::size_t i = 0; i < ub.length; ++i) untouched += std::abs(J[ub.offset + i]);
    CHECK(untouched > 0.0);
  }

  SECTION("score invariant under consistent candidate permutation") {
    for (int trial = 0; trial < 20; ++trial) {
      const auto inst = testutil::random_instance(spec, rng, 2, 4);
      const auto w = testutil::random_weights(spec, rng);
      const auto y = testutil::random_label(inst, spec, rng);
      const double before = js::score_joint(w, inst, spec, y);

      js::Instance shuffled = inst;
      js::JointLabel yy = y;
      for (int i = 0; i < spec.parts.part_count; ++i) {
        std::vector<int> perm(inst.candidate_count(i));
        for (std::size_t a = 0; a < perm.size(); ++a) perm[a] = static_cast<int>(a);
        for (std::size_t a = perm.size(); a > 1; --a)
          std::swap(perm[a - 1], perm[rng.uniform_int(0, static_cast<int>(a) - 1)]);
        std::vector<js::Candidate> list(perm.size());
        for (std::size_t a = 0; a < perm.size(); ++a) list[perm[a]] = inst.ensembles[i][a];
        shuffled.ensembles[i] = std::move(list);
        yy.pose[i] = perm[y.pose[i] - 1] + 1;
      }
      CHECK(testutil::close(js::score_joint(w, shuffled, spec, yy), before, 1e-9));
    }
  }
}
