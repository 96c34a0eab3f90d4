#include "xdet/geometry.hpp"

#include <stdexcept>

#include "doctest.h"
#include "test_support.hpp"
#include "xdet/rng.hpp"

using namespace xdet;

TEST_CASE("rotate_box spec examples") {
  const BoundingBox b{10, 20, 30, 40};
  CHECK(rotate_box(b, QuarterTurn::deg0, 100, 50) == b);
  CHECK(rotate_box(b, QuarterTurn::deg90, 100, 50) == BoundingBox{20, 70, 40, 90});
  CHECK(rotate_box(b, QuarterTurn::deg180, 100, 50) == BoundingBox{70, 10, 90, 30});
}

TEST_CASE("rotate_box rejects bad input") {
  CHECK_THROWS_AS(rotate_box({5, 5, 3, 8}, QuarterTurn::deg90, 10, 10), std::invalid_argument);
  CHECK_THROWS_AS(rotate_box({-1, 0, 3, 8}, QuarterTurn::deg90, 10, 10), std::invalid_argument);
  CHECK_THROWS_AS(rotate_box({0, 0, 11, 8}, QuarterTurn::deg90, 10, 10), std::invalid_argument);
}

TEST_CASE("rotate_box matches the mask-rotation oracle exactly") {
  Rng rng(42, "geometry-oracle");
  for (QuarterTurn turn : {QuarterTurn::deg0, QuarterTurn::deg90, QuarterTurn::deg180,
                           QuarterTurn::deg270}) {
    for (int trial = 0; trial < 1000; ++trial) {
      const int img_w = rng.uniform_int(4, 40);
      const int img_h = rng.uniform_int(4, 40);
      const int x0 = rng.uniform_int(0, img_w - 2);
      const int y0 = rng.uniform_int(0, img_h - 2);
      const int x1 = rng.uniform_int(x0 + 1, img_w);
      const int y1 = rng.uniform_int(y0 + 1, img_h);
      const BoundingBox b{static_cast<real>(x0), static_cast<real>(y0), static_cast<real>(x1),
                          static_cast<real>(y1)};
      const BoundingBox got = rotate_box(b, turn, img_w, img_h);
      const BoundingBox want =
          oracle::mask_bbox(oracle::rotate_mask(oracle::rasterize_box(b, img_w, img_h), turn));
      CHECK(got == want);
    }
  }
}

TEST_CASE("rotate_box composition and full turns") {
  Rng rng(7, "geometry-comp");
  for (int trial = 0; trial < 300; ++trial) {
    const int img_w = rng.uniform_int(4, 64);
    const int img_h = rng.uniform_int(4, 64);
    const int x0 = rng.uniform_int(0, img_w - 2);
    const int y0 = rng.uniform_int(0, img_h - 2);
    const BoundingBox b{static_cast<real>(x0), static_cast<real>(y0),
                        static_cast<real>(rng.uniform_int(x0 + 1, img_w)),
                        static_cast<real>(rng.uniform_int(y0 + 1, img_h))};
    for (int t1 = 0; t1 < 4; ++t1)
      for (int t2 = 0; t2 < 4; ++t2) {
        // Dimensions swap after odd turns.
        const int w1 = (t1 % 2 == 0) ? img_w : img_h;
        const int h1 = (t1 % 2 == 0) ? img_h : img_w;
        const BoundingBox two_step =
            rotate_box(rotate_box(b, static_cast<QuarterTurn>(t1), img_w, img_h),
                       static_cast<QuarterTurn>(t2), w1, h1);
        const BoundingBox one_step = rotate_box(
            b, compose(static_cast<QuarterTurn>(t1), static_cast<QuarterTurn>(t2)), img_w,
            img_h);
        CHECK(two_step == one_step);
      }
    BoundingBox four = b;
    for (int i = 0; i < 4; ++i) {
      const int w = (i % 2 == 0) ? img_w : img_h;
      const int h = (i % 2 == 0) ? img_h : img_w;
      four = rotate_box(four, QuarterTurn::deg90, w, h);
    }
    CHECK(four == b);  // exact, no drift for integer coordinates
  }
}

TEST_CASE("iou spec examples and oracle") {
  CHECK(iou({0, 0, 2, 2}, {0, 0, 2, 2}) == doctest::Approx(1.0));
  CHECK(iou({0, 0, 1, 1}, {5, 5, 6, 6}) == doctest::Approx(0.0));
  CHECK(iou({0, 0, 2, 2}, {1, 1, 3, 3}) == doctest::Approx(1.0 / 7.0));
  CHECK(iou({3, 3, 3, 3}, {3, 3, 3, 3}) == real(0));  // degenerate

  Rng rng(11, "iou-oracle");
  for (int trial = 0; trial < 500; ++trial) {
    auto rand_box = [&]() {
      const int x0 = rng.uniform_int(0, 18);
      const int y0 = rng.uniform_int(0, 18);
      return BoundingBox{static_cast<real>(x0), static_cast<real>(y0),
                         static_cast<real>(rng.uniform_int(x0 + 1, 20)),
                         static_cast<real>(rng.uniform_int(y0 + 1, 20))};
    };
    const BoundingBox a = rand_box(), b = rand_box();
    CHECK(iou(a, b) == doctest::Approx(oracle::counting_iou(a, b)).epsilon(1e-12));
    CHECK(iou(a, b) == iou(b, a));
    CHECK(iou(a, a) == doctest::Approx(1.0));
    CHECK(iou(a, b) >= real(0));
    CHECK(iou(a, b) <= real(1));
  }
}

TEST_CASE("nms spec examples") {
  SUBCASE("singleton") {
    const std::vector<ScoredBox> in = {{{0, 0, 2, 2}, real(0.4)}};
    const auto out = nms(in, real(0.5));
    REQUIRE(out.size() == 1);
    CHECK(out[0].box == in[0].box);
  }
  SUBCASE("identical boxes suppress") {
    const std::vector<ScoredBox> in = {{{0, 0, 2, 2}, real(0.8)}, {{0, 0, 2, 2}, real(0.9)}};
    const auto out = nms(in, real(0.5));
    REQUIRE(out.size() == 1);
    CHECK(out[0].score == real(0.9));
  }
  SUBCASE("low overlap keeps both") {
    const std::vector<ScoredBox> in = {{{0, 0, 2, 2}, real(0.9)}, {{1, 1, 3, 3}, real(0.8)}};
    const auto out = nms(in, real(0.5));
    CHECK(out.size() == 2);
  }
  SUBCASE("score ties broken by input index") {
    const std::vector<ScoredBox> in = {{{0, 0, 2, 2}, real(0.5)}, {{0, 0, 2, 2}, real(0.5)}};
    const auto out = nms(in, real(0.9));
    REQUIRE(out.size() == 1);
    CHECK(out[0].box == in[0].box);
  }
}

TEST_CASE("nms output is a subset with bounded pairwise IoU") {
  Rng rng(5, "nms-prop");
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ScoredBox> dets;
    const int n = rng.uniform_int(1, 12);
    for (int i = 0; i < n; ++i) {
      const real x0 = static_cast<real>(rng.uniform(0, 20));
      const real y0 = static_cast<real>(rng.uniform(0, 20));
      dets.push_back({{x0, y0, x0 + static_cast<real>(rng.uniform(1, 8)),
                       y0 + static_cast<real>(rng.uniform(1, 8))},
                      static_cast<real>(rng.uniform())});
    }
    const real thr = static_cast<real>(rng.uniform(0.1, 0.9));
    const auto kept = nms(dets, thr);
    CHECK(kept.size() <= dets.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
      bool found = false;
      for (const ScoredBox& d : dets)
        found = found || (d.box == kept[i].box && d.score == kept[i].score);
      CHECK(found);
      for (std::size_t j = i + 1; j < kept.size(); ++j) {
        CHECK(iou(kept[i].box, kept[j].box) <= thr);
        CHECK(kept[i].score >= kept[j].score);  // sorted by descending score
      }
    }
  }
}
