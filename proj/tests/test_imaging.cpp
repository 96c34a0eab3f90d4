#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "test_support.hpp"
#include "xdet/augment.hpp"
#include "xdet/image.hpp"
#include "xdet/rng.hpp"

using namespace xdet;

namespace {

ImageBuffer random_image(int h, int w, std::uint64_t seed) {
  ImageBuffer img(h, w);
  Rng rng(seed, "test-image");
  for (real& v : img.data()) v = static_cast<real>(rng.uniform());
  return img;
}

}  // namespace

TEST_CASE("rotate_image identity and full turn") {
  const ImageBuffer img = random_image(6, 10, 1);
  CHECK(rotate_image(img, QuarterTurn::deg0) == img);
  ImageBuffer four = img;
  for (int i = 0; i < 4; ++i) four = rotate_image(four, QuarterTurn::deg90);
  CHECK(four == img);  // bit-exact
}

TEST_CASE("rotate_image follows the point map on a 2x1 image") {
  // Pixels [a,b] left to right. Under (x,y) -> (y, W-x), pixel centers land
  // at rows W-1-x: b maps to the top row, a to the bottom row.
  ImageBuffer img(1, 2);
  for (int c = 0; c < 3; ++c) {
    img.at(0, 0, c) = real(0.25);  // a
    img.at(0, 1, c) = real(0.75);  // b
  }
  const ImageBuffer rot = rotate_image(img, QuarterTurn::deg90);
  REQUIRE(rot.height() == 2);
  REQUIRE(rot.width() == 1);
  CHECK(rot.at(0, 0, 0) == real(0.75));
  CHECK(rot.at(1, 0, 0) == real(0.25));
}

TEST_CASE("rotate_image dimensions swap for odd turns") {
  const ImageBuffer img = random_image(4, 10, 2);
  const ImageBuffer r90 = rotate_image(img, QuarterTurn::deg90);
  CHECK(r90.height() == 10);
  CHECK(r90.width() == 4);
  const ImageBuffer r180 = rotate_image(img, QuarterTurn::deg180);
  CHECK(r180.height() == 4);
  CHECK(r180.width() == 10);
}

TEST_CASE("rotate_image and rotate_box are mutually consistent") {
  Rng rng(3, "img-box");
  for (int trial = 0; trial < 200; ++trial) {
    const int img_w = rng.uniform_int(4, 24);
    const int img_h = rng.uniform_int(4, 24);
    const int x0 = rng.uniform_int(0, img_w - 2);
    const int y0 = rng.uniform_int(0, img_h - 2);
    const BoundingBox box{static_cast<real>(x0), static_cast<real>(y0),
                          static_cast<real>(rng.uniform_int(x0 + 1, img_w)),
                          static_cast<real>(rng.uniform_int(y0 + 1, img_h))};
    // Rasterize the box into an image, rotate the image, read the bbox back.
    ImageBuffer mask(img_h, img_w, 0);
    for (int y = static_cast<int>(box.y_min); y < static_cast<int>(box.y_max); ++y)
      for (int x = static_cast<int>(box.x_min); x < static_cast<int>(box.x_max); ++x)
        for (int c = 0; c < 3; ++c) mask.at(y, x, c) = 1;
    const QuarterTurn turn = static_cast<QuarterTurn>(rng.uniform_int(4));
    const ImageBuffer rotated = rotate_image(mask, turn);
    int mx0 = rotated.width(), my0 = rotated.height(), mx1 = -1, my1 = -1;
    for (int y = 0; y < rotated.height(); ++y)
      for (int x = 0; x < rotated.width(); ++x)
        if (rotated.at(y, x, 0) > 0) {
          mx0 = std::min(mx0, x);
          my0 = std::min(my0, y);
          mx1 = std::max(mx1, x);
          my1 = std::max(my1, y);
        }
    const BoundingBox from_mask{static_cast<real>(mx0), static_cast<real>(my0),
                                static_cast<real>(mx1 + 1), static_cast<real>(my1 + 1)};
    CHECK(from_mask == rotate_box(box, turn, img_w, img_h));
  }
}

TEST_CASE("png round trip preserves quantized values") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "xdet_png_test.png").string();
  ImageBuffer img = random_image(9, 13, 4);
  // Quantize so the round trip is exact.
  for (real& v : img.data()) v = std::round(v * 255) / 255;
  save_png(path, img);
  const ImageBuffer back = load_png(path);
  REQUIRE(back.height() == img.height());
  REQUIRE(back.width() == img.width());
  for (std::size_t i = 0; i < img.data().size(); ++i)
    CHECK(back.data()[i] == doctest::Approx(img.data()[i]).epsilon(1e-9));
  std::remove(path.c_str());
}

TEST_CASE("load_png reports the path on failure") {
  CHECK_THROWS_WITH_AS(load_png("/nonexistent/xdet.png"),
                       doctest::Contains("/nonexistent/xdet.png"), std::runtime_error);
}

// -- augmentation -----------------------------------------------------------

TEST_CASE("augment op definitions") {
  ImageBuffer img(1, 1);
  img.at(0, 0, 0) = real(0.8);
  img.at(0, 0, 1) = real(0.3);
  img.at(0, 0, 2) = real(0.5);

  SUBCASE("solarize flips above the threshold") {
    const ImageBuffer out = apply_solarize(img, real(0.5));
    CHECK(out.at(0, 0, 0) == doctest::Approx(0.2));  // 1 - 0.8
    CHECK(out.at(0, 0, 1) == real(0.3));             // below threshold
  }
  SUBCASE("brightness shifts and clamps") {
    const ImageBuffer out = apply_brightness(img, real(0.4));
    CHECK(out.at(0, 0, 0) == real(1));  // clamped
    CHECK(out.at(0, 0, 1) == doctest::Approx(0.7));
  }
  SUBCASE("contrast is centered at 0.5") {
    const ImageBuffer out = apply_contrast(img, real(0.5));
    CHECK(out.at(0, 0, 0) == doctest::Approx(0.65));
    CHECK(out.at(0, 0, 2) == doctest::Approx(0.5));
  }
  SUBCASE("posterize quantizes to the level grid") {
    const ImageBuffer out = apply_posterize(img, 3);
    CHECK(out.at(0, 0, 0) == doctest::Approx(1.0));
    CHECK(out.at(0, 0, 1) == doctest::Approx(0.5));
  }
}

TEST_CASE("zero-magnitude policy is the identity") {
  const ImageBuffer img = random_image(8, 8, 5);
  AugmentationPolicy policy;
  policy.magnitude = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) CHECK(augment(img, policy, seed) == img);
}

TEST_CASE("augment is deterministic in (img, policy, seed)") {
  const ImageBuffer img = random_image(12, 12, 6);
  AugmentationPolicy policy;
  policy.magnitude = real(0.8);
  CHECK(augment(img, policy, 9) == augment(img, policy, 9));
  CHECK(augment(img, policy, 9) != augment(img, policy, 10));
}

TEST_CASE("augment preserves shape") {
  const ImageBuffer img = random_image(10, 14, 7);
  AugmentationPolicy policy;
  const ImageBuffer out = augment(img, policy, 3);
  CHECK(out.height() == 10);
  CHECK(out.width() == 14);
}

TEST_CASE("single-pixel perturbations stay local through every op and policy") {
  Rng rng(8, "aug-local");
  const ImageBuffer base = random_image(8, 8, 9);
  AugmentationPolicy policy;
  policy.magnitude = real(0.9);

  for (int trial = 0; trial < 100; ++trial) {
    ImageBuffer poked = base;
    const int py = rng.uniform_int(0, 7), px = rng.uniform_int(0, 7);
    const int pc = rng.uniform_int(0, 2);
    poked.at(py, px, pc) =
        std::clamp(poked.at(py, px, pc) + real(0.31), real(0), real(1));

    auto check_local = [&](const ImageBuffer& a, const ImageBuffer& b) {
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
          for (int c = 0; c < 3; ++c)
            if (y != py || x != px)
              CHECK(a.at(y, x, c) == b.at(y, x, c));
    };
    // Each pool op individually.
    check_local(apply_brightness(base, real(0.2)), apply_brightness(poked, real(0.2)));
    check_local(apply_contrast(base, real(1.4)), apply_contrast(poked, real(1.4)));
    check_local(apply_color_scale(base, {real(1.2), real(0.8), real(1)}),
                apply_color_scale(poked, {real(1.2), real(0.8), real(1)}));
    check_local(apply_solarize(base, real(0.6)), apply_solarize(poked, real(0.6)));
    check_local(apply_posterize(base, 4), apply_posterize(poked, 4));
    check_local(apply_gamma(base, real(1.7)), apply_gamma(poked, real(1.7)));
    check_local(apply_gauss_noise(base, real(0.1), 77),
                apply_gauss_noise(poked, real(0.1), 77));
    // Sampled 2-op policies, same seed on both sides.
    const std::uint64_t seed = rng.next_u64();
    check_local(augment(base, policy, seed), augment(poked, policy, seed));
  }
}
