#include "xdet/augment.hpp"

#include <algorithm>
#include <cmath>

#include "xdet/rng.hpp"

namespace xdet {

namespace {

template <typename F>
ImageBuffer pointwise(const ImageBuffer& img, F f) {
  ImageBuffer out = img;
  for (real& v : out.data()) v = std::clamp(f(v), real(0), real(1));
  return out;
}

}  // namespace

ImageBuffer apply_brightness(const ImageBuffer& img, real shift) {
  return pointwise(img, [shift](real v) { return v + shift; });
}

ImageBuffer apply_contrast(const ImageBuffer& img, real factor) {
  return pointwise(img, [factor](real v) { return real(0.5) + (v - real(0.5)) * factor; });
}

ImageBuffer apply_color_scale(const ImageBuffer& img, const std::array<real, 3>& gains) {
  ImageBuffer out = img;
  auto& d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = std::clamp(d[i] * gains[i % 3], real(0), real(1));
  return out;
}

ImageBuffer apply_solarize(const ImageBuffer& img, real threshold) {
  return pointwise(img, [threshold](real v) { return v > threshold ? real(1) - v : v; });
}

ImageBuffer apply_posterize(const ImageBuffer& img, int levels) {
  const real n = static_cast<real>(std::max(2, levels) - 1);
  return pointwise(img, [n](real v) { return std::round(v * n) / n; });
}

ImageBuffer apply_gamma(const ImageBuffer& img, real gamma) {
  return pointwise(img, [gamma](real v) { return std::pow(std::max(v, real(0)), gamma); });
}

ImageBuffer apply_gauss_noise(const ImageBuffer& img, real sigma, std::uint64_t noise_seed) {
  ImageBuffer out = img;
  const int w = img.width();
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        const std::uint64_t counter =
            (static_cast<std::uint64_t>(y) * w + static_cast<std::uint64_t>(x)) * 3 + c;
        real v = out.at(y, x, c) +
                 sigma * static_cast<real>(counter_gaussian(noise_seed, counter));
        out.at(y, x, c) = std::clamp(v, real(0), real(1));
      }
  return out;
}

ImageBuffer augment(const ImageBuffer& img, const AugmentationPolicy& policy,
                    std::uint64_t seed) {
  Rng rng(mix64(policy.seed) ^ seed, "augment");
  ImageBuffer out = img;
  for (int k = 0; k < policy.op_count; ++k) {
    const int op = static_cast<int>(rng.uniform_int(7));
    const real u = static_cast<real>(rng.uniform(0.0, policy.magnitude));
    // Parameter draws beyond the strength happen even for u == 0 so the
    // stream position does not depend on sampled strengths.
    const real sign = rng.uniform() < 0.5 ? real(-1) : real(1);
    const real u2 = static_cast<real>(rng.uniform());
    const real u3 = static_cast<real>(rng.uniform());
    const std::uint64_t noise_seed = rng.next_u64();
    if (u <= real(0)) continue;  // every op is identity at zero strength

    switch (op) {
      case 0:
        out = apply_brightness(out, sign * u * real(0.5));
        break;
      case 1:
        out = apply_contrast(out, real(1) + sign * u * real(0.8));
        break;
      case 2: {
        std::array<real, 3> gains = {real(1) + (real(2) * u2 - real(1)) * u * real(0.6),
                                     real(1) + (real(2) * u3 - real(1)) * u * real(0.6),
                                     real(1) + sign * u * real(0.6)};
        out = apply_color_scale(out, gains);
        break;
      }
      case 3:
        out = apply_solarize(out, real(1) - u * real(0.6));
        break;
      case 4:
        out = apply_posterize(out, 3 + static_cast<int>(std::lround((real(1) - u) * 7)));
        break;
      case 5:
        out = apply_gamma(out, std::exp(sign * u * real(0.8)));
        break;
      case 6:
        out = apply_gauss_noise(out, u * real(0.12), noise_seed);
        break;
    }
  }
  return out;
}

}  // namespace xdet
