#pragma once

#include <array>
#include <cstdint>

#include "xdet/image.hpp"

namespace xdet {

// Pointwise perturbation policy. Every op in the pool maps pixel (i,j) using
// only the input value at (i,j), the sampled op parameters, and (for noise)
// a value derived from (seed, i, j, c). That keeps box coordinates valid on
// the perturbed image without any remapping.
struct AugmentationPolicy {
  int op_count = 2;        // ops sampled per application, with replacement
  real magnitude = 0.7;    // max strength in [0,1]; 0 makes every op identity
  std::uint64_t seed = 0;  // policy-level seed, mixed with the per-call seed
};

// Individual pool ops. Each is identity at its neutral parameter.
ImageBuffer apply_brightness(const ImageBuffer& img, real shift);
ImageBuffer apply_contrast(const ImageBuffer& img, real factor);  // about 0.5
ImageBuffer apply_color_scale(const ImageBuffer& img, const std::array<real, 3>& gains);
ImageBuffer apply_solarize(const ImageBuffer& img, real threshold);  // v > t -> 1-v
ImageBuffer apply_posterize(const ImageBuffer& img, int levels);
ImageBuffer apply_gamma(const ImageBuffer& img, real gamma);
ImageBuffer apply_gauss_noise(const ImageBuffer& img, real sigma, std::uint64_t noise_seed);

// Samples op_count ops (with replacement) and a strength per op, applies them
// in order, clamping to [0,1] after each. Deterministic in (img, policy, seed).
ImageBuffer augment(const ImageBuffer& img, const AugmentationPolicy& policy, std::uint64_t seed);

}  // namespace xdet
