#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "xdet/checkpoint.hpp"
#include "xdet/image.hpp"
#include "xdet/tensor.hpp"

namespace xdet {

inline constexpr int kFeatureChannels = 16;
inline constexpr int kFeatureStride = 4;
inline constexpr int kAnchorsPerCell = 3;
inline constexpr int kModelClasses = 3;             // foreground classes
inline constexpr int kBackgroundClass = kModelClasses;  // softmax index C

// Square anchors tiled over the feature grid, kAnchorsPerCell sizes per cell.
// Anchor id = (cell_y * fw + cell_x) * kAnchorsPerCell + size_index.
struct AnchorGrid {
  int fh = 0, fw = 0;
  int img_w = 0, img_h = 0;
  std::array<real, kAnchorsPerCell> sides{real(12), real(20), real(32)};

  int count() const { return fh * fw * kAnchorsPerCell; }
  int cell_of(int anchor_id) const { return anchor_id / kAnchorsPerCell; }
  // Clipped to the image.
  BoundingBox box(int anchor_id) const;
};

struct Proposal {
  BoundingBox box;       // clipped anchor box, image coordinates
  real objectness = 0;   // sigmoid score
  int anchor_id = -1;
};

struct ProposalSet {
  std::vector<Proposal> items;
  Tensor rois;  // [K, kFeatureChannels], pooled on the live tape

  int size() const { return static_cast<int>(items.size()); }
};

struct Detection {
  BoundingBox box;
  int class_id = 0;  // foreground class
  real confidence = 0;
};

// Standard center/size offsets scaled by the anchor, log-scaled sizes.
std::array<real, 4> encode_box_delta(const BoundingBox& gt, const BoundingBox& anchor);
BoundingBox decode_box_delta(const std::array<real, 4>& delta, const BoundingBox& anchor);

// The tiny detector: one shared feature extractor, a per-cell objectness
// head, dense per-proposal heads on mean-pooled RoI features, and two
// image-level heads (4-way rotation, gradient-reversed domain classifier).
class DetectionModel {
 public:
  explicit DetectionModel(std::uint64_t init_seed);

  NamedParams named_params() const;
  std::vector<Tensor> params() const;

  // img must have H and W divisible by kFeatureStride.
  Tensor extract_features(const ImageBuffer& img) const;

  AnchorGrid anchor_grid(const Tensor& features) const;

  // [fh*fw, kAnchorsPerCell] objectness logits for every cell.
  Tensor objectness_logits(const Tensor& features) const;

  // Top-k anchors by objectness (ties by anchor id), RoI features pooled
  // from cells whose centers fall inside the clipped anchor box.
  ProposalSet propose(const Tensor& features, int top_k) const;
  // Same pooling for a fixed anchor set (selection frozen by the caller).
  ProposalSet propose_at(const Tensor& features, const std::vector<int>& anchor_ids) const;
  // Pool RoI features at arbitrary boxes (consistency pass reuses the
  // original image's proposal boxes bit-for-bit).
  Tensor pool_at_boxes(const Tensor& features, const std::vector<BoundingBox>& boxes) const;

  Tensor trunk(const Tensor& rois) const;            // [K,16] -> relu([K,32])
  Tensor class_logits(const Tensor& trunk) const;    // [K, C+1]
  Tensor box_deltas(const Tensor& trunk) const;      // [K, 4]
  Tensor rotation_logits(const Tensor& trunk) const; // [K, 4]

  Tensor image_rotation_logits(const Tensor& features) const;     // [1, 4]
  Tensor domain_logits(const Tensor& features, real beta) const;  // [1, 2]

  std::vector<Detection> detect(const ImageBuffer& img, real score_threshold, real nms_iou,
                                int top_k) const;

  // Sets every parameter to zero; calibration tests rely on the exact
  // uniform outputs this produces.
  void zero_init();

 private:
  Tensor conv1_w_, conv1_b_, conv2_w_, conv2_b_;
  Tensor obj_w_, obj_b_;
  Tensor trunk_w_, trunk_b_;
  Tensor cls_w_, cls_b_;
  Tensor box_w_, box_b_;
  Tensor rot_w_, rot_b_;
  Tensor imgrot_w_, imgrot_b_;
  Tensor dom_w1_, dom_b1_, dom_w2_, dom_b2_;
};

}  // namespace xdet
