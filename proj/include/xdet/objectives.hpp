#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "xdet/augment.hpp"
#include "xdet/model.hpp"
#include "xdet/scenegen.hpp"

namespace xdet {

struct LossWeights {
  real alpha = real(0.1);    // domain-alignment weight
  real lambda1 = real(0.1);  // rotation-prediction weight
  real lambda2 = real(0.1);  // consistency weight
  real sigma = real(0.8);    // consistency confidence threshold
};

enum class RotationMode { proposal, image };

struct LossBreakdown {
  real l_det = 0, l_uda = 0, l_rp = 0, l_cl = 0, total = 0;
  real cl_accept_fraction = 0;
};

// One image's detection-branch forward, shared between the supervised loss
// and the consistency pseudo-labels.
struct DetectionPass {
  AnchorGrid grid;
  Tensor features;    // [h,w,16]
  Tensor obj_logits;  // [cells, anchors-per-cell]
  ProposalSet props;
  Tensor trunk_out;   // [K,32]
  Tensor cls_logits;  // [K,C+1]
  Tensor box_out;     // [K,4]
};

// fixed_anchors freezes the proposal selection (used by the gradient checker,
// where top-k flips under parameter perturbation would break finite
// differences).
DetectionPass forward_detection(const DetectionModel& m, const ImageBuffer& img, int top_k,
                                const std::vector<int>* fixed_anchors = nullptr);

// Anchor/proposal assignment for one labeled image. Computed from values, so
// it can be frozen and replayed for finite-difference checks.
struct DetectionMatchPlan {
  std::vector<int> anchor_obj_label;  // per anchor: 1 pos, 0 selected neg, -1 unused
  std::vector<int> proposal_label;    // per proposal: 0..C-1 fg, C bg, -1 unused
  std::vector<std::array<real, 4>> box_targets;  // valid where proposal_label is fg
  int num_obj_terms = 0;  // selected anchors (pos + hard negs)
  int num_cls_rows = 0;   // proposals entering the classification term
  int num_fg_props = 0;
};

DetectionMatchPlan plan_detection_match(const DetectionPass& pass,
                                        const std::vector<Annotation>& anns);

// Objectness BCE over matched anchors (3:1 hard-negative selection) +
// classification CE over matched proposals + smooth-L1 on box deltas for
// positives. Throws if the scene has no annotations.
Tensor detection_loss(const DetectionPass& pass, const std::vector<Annotation>& anns,
                      const DetectionMatchPlan* frozen = nullptr);

// Mean 2-way CE of the gradient-reversed domain classifier; source label 0,
// target label 1.
Tensor uda_loss(const DetectionModel& m, const Tensor& source_features,
                const Tensor& target_features, real beta);

struct RotationPass {
  Tensor features;
  ProposalSet props;  // proposal mode only
  Tensor logits;      // [K,4] in proposal mode, [1,4] in image mode
};

RotationPass forward_rotation(const DetectionModel& m, const ImageBuffer& rotated_img,
                              RotationMode mode, int top_k,
                              const std::vector<int>* fixed_anchors = nullptr);

// Ablation path: proposals taken from the unrotated image, their boxes mapped
// into the rotated frame, pooled there.
RotationPass forward_rotation_at_boxes(const DetectionModel& m, const ImageBuffer& rotated_img,
                                       const std::vector<BoundingBox>& boxes);

// 4-way CE against the drawn angle, mean over proposals (proposal mode) or
// one term per image (image mode), averaged over the two domains.
Tensor rotation_loss(const RotationPass& source_pass, QuarterTurn theta_s,
                     const RotationPass& target_pass, QuarterTurn theta_t, RotationMode mode);

// Per-proposal class probability rows as plain values (detached).
std::vector<std::vector<real>> class_probability_rows(const Tensor& cls_logits);

struct ConsistencyTerm {
  Tensor loss;
  Tensor aug_features;  // kept for the zero-gradient detachment checks
  int accepted = 0;
  int total = 0;
  real accept_fraction = 0;
};

// Pseudo-labels come from `pseudo_probs` (already detached values); the
// gradient flows only through the augmented image's pass. Proposals with
// max p < sigma contribute exactly zero; the mean still divides by all
// proposals.
ConsistencyTerm consistency_loss_one_image(const DetectionModel& m,
                                           const std::vector<BoundingBox>& proposal_boxes,
                                           const std::vector<std::vector<real>>& pseudo_probs,
                                           const ImageBuffer& img,
                                           const AugmentationPolicy& policy,
                                           std::uint64_t aug_seed, real sigma);

struct ConsistencyResult {
  Tensor loss;
  real accept_fraction = 0;
};

// Average of the two per-domain terms.
ConsistencyResult consistency_loss(const ConsistencyTerm& source_term,
                                   const ConsistencyTerm& target_term);

struct TotalLoss {
  Tensor value;
  LossBreakdown breakdown;
};

// total = l_det + alpha*l_uda + lambda1*l_rp + lambda2*l_cl; null terms are
// omitted (equivalent to weight zero).
TotalLoss total_loss(const Tensor* det, const Tensor* uda, const Tensor* rp, const Tensor* cl,
                     real cl_accept_fraction, const LossWeights& w);

}  // namespace xdet
