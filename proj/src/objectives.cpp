#include "xdet/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace xdet {

DetectionPass forward_detection(const DetectionModel& m, const ImageBuffer& img, int top_k,
                                const std::vector<int>* fixed_anchors) {
  DetectionPass pass;
  pass.features = m.extract_features(img);
  pass.grid = m.anchor_grid(pass.features);
  pass.obj_logits = m.objectness_logits(pass.features);
  pass.props = fixed_anchors ? m.propose_at(pass.features, *fixed_anchors)
                             : m.propose(pass.features, top_k);
  pass.trunk_out = m.trunk(pass.props.rois);
  pass.cls_logits = m.class_logits(pass.trunk_out);
  pass.box_out = m.box_deltas(pass.trunk_out);
  return pass;
}

DetectionMatchPlan plan_detection_match(const DetectionPass& pass,
                                        const std::vector<Annotation>& anns) {
  if (anns.empty())
    throw std::invalid_argument("plan_detection_match: scene without annotations");
  const AnchorGrid& grid = pass.grid;
  const int A = grid.count();

  DetectionMatchPlan plan;
  plan.anchor_obj_label.assign(A, -1);

  // Anchor labels: IoU >= 0.5 positive, max IoU < 0.3 negative candidate,
  // plus the best anchor per ground-truth box so every object has at least
  // one positive.
  std::vector<real> best_iou_per_gt(anns.size(), real(-1));
  std::vector<int> best_anchor_per_gt(anns.size(), -1);
  std::vector<char> neg_candidate(A, 0);
  for (int a = 0; a < A; ++a) {
    const BoundingBox abox = grid.box(a);
    real max_iou = 0;
    for (std::size_t g = 0; g < anns.size(); ++g) {
      const real v = iou(abox, anns[g].box);
      max_iou = std::max(max_iou, v);
      if (v > best_iou_per_gt[g]) {
        best_iou_per_gt[g] = v;
        best_anchor_per_gt[g] = a;
      }
    }
    if (max_iou >= real(0.5))
      plan.anchor_obj_label[a] = 1;
    else if (max_iou < real(0.3))
      neg_candidate[a] = 1;
  }
  for (int a : best_anchor_per_gt)
    if (a >= 0) {
      plan.anchor_obj_label[a] = 1;
      neg_candidate[a] = 0;
    }

  int num_pos = 0;
  for (int v : plan.anchor_obj_label) num_pos += (v == 1);

  // Hard negatives: highest objectness first, 3:1 against positives.
  std::vector<int> negs;
  for (int a = 0; a < A; ++a)
    if (neg_candidate[a]) negs.push_back(a);
  const auto& obj_vals = pass.obj_logits.values();
  std::stable_sort(negs.begin(), negs.end(),
                   [&](int a, int b) { return obj_vals[a] > obj_vals[b]; });
  const int num_neg = std::min<int>(3 * num_pos, static_cast<int>(negs.size()));
  for (int i = 0; i < num_neg; ++i) plan.anchor_obj_label[negs[i]] = 0;
  plan.num_obj_terms = num_pos + num_neg;

  // Proposal labels for the classification and box heads.
  const int K = pass.props.size();
  plan.proposal_label.assign(K, -1);
  plan.box_targets.assign(K, {real(0), real(0), real(0), real(0)});
  std::vector<int> bg_candidates;
  int num_fg = 0;
  for (int k = 0; k < K; ++k) {
    const BoundingBox& pbox = pass.props.items[k].box;
    real max_iou = 0;
    int best_gt = -1;
    for (std::size_t g = 0; g < anns.size(); ++g) {
      const real v = iou(pbox, anns[g].box);
      if (v > max_iou) {
        max_iou = v;
        best_gt = static_cast<int>(g);
      }
    }
    if (max_iou >= real(0.5) && best_gt >= 0) {
      plan.proposal_label[k] = anns[best_gt].class_id;
      plan.box_targets[k] = encode_box_delta(anns[best_gt].box, pbox);
      ++num_fg;
    } else if (max_iou < real(0.3)) {
      bg_candidates.push_back(k);  // proposals arrive sorted by objectness
    }
  }
  const int num_bg = std::min<int>(3 * num_fg, static_cast<int>(bg_candidates.size()));
  for (int i = 0; i < num_bg; ++i) plan.proposal_label[bg_candidates[i]] = kBackgroundClass;
  plan.num_fg_props = num_fg;
  plan.num_cls_rows = num_fg + num_bg;
  return plan;
}

Tensor detection_loss(const DetectionPass& pass, const std::vector<Annotation>& anns,
                      const DetectionMatchPlan* frozen) {
  DetectionMatchPlan local;
  if (!frozen) {
    local = plan_detection_match(pass, anns);
    frozen = &local;
  }
  const DetectionMatchPlan& plan = *frozen;
  const int A = pass.grid.count();
  const int K = pass.props.size();
  const int cols = kModelClasses + 1;

  // Objectness BCE over selected anchors: sum softplus(z) - z*y, / count.
  Tensor flat = reshape(pass.obj_logits, {A});
  std::vector<real> sel(A, 0), pos(A, 0);
  for (int a = 0; a < A; ++a) {
    if (plan.anchor_obj_label[a] >= 0) sel[a] = 1;
    if (plan.anchor_obj_label[a] == 1) pos[a] = 1;
  }
  Tensor obj_term = scale(sub(sum(mul(softplus(flat), Tensor::from({A}, sel))),
                              sum(mul(flat, Tensor::from({A}, pos)))),
                          real(1) / std::max(plan.num_obj_terms, 1));

  Tensor loss = obj_term;

  // Classification CE over matched proposals.
  if (plan.num_cls_rows > 0) {
    std::vector<real> onehots(static_cast<std::size_t>(K) * cols, 0);
    for (int k = 0; k < K; ++k)
      if (plan.proposal_label[k] >= 0)
        onehots[static_cast<std::size_t>(k) * cols + plan.proposal_label[k]] = 1;
    Tensor ce = scale(sum(mul(log_softmax(pass.cls_logits), Tensor::from({K, cols}, onehots))),
                      real(-1) / plan.num_cls_rows);
    loss = add(loss, ce);
  }

  // Smooth-L1 on box deltas for foreground proposals.
  if (plan.num_fg_props > 0) {
    std::vector<real> targets(static_cast<std::size_t>(K) * 4, 0);
    for (int k = 0; k < K; ++k)
      for (int i = 0; i < 4; ++i)
        targets[static_cast<std::size_t>(k) * 4 + i] = plan.box_targets[k][i];
    Tensor diff = sub(pass.box_out, Tensor::from({K, 4}, targets));

    // Branch masks from values; smooth-L1 is C^1 at |d|=1 so flips under
    // finite-difference perturbation are harmless.
    std::vector<real> mask_q(static_cast<std::size_t>(K) * 4, 0),
        mask_l(static_cast<std::size_t>(K) * 4, 0);
    for (int k = 0; k < K; ++k) {
      if (plan.proposal_label[k] < 0 || plan.proposal_label[k] == kBackgroundClass) continue;
      for (int i = 0; i < 4; ++i) {
        const std::size_t idx = static_cast<std::size_t>(k) * 4 + i;
        if (std::abs(diff.values()[idx]) < real(1))
          mask_q[idx] = 1;
        else
          mask_l[idx] = 1;
      }
    }
    Tensor quad = scale(mul(diff, diff), real(0.5));
    Tensor absd = add(relu(diff), relu(scale(diff, real(-1))));
    Tensor lin = sub(absd, Tensor::scalar(real(0.5)));
    Tensor huber = add(mul(quad, Tensor::from({K, 4}, mask_q)),
                       mul(lin, Tensor::from({K, 4}, mask_l)));
    loss = add(loss, scale(sum(huber), real(1) / plan.num_fg_props));
  }
  return loss;
}

Tensor uda_loss(const DetectionModel& m, const Tensor& source_features,
                const Tensor& target_features, real beta) {
  Tensor lp_s = log_softmax(m.domain_logits(source_features, beta));
  Tensor lp_t = log_softmax(m.domain_logits(target_features, beta));
  Tensor ce_s = scale(sum(mul(lp_s, Tensor::from({1, 2}, {1, 0}))), real(-1));
  Tensor ce_t = scale(sum(mul(lp_t, Tensor::from({1, 2}, {0, 1}))), real(-1));
  return scale(add(ce_s, ce_t), real(0.5));
}

RotationPass forward_rotation(const DetectionModel& m, const ImageBuffer& rotated_img,
                              RotationMode mode, int top_k,
                              const std::vector<int>* fixed_anchors) {
  RotationPass pass;
  pass.features = m.extract_features(rotated_img);
  if (mode == RotationMode::image) {
    pass.logits = m.image_rotation_logits(pass.features);
    return pass;
  }
  pass.props = fixed_anchors ? m.propose_at(pass.features, *fixed_anchors)
                             : m.propose(pass.features, top_k);
  pass.logits = m.rotation_logits(m.trunk(pass.props.rois));
  return pass;
}

RotationPass forward_rotation_at_boxes(const DetectionModel& m, const ImageBuffer& rotated_img,
                                       const std::vector<BoundingBox>& boxes) {
  RotationPass pass;
  pass.features = m.extract_features(rotated_img);
  Tensor rois = m.pool_at_boxes(pass.features, boxes);
  pass.logits = m.rotation_logits(m.trunk(rois));
  return pass;
}

namespace {

Tensor angle_ce_mean(const Tensor& logits, QuarterTurn theta) {
  const int K = logits.shape()[0];
  std::vector<real> onehots(static_cast<std::size_t>(K) * 4, 0);
  for (int k = 0; k < K; ++k) onehots[static_cast<std::size_t>(k) * 4 + turn_index(theta)] = 1;
  return scale(sum(mul(log_softmax(logits), Tensor::from({K, 4}, onehots))), real(-1) / K);
}

}  // namespace

Tensor rotation_loss(const RotationPass& source_pass, QuarterTurn theta_s,
                     const RotationPass& target_pass, QuarterTurn theta_t, RotationMode mode) {
  (void)mode;  // both modes reduce to a per-row CE mean over their logits
  return scale(add(angle_ce_mean(source_pass.logits, theta_s),
                   angle_ce_mean(target_pass.logits, theta_t)),
               real(0.5));
}

std::vector<std::vector<real>> class_probability_rows(const Tensor& cls_logits) {
  const int K = cls_logits.shape()[0];
  const int cols = cls_logits.shape()[1];
  std::vector<std::vector<real>> rows(K);
  for (int k = 0; k < K; ++k) {
    std::vector<real> logits(cls_logits.values().begin() + static_cast<std::size_t>(k) * cols,
                             cls_logits.values().begin() + static_cast<std::size_t>(k + 1) * cols);
    rows[k] = softmax_values(logits);
  }
  return rows;
}

ConsistencyTerm consistency_loss_one_image(const DetectionModel& m,
                                           const std::vector<BoundingBox>& proposal_boxes,
                                           const std::vector<std::vector<real>>& pseudo_probs,
                                           const ImageBuffer& img,
                                           const AugmentationPolicy& policy,
                                           std::uint64_t aug_seed, real sigma) {
  if (proposal_boxes.size() != pseudo_probs.size() || proposal_boxes.empty())
    throw std::invalid_argument("consistency_loss_one_image: boxes/probs mismatch");
  const int K = static_cast<int>(proposal_boxes.size());
  const int cols = kModelClasses + 1;

  ConsistencyTerm term;
  term.total = K;

  // Gates and pseudo-labels are pure values; no gradient reaches the pass
  // that produced pseudo_probs.
  std::vector<real> onehots(static_cast<std::size_t>(K) * cols, 0);
  for (int k = 0; k < K; ++k) {
    const auto& p = pseudo_probs[k];
    const int label = argmax_index(p);
    if (p[label] >= sigma) {
      onehots[static_cast<std::size_t>(k) * cols + label] = 1;
      ++term.accepted;
    }
  }
  term.accept_fraction = static_cast<real>(term.accepted) / K;

  const ImageBuffer augmented = augment(img, policy, aug_seed);
  term.aug_features = m.extract_features(augmented);
  Tensor rois = m.pool_at_boxes(term.aug_features, proposal_boxes);
  Tensor logits = m.class_logits(m.trunk(rois));
  term.loss = scale(sum(mul(log_softmax(logits), Tensor::from({K, cols}, onehots))),
                    real(-1) / K);
  return term;
}

ConsistencyResult consistency_loss(const ConsistencyTerm& source_term,
                                   const ConsistencyTerm& target_term) {
  ConsistencyResult r;
  r.loss = scale(add(source_term.loss, target_term.loss), real(0.5));
  r.accept_fraction = (source_term.accept_fraction + target_term.accept_fraction) / 2;
  return r;
}

TotalLoss total_loss(const Tensor* det, const Tensor* uda, const Tensor* rp, const Tensor* cl,
                     real cl_accept_fraction, const LossWeights& w) {
  TotalLoss out;
  Tensor acc = Tensor::scalar(0);
  bool first = true;
  auto fold = [&](const Tensor& t, real weight) {
    Tensor weighted = weight == real(1) ? t : scale(t, weight);
    acc = first ? weighted : add(acc, weighted);
    first = false;
  };
  if (det) {
    fold(*det, real(1));
    out.breakdown.l_det = det->item();
  }
  if (uda) {
    fold(*uda, w.alpha);
    out.breakdown.l_uda = uda->item();
  }
  if (rp) {
    fold(*rp, w.lambda1);
    out.breakdown.l_rp = rp->item();
  }
  if (cl) {
    fold(*cl, w.lambda2);
    out.breakdown.l_cl = cl->item();
  }
  out.value = acc;
  out.breakdown.total = acc.item();
  out.breakdown.cl_accept_fraction = cl_accept_fraction;
  return out;
}

}  // namespace xdet
