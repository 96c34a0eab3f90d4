#include "xdet/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "xdet/rng.hpp"

namespace xdet {

BoundingBox AnchorGrid::box(int anchor_id) const {
  const int cell = anchor_id / kAnchorsPerCell;
  const int size_idx = anchor_id % kAnchorsPerCell;
  const int cy = cell / fw, cx = cell % fw;
  const real x_c = (cx + real(0.5)) * kFeatureStride;
  const real y_c = (cy + real(0.5)) * kFeatureStride;
  const real h = sides[size_idx] / 2;
  return BoundingBox{x_c - h, y_c - h, x_c + h, y_c + h}.clipped(static_cast<real>(img_w),
                                                                 static_cast<real>(img_h));
}

std::array<real, 4> encode_box_delta(const BoundingBox& gt, const BoundingBox& anchor) {
  const real aw = anchor.width(), ah = anchor.height();
  const real ax = (anchor.x_min + anchor.x_max) / 2, ay = (anchor.y_min + anchor.y_max) / 2;
  const real gw = gt.width(), gh = gt.height();
  const real gx = (gt.x_min + gt.x_max) / 2, gy = (gt.y_min + gt.y_max) / 2;
  return {(gx - ax) / aw, (gy - ay) / ah, std::log(gw / aw), std::log(gh / ah)};
}

BoundingBox decode_box_delta(const std::array<real, 4>& d, const BoundingBox& anchor) {
  const real aw = anchor.width(), ah = anchor.height();
  const real ax = (anchor.x_min + anchor.x_max) / 2, ay = (anchor.y_min + anchor.y_max) / 2;
  const real x = ax + d[0] * aw, y = ay + d[1] * ah;
  const real w = aw * std::exp(d[2]), h = ah * std::exp(d[3]);
  return {x - w / 2, y - h / 2, x + w / 2, y + h / 2};
}

DetectionModel::DetectionModel(std::uint64_t init_seed) {
  Rng rng(init_seed, "init");
  auto he = [&](std::vector<int> shape, int fan_in) {
    return Tensor::randn(std::move(shape), std::sqrt(real(2) / fan_in), rng, true);
  };
  auto head = [&](std::vector<int> shape) {
    return Tensor::randn(std::move(shape), real(0.01), rng, true);
  };
  auto zeros = [](std::vector<int> shape) { return Tensor::zeros(std::move(shape), true); };

  conv1_w_ = he({3, 3, 3, 8}, 3 * 3 * 3);
  conv1_b_ = zeros({8});
  conv2_w_ = he({3, 3, 8, kFeatureChannels}, 3 * 3 * 8);
  conv2_b_ = zeros({kFeatureChannels});
  obj_w_ = head({kFeatureChannels, kAnchorsPerCell});
  obj_b_ = zeros({kAnchorsPerCell});
  trunk_w_ = he({kFeatureChannels, 32}, kFeatureChannels);
  trunk_b_ = zeros({32});
  cls_w_ = head({32, kModelClasses + 1});
  cls_b_ = zeros({kModelClasses + 1});
  box_w_ = head({32, 4});
  box_b_ = zeros({4});
  rot_w_ = head({32, 4});
  rot_b_ = zeros({4});
  imgrot_w_ = head({kFeatureChannels, 4});
  imgrot_b_ = zeros({4});
  dom_w1_ = he({kFeatureChannels, 8}, kFeatureChannels);
  dom_b1_ = zeros({8});
  dom_w2_ = head({8, 2});
  dom_b2_ = zeros({2});
}

NamedParams DetectionModel::named_params() const {
  return {
      {"conv1.w", conv1_w_},   {"conv1.b", conv1_b_}, {"conv2.w", conv2_w_},
      {"conv2.b", conv2_b_},   {"obj.w", obj_w_},     {"obj.b", obj_b_},
      {"trunk.w", trunk_w_},   {"trunk.b", trunk_b_}, {"cls.w", cls_w_},
      {"cls.b", cls_b_},       {"box.w", box_w_},     {"box.b", box_b_},
      {"rot.w", rot_w_},       {"rot.b", rot_b_},     {"imgrot.w", imgrot_w_},
      {"imgrot.b", imgrot_b_}, {"dom.w1", dom_w1_},   {"dom.b1", dom_b1_},
      {"dom.w2", dom_w2_},     {"dom.b2", dom_b2_},
  };
}

std::vector<Tensor> DetectionModel::params() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_params()) out.push_back(t);
  return out;
}

void DetectionModel::zero_init() {
  for (Tensor& t : params())
    std::fill(t.values().begin(), t.values().end(), real(0));
}

Tensor DetectionModel::extract_features(const ImageBuffer& img) const {
  if (img.height() % kFeatureStride != 0 || img.width() % kFeatureStride != 0)
    throw std::invalid_argument("extract_features: image " + std::to_string(img.width()) + "x" +
                                std::to_string(img.height()) + " not divisible by stride " +
                                std::to_string(kFeatureStride));
  Tensor x = Tensor::from({img.height(), img.width(), 3}, img.data());
  Tensor h1 = relu(conv2d(x, conv1_w_, conv1_b_, 2));
  return relu(conv2d(h1, conv2_w_, conv2_b_, 2));
}

AnchorGrid DetectionModel::anchor_grid(const Tensor& features) const {
  AnchorGrid g;
  g.fh = features.shape()[0];
  g.fw = features.shape()[1];
  g.img_h = g.fh * kFeatureStride;
  g.img_w = g.fw * kFeatureStride;
  return g;
}

Tensor DetectionModel::objectness_logits(const Tensor& features) const {
  const int cells = features.shape()[0] * features.shape()[1];
  Tensor flat = reshape(features, {cells, kFeatureChannels});
  return add(matmul(flat, obj_w_), obj_b_);
}

namespace {

// Cells whose centers fall inside the clipped box; the box's own cell (or
// nearest to its center when pooling arbitrary boxes) is always included.
std::vector<int> cells_in_box(const AnchorGrid& grid, const BoundingBox& box) {
  std::vector<int> cells;
  const int cx0 = std::max(0, static_cast<int>(std::floor(box.x_min / kFeatureStride - real(0.5))));
  const int cx1 = std::min(grid.fw - 1,
                           static_cast<int>(std::ceil(box.x_max / kFeatureStride - real(0.5))));
  const int cy0 = std::max(0, static_cast<int>(std::floor(box.y_min / kFeatureStride - real(0.5))));
  const int cy1 = std::min(grid.fh - 1,
                           static_cast<int>(std::ceil(box.y_max / kFeatureStride - real(0.5))));
  for (int cy = cy0; cy <= cy1; ++cy)
    for (int cx = cx0; cx <= cx1; ++cx) {
      const real px = (cx + real(0.5)) * kFeatureStride;
      const real py = (cy + real(0.5)) * kFeatureStride;
      if (px > box.x_min && px < box.x_max && py > box.y_min && py < box.y_max)
        cells.push_back(cy * grid.fw + cx);
    }
  if (cells.empty()) {
    const real bx = (box.x_min + box.x_max) / 2, by = (box.y_min + box.y_max) / 2;
    int cx = std::clamp(static_cast<int>(bx / kFeatureStride), 0, grid.fw - 1);
    int cy = std::clamp(static_cast<int>(by / kFeatureStride), 0, grid.fh - 1);
    cells.push_back(cy * grid.fw + cx);
  }
  return cells;
}

}  // namespace

ProposalSet DetectionModel::propose_at(const Tensor& features,
                                       const std::vector<int>& anchor_ids) const {
  const AnchorGrid grid = anchor_grid(features);
  Tensor logits = objectness_logits(features);

  ProposalSet set;
  std::vector<std::vector<int>> groups;
  for (int id : anchor_ids) {
    if (id < 0 || id >= grid.count())
      throw std::invalid_argument("propose_at: anchor id " + std::to_string(id) +
                                  " out of range");
    Proposal p;
    p.anchor_id = id;
    p.box = grid.box(id);
    p.objectness = real(1) / (real(1) + std::exp(-logits.values()[id]));
    groups.push_back(cells_in_box(grid, p.box));
    set.items.push_back(p);
  }
  set.rois = roi_mean(features, groups);
  return set;
}

ProposalSet DetectionModel::propose(const Tensor& features, int top_k) const {
  if (top_k < 1) throw std::invalid_argument("propose: top_k must be >= 1");
  const AnchorGrid grid = anchor_grid(features);
  Tensor logits = objectness_logits(features);
  const auto& lv = logits.values();

  std::vector<int> order(grid.count());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return lv[a] > lv[b]; });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(top_k)));

  // Re-pool through propose_at so both paths share the exact same pooling.
  return propose_at(features, order);
}

Tensor DetectionModel::pool_at_boxes(const Tensor& features,
                                     const std::vector<BoundingBox>& boxes) const {
  const AnchorGrid grid = anchor_grid(features);
  std::vector<std::vector<int>> groups;
  groups.reserve(boxes.size());
  for (const BoundingBox& b : boxes) groups.push_back(cells_in_box(grid, b));
  return roi_mean(features, groups);
}

Tensor DetectionModel::trunk(const Tensor& rois) const {
  return relu(add(matmul(rois, trunk_w_), trunk_b_));
}

Tensor DetectionModel::class_logits(const Tensor& trunk) const {
  return add(matmul(trunk, cls_w_), cls_b_);
}

Tensor DetectionModel::box_deltas(const Tensor& trunk) const {
  return add(matmul(trunk, box_w_), box_b_);
}

Tensor DetectionModel::rotation_logits(const Tensor& trunk) const {
  return add(matmul(trunk, rot_w_), rot_b_);
}

Tensor DetectionModel::image_rotation_logits(const Tensor& features) const {
  Tensor pooled = reshape(global_mean(features), {1, kFeatureChannels});
  return add(matmul(pooled, imgrot_w_), imgrot_b_);
}

Tensor DetectionModel::domain_logits(const Tensor& features, real beta) const {
  Tensor pooled = reshape(global_mean(features), {1, kFeatureChannels});
  Tensor reversed = grad_reverse(pooled, beta);
  Tensor h = relu(add(matmul(reversed, dom_w1_), dom_b1_));
  return add(matmul(h, dom_w2_), dom_b2_);
}

std::vector<Detection> DetectionModel::detect(const ImageBuffer& img, real score_threshold,
                                              real nms_iou, int top_k) const {
  // Inference only; nothing here records onto a tape.
  Tensor features = extract_features(img);
  ProposalSet props = propose(features, top_k);
  Tensor t = trunk(props.rois);
  Tensor probs = softmax(class_logits(t));
  Tensor deltas = box_deltas(t);

  const real img_w = static_cast<real>(img.width());
  const real img_h = static_cast<real>(img.height());
  const int cols = kModelClasses + 1;

  std::vector<Detection> out;
  for (int c = 0; c < kModelClasses; ++c) {
    std::vector<ScoredBox> cls_dets;
    for (int k = 0; k < props.size(); ++k) {
      const real conf = probs.values()[k * cols + c];
      if (conf < score_threshold) continue;
      const std::array<real, 4> d = {
          deltas.values()[k * 4 + 0], deltas.values()[k * 4 + 1],
          deltas.values()[k * 4 + 2], deltas.values()[k * 4 + 3]};
      BoundingBox box = decode_box_delta(d, props.items[k].box).clipped(img_w, img_h);
      cls_dets.push_back({box, conf});
    }
    for (const ScoredBox& sb : nms(cls_dets, nms_iou)) out.push_back({sb.box, c, sb.score});
  }
  std::stable_sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    return a.confidence > b.confidence;
  });
  return out;
}

}  // namespace xdet
