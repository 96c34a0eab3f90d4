#include "xdet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace xdet {

BoundingBox BoundingBox::clipped(real image_w, real image_h) const {
  BoundingBox c;
  c.x_min = std::clamp(x_min, real(0), image_w);
  c.y_min = std::clamp(y_min, real(0), image_h);
  c.x_max = std::clamp(x_max, real(0), image_w);
  c.y_max = std::clamp(y_max, real(0), image_h);
  return c;
}

BoundingBox rotate_box(const BoundingBox& b, QuarterTurn turn, real image_w, real image_h) {
  if (!b.valid()) {
    std::ostringstream os;
    os << "rotate_box: inverted corners (" << b.x_min << "," << b.y_min << "," << b.x_max << ","
       << b.y_max << ")";
    throw std::invalid_argument(os.str());
  }
  if (b.x_min < 0 || b.y_min < 0 || b.x_max > image_w || b.y_max > image_h) {
    std::ostringstream os;
    os << "rotate_box: box (" << b.x_min << "," << b.y_min << "," << b.x_max << "," << b.y_max
       << ") outside image " << image_w << "x" << image_h;
    throw std::invalid_argument(os.str());
  }
  switch (turn) {
    case QuarterTurn::deg0:
      return b;
    case QuarterTurn::deg90:
      return {b.y_min, image_w - b.x_max, b.y_max, image_w - b.x_min};
    case QuarterTurn::deg180:
      return {image_w - b.x_max, image_h - b.y_max, image_w - b.x_min, image_h - b.y_min};
    case QuarterTurn::deg270:
      return {image_h - b.y_max, b.x_min, image_h - b.y_min, b.x_max};
  }
  throw std::logic_error("rotate_box: unreachable");
}

real iou(const BoundingBox& a, const BoundingBox& b) {
  if (!a.valid() || !b.valid()) throw std::invalid_argument("iou: invalid box");
  const real ix = std::max(real(0), std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const real iy = std::max(real(0), std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const real inter = ix * iy;
  const real uni = a.area() + b.area() - inter;
  if (uni <= real(0)) return real(0);
  return inter / uni;
}

std::vector<ScoredBox> nms(const std::vector<ScoredBox>& dets, real iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  std::vector<ScoredBox> kept;
  for (std::size_t idx : order) {
    bool suppressed = false;
    for (const ScoredBox& k : kept) {
      if (iou(dets[idx].box, k.box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(dets[idx]);
  }
  return kept;
}

}  // namespace xdet
