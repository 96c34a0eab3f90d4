#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace xdet {

#ifdef XDET_FLOAT32
using real = float;
#else
using real = double;
#endif

// Axis-aligned box in continuous pixel-edge coordinates. A box covering the
// single pixel (0,0) is (0,0,1,1); x_max/y_max are exclusive edges, which
// makes quarter-turn maps exact for integer coordinates.
struct BoundingBox {
  real x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  real width() const { return x_max - x_min; }
  real height() const { return y_max - y_min; }
  real area() const { return width() * height(); }
  bool valid() const { return x_min <= x_max && y_min <= y_max; }

  BoundingBox clipped(real image_w, real image_h) const;

  bool operator==(const BoundingBox&) const = default;
};

// Counterclockwise quarter turns; composition is addition mod 360.
enum class QuarterTurn : int { deg0 = 0, deg90 = 1, deg180 = 2, deg270 = 3 };

inline QuarterTurn compose(QuarterTurn a, QuarterTurn b) {
  return static_cast<QuarterTurn>((static_cast<int>(a) + static_cast<int>(b)) % 4);
}

inline int turn_index(QuarterTurn t) { return static_cast<int>(t); }
inline int turn_degrees(QuarterTurn t) { return 90 * static_cast<int>(t); }

// Point map: 90 deg CCW sends (x,y) -> (y, W-x); 180 -> (W-x, H-y);
// 270 -> (H-y, x). The rotated image has size H x W for 90/270.
// Throws std::invalid_argument for inverted corners or boxes outside the image.
BoundingBox rotate_box(const BoundingBox& b, QuarterTurn turn, real image_w, real image_h);

// Intersection over union; 0 when both boxes have zero area.
real iou(const BoundingBox& a, const BoundingBox& b);

struct ScoredBox {
  BoundingBox box;
  real score = 0;
};

// Greedy NMS: keep highest score, drop remaining boxes with IoU strictly
// above the threshold. Output sorted by descending score; ties broken by
// input index.
std::vector<ScoredBox> nms(const std::vector<ScoredBox>& dets, real iou_threshold);

}  // namespace xdet
