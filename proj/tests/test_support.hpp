#pragma once

// Independent oracles used by the tests. These deliberately avoid the
// library's own arithmetic: boxes are rasterized and counted, rotations are
// raw index permutations, AP is recomputed per prefix from scratch.

#include <algorithm>
#include <vector>

#include "xdet/evaluation.hpp"
#include "xdet/geometry.hpp"

namespace oracle {

struct Mask {
  int h = 0, w = 0;
  std::vector<char> cells;  // row-major
  char& at(int y, int x) { return cells[static_cast<std::size_t>(y) * w + x]; }
  char at(int y, int x) const { return cells[static_cast<std::size_t>(y) * w + x]; }
};

inline Mask rasterize_box(const xdet::BoundingBox& b, int img_w, int img_h) {
  Mask m;
  m.h = img_h;
  m.w = img_w;
  m.cells.assign(static_cast<std::size_t>(img_w) * img_h, 0);
  for (int y = static_cast<int>(b.y_min); y < static_cast<int>(b.y_max); ++y)
    for (int x = static_cast<int>(b.x_min); x < static_cast<int>(b.x_max); ++x) m.at(y, x) = 1;
  return m;
}

inline Mask rotate_mask_90ccw(const Mask& m) {
  // Pixel (x,y) -> column y, row w-1-x of the rotated mask.
  Mask r;
  r.h = m.w;
  r.w = m.h;
  r.cells.assign(m.cells.size(), 0);
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x)
      if (m.at(y, x)) r.at(m.w - 1 - x, y) = 1;
  return r;
}

inline Mask rotate_mask(const Mask& m, xdet::QuarterTurn turn) {
  Mask r = m;
  for (int i = 0; i < xdet::turn_index(turn); ++i) r = rotate_mask_90ccw(r);
  return r;
}

// Bounding box of the set pixels, in edge coordinates.
inline xdet::BoundingBox mask_bbox(const Mask& m) {
  int x0 = m.w, y0 = m.h, x1 = -1, y1 = -1;
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x)
      if (m.at(y, x)) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) return {};
  return {static_cast<xdet::real>(x0), static_cast<xdet::real>(y0),
          static_cast<xdet::real>(x1 + 1), static_cast<xdet::real>(y1 + 1)};
}

// IoU by counting unit cells; exact for integer boxes.
inline double counting_iou(const xdet::BoundingBox& a, const xdet::BoundingBox& b) {
  const int x0 = static_cast<int>(std::min(a.x_min, b.x_min));
  const int y0 = static_cast<int>(std::min(a.y_min, b.y_min));
  const int x1 = static_cast<int>(std::max(a.x_max, b.x_max));
  const int y1 = static_cast<int>(std::max(a.y_max, b.y_max));
  long inter = 0, uni = 0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const bool in_a = x >= a.x_min && x < a.x_max && y >= a.y_min && y < a.y_max;
      const bool in_b = x >= b.x_min && x < b.x_max && y >= b.y_min && y < b.y_max;
      inter += (in_a && in_b);
      uni += (in_a || in_b);
    }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// All-points AP by brute force: re-match every ranked prefix from scratch,
// then integrate max-precision-to-the-right step by step.
inline double brute_force_ap(const std::vector<xdet::PredRecord>& dets_in,
                             const std::vector<xdet::GtInstance>& gts, double iou_thr) {
  std::vector<xdet::PredRecord> dets = dets_in;
  std::stable_sort(dets.begin(), dets.end(),
                   [](const xdet::PredRecord& a, const xdet::PredRecord& b) {
                     if (a.confidence != b.confidence) return a.confidence > b.confidence;
                     return a.image_id < b.image_id;
                   });
  const std::size_t n = dets.size();
  std::vector<double> recall(n), precision(n);
  for (std::size_t k = 1; k <= n; ++k) {
    std::vector<char> matched(gts.size(), 0);
    int tp = 0;
    for (std::size_t i = 0; i < k; ++i) {
      double best = 0;
      std::size_t best_g = gts.size();
      for (std::size_t g = 0; g < gts.size(); ++g) {
        if (matched[g] || gts[g].image_id != dets[i].image_id) continue;
        const double v = xdet::iou(dets[i].box, gts[g].box);
        if (v > best) {
          best = v;
          best_g = g;
        }
      }
      if (best_g < gts.size() && best >= iou_thr) {
        matched[best_g] = 1;
        ++tp;
      }
    }
    recall[k - 1] = gts.empty() ? 0.0 : static_cast<double>(tp) / gts.size();
    precision[k - 1] = static_cast<double>(tp) / k;
  }
  double ap = 0, prev = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double env = 0;
    for (std::size_t j = i; j < n; ++j) env = std::max(env, precision[j]);
    ap += (recall[i] - prev) * env;
    prev = recall[i];
  }
  return ap;
}

}  // namespace oracle
