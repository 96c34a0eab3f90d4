#pragma once

#include <string>
#include <vector>

#include "xdet/geometry.hpp"

namespace xdet {

// H x W x 3 intensity grid in [0,1], row-major HWC. Internal precision is
// floating; PNG storage quantizes to 8 bits per channel.
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int height, int width, real fill = 0)
      : h_(height), w_(width), data_(static_cast<std::size_t>(height) * width * 3, fill) {}

  int height() const { return h_; }
  int width() const { return w_; }

  real& at(int y, int x, int c) { return data_[(static_cast<std::size_t>(y) * w_ + x) * 3 + c]; }
  real at(int y, int x, int c) const {
    return data_[(static_cast<std::size_t>(y) * w_ + x) * 3 + c];
  }

  std::vector<real>& data() { return data_; }
  const std::vector<real>& data() const { return data_; }

  void clamp01();

  bool operator==(const ImageBuffer&) const = default;

 private:
  int h_ = 0, w_ = 0;
  std::vector<real> data_;
};

// Exact index-permutation rotation matching the rotate_box point map.
// Output dimensions swap for 90/270 degrees.
ImageBuffer rotate_image(const ImageBuffer& img, QuarterTurn turn);

// 8-bit PNG, values stored as round(v*255). Throws std::runtime_error with
// the path on I/O failure.
void save_png(const std::string& path, const ImageBuffer& img);
ImageBuffer load_png(const std::string& path);

}  // namespace xdet
