#include "xdet/image.hpp"

#include <algorithm>

namespace xdet {

void ImageBuffer::clamp01() {
  for (real& v : data_) v = std::clamp(v, real(0), real(1));
}

ImageBuffer rotate_image(const ImageBuffer& img, QuarterTurn turn) {
  const int h = img.height(), w = img.width();
  if (turn == QuarterTurn::deg0) return img;

  // Pixel (x,y) lands where its center lands under the point map.
  if (turn == QuarterTurn::deg90) {
    ImageBuffer out(w, h);  // H'=W, W'=H
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) out.at(w - 1 - x, y, c) = img.at(y, x, c);
    return out;
  }
  if (turn == QuarterTurn::deg180) {
    ImageBuffer out(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) out.at(h - 1 - y, w - 1 - x, c) = img.at(y, x, c);
    return out;
  }
  ImageBuffer out(w, h);  // deg270
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, h - 1 - y, c) = img.at(y, x, c);
  return out;
}

}  // namespace xdet
