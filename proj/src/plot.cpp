#include "xdet/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "xdet/image.hpp"

namespace xdet {

namespace {

using Color = std::array<real, 3>;

// 5x7 glyphs for the few characters tick labels and legends need.
struct Glyph {
  char ch;
  std::array<const char*, 7> rows;
};

const Glyph kGlyphs[] = {
    {'0', {"01110", "10001", "10011", "10101", "11001", "10001", "01110"}},
    {'1', {"00100", "01100", "00100", "00100", "00100", "00100", "01110"}},
    {'2', {"01110", "10001", "00001", "00110", "01000", "10000", "11111"}},
    {'3', {"11110", "00001", "00001", "01110", "00001", "00001", "11110"}},
    {'4', {"00010", "00110", "01010", "10010", "11111", "00010", "00010"}},
    {'5', {"11111", "10000", "11110", "00001", "00001", "10001", "01110"}},
    {'6', {"00110", "01000", "10000", "11110", "10001", "10001", "01110"}},
    {'7', {"11111", "00001", "00010", "00100", "01000", "01000", "01000"}},
    {'8', {"01110", "10001", "10001", "01110", "10001", "10001", "01110"}},
    {'9', {"01110", "10001", "10001", "01111", "00001", "00010", "01100"}},
    {'.', {"00000", "00000", "00000", "00000", "00000", "01100", "01100"}},
    {'-', {"00000", "00000", "00000", "01110", "00000", "00000", "00000"}},
    {'+', {"00000", "00100", "00100", "11111", "00100", "00100", "00000"}},
    {'e', {"00000", "00000", "01110", "10001", "11111", "10000", "01110"}},
    {'t', {"01000", "01000", "11100", "01000", "01000", "01001", "00110"}},
    {'o', {"00000", "00000", "01110", "10001", "10001", "10001", "01110"}},
    {'a', {"00000", "00000", "01110", "00001", "01111", "10001", "01111"}},
    {'l', {"01100", "00100", "00100", "00100", "00100", "00100", "01110"}},
    {'d', {"00001", "00001", "01111", "10001", "10001", "10001", "01111"}},
    {'u', {"00000", "00000", "10001", "10001", "10001", "10011", "01101"}},
    {'r', {"00000", "00000", "10110", "11001", "10000", "10000", "10000"}},
    {'p', {"00000", "00000", "11110", "10001", "11110", "10000", "10000"}},
    {'c', {"00000", "00000", "01110", "10001", "10000", "10001", "01110"}},
    {'m', {"00000", "00000", "11010", "10101", "10101", "10101", "10101"}},
    {'s', {"00000", "00000", "01111", "10000", "01110", "00001", "11110"}},
    {'_', {"00000", "00000", "00000", "00000", "00000", "00000", "11111"}},
};

const Glyph* find_glyph(char c) {
  for (const Glyph& g : kGlyphs)
    if (g.ch == c) return &g;
  return nullptr;
}

void draw_text(ImageBuffer& img, int x, int y, const std::string& text, const Color& color) {
  for (char c : text) {
    if (const Glyph* g = find_glyph(c)) {
      for (int r = 0; r < 7; ++r)
        for (int col = 0; col < 5; ++col)
          if (g->rows[r][col] == '1') {
            const int px = x + col, py = y + r;
            if (px >= 0 && px < img.width() && py >= 0 && py < img.height())
              for (int ch = 0; ch < 3; ++ch) img.at(py, px, ch) = color[ch];
          }
    }
    x += 6;
  }
}

void draw_line(ImageBuffer& img, real x0, real y0, real x1, real y1, const Color& color) {
  const int steps = std::max(2, static_cast<int>(std::ceil(
                                    std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) *
                                    2);
  for (int i = 0; i <= steps; ++i) {
    const real t = static_cast<real>(i) / steps;
    const int x = static_cast<int>(std::lround(x0 + (x1 - x0) * t));
    const int y = static_cast<int>(std::lround(y0 + (y1 - y0) * t));
    if (x >= 0 && x < img.width() && y >= 0 && y < img.height())
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = color[c];
  }
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

struct Series {
  std::string name;
  Color color;
  std::vector<double> x, y;
};

void render_chart(const std::string& path, const std::vector<Series>& series) {
  const int W = 640, H = 420, L = 56, R = 12, T = 14, B = 40;
  ImageBuffer img(H, W, real(1));

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool any = false;
  for (const Series& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!any) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        any = true;
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  ymin = std::min(ymin, 0.0);
  ymax *= 1.05;

  auto sx = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto sy = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

  const Color axis = {0, 0, 0}, grid = {real(0.85), real(0.85), real(0.85)};
  for (int i = 0; i <= 5; ++i) {
    const double y = ymin + (ymax - ymin) * i / 5;
    draw_line(img, L, sy(y), W - R, sy(y), grid);
    draw_text(img, 4, static_cast<int>(sy(y)) - 3, tick_label(y), axis);
  }
  for (int i = 0; i <= 5; ++i) {
    const double x = xmin + (xmax - xmin) * i / 5;
    draw_line(img, sx(x), T, sx(x), H - B, grid);
    draw_text(img, static_cast<int>(sx(x)) - 8, H - B + 6, tick_label(x), axis);
  }
  draw_line(img, L, T, L, H - B, axis);
  draw_line(img, L, H - B, W - R, H - B, axis);

  int legend_y = T + 4;
  for (const Series& s : series) {
    for (std::size_t i = 1; i < s.x.size(); ++i)
      draw_line(img, sx(s.x[i - 1]), sy(s.y[i - 1]), sx(s.x[i]), sy(s.y[i]), s.color);
    draw_line(img, W - R - 90, legend_y + 3, W - R - 74, legend_y + 3, s.color);
    draw_text(img, W - R - 70, legend_y, s.name, axis);
    legend_y += 11;
  }
  save_png(path, img);
}

}  // namespace

int plot_metrics(const std::string& metrics_csv, const std::string& out_prefix) {
  std::ifstream in(metrics_csv);
  if (!in) throw std::runtime_error("cannot open metrics csv: " + metrics_csv);
  std::string header;
  if (!std::getline(in, header) ||
      header != "step,l_det,l_uda,l_rp,l_cl,total,cl_accept_fraction,target_map")
    throw std::runtime_error("unexpected metrics header in " + metrics_csv);

  Series det{"det", {real(0.85), real(0.25), real(0.2)}, {}, {}};
  Series uda{"uda", {real(0.2), real(0.55), real(0.85)}, {}, {}};
  Series rp{"rp", {real(0.15), real(0.65), real(0.3)}, {}, {}};
  Series cl{"cl", {real(0.75), real(0.5), real(0.1)}, {}, {}};
  Series total{"total", {0, 0, 0}, {}, {}};
  Series map{"map", {real(0.4), real(0.2), real(0.7)}, {}, {}};

  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() < 7) throw std::runtime_error("bad metrics row: " + line);
    const double step = std::stod(fields[0]);
    det.x.push_back(step);
    det.y.push_back(std::stod(fields[1]));
    uda.x.push_back(step);
    uda.y.push_back(std::stod(fields[2]));
    rp.x.push_back(step);
    rp.y.push_back(std::stod(fields[3]));
    cl.x.push_back(step);
    cl.y.push_back(std::stod(fields[4]));
    total.x.push_back(step);
    total.y.push_back(std::stod(fields[5]));
    if (fields.size() >= 8 && !fields[7].empty()) {
      map.x.push_back(step);
      map.y.push_back(std::stod(fields[7]));
    }
  }

  int written = 0;
  if (!total.x.empty()) {
    render_chart(out_prefix + "_losses.png", {det, uda, rp, cl, total});
    ++written;
  }
  if (!map.x.empty()) {
    render_chart(out_prefix + "_map.png", {map});
    ++written;
  }
  return written;
}

}  // namespace xdet
