#include "statsep/plot.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "statsep/error.hpp"

namespace statsep::plot {
namespace {

using Glyph = std::array<std::uint8_t, 7>;  // 5x7, bit 4 is the leftmost column

Glyph glyph(char ch) {
  switch (std::toupper(static_cast<unsigned char>(ch))) {
    case '0': return {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E};
    case '1': return {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E};
    case '2': return {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F};
    case '3': return {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E};
    case '4': return {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02};
    case '5': return {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E};
    case '6': return {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E};
    case '7': return {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08};
    case '8': return {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E};
    case '9': return {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C};
    case 'A': return {0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11};
    case 'B': return {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E};
    case 'C': return {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E};
    case 'D': return {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C};
    case 'E': return {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F};
    case 'F': return {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10};
    case 'G': return {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F};
    case 'H': return {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11};
    case 'I': return {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E};
    case 'J': return {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C};
    case 'K': return {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11};
    case 'L': return {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F};
    case 'M': return {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11};
    case 'N': return {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11};
    case 'O': return {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E};
    case 'P': return {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10};
    case 'Q': return {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D};
    case 'R': return {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11};
    case 'S': return {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E};
    case 'T': return {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04};
    case 'U': return {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E};
    case 'V': return {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04};
    case 'W': return {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A};
    case 'X': return {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11};
    case 'Y': return {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04};
    case 'Z': return {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F};
    case '.': return {0, 0, 0, 0, 0, 0x0C, 0x0C};
    case ',': return {0, 0, 0, 0, 0x0C, 0x04, 0x08};
    case '-': return {0, 0, 0, 0x1F, 0, 0, 0};
    case '+': return {0, 0x04, 0x04, 0x1F, 0x04, 0x04, 0};
    case '=': return {0, 0, 0x1F, 0, 0x1F, 0, 0};
    case '(': return {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02};
    case ')': return {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08};
    case '/': return {0, 0x01, 0x02, 0x04, 0x08, 0x10, 0};
    case ':': return {0, 0x0C, 0x0C, 0, 0x0C, 0x0C, 0};
    case '_': return {0, 0, 0, 0, 0, 0, 0x1F};
    default: return {0, 0, 0, 0, 0, 0, 0};
  }
}

struct Rgb {
  std::uint8_t r, g, b;
};

constexpr std::array<Rgb, 6> kPalette{{{31, 119, 180}, {214, 39, 40}, {44, 160, 44},
                                       {255, 127, 14}, {148, 103, 189}, {23, 190, 207}}};

class Canvas {
 public:
  Canvas(std::size_t w, std::size_t h) : w_(w), h_(h), px_(w * h * 3, 255) {}

  void set(long x, long y, Rgb c) {
    if (x < 0 || y < 0 || x >= static_cast<long>(w_) || y >= static_cast<long>(h_)) return;
    auto* p = &px_[(static_cast<std::size_t>(y) * w_ + static_cast<std::size_t>(x)) * 3];
    p[0] = c.r, p[1] = c.g, p[2] = c.b;
  }

  void line(long x0, long y0, long x1, long y1, Rgb c, int thick = 1) {
    const long dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    long err = dx + dy;
    while (true) {
      for (int a = 0; a < thick; ++a)
        for (int b = 0; b < thick; ++b) set(x0 + a, y0 + b, c);
      if (x0 == x1 && y0 == y1) break;
      const long e2 = 2 * err;
      if (e2 >= dy) err += dy, x0 += sx;
      if (e2 <= dx) err += dx, y0 += sy;
    }
  }

  void box(long x, long y, long half, Rgb c) {
    for (long a = -half; a <= half; ++a)
      for (long b = -half; b <= half; ++b) set(x + a, y + b, c);
  }

  // Text anchored at its top-left corner; vertical text reads bottom to top.
  void text(long x, long y, const std::string& s, Rgb c, bool vertical = false) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const Glyph g = glyph(s[i]);
      for (int row = 0; row < 7; ++row)
        for (int col = 0; col < 5; ++col) {
          if (!(g[row] & (0x10 >> col))) continue;
          const long off = static_cast<long>(i) * 6;
          if (vertical) set(x + row, y - off - col, c);
          else set(x + off + col, y + row, c);
        }
    }
  }

  static long text_width(const std::string& s) { return static_cast<long>(s.size()) * 6; }

  void save(const std::filesystem::path& path) const {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(w_);
    image.height = static_cast<png_uint_32>(h_);
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.c_str(), 0, px_.data(), 0, nullptr)) {
      throw Error(ErrorKind::Io, "png write failed: " + path.string() + ": " + image.message);
    }
  }

 private:
  std::size_t w_, h_;
  std::vector<std::uint8_t> px_;
};

std::string tick_label(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

}  // namespace

std::vector<double> axis_ticks(double lo, double hi, bool log) {
  std::vector<double> out;
  if (!(hi > lo)) return {lo};
  if (log) {
    for (double d = std::pow(10.0, std::floor(std::log10(lo))); d <= hi * (1 + 1e-12); d *= 10.0)
      for (double m : {1.0, 2.0, 5.0}) {
        const double v = m * d;
        if (v >= lo * (1 - 1e-12) && v <= hi * (1 + 1e-12)) out.push_back(v);
      }
    return out;
  }
  const double raw = (hi - lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
  return out;
}

void write_line_plot(const std::filesystem::path& path, const PlotSpec& spec, const std::vector<Series>& series) {
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw Error(ErrorKind::ShapeMismatch, "plot series x/y lengths differ");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (spec.log_x && s.x[i] <= 0) continue;
      if (spec.log_y && s.y[i] <= 0) continue;
      xlo = std::min(xlo, s.x[i]), xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i]), yhi = std::max(yhi, s.y[i]);
    }
  }
  if (!std::isfinite(xlo)) xlo = spec.log_x ? 0.1 : 0.0, xhi = 1.0, ylo = spec.log_y ? 0.1 : 0.0, yhi = 1.0;
  if (xhi == xlo) xlo = spec.log_x ? xlo / 2 : xlo - 1, xhi = spec.log_x ? xhi * 2 : xhi + 1;
  if (yhi == ylo) ylo = spec.log_y ? ylo / 2 : ylo - 1, yhi = spec.log_y ? yhi * 2 : yhi + 1;
  if (!spec.log_y) {
    const double pad = 0.05 * (yhi - ylo);
    ylo -= pad, yhi += pad;
  }

  const long W = static_cast<long>(spec.width), H = static_cast<long>(spec.height);
  const long left = 70, right = W - 20, top = 30, bottom = H - 50;
  auto tx = [&](double v) { return spec.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return spec.log_y ? std::log10(v) : v; };
  auto px = [&](double v) {
    return left + std::lround((tx(v) - tx(xlo)) / (tx(xhi) - tx(xlo)) * static_cast<double>(right - left));
  };
  auto py = [&](double v) {
    return bottom - std::lround((ty(v) - ty(ylo)) / (ty(yhi) - ty(ylo)) * static_cast<double>(bottom - top));
  };

  Canvas c(spec.width, spec.height);
  const Rgb black{0, 0, 0}, grid{225, 225, 225};
  for (double t : axis_ticks(xlo, xhi, spec.log_x)) {
    const long x = px(t);
    c.line(x, top, x, bottom, grid);
    c.line(x, bottom, x, bottom + 4, black);
    const auto label = tick_label(t);
    c.text(x - Canvas::text_width(label) / 2, bottom + 8, label, black);
  }
  for (double t : axis_ticks(ylo, yhi, spec.log_y)) {
    const long y = py(t);
    c.line(left, y, right, y, grid);
    c.line(left - 4, y, left, y, black);
    const auto label = tick_label(t);
    c.text(left - 8 - Canvas::text_width(label), y - 3, label, black);
  }
  c.line(left, top, left, bottom, black);
  c.line(left, bottom, right, bottom, black);
  c.line(right, top, right, bottom, black);
  c.line(left, top, right, top, black);
  c.text((left + right - Canvas::text_width(spec.title)) / 2, 10, spec.title, black);
  c.text((left + right - Canvas::text_width(spec.xlabel)) / 2, H - 20, spec.xlabel, black);
  c.text(10, (top + bottom + Canvas::text_width(spec.ylabel)) / 2, spec.ylabel, black, true);

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const Rgb col = kPalette[si % kPalette.size()];
    long prev_x = 0, prev_y = 0;
    bool have_prev = false;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double xv = s.x[i], yv = s.y[i];
      const bool ok = std::isfinite(xv) && std::isfinite(yv) && (!spec.log_x || xv > 0) && (!spec.log_y || yv > 0);
      if (!ok) {
        have_prev = false;
        continue;
      }
      const long x = px(xv), y = py(yv);
      if (have_prev) c.line(prev_x, prev_y, x, y, col, 2);
      c.box(x, y, 2, col);
      prev_x = x, prev_y = y, have_prev = true;
    }
    const long ly = top + 8 + static_cast<long>(si) * 12;
    const long lx = right - 10 - Canvas::text_width(s.label) - 22;
    c.line(lx, ly + 3, lx + 16, ly + 3, col, 2);
    c.text(lx + 22, ly, s.label, black);
  }
  c.save(path);
}

}  // namespace statsep::plot
