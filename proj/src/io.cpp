#include "statsep/io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace statsep::io {
namespace {

constexpr std::array<char, 4> kMagic{'S', 'S', 'F', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(b.data(), 8);
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (!in) throw Error(ErrorKind::Io, "truncated grid header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  in.read(reinterpret_cast<char*>(b.data()), 8);
  if (!in) throw Error(ErrorKind::Io, "truncated grid payload");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

void put_header(std::ostream& out, Shape s, DType dtype) {
  out.write(kMagic.data(), 4);
  put_u32(out, static_cast<std::uint32_t>(s.height));
  put_u32(out, static_cast<std::uint32_t>(s.width));
  const char d = static_cast<char>(dtype);
  out.write(&d, 1);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open for writing: " + path.string());
  return out;
}

}  // namespace

void write_grid(std::ostream& out, const Field2D& f) {
  put_header(out, f.shape(), DType::Real64);
  for (double v : f.values()) put_f64(out, v);
  if (!out) throw Error(ErrorKind::Io, "grid write failed");
}

void write_grid(std::ostream& out, const ComplexField2D& f) {
  put_header(out, f.shape(), DType::Complex128);
  for (const cplx& v : f.values()) {
    put_f64(out, v.real());
    put_f64(out, v.imag());
  }
  if (!out) throw Error(ErrorKind::Io, "grid write failed");
}

AnyGrid read_grid(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || magic != kMagic) throw Error(ErrorKind::Io, "not an SSF1 grid (bad magic)");
  const std::uint32_t h = get_u32(in);
  const std::uint32_t w = get_u32(in);
  char d = 0;
  in.read(&d, 1);
  if (!in) throw Error(ErrorKind::Io, "truncated grid header");
  if (h == 0 || w == 0) throw Error(ErrorKind::Io, "grid header has zero dimension");
  const auto dtype = static_cast<DType>(static_cast<unsigned char>(d));
  if (dtype == DType::Real64) {
    Field2D f(h, w);
    for (auto& v : f.values()) v = get_f64(in);
    return f;
  }
  if (dtype == DType::Complex128) {
    ComplexField2D f(h, w);
    for (auto& v : f.values()) {
      const double re = get_f64(in);
      const double im = get_f64(in);
      v = {re, im};
    }
    return f;
  }
  throw Error(ErrorKind::Io, "unknown grid dtype " + std::to_string(static_cast<int>(d)));
}

void write_grid(const std::filesystem::path& path, const Field2D& f) {
  auto out = open_out(path);
  write_grid(out, f);
}

void write_grid(const std::filesystem::path& path, const ComplexField2D& f) {
  auto out = open_out(path);
  write_grid(out, f);
}

AnyGrid read_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open: " + path.string());
  return read_grid(in);
}

Field2D read_real_grid(const std::filesystem::path& path) {
  auto g = read_grid(path);
  if (auto* f = std::get_if<Field2D>(&g)) return std::move(*f);
  throw Error(ErrorKind::Io, "expected a real64 grid: " + path.string());
}

void write_png(const std::filesystem::path& path, const Field2D& f) {
  const auto [lo_it, hi_it] = std::minmax_element(f.values().begin(), f.values().end());
  const double lo = *lo_it;
  const double span = *hi_it - lo;
  std::vector<png_byte> pixels(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double t = span > 0 ? (f[i] - lo) / span : 0.0;
    pixels[i] = static_cast<png_byte>(std::clamp(std::lround(t * 255.0), 0L, 255L));
  }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(f.width());
  image.height = static_cast<png_uint_32>(f.height());
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, pixels.data(), 0, nullptr)) {
    throw Error(ErrorKind::Io, "png write failed: " + path.string() + ": " + image.message);
  }
}

Field2D read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error(ErrorKind::Io, "png read failed: " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorKind::Io, "png decode failed: " + path.string() + ": " + msg);
  }
  Field2D f(image.height, image.width);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = pixels[i] / 255.0;
  return f;
}

Field2D load_image(const std::filesystem::path& path) {
  if (path.extension() == ".png" || path.extension() == ".PNG") return read_png(path);
  return read_real_grid(path);
}

}  // namespace statsep::io
