#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <variant>

#include "statsep/fields.hpp"

namespace statsep::io {

// Binary grid container:
//   bytes 0-3   magic "SSF1"
//   bytes 4-7   u32 height, little-endian
//   bytes 8-11  u32 width, little-endian
//   byte  12    dtype (0 = real64, 1 = complex128)
//   then height*width values, row-major, little-endian IEEE-754
//   (complex values as re, im pairs).
enum class DType : std::uint8_t { Real64 = 0, Complex128 = 1 };

using AnyGrid = std::variant<Field2D, ComplexField2D>;

void write_grid(std::ostream& out, const Field2D& f);
void write_grid(std::ostream& out, const ComplexField2D& f);
AnyGrid read_grid(std::istream& in);

void write_grid(const std::filesystem::path& path, const Field2D& f);
void write_grid(const std::filesystem::path& path, const ComplexField2D& f);
AnyGrid read_grid(const std::filesystem::path& path);

// Reads a real grid; a complex file is rejected.
Field2D read_real_grid(const std::filesystem::path& path);

// 8-bit grayscale PNG, linearly rescaled from [min, max] of the field.
void write_png(const std::filesystem::path& path, const Field2D& f);
// Any PNG, converted to grayscale and mapped to [0, 1].
Field2D read_png(const std::filesystem::path& path);

// Loads .png through read_png and anything else as a binary grid.
Field2D load_image(const std::filesystem::path& path);

}  // namespace statsep::io
