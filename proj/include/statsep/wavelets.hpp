#pragma once

#include <filesystem>
#include <vector>

#include "statsep/fields.hpp"

namespace statsep {

// Fourier-domain bump-steerable filters. Filter i corresponds to scale
// j = i / L and orientation l = i % L; scale 0 is the finest.
struct FilterBank {
  std::size_t J = 0;
  std::size_t L = 0;
  Shape shape{};
  std::vector<Spectrum2D> filters;
  std::vector<double> center_freqs;  // radial centre per scale, radians/sample

  std::size_t size() const { return filters.size(); }
  std::size_t index(std::size_t j, std::size_t l) const { return j * L + l; }
  std::size_t scale_of(std::size_t i) const { return i / L; }
  std::size_t orientation_of(std::size_t i) const { return i % L; }
  double orientation_angle(std::size_t l) const;
};

// Radial centre of scale j.
double bank_center_frequency(std::size_t j);

// Largest scale count that fits comfortably: floor(log2(min(h, w))) - 1,
// clamped to at least 1.
std::size_t default_scale_count(std::size_t height, std::size_t width);

// Throws InvalidGeometry if 2^J > min(height, width), InvalidArgument if
// J or L is zero.
FilterBank build_bank(std::size_t height, std::size_t width, std::size_t J, std::size_t L);

// Point-symmetric Littlewood-Paley map
//   k -> 1/2 sum_i (|psi_i(k)|^2 + |psi_i(-k)|^2),
// which is what a real input signal sees.
Field2D littlewood_paley(const FilterBank& bank);

// Writes one complex128 grid per filter (bank_j{j}_l{l}.ssf) plus the
// Littlewood-Paley map (littlewood_paley.ssf) into `dir`.
void dump_bank(const FilterBank& bank, const std::filesystem::path& dir);

}  // namespace statsep
