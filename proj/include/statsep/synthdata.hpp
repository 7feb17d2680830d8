#pragma once

#include <cstdint>
#include <string>

#include "statsep/fields.hpp"

namespace statsep {

enum class TextureKind { GaussianRandomField, Lognormal };

std::string to_string(TextureKind kind);
TextureKind parse_texture_kind(const std::string& name);

struct TextureSpec {
  TextureKind kind = TextureKind::Lognormal;
  double spectral_slope = -1.5;  // amplitude exponent; power goes as |k|^(2 slope)
  Shape shape{64, 64};
  std::uint64_t seed = 0;
  double lognormal_contrast = 1.0;  // std of the Gaussian field before exponentiation

  void validate() const;
};

// Stationary synthetic texture, standardized to zero mean and unit variance.
Field2D generate(const TextureSpec& spec);

}  // namespace statsep
