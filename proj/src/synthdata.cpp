#include "statsep/synthdata.hpp"

#include <cmath>
#include <numbers>

#include "statsep/fft.hpp"
#include "statsep/noise.hpp"

namespace statsep {
namespace {

void standardize(Field2D& f) {
  const double mu = mean(f);
  for (auto& v : f.values()) v -= mu;
  const double sd = std::sqrt(variance(f));
  for (auto& v : f.values()) v /= sd;
}

}  // namespace

std::string to_string(TextureKind kind) {
  return kind == TextureKind::GaussianRandomField ? "gaussian_random_field" : "lognormal_field";
}

TextureKind parse_texture_kind(const std::string& name) {
  if (name == "gaussian_random_field" || name == "grf" || name == "gaussian") return TextureKind::GaussianRandomField;
  if (name == "lognormal_field" || name == "lognormal") return TextureKind::Lognormal;
  throw Error(ErrorKind::InvalidArgument, "unknown texture kind: " + name);
}

void TextureSpec::validate() const {
  if (!(spectral_slope < 0.0)) throw Error(ErrorKind::InvalidArgument, "texture spectral_slope must be < 0");
  if (shape.height < 2 || shape.width < 2) throw Error(ErrorKind::InvalidGeometry, "texture shape must be at least 2x2");
  if (!(lognormal_contrast > 0.0)) throw Error(ErrorKind::InvalidArgument, "lognormal_contrast must be > 0");
}

Field2D generate(const TextureSpec& spec) {
  spec.validate();
  const Shape s = spec.shape;
  auto rng = make_engine(derive_seed(spec.seed, 0x7e47u));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<cplx> buf(s.size());
  for (auto& v : buf) v = normal(rng);

  std::vector<cplx> amp(s.size(), 0.0);
  for (std::size_t r = 0; r < s.height; ++r) {
    const double ky = 2.0 * std::numbers::pi * signed_frequency(r, s.height) / static_cast<double>(s.height);
    for (std::size_t c = 0; c < s.width; ++c) {
      if (r == 0 && c == 0) continue;
      const double kx = 2.0 * std::numbers::pi * signed_frequency(c, s.width) / static_cast<double>(s.width);
      amp[r * s.width + c] = std::pow(std::hypot(kx, ky), spec.spectral_slope);
    }
  }
  detail::convolve_inplace(buf.data(), s, amp.data());
  Field2D out(s);
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = buf[i].real();
  standardize(out);
  if (spec.kind == TextureKind::Lognormal) {
    for (auto& v : out.values()) v = std::exp(spec.lognormal_contrast * v);
    standardize(out);
  }
  return out;
}

}  // namespace statsep
