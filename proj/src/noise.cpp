#include "statsep/noise.hpp"

#include <cmath>
#include <numbers>

#include "statsep/fft.hpp"

namespace statsep {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double spectral_exponent(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::Pink: return -1.0;
    case NoiseKind::Blue: return 1.0;
    default: return 0.0;
  }
}

}  // namespace

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::White: return "white";
    case NoiseKind::Pink: return "pink";
    case NoiseKind::Blue: return "blue";
    case NoiseKind::Crosses: return "crosses";
  }
  return "unknown";
}

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "white") return NoiseKind::White;
  if (name == "pink") return NoiseKind::Pink;
  if (name == "blue") return NoiseKind::Blue;
  if (name == "crosses") return NoiseKind::Crosses;
  throw Error(ErrorKind::InvalidArgument, "unknown noise kind: " + name);
}

Field2D NoiseModel::pixelwise_variance() const { return Field2D(shape, pixel_variance()); }

void NoiseModel::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error(ErrorKind::InvalidArgument, "noise sigma must be > 0");
  if (!(reference_std > 0.0)) throw Error(ErrorKind::InvalidArgument, "noise reference_std must be > 0");
  if (shape.height == 0 || shape.width == 0) throw Error(ErrorKind::InvalidGeometry, "noise shape must be non-empty");
  if (crosses_density < 0.0) throw Error(ErrorKind::InvalidArgument, "crosses_density must be >= 0");
}

NoiseSampler::NoiseSampler(NoiseModel model) : model_(std::move(model)) {
  model_.validate();
  const Shape s = model_.shape;
  if (model_.kind == NoiseKind::Pink || model_.kind == NoiseKind::Blue) {
    // Amplitude |k|^gamma with the DC mode removed, scaled so that the
    // expected per-pixel variance (1/M) sum_k A(k)^2 equals pixel_variance().
    const double gamma = spectral_exponent(model_.kind);
    amplitude_.assign(s.size(), 0.0);
    double power = 0.0;
    for (std::size_t r = 0; r < s.height; ++r) {
      const double ky = 2.0 * std::numbers::pi * signed_frequency(r, s.height) / static_cast<double>(s.height);
      for (std::size_t c = 0; c < s.width; ++c) {
        if (r == 0 && c == 0) continue;
        const double kx = 2.0 * std::numbers::pi * signed_frequency(c, s.width) / static_cast<double>(s.width);
        const double a = std::pow(std::hypot(kx, ky), gamma);
        amplitude_[r * s.width + c] = a;
        power += a * a;
      }
    }
    if (power > 0.0) {
      const double scale = std::sqrt(model_.pixel_variance() * static_cast<double>(s.size()) / power);
      for (auto& a : amplitude_) a *= scale;
    }
  } else if (model_.kind == NoiseKind::Crosses && model_.crosses_density > 0.0) {
    glyph_amplitude_ = std::sqrt(model_.pixel_variance() / (5.0 * model_.crosses_density));
  }
}

std::size_t NoiseSampler::sample_into(std::mt19937_64& rng, Field2D& out) const {
  const Shape s = model_.shape;
  if (!(out.shape() == s)) out = Field2D(s);
  switch (model_.kind) {
    case NoiseKind::White: {
      std::normal_distribution<double> normal(0.0, std::sqrt(model_.pixel_variance()));
      for (auto& v : out.values()) v = normal(rng);
      return 0;
    }
    case NoiseKind::Pink:
    case NoiseKind::Blue: {
      std::normal_distribution<double> normal(0.0, 1.0);
      std::vector<cplx> buf(s.size());
      for (auto& v : buf) v = normal(rng);
      detail::convolve_inplace(buf.data(), s, amplitude_.data());
      for (std::size_t i = 0; i < s.size(); ++i) out[i] = buf[i].real();
      return 0;
    }
    case NoiseKind::Crosses: {
      out.fill(0.0);
      if (model_.crosses_density <= 0.0) return 0;
      std::poisson_distribution<std::size_t> count_dist(model_.crosses_density * static_cast<double>(s.size()));
      std::uniform_int_distribution<std::size_t> row_dist(0, s.height - 1);
      std::uniform_int_distribution<std::size_t> col_dist(0, s.width - 1);
      std::bernoulli_distribution sign_dist(0.5);
      const std::size_t count = count_dist(rng);
      for (std::size_t g = 0; g < count; ++g) {
        const auto r = static_cast<std::ptrdiff_t>(row_dist(rng));
        const auto c = static_cast<std::ptrdiff_t>(col_dist(rng));
        const double a = sign_dist(rng) ? glyph_amplitude_ : -glyph_amplitude_;
        out.at(r, c) += a;
        out.at(r - 1, c) += a;
        out.at(r + 1, c) += a;
        out.at(r, c - 1) += a;
        out.at(r, c + 1) += a;
      }
      return count;
    }
  }
  return 0;
}

Field2D NoiseSampler::sample(std::uint64_t seed) const {
  auto rng = make_engine(seed);
  Field2D out(model_.shape);
  sample_into(rng, out);
  return out;
}

Field2D sample(const NoiseModel& model, std::uint64_t seed) { return NoiseSampler(model).sample(seed); }

Field2D sample_crosses(const NoiseModel& model, std::uint64_t seed) {
  return sample_crosses_detailed(model, seed).field;
}

CrossesDraw sample_crosses_detailed(const NoiseModel& model, std::uint64_t seed) {
  if (model.kind != NoiseKind::Crosses) {
    throw Error(ErrorKind::InvalidArgument, "sample_crosses requires the crosses noise kind");
  }
  NoiseSampler sampler(model);
  auto rng = make_engine(seed);
  CrossesDraw draw{Field2D(model.shape), 0};
  draw.glyph_count = sampler.sample_into(rng, draw.field);
  return draw;
}

void DiffusionSchedule::validate() const {
  if (weights.empty()) throw Error(ErrorKind::InvalidArgument, "diffusion schedule must have at least one stage");
  double s = 0.0;
  for (double a : weights) {
    if (!(a > 0.0)) throw Error(ErrorKind::InvalidArgument, "diffusion weights must be > 0");
    s += a * a;
  }
  if (std::abs(s - 1.0) > 1e-12) throw Error(ErrorKind::InvalidArgument, "diffusion weights must satisfy sum a^2 = 1");
}

DiffusionSchedule uniform_schedule(std::size_t stages) {
  if (stages < 1) throw Error(ErrorKind::InvalidArgument, "uniform_schedule requires P >= 1");
  return DiffusionSchedule{std::vector<double>(stages, 1.0 / std::sqrt(static_cast<double>(stages)))};
}

DiffusionSchedule schedule_for_sigma(double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "schedule_for_sigma requires sigma > 0");
  const auto p = static_cast<std::size_t>(std::max(1.0, std::floor(10.0 * sigma)));
  return uniform_schedule(p);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix64(base);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ (b + 0x632be59bd9b4e019ULL));
  h = splitmix64(h ^ (c + 0x85157af5ULL));
  return h;
}

std::mt19937_64 make_engine(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace statsep
