#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "statsep/fields.hpp"

namespace statsep {

enum class NoiseKind { White, Pink, Blue, Crosses };

std::string to_string(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& name);

// sigma is expressed in units of reference_std (the standard deviation of the
// clean signal), so the per-pixel noise variance is (sigma * reference_std)^2.
struct NoiseModel {
  NoiseKind kind = NoiseKind::White;
  double sigma = 1.0;
  double reference_std = 1.0;
  Shape shape{};
  double crosses_density = 2e-3;  // glyphs per pixel

  double pixel_variance() const { return sigma * sigma * reference_std * reference_std; }
  // Diagonal of the noise covariance. Every kind here is stationary, so the
  // grid is uniform.
  Field2D pixelwise_variance() const;
  bool is_gaussian() const { return kind != NoiseKind::Crosses; }
  void validate() const;
};

// Precomputes the spectral shaping for one model and draws samples from a
// caller-owned engine. Immutable after construction; share freely.
class NoiseSampler {
 public:
  explicit NoiseSampler(NoiseModel model);

  const NoiseModel& model() const { return model_; }

  // Overwrites `out` (which must already have the model's shape).
  // Returns the number of glyphs drawn for the crosses kind, 0 otherwise.
  std::size_t sample_into(std::mt19937_64& rng, Field2D& out) const;
  Field2D sample(std::uint64_t seed) const;

 private:
  NoiseModel model_;
  std::vector<cplx> amplitude_;  // DFT multiplier for the coloured kinds
  double glyph_amplitude_ = 0.0;
};

Field2D sample(const NoiseModel& model, std::uint64_t seed);

struct CrossesDraw {
  Field2D field;
  std::size_t glyph_count = 0;
};

// Sparse plus-sign glyphs (centre + 4 neighbours), Poisson count with mean
// crosses_density * H * W, random sign, amplitude chosen so the expected
// field std is sigma * reference_std.
Field2D sample_crosses(const NoiseModel& model, std::uint64_t seed);
CrossesDraw sample_crosses_detailed(const NoiseModel& model, std::uint64_t seed);

// Per-stage noise amplitudes alpha with alpha_i > 0 and sum alpha_i^2 = 1.
struct DiffusionSchedule {
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  void validate() const;
};

DiffusionSchedule uniform_schedule(std::size_t stages);
// Uniform schedule with P = max(1, floor(10 * sigma)).
DiffusionSchedule schedule_for_sigma(double sigma);

// Deterministic seed derivation; distinct paths give decorrelated seeds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);
std::mt19937_64 make_engine(std::uint64_t seed);

}  // namespace statsep
