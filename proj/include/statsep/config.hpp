#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "statsep/noise.hpp"
#include "statsep/separation.hpp"
#include "statsep/synthdata.hpp"
#include "statsep/wph.hpp"

namespace statsep {

enum class Algorithm { Vanilla, Diffusive, Perturbative, Delouis, AnalyticOracle };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

enum class RepresentationKind { Wph, PowerSpectrum, Identity };

std::string to_string(RepresentationKind k);
RepresentationKind parse_representation_kind(const std::string& name);

struct RepresentationChoice {
  RepresentationKind kind = RepresentationKind::Wph;
  std::optional<std::size_t> J;  // default: floor(log2 min(H, W)) - 1
  std::size_t L = 4;
  std::optional<ClassMask> mask;  // default: all, or {S11, S01} for the perturbative path
  bool normalize = true;          // divide by |S11(y)|, frozen at the observation
};

struct RunConfig {
  Algorithm algorithm = Algorithm::Vanilla;
  std::uint64_t seed = 0;
  std::size_t realizations = 1;  // R
  std::filesystem::path out_dir = "out";
  std::size_t jobs = 1;

  std::optional<std::filesystem::path> image;  // otherwise `texture` is generated
  TextureSpec texture{};

  NoiseKind noise_kind = NoiseKind::White;
  double sigma = 1.0;
  double crosses_density = 2e-3;

  RepresentationChoice representation{};

  // Unset fields take the per-algorithm defaults: Q = 100, T = 30 (10 for
  // the perturbative path), P = max(1, floor(10 sigma)) for the diffusive
  // paths with a uniform schedule.
  std::optional<std::size_t> Q, T, P;
  LbfgsSettings optimizer{};
  CorrectionGradient correction_gradient = CorrectionGradient::Analytic;
  std::size_t threads = 1;  // per-run Monte Carlo workers

  std::vector<double> sweep_sigmas;  // empty: 10 log-spaced values from 0.1 to 2.14

  void validate() const;
  // Effective separation settings at noise level `sigma`.
  SeparationConfig separation_config(double sigma, std::uint64_t seed) const;
  ClassMask effective_mask() const;
};

// INI file with sections [run], [input], [noise], [representation],
// [optimizer], [sweep]. Unknown keys are rejected. Throws Error(Config).
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(std::istream& in);
void write_config(std::ostream& out, const RunConfig& cfg);

// n values from lo to hi, evenly spaced in log.
std::vector<double> log_spaced(double lo, double hi, std::size_t n);
std::vector<double> default_sigma_grid();

}  // namespace statsep
