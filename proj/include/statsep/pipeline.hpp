#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

#include "statsep/config.hpp"
#include "statsep/metrics.hpp"
#include "statsep/representation.hpp"
#include "statsep/separation.hpp"

namespace statsep {

// The clean signal of a run: the configured image or a synthetic texture
// whose seed is derived from the run seed.
Field2D load_clean(const RunConfig& cfg);

// Filter bank used for the representation and for metrics.
std::shared_ptr<const FilterBank> make_bank(const RunConfig& cfg, Shape shape);

// Representation for observation y; WPH normalization is taken from y.
std::unique_ptr<Representation> make_representation(const RunConfig& cfg, const Field2D& y,
                                                     std::shared_ptr<const FilterBank> bank);

NoiseModel make_noise(const RunConfig& cfg, const Field2D& clean, double sigma);

struct RunOutputs {
  double sigma = 0.0;
  std::size_t realization = 0;
  Field2D observation;
  Field2D estimate;
  SeparationTrace trace;
  EvalReport report;
};

// One (sigma, realization) cell. Noise and optimizer seeds are derived from
// cfg.seed, the sigma index and the realization. An aborted run keeps the
// last finite iterate and reports NaN metrics.
RunOutputs run_cell(const RunConfig& cfg, const Field2D& clean, double sigma, std::size_t sigma_index,
                    std::size_t realization);

// Every (sigma, realization) cell, up to `jobs` at a time. Failed cells are
// reported as NaN rows. Rows are ordered by sigma, then realization.
std::vector<EvalReport> run_sweep(const RunConfig& cfg, const Field2D& clean, const std::vector<double>& sigmas,
                                  std::size_t jobs,
                                  const std::function<void(const EvalReport&, const std::string& error)>& on_cell = {});

// psnr_vs_sigma.png and rel_err_vs_sigma.png from sweep rows (means over
// realizations, NaN rows skipped).
void plot_sweep(const std::vector<EvalReport>& rows, const std::filesystem::path& dir);

}  // namespace statsep
