#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

#include "statsep/fields.hpp"
#include "statsep/noise.hpp"
#include "statsep/wph.hpp"

namespace statsep {

// 10 log10(peak^2 / MSE) with peak = max(reference) - min(reference).
// Returns +infinity when the fields are identical.
double psnr(const Field2D& candidate, const Field2D& reference);

// ||phi_c(candidate) - phi_c(reference)|| / ||phi_c(reference)|| over the
// coefficients of one class.
double class_relative_error(const WphCoefficients& candidate, const WphCoefficients& reference, WphClass cls);

struct EvalReport {
  std::string algorithm;
  double sigma = 0.0;
  NoiseKind noise_kind = NoiseKind::White;
  std::uint64_t seed = 0;
  std::size_t realization = 0;
  double psnr_db = 0.0;        // estimate vs clean
  double psnr_input_db = 0.0;  // noisy observation vs clean
  std::map<WphClass, double> rel_err_by_class;        // estimate vs clean
  std::map<WphClass, double> rel_err_input_by_class;  // observation vs clean
  double rmse_repr = 0.0;
  bool normalized = true;

  static const char* csv_header();
  void write_csv_row(std::ostream& out) const;
  // A row of NaN metrics for a failed sweep cell.
  static EvalReport failed(std::string algorithm, double sigma, NoiseKind kind, std::uint64_t seed,
                           std::size_t realization);
};

// Coefficients are normalized by the clean reference's S11 unless
// `normalized` is false.
EvalReport evaluate_estimate(const Field2D& estimate, const Field2D& observation, const Field2D& clean,
                             const FilterBank& bank, bool normalized = true);

}  // namespace statsep
