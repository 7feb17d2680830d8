#include "statsep/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace statsep {

double psnr(const Field2D& candidate, const Field2D& reference) {
  if (!(candidate.shape() == reference.shape())) {
    throw Error(ErrorKind::ShapeMismatch, "psnr: " + to_string(candidate.shape()) + " vs " + to_string(reference.shape()));
  }
  const auto [lo, hi] = std::minmax_element(reference.values().begin(), reference.values().end());
  const double peak = *hi - *lo;
  if (!(peak > 0.0)) throw Error(ErrorKind::ConstantReference, "psnr: reference field is constant");
  double mse = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = candidate[i] - reference[i];
    mse += d * d;
  }
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  mse /= static_cast<double>(reference.size());
  return 10.0 * std::log10(peak * peak / mse);
}

double class_relative_error(const WphCoefficients& candidate, const WphCoefficients& reference, WphClass cls) {
  if (!candidate.mask.has(cls) || !reference.mask.has(cls)) {
    throw Error(ErrorKind::InvalidArgument, "class " + to_string(cls) + " is not present in both coefficient sets");
  }
  const auto& a = candidate.of(cls);
  const auto& b = reference.of(cls);
  if (a.size() != b.size()) throw Error(ErrorKind::ShapeMismatch, "class_relative_error: class layouts differ");
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    num += std::norm(a[k] - b[k]);
    den += std::norm(b[k]);
  }
  if (den == 0.0) throw Error(ErrorKind::ZeroReferenceNorm, "class_relative_error: reference norm is zero");
  return std::sqrt(num / den);
}

const char* EvalReport::csv_header() {
  return "algorithm,noise_kind,sigma,realization,seed,psnr_db,psnr_input_db,"
         "rel_err_s11,rel_err_s00,rel_err_s01,rel_err_c01,"
         "rel_err_input_s11,rel_err_input_s00,rel_err_input_s01,rel_err_input_c01,"
         "rmse_repr,normalized,psnr_peak";
}

void EvalReport::write_csv_row(std::ostream& out) const {
  const auto nan = std::numeric_limits<double>::quiet_NaN();
  auto get = [&](const std::map<WphClass, double>& m, WphClass c) {
    const auto it = m.find(c);
    return it == m.end() ? nan : it->second;
  };
  const auto old = out.precision(12);
  out << algorithm << ',' << to_string(noise_kind) << ',' << sigma << ',' << realization << ',' << seed << ','
      << psnr_db << ',' << psnr_input_db;
  for (const auto* m : {&rel_err_by_class, &rel_err_input_by_class})
    for (auto c : {WphClass::S11, WphClass::S00, WphClass::S01, WphClass::C01}) out << ',' << get(*m, c);
  out << ',' << rmse_repr << ',' << (normalized ? 1 : 0) << ",reference_range\n";
  out.precision(old);
}

EvalReport EvalReport::failed(std::string algorithm, double sigma, NoiseKind kind, std::uint64_t seed,
                              std::size_t realization) {
  const auto nan = std::numeric_limits<double>::quiet_NaN();
  EvalReport r;
  r.algorithm = std::move(algorithm);
  r.sigma = sigma;
  r.noise_kind = kind;
  r.seed = seed;
  r.realization = realization;
  r.psnr_db = r.psnr_input_db = r.rmse_repr = nan;
  return r;
}

EvalReport evaluate_estimate(const Field2D& estimate, const Field2D& observation, const Field2D& clean,
                             const FilterBank& bank, bool normalized) {
  EvalReport r;
  r.normalized = normalized;
  r.psnr_db = psnr(estimate, clean);
  r.psnr_input_db = psnr(observation, clean);
  auto coeffs = [&](const Field2D& f) { return wph_compute(f, bank, ClassMask::all()); };
  auto ref = coeffs(clean), est = coeffs(estimate), obs = coeffs(observation);
  if (normalized) {
    const auto norm = NormalizationRef::from_observation(clean, bank);
    ref = normalize(ref, norm);
    est = normalize(est, norm);
    obs = normalize(obs, norm);
  }
  for (auto c : {WphClass::S11, WphClass::S00, WphClass::S01, WphClass::C01}) {
    if (ref.of(c).empty()) continue;
    r.rel_err_by_class[c] = class_relative_error(est, ref, c);
    r.rel_err_input_by_class[c] = class_relative_error(obs, ref, c);
  }
  const auto a = est.flatten(), b = ref.flatten();
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::norm(a[k] - b[k]);
  r.rmse_repr = a.empty() ? 0.0 : std::sqrt(s / static_cast<double>(a.size()));
  return r;
}

}  // namespace statsep
