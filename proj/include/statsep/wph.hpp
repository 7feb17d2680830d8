#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "statsep/fields.hpp"
#include "statsep/wavelets.hpp"

namespace statsep {

enum class WphClass { S11, S00, S01, C01 };

std::string to_string(WphClass c);
WphClass parse_wph_class(const std::string& name);

struct ClassMask {
  bool s11 = true;
  bool s00 = true;
  bool s01 = true;
  bool c01 = true;

  static ClassMask all() { return {}; }
  static ClassMask none() { return {false, false, false, false}; }
  static ClassMask only(std::initializer_list<WphClass> classes);
  // Comma-separated list such as "s11,s01", or "all".
  static ClassMask parse(const std::string& spec);

  bool has(WphClass c) const;
  bool any() const { return s11 || s00 || s01 || c01; }
  std::string to_string() const;
  bool operator==(const ClassMask&) const = default;
};

// One coefficient of the flattened vector. For the single-filter classes
// second == first. For C01 `first` is the modulus (finer-scale) filter and
// `second` the linear (coarser-scale) filter.
struct WphEntry {
  WphClass cls;
  std::size_t first;
  std::size_t second;
};

// Flattened order: S11 (N), S00 (N), S01 (N), C01 (pairs j1 < j2, then l1, l2),
// inactive classes skipped.
class WphLayout {
 public:
  WphLayout() = default;
  WphLayout(std::size_t J, std::size_t L, ClassMask mask);

  std::size_t size() const { return entries_.size(); }
  const std::vector<WphEntry>& entries() const { return entries_; }
  const WphEntry& operator[](std::size_t k) const { return entries_[k]; }
  ClassMask mask() const { return mask_; }
  std::size_t J() const { return J_; }
  std::size_t L() const { return L_; }
  std::size_t filter_count() const { return J_ * L_; }
  std::size_t count(WphClass c) const;
  std::size_t offset(WphClass c) const;  // start of the class block

  // 3N + C(J,2) L^2 with every class active.
  static std::size_t closed_form_count(std::size_t J, std::size_t L, ClassMask mask);

 private:
  std::size_t J_ = 0, L_ = 0;
  ClassMask mask_{};
  std::vector<WphEntry> entries_;
  std::size_t offsets_[4]{};
  std::size_t counts_[4]{};
};

struct WphCoefficients {
  ClassMask mask{};
  CVector s11, s00, s01, c01;

  std::size_t size() const { return s11.size() + s00.size() + s01.size() + c01.size(); }
  const CVector& of(WphClass c) const;
  CVector& of(WphClass c);
  CVector flatten() const;
  static WphCoefficients unflatten(std::span<const cplx> flat, const WphLayout& layout);
};

WphCoefficients wph_compute(const Field2D& x, const FilterBank& bank, ClassMask mask = ClassMask::all());

struct NormalizationRef {
  CVector s11_of_y;

  static NormalizationRef from_observation(const Field2D& y, const FilterBank& bank);
  static NormalizationRef unit(std::size_t filter_count);
  // Throws DegenerateReference if any |entry| < 1e-14.
  void validate() const;
};

// Per-entry divisor: s11(y)_i for S classes, sqrt(s11(y)_i s11(y)_j) for C01.
std::vector<double> normalization_factors(const WphLayout& layout, const NormalizationRef& ref);

WphCoefficients normalize(const WphCoefficients& coeffs, const NormalizationRef& ref);
WphCoefficients denormalize(const WphCoefficients& coeffs, const NormalizationRef& ref);

// 2 Re[J(x)^H cotangent] for raw coefficients; cotangent follows the layout
// of `mask`.
Field2D wph_jacobian_adjoint(const Field2D& x, const FilterBank& bank, std::span<const cplx> cotangent,
                             ClassMask mask = ClassMask::all());

// Per-coefficient noise-weighted Jacobian norm sum_j |d phi / d x_j|^2 var_j
// and Hessian trace sum_j d^2 phi / d x_j^2 var_j, raw coefficients.
struct PerturbativeTerms {
  std::vector<double> jnorm;
  CVector htrace;
};

PerturbativeTerms wph_perturbative_terms(const Field2D& x, const FilterBank& bank, const Field2D& pixel_variance,
                                         ClassMask mask = ClassMask::all());

// Second-order correction sum_k [jnorm_k / n_k^2 + Re(htrace_k conj(r_k)) / n_k]
// where r = phi(x)/n - target, and its gradient in x (zero-size when not
// requested). Modulus-dependent terms throw NearZeroModulus when |psi * x|
// vanishes at some pixel.
struct PerturbativeCorrection {
  double value = 0.0;
  Field2D gradient;
};

PerturbativeCorrection wph_perturbative_correction(const Field2D& x, const FilterBank& bank,
                                                   const Field2D& pixel_variance, ClassMask mask,
                                                   std::span<const double> norm_factors,
                                                   std::span<const cplx> target, bool with_gradient);

// CSV with header class,j1,l1,j2,l2,real,imag.
void write_coefficients_csv(std::ostream& out, const WphCoefficients& coeffs, const FilterBank& bank);

// Reusable evaluator holding per-filter work buffers. evaluate() caches the
// forward state that adjoint() consumes. Not thread-safe; use one per thread.
class WphEngine {
 public:
  WphEngine(const FilterBank& bank, ClassMask mask);

  const WphLayout& layout() const { return layout_; }
  std::size_t size() const { return layout_.size(); }
  Shape shape() const { return bank_->shape; }

  void evaluate(const Field2D& x, std::span<cplx> out);
  void adjoint(std::span<const cplx> cotangent, std::span<double> grad);

 private:
  const FilterBank* bank_;
  WphLayout layout_;
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  bool need_modulus_;
  bool need_cross_;  // S01 or C01
  bool need_c01_;
  std::vector<cplx> spectrum_;
  std::vector<std::vector<cplx>> u_;
  RowMatrix mod_;       // |u_i| in row i
  RowMatrix ure_, uim_;  // Re u_i, Im u_i in row i
  RowMatrix cross_re_, cross_im_;  // (i, j >= i): sum_p |u_i| Re u_j, sum_p |u_i| Im u_j
  std::vector<double> mean_mod_;
  std::vector<std::vector<cplx>> adj_;
  std::vector<cplx> accum_;
  // Nonzero entries of each filter when every multiplier is real.
  struct Support {
    std::vector<std::size_t> index;
    std::vector<double> value;
  };
  std::vector<Support> support_;
};

}  // namespace statsep
