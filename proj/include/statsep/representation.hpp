#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "statsep/fields.hpp"
#include "statsep/wavelets.hpp"
#include "statsep/wph.hpp"

namespace statsep {

// Per-thread evaluation state of a representation.
class RepresentationWorkspace {
 public:
  virtual ~RepresentationWorkspace() = default;
  virtual void evaluate(const Field2D& x, std::span<cplx> out) = 0;
  // 2 Re[J^H cotangent] at the point of the last evaluate().
  virtual void adjoint(std::span<const cplx> cotangent, std::span<double> grad) = 0;
};

// A statistics map x -> phi(x) in C^K.
class Representation {
 public:
  virtual ~Representation() = default;

  virtual std::string name() const = 0;
  virtual std::size_t size() const = 0;
  virtual Shape shape() const = 0;
  virtual std::unique_ptr<RepresentationWorkspace> workspace() const = 0;

  CVector eval(const Field2D& x) const;
  Field2D gradient_adjoint(const Field2D& x, std::span<const cplx> cotangent) const;

  // Second-order noise terms (jnorm, htrace) per coefficient for a diagonal
  // noise covariance. Throws InvalidArgument when unsupported.
  virtual bool supports_perturbative() const { return false; }
  virtual PerturbativeTerms perturbative_terms(const Field2D& x, const Field2D& pixel_variance) const;

  // sum_k jnorm_k + Re(htrace_k conj(phi_k(x) - target_k)) and its gradient.
  // The default gradient uses central differences with step
  // 1e-5 * max|x| / sqrt(M); representations override it analytically.
  virtual PerturbativeCorrection perturbative_correction(const Field2D& x, const Field2D& pixel_variance,
                                                         std::span<const cplx> target, bool with_gradient) const;

 protected:
  void check_shape(const Field2D& x) const;
};

// WPH statistics, optionally normalized by per-coefficient divisors.
class WphRepresentation : public Representation {
 public:
  WphRepresentation(std::shared_ptr<const FilterBank> bank, ClassMask mask,
                    std::optional<NormalizationRef> ref = std::nullopt);
  // Explicit divisors, one per coefficient of the layout.
  WphRepresentation(std::shared_ptr<const FilterBank> bank, ClassMask mask, std::vector<double> divisors);

  std::string name() const override { return "wph"; }
  std::size_t size() const override { return layout_.size(); }
  Shape shape() const override { return bank_->shape; }
  std::unique_ptr<RepresentationWorkspace> workspace() const override;

  bool supports_perturbative() const override { return true; }
  PerturbativeTerms perturbative_terms(const Field2D& x, const Field2D& pixel_variance) const override;
  PerturbativeCorrection perturbative_correction(const Field2D& x, const Field2D& pixel_variance,
                                                 std::span<const cplx> target, bool with_gradient) const override;

  const FilterBank& bank() const { return *bank_; }
  const WphLayout& layout() const { return layout_; }
  ClassMask mask() const { return layout_.mask(); }
  const std::vector<double>& divisors() const { return divisors_; }

 private:
  std::shared_ptr<const FilterBank> bank_;
  WphLayout layout_;
  std::vector<double> divisors_;
};

// Band powers ||psi_i * x||^2 = M * S11_i.
std::unique_ptr<WphRepresentation> make_power_spectrum_representation(std::shared_ptr<const FilterBank> bank);

// phi(x) = A x for a dense real K x M matrix (x flattened row-major).
class LinearRepresentation : public Representation {
 public:
  LinearRepresentation(Eigen::MatrixXd A, Shape shape);
  static std::unique_ptr<LinearRepresentation> identity(Shape shape);

  std::string name() const override { return "linear"; }
  std::size_t size() const override { return static_cast<std::size_t>(A_.rows()); }
  Shape shape() const override { return shape_; }
  std::unique_ptr<RepresentationWorkspace> workspace() const override;

  bool supports_perturbative() const override { return true; }
  PerturbativeTerms perturbative_terms(const Field2D& x, const Field2D& pixel_variance) const override;
  PerturbativeCorrection perturbative_correction(const Field2D& x, const Field2D& pixel_variance,
                                                 std::span<const cplx> target, bool with_gradient) const override;

  const Eigen::MatrixXd& matrix() const { return A_; }

 private:
  Eigen::MatrixXd A_;
  Shape shape_;
};

// phi(x) = psi * x for a Fourier multiplier with no zero entries (injective,
// K = M complex outputs).
class FilterRepresentation : public Representation {
 public:
  explicit FilterRepresentation(Spectrum2D multiplier);

  std::string name() const override { return "filter"; }
  std::size_t size() const override { return multiplier_.size(); }
  Shape shape() const override { return multiplier_.shape(); }
  std::unique_ptr<RepresentationWorkspace> workspace() const override;

  const Spectrum2D& multiplier() const { return multiplier_; }

 private:
  Spectrum2D multiplier_;
};

// phi(x)_p = x_p^2 pointwise.
class PointwiseQuadraticRepresentation : public Representation {
 public:
  explicit PointwiseQuadraticRepresentation(Shape shape) : shape_(shape) {}

  std::string name() const override { return "quadratic"; }
  std::size_t size() const override { return shape_.size(); }
  Shape shape() const override { return shape_; }
  std::unique_ptr<RepresentationWorkspace> workspace() const override;

  bool supports_perturbative() const override { return true; }
  PerturbativeTerms perturbative_terms(const Field2D& x, const Field2D& pixel_variance) const override;
  PerturbativeCorrection perturbative_correction(const Field2D& x, const Field2D& pixel_variance,
                                                 std::span<const cplx> target, bool with_gradient) const override;

 private:
  Shape shape_;
};

// phi(x) = ||A x||^2, a single real coefficient.
class QuadraticFormRepresentation : public Representation {
 public:
  QuadraticFormRepresentation(Eigen::MatrixXd A, Shape shape);

  std::string name() const override { return "quadratic-form"; }
  std::size_t size() const override { return 1; }
  Shape shape() const override { return shape_; }
  std::unique_ptr<RepresentationWorkspace> workspace() const override;

  bool supports_perturbative() const override { return true; }
  PerturbativeTerms perturbative_terms(const Field2D& x, const Field2D& pixel_variance) const override;

  const Eigen::MatrixXd& gram() const { return gram_; }

 private:
  Eigen::MatrixXd A_;
  Eigen::MatrixXd gram_;
  Shape shape_;
};

}  // namespace statsep
