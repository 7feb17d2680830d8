#include "statsep/representation.hpp"

#include <cmath>

#include "statsep/fft.hpp"

namespace statsep {
namespace {

Eigen::Map<const Eigen::VectorXd> as_vector(const Field2D& x) {
  return {x.data(), static_cast<Eigen::Index>(x.size())};
}

double correction_from_terms(const PerturbativeTerms& t, std::span<const cplx> phi, std::span<const cplx> target) {
  double v = 0.0;
  for (std::size_t k = 0; k < t.jnorm.size(); ++k) v += t.jnorm[k] + (t.htrace[k] * std::conj(phi[k] - target[k])).real();
  return v;
}

}  // namespace

void Representation::check_shape(const Field2D& x) const {
  if (!(x.shape() == shape())) {
    throw Error(ErrorKind::ShapeMismatch,
                name() + " representation expects " + to_string(shape()) + ", got " + to_string(x.shape()));
  }
}

CVector Representation::eval(const Field2D& x) const {
  check_shape(x);
  CVector out(size());
  workspace()->evaluate(x, out);
  return out;
}

Field2D Representation::gradient_adjoint(const Field2D& x, std::span<const cplx> cotangent) const {
  check_shape(x);
  if (cotangent.size() != size()) throw Error(ErrorKind::ShapeMismatch, "cotangent length does not match K");
  auto ws = workspace();
  CVector phi(size());
  ws->evaluate(x, phi);
  Field2D grad(x.shape());
  ws->adjoint(cotangent, grad.values());
  return grad;
}

PerturbativeTerms Representation::perturbative_terms(const Field2D&, const Field2D&) const {
  throw Error(ErrorKind::InvalidArgument, name() + " representation has no perturbative terms");
}

PerturbativeCorrection Representation::perturbative_correction(const Field2D& x, const Field2D& pixel_variance,
                                                               std::span<const cplx> target,
                                                               bool with_gradient) const {
  check_shape(x);
  if (target.size() != size()) throw Error(ErrorKind::ShapeMismatch, "target length does not match K");
  auto value_at = [&](const Field2D& z) {
    return correction_from_terms(perturbative_terms(z, pixel_variance), eval(z), target);
  };
  PerturbativeCorrection out;
  out.value = value_at(x);
  if (with_gradient) {
    double scale = max_abs(x);
    if (scale == 0.0) scale = 1.0;
    const double h = 1e-5 * scale / std::sqrt(static_cast<double>(x.size()));
    out.gradient = Field2D(x.shape());
    Field2D z = x;
    for (std::size_t p = 0; p < x.size(); ++p) {
      z[p] = x[p] + h;
      const double fp = value_at(z);
      z[p] = x[p] - h;
      const double fm = value_at(z);
      z[p] = x[p];
      out.gradient[p] = (fp - fm) / (2.0 * h);
    }
  }
  return out;
}

// --- WPH -------------------------------------------------------------------

namespace {

class WphWorkspace : public RepresentationWorkspace {
 public:
  WphWorkspace(const FilterBank& bank, ClassMask mask, const std::vector<double>& divisors)
      : engine_(bank, mask), divisors_(divisors), scaled_(divisors.size()) {}

  void evaluate(const Field2D& x, std::span<cplx> out) override {
    engine_.evaluate(x, out);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] /= divisors_[k];
  }

  void adjoint(std::span<const cplx> cotangent, std::span<double> grad) override {
    for (std::size_t k = 0; k < scaled_.size(); ++k) scaled_[k] = cotangent[k] / divisors_[k];
    engine_.adjoint(scaled_, grad);
  }

 private:
  WphEngine engine_;
  const std::vector<double>& divisors_;
  CVector scaled_;
};

}  // namespace

WphRepresentation::WphRepresentation(std::shared_ptr<const FilterBank> bank, ClassMask mask,
                                     std::optional<NormalizationRef> ref)
    : bank_(std::move(bank)), layout_(bank_->J, bank_->L, mask) {
  if (!mask.any()) throw Error(ErrorKind::InvalidArgument, "WPH class mask selects no coefficients");
  divisors_ = ref ? normalization_factors(layout_, *ref) : std::vector<double>(layout_.size(), 1.0);
}

WphRepresentation::WphRepresentation(std::shared_ptr<const FilterBank> bank, ClassMask mask,
                                     std::vector<double> divisors)
    : bank_(std::move(bank)), layout_(bank_->J, bank_->L, mask), divisors_(std::move(divisors)) {
  if (!mask.any()) throw Error(ErrorKind::InvalidArgument, "WPH class mask selects no coefficients");
  if (divisors_.size() != layout_.size()) throw Error(ErrorKind::ShapeMismatch, "divisor count does not match K");
  for (double d : divisors_)
    if (!(d > 0.0)) throw Error(ErrorKind::DegenerateReference, "WPH divisors must be > 0");
}

std::unique_ptr<RepresentationWorkspace> WphRepresentation::workspace() const {
  return std::make_unique<WphWorkspace>(*bank_, layout_.mask(), divisors_);
}

PerturbativeTerms WphRepresentation::perturbative_terms(const Field2D& x, const Field2D& pixel_variance) const {
  check_shape(x);
  auto t = wph_perturbative_terms(x, *bank_, pixel_variance, layout_.mask());
  for (std::size_t k = 0; k < t.jnorm.size(); ++k) {
    t.jnorm[k] /= divisors_[k] * divisors_[k];
    t.htrace[k] /= divisors_[k];
  }
  return t;
}

PerturbativeCorrection WphRepresentation::perturbative_correction(const Field2D& x, const Field2D& pixel_variance,
                                                                  std::span<const cplx> target,
                                                                  bool with_gradient) const {
  check_shape(x);
  return wph_perturbative_correction(x, *bank_, pixel_variance, layout_.mask(), divisors_, target, with_gradient);
}

std::unique_ptr<WphRepresentation> make_power_spectrum_representation(std::shared_ptr<const FilterBank> bank) {
  const double inv_m = 1.0 / static_cast<double>(bank->shape.size());
  const std::size_t n = bank->size();
  return std::make_unique<WphRepresentation>(std::move(bank), ClassMask::only({WphClass::S11}),
                                             std::vector<double>(n, inv_m));
}

// --- dense linear ---------------------------------------------------------------

namespace {

class LinearWorkspace : public RepresentationWorkspace {
 public:
  explicit LinearWorkspace(const Eigen::MatrixXd& A) : A_(A) {}
  void evaluate(const Field2D& x, std::span<cplx> out) override {
    y_.noalias() = A_ * as_vector(x);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = y_[static_cast<Eigen::Index>(k)];
  }
  void adjoint(std::span<const cplx> cotangent, std::span<double> grad) override {
    c_.resize(static_cast<Eigen::Index>(cotangent.size()));
    for (std::size_t k = 0; k < cotangent.size(); ++k) c_[static_cast<Eigen::Index>(k)] = cotangent[k].real();
    Eigen::Map<Eigen::VectorXd> g(grad.data(), static_cast<Eigen::Index>(grad.size()));
    g.noalias() = 2.0 * A_.transpose() * c_;
  }

 private:
  const Eigen::MatrixXd& A_;
  Eigen::VectorXd y_, c_;
};

}  // namespace

LinearRepresentation::LinearRepresentation(Eigen::MatrixXd A, Shape shape) : A_(std::move(A)), shape_(shape) {
  if (static_cast<std::size_t>(A_.cols()) != shape.size()) {
    throw Error(ErrorKind::ShapeMismatch, "linear representation: matrix columns must equal H*W");
  }
}

std::unique_ptr<LinearRepresentation> LinearRepresentation::identity(Shape shape) {
  const auto m = static_cast<Eigen::Index>(shape.size());
  return std::make_unique<LinearRepresentation>(Eigen::MatrixXd::Identity(m, m), shape);
}

std::unique_ptr<RepresentationWorkspace> LinearRepresentation::workspace() const {
  return std::make_unique<LinearWorkspace>(A_);
}

PerturbativeTerms LinearRepresentation::perturbative_terms(const Field2D& x, const Field2D& pixel_variance) const {
  check_shape(x);
  PerturbativeTerms t;
  t.jnorm.assign(size(), 0.0);
  t.htrace.assign(size(), 0.0);
  for (Eigen::Index k = 0; k < A_.rows(); ++k)
    for (Eigen::Index j = 0; j < A_.cols(); ++j) t.jnorm[k] += A_(k, j) * A_(k, j) * pixel_variance[j];
  return t;
}

PerturbativeCorrection LinearRepresentation::perturbative_correction(const Field2D& x, const Field2D& pixel_variance,
                                                                     std::span<const cplx>, bool with_gradient) const {
  const auto t = perturbative_terms(x, pixel_variance);
  PerturbativeCorrection out;
  for (double v : t.jnorm) out.value += v;
  if (with_gradient) out.gradient = Field2D(x.shape());
  return out;
}

// --- Fourier filter ---------------------------------------------------------

namespace {

class FilterWorkspace : public RepresentationWorkspace {
 public:
  explicit FilterWorkspace(const Spectrum2D& m) : mult_(m), buf_(m.size()) {}
  void evaluate(const Field2D& x, std::span<cplx> out) override {
    for (std::size_t p = 0; p < x.size(); ++p) out[p] = x[p];
    detail::convolve_inplace(out.data(), mult_.shape(), mult_.data());
  }
  void adjoint(std::span<const cplx> cotangent, std::span<double> grad) override {
    std::copy(cotangent.begin(), cotangent.end(), buf_.begin());
    detail::convolve_adjoint_inplace(buf_.data(), mult_.shape(), mult_.data());
    for (std::size_t p = 0; p < grad.size(); ++p) grad[p] = 2.0 * buf_[p].real();
  }

 private:
  const Spectrum2D& mult_;
  CVector buf_;
};

}  // namespace

FilterRepresentation::FilterRepresentation(Spectrum2D multiplier) : multiplier_(std::move(multiplier)) {
  for (const auto& v : multiplier_.values())
    if (std::abs(v) == 0.0) throw Error(ErrorKind::InvalidArgument, "filter representation must be injective");
}

std::unique_ptr<RepresentationWorkspace> FilterRepresentation::workspace() const {
  return std::make_unique<FilterWorkspace>(multiplier_);
}

// --- pointwise quadratic -------------------------------------------------------

namespace {

class QuadraticWorkspace : public RepresentationWorkspace {
 public:
  void evaluate(const Field2D& x, std::span<cplx> out) override {
    x_.assign(x.values().begin(), x.values().end());
    for (std::size_t p = 0; p < x_.size(); ++p) out[p] = x_[p] * x_[p];
  }
  void adjoint(std::span<const cplx> cotangent, std::span<double> grad) override {
    for (std::size_t p = 0; p < x_.size(); ++p) grad[p] = 4.0 * cotangent[p].real() * x_[p];
  }

 private:
  std::vector<double> x_;
};

}  // namespace

std::unique_ptr<RepresentationWorkspace> PointwiseQuadraticRepresentation::workspace() const {
  return std::make_unique<QuadraticWorkspace>();
}

PerturbativeTerms PointwiseQuadraticRepresentation::perturbative_terms(const Field2D& x,
                                                                       const Field2D& pixel_variance) const {
  check_shape(x);
  PerturbativeTerms t;
  t.jnorm.resize(x.size());
  t.htrace.resize(x.size());
  for (std::size_t p = 0; p < x.size(); ++p) {
    t.jnorm[p] = 4.0 * x[p] * x[p] * pixel_variance[p];
    t.htrace[p] = 2.0 * pixel_variance[p];
  }
  return t;
}

PerturbativeCorrection PointwiseQuadraticRepresentation::perturbative_correction(const Field2D& x,
                                                                                 const Field2D& pixel_variance,
                                                                                 std::span<const cplx> target,
                                                                                 bool with_gradient) const {
  const auto t = perturbative_terms(x, pixel_variance);
  PerturbativeCorrection out;
  for (std::size_t p = 0; p < x.size(); ++p)
    out.value += t.jnorm[p] + (t.htrace[p] * std::conj(cplx(x[p] * x[p]) - target[p])).real();
  if (with_gradient) {
    out.gradient = Field2D(x.shape());
    for (std::size_t p = 0; p < x.size(); ++p) out.gradient[p] = 12.0 * x[p] * pixel_variance[p];
  }
  return out;
}

// --- quadratic form ------------------------------------------------------------

namespace {

class QuadraticFormWorkspace : public RepresentationWorkspace {
 public:
  explicit QuadraticFormWorkspace(const Eigen::MatrixXd& gram) : gram_(gram) {}
  void evaluate(const Field2D& x, std::span<cplx> out) override {
    gx_.noalias() = gram_ * as_vector(x);
    out[0] = as_vector(x).dot(gx_);
  }
  void adjoint(std::span<const cplx> cotangent, std::span<double> grad) override {
    Eigen::Map<Eigen::VectorXd> g(grad.data(), static_cast<Eigen::Index>(grad.size()));
    g = 4.0 * cotangent[0].real() * gx_;
  }

 private:
  const Eigen::MatrixXd& gram_;
  Eigen::VectorXd gx_;
};

}  // namespace

QuadraticFormRepresentation::QuadraticFormRepresentation(Eigen::MatrixXd A, Shape shape)
    : A_(std::move(A)), gram_(A_.transpose() * A_), shape_(shape) {
  if (static_cast<std::size_t>(A_.cols()) != shape.size()) {
    throw Error(ErrorKind::ShapeMismatch, "quadratic form: matrix columns must equal H*W");
  }
}

std::unique_ptr<RepresentationWorkspace> QuadraticFormRepresentation::workspace() const {
  return std::make_unique<QuadraticFormWorkspace>(gram_);
}

PerturbativeTerms QuadraticFormRepresentation::perturbative_terms(const Field2D& x,
                                                                  const Field2D& pixel_variance) const {
  check_shape(x);
  const Eigen::VectorXd gx = gram_ * as_vector(x);
  PerturbativeTerms t;
  t.jnorm.assign(1, 0.0);
  t.htrace.assign(1, 0.0);
  double h = 0.0;
  for (Eigen::Index j = 0; j < gx.size(); ++j) {
    t.jnorm[0] += 4.0 * gx[j] * gx[j] * pixel_variance[j];
    h += 2.0 * gram_(j, j) * pixel_variance[j];
  }
  t.htrace[0] = h;
  return t;
}

}  // namespace statsep
