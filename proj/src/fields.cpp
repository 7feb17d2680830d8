#include "statsep/fields.hpp"

#include <cmath>

namespace statsep {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ShapeMismatch: return "shape-mismatch";
    case ErrorKind::InvalidGeometry: return "invalid-geometry";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::DegenerateReference: return "degenerate-reference";
    case ErrorKind::NearZeroModulus: return "near-zero-modulus";
    case ErrorKind::SingularMatrix: return "singular-matrix";
    case ErrorKind::DomainTooLarge: return "domain-too-large";
    case ErrorKind::ZeroReferenceNorm: return "zero-reference-norm";
    case ErrorKind::ConstantReference: return "constant-reference";
    case ErrorKind::Io: return "io";
    case ErrorKind::Config: return "config";
    case ErrorKind::NumericalAbort: return "numerical-abort";
  }
  return "unknown";
}

std::string to_string(Shape s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width);
}

ComplexField2D to_complex(const Field2D& f) {
  ComplexField2D out(f.shape());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i];
  return out;
}

Field2D real_part(const ComplexField2D& f) {
  Field2D out(f.shape());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i].real();
  return out;
}

Field2D imag_part(const ComplexField2D& f) {
  Field2D out(f.shape());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i].imag();
  return out;
}

double mean(const Field2D& f) {
  double s = 0.0;
  for (double v : f.values()) s += v;
  return s / static_cast<double>(f.size());
}

double variance(const Field2D& f) {
  const double m = mean(f);
  double s = 0.0;
  for (double v : f.values()) s += (v - m) * (v - m);
  return s / static_cast<double>(f.size());
}

double norm2(const Field2D& f) {
  double s = 0.0;
  for (double v : f.values()) s += v * v;
  return s;
}

double norm2(const ComplexField2D& f) {
  double s = 0.0;
  for (const cplx& v : f.values()) s += std::norm(v);
  return s;
}

double max_abs(const Field2D& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

double dot(const Field2D& a, const Field2D& b) {
  a.require_same_shape(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace statsep
