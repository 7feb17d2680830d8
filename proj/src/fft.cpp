#include "statsep/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

namespace statsep {
namespace {

// FFTW planning is not thread-safe but executing an existing plan on new
// arrays is, so plans are created once per (shape, sign, alignment) under a
// lock and executed with fftw_execute_dft afterwards. SIMD-aligned arrays get
// a vectorized plan; anything else falls back to an FFTW_UNALIGNED plan.
// FFTW_ESTIMATE keeps the plan choice, and so the output bits, identical
// from run to run.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(Shape shape, int sign, bool aligned) {
    const auto key = std::make_tuple(shape.height, shape.width, sign, aligned);
    std::lock_guard<std::mutex> lock(mutex_);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    auto* buf = fftw_alloc_complex(shape.size());
    const unsigned flags = FFTW_ESTIMATE | (aligned ? 0u : FFTW_UNALIGNED);
    fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(shape.height), static_cast<int>(shape.width), buf, buf,
                                      sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD, flags);
    fftw_free(buf);
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<std::size_t, std::size_t, int, bool>, fftw_plan> plans_;
};

void scale_inplace(cplx* data, std::size_t n, double s) {
  for (std::size_t i = 0; i < n; ++i) data[i] *= s;
}

}  // namespace

namespace detail {

void dft_inplace(cplx* data, Shape shape, int sign) {
  auto* p = reinterpret_cast<fftw_complex*>(data);
  fftw_plan plan = PlanCache::instance().get(shape, sign, fftw_alignment_of(reinterpret_cast<double*>(p)) == 0);
  fftw_execute_dft(plan, p, p);
}

void convolve_inplace(cplx* data, Shape shape, const cplx* multiplier) {
  const std::size_t n = shape.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  dft_inplace(data, shape, -1);
  for (std::size_t i = 0; i < n; ++i) data[i] *= multiplier[i] * inv_n;
  dft_inplace(data, shape, +1);
}

void convolve_adjoint_inplace(cplx* data, Shape shape, const cplx* multiplier) {
  const std::size_t n = shape.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  dft_inplace(data, shape, -1);
  for (std::size_t i = 0; i < n; ++i) data[i] *= std::conj(multiplier[i]) * inv_n;
  dft_inplace(data, shape, +1);
}

}  // namespace detail

Spectrum2D fft_forward(const ComplexField2D& f) {
  Spectrum2D out(f.height(), f.width(), f.storage());
  detail::dft_inplace(out.data(), out.shape(), -1);
  scale_inplace(out.data(), out.size(), 1.0 / std::sqrt(static_cast<double>(out.size())));
  return out;
}

Spectrum2D fft_forward(const Field2D& f) { return fft_forward(to_complex(f)); }

ComplexField2D fft_inverse(const Spectrum2D& s) {
  ComplexField2D out(s.height(), s.width(), s.storage());
  detail::dft_inplace(out.data(), out.shape(), +1);
  scale_inplace(out.data(), out.size(), 1.0 / std::sqrt(static_cast<double>(out.size())));
  return out;
}

ComplexField2D convolve_periodic(const ComplexField2D& f, const Spectrum2D& psi) {
  if (!(f.shape() == psi.shape())) {
    throw Error(ErrorKind::ShapeMismatch,
                "convolve_periodic: field " + to_string(f.shape()) + " vs filter " + to_string(psi.shape()));
  }
  ComplexField2D out = f;
  detail::convolve_inplace(out.data(), out.shape(), psi.data());
  return out;
}

ComplexField2D convolve_periodic(const Field2D& f, const Spectrum2D& psi) {
  if (!(f.shape() == psi.shape())) {
    throw Error(ErrorKind::ShapeMismatch,
                "convolve_periodic: field " + to_string(f.shape()) + " vs filter " + to_string(psi.shape()));
  }
  return convolve_periodic(to_complex(f), psi);
}

Spectrum2D adjoint_filter(const Spectrum2D& psi) {
  Spectrum2D out = psi;
  for (auto& v : out.values()) v = std::conj(v);
  return out;
}

Spectrum2D point_reflect(const Spectrum2D& s) {
  Spectrum2D out(s.shape());
  for (std::size_t r = 0; r < s.height(); ++r) {
    for (std::size_t c = 0; c < s.width(); ++c) {
      out[r * s.width() + c] = s.at(-static_cast<std::ptrdiff_t>(r), -static_cast<std::ptrdiff_t>(c));
    }
  }
  return out;
}

ComplexField2D kernel_from_multiplier(const Spectrum2D& psi) {
  ComplexField2D out(psi.height(), psi.width(), psi.storage());
  detail::dft_inplace(out.data(), out.shape(), +1);
  scale_inplace(out.data(), out.size(), 1.0 / static_cast<double>(out.size()));
  return out;
}

Spectrum2D multiplier_from_kernel(const ComplexField2D& kernel) {
  Spectrum2D out(kernel.height(), kernel.width(), kernel.storage());
  detail::dft_inplace(out.data(), out.shape(), -1);
  return out;
}

}  // namespace statsep
