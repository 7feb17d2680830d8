#pragma once

#include "statsep/fields.hpp"

namespace statsep {

// Unitary 2-D DFT: both directions carry 1/sqrt(H*W), so Parseval holds
// exactly and inverse(forward(f)) == f.
Spectrum2D fft_forward(const Field2D& f);
Spectrum2D fft_forward(const ComplexField2D& f);
ComplexField2D fft_inverse(const Spectrum2D& s);

// Filters are Fourier multipliers: convolve_periodic(f, psi) is
// inverse(psi * forward(f)), i.e. the circular convolution h * f with the
// spatial kernel h = kernel_from_multiplier(psi).
ComplexField2D convolve_periodic(const Field2D& f, const Spectrum2D& psi);
ComplexField2D convolve_periodic(const ComplexField2D& f, const Spectrum2D& psi);

// psi_dagger[i] = conj(psi[-i]) in space, i.e. conj(psi_hat(k)) in Fourier.
Spectrum2D adjoint_filter(const Spectrum2D& psi);

// Spectrum evaluated at -k.
Spectrum2D point_reflect(const Spectrum2D& s);

ComplexField2D kernel_from_multiplier(const Spectrum2D& psi);
Spectrum2D multiplier_from_kernel(const ComplexField2D& kernel);

namespace detail {

// Unnormalized in-place DFT of a row-major buffer; sign = -1 forward,
// +1 backward. Safe to call concurrently.
void dft_inplace(cplx* data, Shape shape, int sign);

// data <- h * data for the kernel with DFT multiplier `multiplier`.
void convolve_inplace(cplx* data, Shape shape, const cplx* multiplier);

// As convolve_inplace but with conj(multiplier), i.e. the adjoint filter.
void convolve_adjoint_inplace(cplx* data, Shape shape, const cplx* multiplier);

}  // namespace detail
}  // namespace statsep
