#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "statsep/fft.hpp"
#include "statsep/fields.hpp"
#include "statsep/io.hpp"

using namespace statsep;

namespace {

Field2D random_field(std::size_t h, std::size_t w, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Field2D f(h, w);
  for (auto& v : f.values()) v = n(rng);
  return f;
}

Spectrum2D random_spectrum(std::size_t h, std::size_t w, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Spectrum2D s(h, w);
  for (auto& v : s.values()) v = {n(rng), n(rng)};
  return s;
}

// O(M^2) circular convolution with the kernel given in space.
ComplexField2D direct_convolution(const ComplexField2D& f, const ComplexField2D& kernel) {
  ComplexField2D out(f.shape());
  const auto h = static_cast<std::ptrdiff_t>(f.height());
  const auto w = static_cast<std::ptrdiff_t>(f.width());
  for (std::ptrdiff_t r = 0; r < h; ++r)
    for (std::ptrdiff_t c = 0; c < w; ++c) {
      cplx acc = 0.0;
      for (std::ptrdiff_t a = 0; a < h; ++a)
        for (std::ptrdiff_t b = 0; b < w; ++b) acc += kernel.at(a, b) * f.at(r - a, c - b);
      out.at(r, c) = acc;
    }
  return out;
}

// Naive DFT kernel, unnormalized.
ComplexField2D naive_idft_over_m(const Spectrum2D& s) {
  const std::size_t h = s.height(), w = s.width();
  ComplexField2D out(h, w);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      cplx acc = 0.0;
      for (std::size_t a = 0; a < h; ++a)
        for (std::size_t b = 0; b < w; ++b) {
          const double ph = 2.0 * std::numbers::pi * (double(a * r) / h + double(b * c) / w);
          acc += s[a * w + b] * std::polar(1.0, ph);
        }
      out[r * w + c] = acc / double(h * w);
    }
  return out;
}

cplx inner(const ComplexField2D& a, const ComplexField2D& b) {
  cplx acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * std::conj(b[i]);
  return acc;
}

}  // namespace

TEST_CASE("grid geometry and periodic indexing") {
  CHECK_THROWS_AS(Field2D(0, 3), Error);
  CHECK_THROWS_AS(Field2D(2, 2, std::vector<double>(3)), Error);
  Field2D f(3, 4);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = double(i);
  CHECK(f.at(-1, 0) == f.at(2, 0));
  CHECK(f.at(3, 5) == f.at(0, 1));
  CHECK(f.at(-4, -5) == f.at(2, 3));
  try {
    Field2D(1, 1) + Field2D(1, 2);
    FAIL("expected shape mismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ShapeMismatch);
  }
}

TEST_CASE("signed frequency maps Nyquist to +n/2") {
  CHECK(signed_frequency(0, 8) == 0);
  CHECK(signed_frequency(4, 8) == 4);
  CHECK(signed_frequency(5, 8) == -3);
  CHECK(signed_frequency(3, 7) == 3);
  CHECK(signed_frequency(4, 7) == -3);
}

TEST_CASE("fft of a constant is DC-only with value c*sqrt(HW)") {
  const double c = 2.5;
  Field2D f(6, 10, c);
  const auto s = fft_forward(f);
  CHECK(std::abs(s[0] - cplx(c * std::sqrt(60.0))) < 1e-12);
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(std::abs(s[i]) < 1e-12);
}

TEST_CASE("fft round trip and Parseval") {
  const auto f = random_field(16, 16, 1);
  const auto s = fft_forward(f);
  const auto back = fft_inverse(s);
  double err = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) err = std::max(err, std::abs(back[i] - f[i]));
  CHECK(err / max_abs(f) < 1e-10);
  CHECK(std::abs(norm2(s) - norm2(f)) / norm2(f) < 1e-10);

  const auto g = random_field(12, 20, 2);
  CHECK(std::abs(norm2(fft_forward(g)) - norm2(g)) / norm2(g) < 1e-10);
}

TEST_CASE("fft of a real field is Hermitian") {
  const auto f = random_field(9, 12, 3);
  const auto s = fft_forward(f);
  const auto h = static_cast<std::ptrdiff_t>(s.height()), w = static_cast<std::ptrdiff_t>(s.width());
  for (std::ptrdiff_t r = 0; r < h; ++r)
    for (std::ptrdiff_t c = 0; c < w; ++c) CHECK(std::abs(s.at(r, c) - std::conj(s.at(-r, -c))) < 1e-10);
}

TEST_CASE("cosine has two conjugate peaks at +-k0") {
  const std::size_t h = 16, w = 16;
  const int k0r = 3, k0c = 5;
  Field2D f(h, w);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c)
      f[r * w + c] = std::cos(2 * std::numbers::pi * (double(k0r * r) / h + double(k0c * c) / w));
  const auto s = fft_forward(f);
  const double expected = 0.5 * std::sqrt(double(h * w));
  CHECK(std::abs(s.at(k0r, k0c) - cplx(expected)) < 1e-10);
  CHECK(std::abs(s.at(-k0r, -k0c) - cplx(expected)) < 1e-10);
  double rest = 0.0;
  for (std::ptrdiff_t r = 0; r < 16; ++r)
    for (std::ptrdiff_t c = 0; c < 16; ++c) {
      if ((r == k0r && c == k0c) || (r == 16 - k0r && c == 16 - k0c)) continue;
      rest = std::max(rest, std::abs(s.at(r, c)));
    }
  CHECK(rest < 1e-10);
}

TEST_CASE("convolution with identity and zero filters") {
  const auto f = random_field(8, 6, 4);
  const auto id = convolve_periodic(f, Spectrum2D(8, 6, cplx(1.0)));
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(std::abs(id[i] - f[i]) < 1e-12);
  const auto zero = convolve_periodic(f, Spectrum2D(8, 6));
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(std::abs(zero[i]) == doctest::Approx(0.0));
  CHECK_THROWS_AS(convolve_periodic(f, Spectrum2D(8, 8)), Error);
}

TEST_CASE("spectral convolution matches direct circular sum") {
  const auto f = random_field(8, 8, 5);
  const auto psi = random_spectrum(8, 8, 6);
  const auto kernel = naive_idft_over_m(psi);
  const auto fast = convolve_periodic(f, psi);
  const auto slow = direct_convolution(to_complex(f), kernel);
  double err = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    err = std::max(err, std::abs(fast[i] - slow[i]));
    scale = std::max(scale, std::abs(slow[i]));
  }
  CHECK(err < 1e-9 * std::max(1.0, scale));
  const auto k2 = kernel_from_multiplier(psi);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(std::abs(k2[i] - kernel[i]) < 1e-12);
  const auto back = multiplier_from_kernel(kernel);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(std::abs(back[i] - psi[i]) < 1e-10);
}

TEST_CASE("convolution is linear") {
  const auto f = random_field(10, 7, 7), g = random_field(10, 7, 8);
  const auto psi = random_spectrum(10, 7, 9);
  const double a = 1.7, b = -0.3;
  const auto lhs = convolve_periodic(a * f + b * g, psi);
  const auto cf = convolve_periodic(f, psi), cg = convolve_periodic(g, psi);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(std::abs(lhs[i] - (a * cf[i] + b * cg[i])) < 1e-10);
}

TEST_CASE("adjoint filter") {
  SUBCASE("real symmetric filter is self-adjoint") {
    Spectrum2D psi(6, 6);
    for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = double(i % 5);
    CHECK(adjoint_filter(psi) == psi);
  }
  SUBCASE("involution") {
    const auto psi = random_spectrum(5, 7, 10);
    CHECK(adjoint_filter(adjoint_filter(psi)) == psi);
  }
  SUBCASE("spatial definition conj(psi)[-i]") {
    const auto psi = random_spectrum(6, 5, 11);
    const auto k = kernel_from_multiplier(psi);
    const auto kd = kernel_from_multiplier(adjoint_filter(psi));
    for (std::ptrdiff_t r = 0; r < 6; ++r)
      for (std::ptrdiff_t c = 0; c < 5; ++c) CHECK(std::abs(kd.at(r, c) - std::conj(k.at(-r, -c))) < 1e-12);
  }
  SUBCASE("<psi*x, y> = <x, psi_dagger*y> by direct sums") {
    const auto psi = random_spectrum(8, 8, 12);
    const auto k = naive_idft_over_m(psi);
    ComplexField2D kd(8, 8);
    for (std::ptrdiff_t r = 0; r < 8; ++r)
      for (std::ptrdiff_t c = 0; c < 8; ++c) kd.at(r, c) = std::conj(k.at(-r, -c));
    ComplexField2D x(8, 8), y(8, 8);
    std::mt19937_64 rng(13);
    std::normal_distribution<double> n;
    for (auto& v : x.values()) v = {n(rng), n(rng)};
    for (auto& v : y.values()) v = {n(rng), n(rng)};
    const cplx lhs = inner(direct_convolution(x, k), y);
    const cplx rhs = inner(x, direct_convolution(y, kd));
    CHECK(std::abs(lhs - rhs) < 1e-9);
    const cplx fast = inner(x, convolve_periodic(y, adjoint_filter(psi)));
    CHECK(std::abs(lhs - fast) < 1e-9);
  }
}

TEST_CASE("point reflection") {
  const auto s = random_spectrum(4, 6, 14);
  const auto p = point_reflect(s);
  CHECK(p.at(1, 2) == s.at(-1, -2));
  CHECK(point_reflect(p) == s);
}

TEST_CASE("binary grid round trip") {
  const auto f = random_field(3, 5, 15);
  std::stringstream ss;
  io::write_grid(ss, f);
  const std::string bytes = ss.str();
  REQUIRE(bytes.size() == 13 + 15 * 8);
  CHECK(bytes.substr(0, 4) == "SSF1");
  CHECK(static_cast<unsigned char>(bytes[4]) == 3);
  CHECK(static_cast<unsigned char>(bytes[8]) == 5);
  CHECK(bytes[12] == 0);
  const auto g = io::read_grid(ss);
  REQUIRE(std::holds_alternative<Field2D>(g));
  CHECK(std::get<Field2D>(g) == f);

  ComplexField2D z(2, 2, std::vector<cplx>{{1, 2}, {3, 4}, {-1, 0.5}, {0, -7}});
  std::stringstream zs;
  io::write_grid(zs, z);
  const auto zz = io::read_grid(zs);
  REQUIRE(std::holds_alternative<ComplexField2D>(zz));
  CHECK(std::get<ComplexField2D>(zz) == z);

  std::stringstream bad("XXXX0000");
  CHECK_THROWS_AS(io::read_grid(bad), Error);
}

TEST_CASE("png export and import") {
  const auto path = std::filesystem::temp_directory_path() / "statsep_test_fields.png";
  Field2D f(4, 3);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = -2.0 + double(i);
  io::write_png(path, f);
  const auto g = io::read_png(path);
  REQUIRE(g.shape() == f.shape());
  CHECK(g[0] == doctest::Approx(0.0));
  CHECK(g[11] == doctest::Approx(1.0));
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(g[i] == doctest::Approx(double(i) / 11.0).epsilon(0.01));
  std::filesystem::remove(path);
}
