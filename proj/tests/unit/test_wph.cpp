#include "doctest.h"

#include <sstream>

#include "statsep/fft.hpp"
#include "statsep/wph.hpp"
#include "test_helpers.hpp"

using namespace statsep;

namespace {

CVector flat(const Field2D& x, const FilterBank& bank, ClassMask mask = ClassMask::all()) {
  return wph_compute(x, bank, mask).flatten();
}

double max_abs_diff(const CVector& a, const CVector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs(const CVector& a) {
  double m = 0.0;
  for (const auto& v : a) m = std::max(m, std::abs(v));
  return m;
}

// Naive inverse DFT / M: spatial kernel of a multiplier.
ComplexField2D naive_kernel(const Spectrum2D& s) {
  const std::size_t h = s.height(), w = s.width();
  ComplexField2D out(h, w);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      cplx acc = 0.0;
      for (std::size_t a = 0; a < h; ++a)
        for (std::size_t b = 0; b < w; ++b)
          acc += s[a * w + b] * std::polar(1.0, 2 * std::numbers::pi * (double(a * r) / h + double(b * c) / w));
      out[r * w + c] = acc / double(h * w);
    }
  return out;
}

ComplexField2D direct_conv(const Field2D& x, const ComplexField2D& k) {
  ComplexField2D out(x.shape());
  const auto h = static_cast<std::ptrdiff_t>(x.height()), w = static_cast<std::ptrdiff_t>(x.width());
  for (std::ptrdiff_t r = 0; r < h; ++r)
    for (std::ptrdiff_t c = 0; c < w; ++c) {
      cplx acc = 0.0;
      for (std::ptrdiff_t a = 0; a < h; ++a)
        for (std::ptrdiff_t b = 0; b < w; ++b) acc += k.at(a, b) * x.at(r - a, c - b);
      out.at(r, c) = acc;
    }
  return out;
}

double cot_dot(const CVector& c, const CVector& phi) {
  double s = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) s += (std::conj(c[k]) * phi[k]).real();
  return s;
}

}  // namespace

TEST_CASE("coefficient count") {
  CHECK(WphLayout(7, 4, ClassMask::all()).size() == 420);
  CHECK(WphLayout::closed_form_count(7, 4, ClassMask::all()) == 420);
  const WphLayout l(5, 4, ClassMask::only({WphClass::S11, WphClass::C01}));
  CHECK(l.count(WphClass::S11) == 20);
  CHECK(l.count(WphClass::S00) == 0);
  CHECK(l.count(WphClass::C01) == 160);
  CHECK(l.size() == WphLayout::closed_form_count(5, 4, l.mask()));
  CHECK(l.offset(WphClass::C01) == 20);
  const auto& e = l[20];
  CHECK(e.cls == WphClass::C01);
  CHECK(e.first == 0);
  CHECK(e.second == 4);
  for (std::size_t k = 20; k < l.size(); ++k) CHECK(l[k].first / 4 < l[k].second / 4);
}

TEST_CASE("class mask parsing") {
  CHECK(ClassMask::parse("all") == ClassMask::all());
  CHECK(ClassMask::parse("s11, S01") == ClassMask::only({WphClass::S11, WphClass::S01}));
  CHECK(ClassMask::parse("s11,s01").to_string() == "s11,s01");
  CHECK_THROWS_AS(ClassMask::parse("s11,s22"), Error);
}

TEST_CASE("zero field gives zero coefficients") {
  const auto bank = build_bank(16, 16, 3, 4);
  const auto c = flat(Field2D(16, 16), bank);
  CHECK(c.size() == WphLayout(3, 4, ClassMask::all()).size());
  for (const auto& v : c) CHECK(std::abs(v) == 0.0);
}

TEST_CASE("degree-2 homogeneity") {
  const auto bank = build_bank(32, 32, 4, 4);
  const auto x = testutil::random_field(32, 32, 3);
  const auto base = flat(x, bank);
  for (double c : {0.5, 3.0, 17.0}) {
    const auto scaled = flat(c * x, bank);
    CVector expect(base);
    for (auto& v : expect) v *= c * c;
    CHECK(max_abs_diff(scaled, expect) < 1e-10 * max_abs(expect));
  }
}

TEST_CASE("S11 is real and nonnegative") {
  const auto bank = build_bank(32, 32, 4, 4);
  const auto c = wph_compute(testutil::random_field(32, 32, 4), bank);
  for (const auto& v : c.s11) {
    CHECK(v.real() >= 0.0);
    CHECK(std::abs(v.imag()) < 1e-10);
  }
}

TEST_CASE("estimators match a direct spatial-average oracle on 8x8") {
  const auto bank = build_bank(8, 8, 1, 4);
  const auto x = testutil::random_field(8, 8, 5);
  const std::size_t n = bank.size();
  const double m = 64.0;
  std::vector<ComplexField2D> u;
  for (const auto& psi : bank.filters) u.push_back(direct_conv(x, naive_kernel(psi)));
  const auto c = wph_compute(x, bank);
  for (std::size_t i = 0; i < n; ++i) {
    double s2 = 0.0, s1 = 0.0;
    cplx s01 = 0.0;
    for (std::size_t p = 0; p < 64; ++p) {
      s2 += std::norm(u[i][p]);
      s1 += std::abs(u[i][p]);
      s01 += std::abs(u[i][p]) * std::conj(u[i][p]);
    }
    CHECK(std::abs(c.s11[i] - s2 / m) < 1e-9);
    CHECK(std::abs(c.s00[i] - (s2 / m - (s1 / m) * (s1 / m))) < 1e-9);
    CHECK(std::abs(c.s01[i] - s01 / m) < 1e-9);
  }
  CHECK(c.c01.empty());

  // C01 needs two scales
  const auto bank2 = build_bank(8, 8, 2, 2);
  const auto c2 = wph_compute(x, bank2);
  const WphLayout layout(2, 2, ClassMask::all());
  std::vector<ComplexField2D> u2;
  for (const auto& psi : bank2.filters) u2.push_back(direct_conv(x, naive_kernel(psi)));
  for (std::size_t k = 0; k < c2.c01.size(); ++k) {
    const auto& e = layout[layout.offset(WphClass::C01) + k];
    cplx acc = 0.0;
    for (std::size_t p = 0; p < 64; ++p) acc += std::abs(u2[e.first][p]) * std::conj(u2[e.second][p]);
    CHECK(std::abs(c2.c01[k] - acc / m) < 1e-9);
  }
}

TEST_CASE("translation invariance") {
  const auto bank = build_bank(32, 32, 4, 4);
  const auto x = testutil::random_field(32, 32, 6);
  const auto base = flat(x, bank);
  for (auto [dr, dc] : {std::pair{1, 0}, std::pair{0, 5}, std::pair{-7, 13}}) {
    const auto shifted = flat(circular_shift(x, dr, dc), bank);
    CHECK(max_abs_diff(base, shifted) < 1e-10 * std::max(1.0, max_abs(base)));
  }
}

TEST_CASE("normalization") {
  const auto bank = build_bank(32, 32, 4, 4);
  const auto y = testutil::random_field(32, 32, 7);
  const auto ref = NormalizationRef::from_observation(y, bank);
  const auto self = normalize(wph_compute(y, bank), ref);
  for (const auto& v : self.s11) CHECK(std::abs(v - 1.0) < 1e-12);

  const auto x = testutil::random_field(32, 32, 8);
  const auto cx = wph_compute(x, bank);
  const auto unit = normalize(cx, NormalizationRef::unit(bank.size()));
  CHECK(max_abs_diff(unit.flatten(), cx.flatten()) == 0.0);

  WphCoefficients random_c;
  random_c.s11 = testutil::random_cvector(16, 1);
  random_c.s00 = testutil::random_cvector(16, 2);
  random_c.s01 = testutil::random_cvector(16, 3);
  random_c.c01 = testutil::random_cvector(6 * 16, 4);
  NormalizationRef r;
  for (int i = 0; i < 16; ++i) r.s11_of_y.push_back(0.1 + 3.0 * i);
  const auto back = denormalize(normalize(random_c, r), r);
  CHECK(max_abs_diff(back.flatten(), random_c.flatten()) < 1e-12 * max_abs(random_c.flatten()));

  // explicit class-wise division
  const auto nc = normalize(cx, ref);
  const WphLayout layout(4, 4, ClassMask::all());
  const auto e = layout[layout.offset(WphClass::C01) + 5];
  CHECK(std::abs(nc.c01[5] - cx.c01[5] / std::sqrt(ref.s11_of_y[e.first].real() * ref.s11_of_y[e.second].real())) <
        1e-14);
  CHECK(std::abs(nc.s00[3] - cx.s00[3] / ref.s11_of_y[3].real()) < 1e-14);

  const auto factors = normalization_factors(layout, ref);
  const auto nflat = nc.flatten(), rflat = cx.flatten();
  for (std::size_t k = 0; k < layout.size(); ++k) CHECK(std::abs(nflat[k] * factors[k] - rflat[k]) < 1e-12);
}

TEST_CASE("degenerate normalization reference") {
  NormalizationRef r{CVector{1.0, 0.0, 2.0}};
  try {
    r.validate();
    FAIL("expected DegenerateReference");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateReference);
  }
  const auto bank = build_bank(16, 16, 3, 2);
  CHECK_THROWS_AS(NormalizationRef::from_observation(Field2D(16, 16, 2.0), bank).validate(), Error);
  r.s11_of_y[1] = 1e-15;
  CHECK_THROWS_AS(r.validate(), Error);
  r.s11_of_y[1] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(r.validate(), Error);
  r.s11_of_y[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(r.validate(), Error);
}

TEST_CASE("jacobian adjoint") {
  const auto bank = build_bank(32, 32, 4, 4);
  const auto x = testutil::random_field(32, 32, 9);
  const std::size_t K = WphLayout(4, 4, ClassMask::all()).size();

  SUBCASE("zero cotangent") {
    const auto g = wph_jacobian_adjoint(x, bank, CVector(K));
    for (double v : g.values()) CHECK(v == 0.0);
  }
  SUBCASE("S11 basis cotangent matches the closed form") {
    const auto mask = ClassMask::only({WphClass::S11});
    for (std::size_t i : {0u, 5u, 15u}) {
      CVector c(16);
      c[i] = 1.0;
      const auto g = wph_jacobian_adjoint(x, bank, c, mask);
      const auto& psi = bank.filters[i];
      const auto inner = convolve_periodic(convolve_periodic(x, psi), adjoint_filter(psi));
      for (std::size_t p = 0; p < x.size(); ++p) CHECK(std::abs(g[p] - 2.0 * (2.0 / 1024.0) * inner[p].real()) < 1e-10);
    }
  }
  SUBCASE("directional derivatives match central differences per class") {
    for (auto cls : {WphClass::S11, WphClass::S00, WphClass::S01, WphClass::C01}) {
      const auto mask = ClassMask::only({cls});
      const std::size_t kc = WphLayout(4, 4, mask).size();
      const auto c = testutil::random_cvector(kc, 10 + static_cast<int>(cls));
      const auto g = wph_jacobian_adjoint(x, bank, c, mask);
      for (int d = 0; d < 5; ++d) {
        const auto v = testutil::random_field(32, 32, 100 + d);
        const double h = 1e-5;
        const double fp = cot_dot(c, flat(x + h * v, bank, mask));
        const double fm = cot_dot(c, flat(x - h * v, bank, mask));
        const double fd = 2.0 * (fp - fm) / (2 * h);
        const double an = dot(g, v);
        CHECK_MESSAGE(testutil::rel_err(fd, an) < 1e-4, to_string(cls), " fd=", fd, " an=", an);
      }
    }
  }
  SUBCASE("engine reuse gives identical results") {
    WphEngine engine(bank, ClassMask::all());
    CVector a(K), b(K);
    engine.evaluate(x, a);
    engine.evaluate(testutil::random_field(32, 32, 11), b);
    engine.evaluate(x, b);
    CHECK(max_abs_diff(a, b) == 0.0);
  }
  CHECK_THROWS_AS(wph_jacobian_adjoint(x, bank, CVector(3)), Error);
}

TEST_CASE("perturbative terms") {
  const std::size_t n = 12;
  const auto bank = build_bank(n, n, 2, 4);
  const auto x = testutil::smooth_field(n, n, 12, 1.2);
  const double m = double(n * n);

  SUBCASE("S11 Hessian trace is the constant closed form") {
    Field2D var(n, n, 0.3);
    const auto t = wph_perturbative_terms(x, bank, var, ClassMask::only({WphClass::S11}));
    const auto t2 = wph_perturbative_terms(testutil::random_field(n, n, 99), bank, var,
                                           ClassMask::only({WphClass::S11}));
    for (std::size_t i = 0; i < bank.size(); ++i) {
      const auto h = kernel_from_multiplier(bank.filters[i]);
      cplx self = 0.0;  // (psi * psi)[0] = sum_m psi[m] psi[-m]
      for (std::ptrdiff_t r = 0; r < std::ptrdiff_t(n); ++r)
        for (std::ptrdiff_t c = 0; c < std::ptrdiff_t(n); ++c) self += h.at(r, c) * h.at(-r, -c);
      const double expect = 2.0 / m * self.real() * 0.3 * m;
      CHECK(std::abs(t.htrace[i] - expect) < 1e-12 * std::max(1.0, std::abs(expect)));
      CHECK(std::abs(t2.htrace[i] - expect) < 1e-12 * std::max(1.0, std::abs(expect)));
    }
  }

  SUBCASE("zero variance gives zero terms") {
    const auto t = wph_perturbative_terms(x, bank, Field2D(n, n, 0.0));
    for (double v : t.jnorm) CHECK(v == 0.0);
    for (const auto& v : t.htrace) CHECK(std::abs(v) == 0.0);
  }

  SUBCASE("finite-difference Hessian diagonal and Jacobian norm") {
    for (bool uniform : {true, false}) {
      Field2D var(n, n, 0.5);
      if (!uniform) {
        const auto r = testutil::random_field(n, n, 13);
        for (std::size_t p = 0; p < var.size(); ++p) var[p] = 0.2 + 0.1 * r[p] * r[p];
      }
      const auto t = wph_perturbative_terms(x, bank, var);
      const auto base = flat(x, bank);
      const std::size_t K = base.size();
      std::vector<double> jn(K, 0.0);
      CVector ht(K, 0.0);
      const double h = 1e-3;
      for (std::size_t p = 0; p < x.size(); ++p) {
        Field2D xp = x, xm = x;
        xp[p] += h;
        xm[p] -= h;
        const auto fp = flat(xp, bank), fm = flat(xm, bank);
        for (std::size_t k = 0; k < K; ++k) {
          jn[k] += var[p] * std::norm((fp[k] - fm[k]) / (2 * h));
          ht[k] += var[p] * (fp[k] - 2.0 * base[k] + fm[k]) / (h * h);
        }
      }
      double jscale = 0.0, hscale = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        jscale = std::max(jscale, jn[k]);
        hscale = std::max(hscale, std::abs(ht[k]));
      }
      for (std::size_t k = 0; k < K; ++k) {
        CHECK_MESSAGE(std::abs(t.jnorm[k] - jn[k]) <= 1e-3 * std::max(jn[k], 1e-3 * jscale), "k=", k);
        CHECK_MESSAGE(std::abs(t.htrace[k] - ht[k]) <= 1e-3 * std::max(std::abs(ht[k]), 1e-3 * hscale), "k=", k,
                      " an=", t.htrace[k], " fd=", ht[k]);
      }
    }
  }

  SUBCASE("near-zero modulus is reported") {
    try {
      wph_perturbative_terms(Field2D(n, n), bank, Field2D(n, n, 1.0), ClassMask::only({WphClass::S01}));
      FAIL("expected NearZeroModulus");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NearZeroModulus);
    }
    CHECK_NOTHROW(wph_perturbative_terms(Field2D(n, n), bank, Field2D(n, n, 1.0), ClassMask::only({WphClass::S11})));
  }

  SUBCASE("correction gradient matches central differences") {
    Field2D var(n, n, 0.4);
    const auto mask = ClassMask::all();
    const WphLayout layout(bank.J, bank.L, mask);
    std::vector<double> factors(layout.size());
    for (std::size_t k = 0; k < factors.size(); ++k) factors[k] = 0.5 + 0.01 * double(k);
    const auto target = testutil::random_cvector(layout.size(), 14);
    const auto corr = wph_perturbative_correction(x, bank, var, mask, factors, target, true);
    const auto terms = wph_perturbative_terms(x, bank, var, mask);
    const auto phi = flat(x, bank);
    double expect = 0.0;
    for (std::size_t k = 0; k < layout.size(); ++k) {
      expect += terms.jnorm[k] / (factors[k] * factors[k]) +
                (terms.htrace[k] * std::conj(phi[k] / factors[k] - target[k])).real() / factors[k];
    }
    CHECK(corr.value == doctest::Approx(expect).epsilon(1e-12));
    for (int d = 0; d < 4; ++d) {
      const auto v = testutil::random_field(n, n, 200 + d);
      const double h = 1e-5;
      const double fp = wph_perturbative_correction(x + h * v, bank, var, mask, factors, target, false).value;
      const double fm = wph_perturbative_correction(x - h * v, bank, var, mask, factors, target, false).value;
      const double fd = (fp - fm) / (2 * h);
      CHECK_MESSAGE(testutil::rel_err(fd, dot(corr.gradient, v)) < 1e-5, "fd=", fd, " an=", dot(corr.gradient, v));
    }
  }
}

TEST_CASE("coefficient CSV export") {
  const auto bank = build_bank(16, 16, 2, 2);
  const auto c = wph_compute(testutil::random_field(16, 16, 15), bank);
  std::ostringstream out;
  write_coefficients_csv(out, c, bank);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "class,j1,l1,j2,l2,real,imag");
  std::size_t rows = 0;
  std::string last;
  while (std::getline(in, line)) {
    ++rows;
    last = line;
  }
  CHECK(rows == c.size());
  CHECK(last.rfind("C01,0,1,1,1,", 0) == 0);
}
