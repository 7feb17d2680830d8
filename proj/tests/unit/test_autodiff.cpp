#include "doctest.h"

#include <functional>

#include "statsep/autodiff.hpp"
#include "test_helpers.hpp"

using namespace statsep;
using ad::Tape;

namespace {

const Shape kShape{4, 5};

// Checks grad(input) against central differences of the real scalar built
// by `build` on each real and imaginary coordinate.
void check_gradient(const std::function<Tape::Id(Tape&, Tape::Id)>& build, CVector x0, double tol = 1e-6) {
  Tape t(kShape);
  const auto in = t.input(x0);
  const auto root = build(t, in);
  t.backward(root);
  const CVector g = t.grad(in);
  auto value_at = [&](const CVector& x) {
    Tape s(kShape);
    return s.value(build(s, s.input(x)))[0].real();
  };
  const double h = 1e-6;
  for (std::size_t p = 0; p < x0.size(); ++p) {
    for (int part = 0; part < 2; ++part) {
      CVector xp = x0, xm = x0;
      const cplx dz = part == 0 ? cplx(h, 0) : cplx(0, h);
      xp[p] += dz;
      xm[p] -= dz;
      const double fd = (value_at(xp) - value_at(xm)) / (2 * h);
      const double an = part == 0 ? g[p].real() : g[p].imag();
      CHECK_MESSAGE(std::abs(fd - an) <= tol * std::max(1.0, std::abs(fd)), "p=", p, " part=", part, " fd=", fd,
                    " an=", an);
    }
  }
}

CVector weights(std::uint64_t seed) { return testutil::random_cvector(kShape.size(), seed); }

}  // namespace

TEST_CASE("tape forward values") {
  Tape t(kShape);
  const auto a = t.input(CVector(kShape.size(), cplx(3, 4)));
  CHECK(t.value(t.abs(a))[0] == cplx(5));
  CHECK(std::abs(t.value(t.sg(a))[0] - cplx(0.6, 0.8)) < 1e-15);
  CHECK(t.value(t.mean(a))[0] == cplx(3, 4));
  CHECK(t.value(t.sum(a))[0] == cplx(60, 80));
  CHECK(t.value(t.conj(a))[0] == cplx(3, -4));
  const auto s = t.constant(CVector{2.0});
  CHECK(t.value(t.mul(a, s))[7] == cplx(6, 8));
  CHECK(t.value(t.recip(t.abs(a)))[0] == cplx(0.2));
}

TEST_CASE("tape gradients match finite differences") {
  const auto x0 = testutil::random_cvector(kShape.size(), 1);
  const auto w = weights(2);
  const auto k = weights(3);

  SUBCASE("linear weighted sum") {
    check_gradient([&](Tape& t, Tape::Id x) { return t.real(t.wsum(x, w.data())); }, x0);
  }
  SUBCASE("modulus squared mean") {
    check_gradient([&](Tape& t, Tape::Id x) { return t.real(t.mean(t.mul(x, t.conj(x)))); }, x0);
  }
  SUBCASE("modulus times conjugate") {
    check_gradient([&](Tape& t, Tape::Id x) { return t.real(t.wsum(t.mul(t.abs(x), t.conj(x)), w.data())); }, x0);
  }
  SUBCASE("phase factor") {
    check_gradient([&](Tape& t, Tape::Id x) { return t.real(t.wsum(t.sg(x), w.data())); }, x0);
  }
  SUBCASE("reciprocal of modulus") {
    check_gradient([&](Tape& t, Tape::Id x) { return t.real(t.wsum(t.recip(t.abs(x)), w.data())); }, x0);
  }
  SUBCASE("convolution") {
    check_gradient([&](Tape& t, Tape::Id x) { return t.real(t.wsum(t.conv(x, k.data()), w.data())); }, x0);
  }
  SUBCASE("scalar broadcast, shift and scale") {
    check_gradient(
        [&](Tape& t, Tape::Id x) {
          const auto mu = t.mean(t.abs(x));
          const auto y = t.sub(t.scale(x, cplx(0.3, -1.2)), t.mul(mu, t.shift(x, cplx(1, 2))));
          return t.real(t.mul(t.wsum(y, w.data()), t.conj(t.mean(y))));
        },
        x0);
  }
  SUBCASE("real part and add") {
    check_gradient([&](Tape& t, Tape::Id x) { return t.real(t.wsum(t.add(t.real(x), t.mul(x, x)), w.data())); },
                   x0);
  }
}
