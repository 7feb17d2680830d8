#include "doctest.h"

#include <cmath>
#include <numbers>

#include "statsep/fft.hpp"
#include "statsep/noise.hpp"

using namespace statsep;

namespace {

NoiseModel model(NoiseKind kind, std::size_t n, double sigma = 1.0) {
  NoiseModel m;
  m.kind = kind;
  m.sigma = sigma;
  m.shape = {n, n};
  return m;
}

// Radially binned mean power over `draws` samples, bins of unit integer |k|.
std::vector<double> binned_power(const NoiseModel& m, int draws) {
  const NoiseSampler s(m);
  const std::size_t n = m.shape.height;
  std::vector<double> power(n / 2 + 1, 0.0), count(n / 2 + 1, 0.0);
  auto rng = make_engine(99);
  Field2D f(m.shape);
  for (int d = 0; d < draws; ++d) {
    s.sample_into(rng, f);
    const auto spec = fft_forward(f);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        const double k = std::hypot(double(signed_frequency(r, n)), double(signed_frequency(c, n)));
        const auto b = static_cast<std::size_t>(std::lround(k));
        if (b == 0 || b >= power.size()) continue;
        power[b] += std::norm(spec[r * n + c]);
        count[b] += 1;
      }
  }
  for (std::size_t b = 1; b < power.size(); ++b) power[b] /= count[b];
  return power;
}

}  // namespace

TEST_CASE("noise kind names") {
  for (auto k : {NoiseKind::White, NoiseKind::Pink, NoiseKind::Blue, NoiseKind::Crosses})
    CHECK(parse_noise_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_noise_kind("purple"), Error);
}

TEST_CASE("model validation") {
  auto m = model(NoiseKind::White, 8);
  m.sigma = 0.0;
  CHECK_THROWS_AS(NoiseSampler{m}, Error);
  m.sigma = 1.0;
  m.shape = {0, 8};
  CHECK_THROWS_AS(NoiseSampler{m}, Error);
}

TEST_CASE("pixelwise variance is sigma^2 * ref^2") {
  auto m = model(NoiseKind::Pink, 4, 0.5);
  m.reference_std = 3.0;
  const auto v = m.pixelwise_variance();
  for (double x : v.values()) CHECK(x == doctest::Approx(2.25));
}

TEST_CASE("same seed gives identical fields") {
  for (auto k : {NoiseKind::White, NoiseKind::Pink, NoiseKind::Blue, NoiseKind::Crosses}) {
    auto m = model(k, 32);
    m.crosses_density = 0.05;
    CHECK(sample(m, 42) == sample(m, 42));
    CHECK_FALSE(sample(m, 42) == sample(m, 43));
  }
}

TEST_CASE("white noise variance over 1e4 samples") {
  const auto m = model(NoiseKind::White, 8);
  const NoiseSampler s(m);
  auto rng = make_engine(1);
  Field2D f(m.shape);
  std::vector<double> sum(64, 0.0), sq(64, 0.0);
  const int n = 10000;
  for (int d = 0; d < n; ++d) {
    s.sample_into(rng, f);
    for (std::size_t i = 0; i < 64; ++i) {
      sum[i] += f[i];
      sq[i] += f[i] * f[i];
    }
  }
  double pooled = 0.0;
  for (std::size_t i = 0; i < 64; ++i) {
    const double mu = sum[i] / n;
    const double var = sq[i] / n - mu * mu;
    pooled += var / 64;
    CHECK(std::abs(mu) < 4.0 * std::sqrt(var / n));
  }
  CHECK(pooled >= 0.97);
  CHECK(pooled <= 1.03);
  const double v0 = sq[0] / n - (sum[0] / n) * (sum[0] / n);
  CHECK(v0 >= 0.97);
  CHECK(v0 <= 1.03);
}

TEST_CASE("coloured noise has the requested variance and zero mean") {
  for (auto k : {NoiseKind::Pink, NoiseKind::Blue}) {
    auto m = model(k, 16, 0.7);
    m.reference_std = 2.0;
    const NoiseSampler s(m);
    auto rng = make_engine(2);
    Field2D f(m.shape);
    const int n = 10000;
    std::vector<double> sum(f.size(), 0.0), sq(f.size(), 0.0);
    for (int d = 0; d < n; ++d) {
      s.sample_into(rng, f);
      for (std::size_t i = 0; i < f.size(); ++i) {
        sum[i] += f[i];
        sq[i] += f[i] * f[i];
      }
    }
    double pooled = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double mu = sum[i] / n;
      const double var = sq[i] / n - mu * mu;
      pooled += var / double(f.size());
      CHECK(std::abs(mu) < 4.0 * std::sqrt(var / n));
    }
    CHECK(pooled == doctest::Approx(m.pixel_variance()).epsilon(0.03));
  }
}

TEST_CASE("pink spectrum decreases and blue increases with |k|") {
  const auto pink = binned_power(model(NoiseKind::Pink, 32), 1000);
  const auto blue = binned_power(model(NoiseKind::Blue, 32), 1000);
  for (std::size_t b = 2; b < pink.size(); ++b) {
    CHECK(pink[b] < pink[b - 1]);
    CHECK(blue[b] > blue[b - 1]);
  }
  // log-log slope close to 2*gamma
  auto slope = [](const std::vector<double>& p) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
    for (std::size_t b = 2; b + 1 < p.size(); ++b) {
      const double x = std::log(double(b)), y = std::log(p[b]);
      sx += x; sy += y; sxx += x * x; sxy += x * y; n += 1;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
  };
  CHECK(slope(pink) == doctest::Approx(-2.0).epsilon(0.1));
  CHECK(slope(blue) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("crosses: empty when density is zero") {
  auto m = model(NoiseKind::Crosses, 32);
  m.crosses_density = 0.0;
  const auto d = sample_crosses_detailed(m, 5);
  CHECK(d.glyph_count == 0);
  for (double v : d.field.values()) CHECK(v == 0.0);
}

TEST_CASE("crosses: requires the crosses kind") {
  CHECK_THROWS_AS(sample_crosses(model(NoiseKind::White, 8), 1), Error);
}

TEST_CASE("crosses: Poisson mean glyph count") {
  const auto m = model(NoiseKind::Crosses, 64);
  const NoiseSampler s(m);
  auto rng = make_engine(7);
  Field2D f(m.shape);
  double total = 0.0, var = 0.0;
  const int n = 1000;
  for (int d = 0; d < n; ++d) {
    total += double(s.sample_into(rng, f));
    var += variance(f) + mean(f) * mean(f);
  }
  const double expected = 2e-3 * 64 * 64;
  CHECK(std::abs(total / n - expected) < 0.05 * expected);
  CHECK(var / n == doctest::Approx(m.pixel_variance()).epsilon(0.05));
}

TEST_CASE("crosses: every nonzero pixel belongs to a plus stencil") {
  auto m = model(NoiseKind::Crosses, 48);
  m.crosses_density = 4e-3;
  int scanned = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto d = sample_crosses_detailed(m, seed);
    const auto& f = d.field;
    auto full_plus = [&](std::ptrdiff_t r, std::ptrdiff_t c) {
      return f.at(r, c) != 0 && f.at(r - 1, c) != 0 && f.at(r + 1, c) != 0 && f.at(r, c - 1) != 0 &&
             f.at(r, c + 1) != 0;
    };
    // Opposite-sign glyphs may cancel; only scan draws without cancellation,
    // detected through the total absolute mass 5 * count * amplitude.
    const double amp = std::sqrt(m.pixel_variance() / (5.0 * m.crosses_density));
    double mass = 0.0;
    for (double v : f.values()) mass += std::abs(v);
    if (std::abs(mass - 5.0 * amp * double(d.glyph_count)) > 1e-9 * (1.0 + mass)) continue;
    ++scanned;
    std::size_t nonzero = 0;
    for (std::ptrdiff_t r = 0; r < 48; ++r)
      for (std::ptrdiff_t c = 0; c < 48; ++c) {
        if (f.at(r, c) == 0) continue;
        ++nonzero;
        const bool member = full_plus(r, c) || full_plus(r - 1, c) || full_plus(r + 1, c) || full_plus(r, c - 1) ||
                            full_plus(r, c + 1);
        CHECK(member);
      }
    CHECK(nonzero <= 5 * d.glyph_count);
    if (d.glyph_count > 0) CHECK(nonzero > 0);
  }
  CHECK(scanned >= 10);
}

TEST_CASE("uniform schedules") {
  CHECK(uniform_schedule(1).weights == std::vector<double>{1.0});
  CHECK(uniform_schedule(4).weights == std::vector<double>{0.5, 0.5, 0.5, 0.5});
  for (std::size_t p : {1u, 2u, 3u, 7u, 10u, 21u, 100u}) {
    const auto s = uniform_schedule(p);
    double sum = 0.0;
    for (double a : s.weights) sum += a * a;
    CHECK(std::abs(sum - 1.0) < 1e-12);
    CHECK_NOTHROW(s.validate());
  }
  CHECK_THROWS_AS(uniform_schedule(0), Error);
  CHECK_THROWS_AS((DiffusionSchedule{{0.5, 0.5}}.validate()), Error);
  CHECK_THROWS_AS((DiffusionSchedule{{1.0, 0.0}}.validate()), Error);
}

TEST_CASE("schedule for sigma") {
  CHECK(schedule_for_sigma(2.14).size() == 21);
  CHECK(schedule_for_sigma(0.1).size() == 1);
  CHECK(schedule_for_sigma(0.05).size() == 1);
  CHECK(schedule_for_sigma(1.0).size() == 10);
  CHECK_THROWS_AS(schedule_for_sigma(0.0), Error);
}

TEST_CASE("stable decomposition keeps the per-pixel variance") {
  for (auto k : {NoiseKind::White, NoiseKind::Pink, NoiseKind::Blue}) {
    const auto m = model(k, 8);
    const NoiseSampler s(m);
    const auto sched = uniform_schedule(5);
    auto rng = make_engine(11);
    Field2D f(m.shape), acc(m.shape);
    double sq = 0.0;
    const int n = 10000;
    for (int d = 0; d < n; ++d) {
      acc.fill(0.0);
      for (double a : sched.weights) {
        s.sample_into(rng, f);
        acc += a * f;
      }
      sq += norm2(acc) / double(acc.size());
    }
    CHECK(sq / n == doctest::Approx(m.pixel_variance()).epsilon(0.03));
  }
}

TEST_CASE("derived seeds differ by path") {
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}
