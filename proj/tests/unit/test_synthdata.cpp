#include "doctest.h"

#include <map>

#include "statsep/fft.hpp"
#include "statsep/synthdata.hpp"

using namespace statsep;

namespace {

// Least-squares slope of log power against log |k| over radial bins.
double fitted_power_slope(const Field2D& f) {
  const auto s = fft_forward(f);
  const std::size_t h = f.height(), w = f.width();
  std::map<long, std::pair<double, double>> bins;  // bin -> (sum log k, sum power), count via second map
  std::map<long, std::size_t> counts;
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      if (r == 0 && c == 0) continue;
      const double ky = 2 * std::numbers::pi * signed_frequency(r, h) / double(h);
      const double kx = 2 * std::numbers::pi * signed_frequency(c, w) / double(w);
      const double k = std::hypot(kx, ky);
      if (k > std::numbers::pi) continue;
      const long b = std::lround(8.0 * std::log2(k));
      bins[b].first += std::log(k);
      bins[b].second += std::norm(s[r * w + c]);
      ++counts[b];
    }
  double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
  for (const auto& [b, v] : bins) {
    const double x = v.first / counts[b];
    const double y = std::log(v.second / counts[b]);
    sx += x, sy += y, sxx += x * x, sxy += x * y, n += 1;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double skewness(const Field2D& f) {
  double m2 = 0, m3 = 0;
  const double mu = mean(f);
  for (double v : f.values()) {
    m2 += (v - mu) * (v - mu);
    m3 += std::pow(v - mu, 3);
  }
  m2 /= f.size();
  m3 /= f.size();
  return m3 / std::pow(m2, 1.5);
}

}  // namespace

TEST_CASE("textures are standardized") {
  for (auto kind : {TextureKind::GaussianRandomField, TextureKind::Lognormal}) {
    TextureSpec spec;
    spec.kind = kind;
    spec.shape = {64, 48};
    spec.seed = 3;
    const auto f = generate(spec);
    CHECK(std::abs(mean(f)) < 1e-10);
    CHECK(std::abs(std::sqrt(variance(f)) - 1.0) < 1e-10);
  }
}

TEST_CASE("Gaussian field follows the requested spectral slope") {
  for (double slope : {-1.5, -1.0, -2.0}) {
    TextureSpec spec;
    spec.kind = TextureKind::GaussianRandomField;
    spec.spectral_slope = slope;
    spec.shape = {256, 256};
    spec.seed = 11;
    const double fitted = fitted_power_slope(generate(spec));
    CHECK_MESSAGE(std::abs(fitted - 2 * slope) < 0.15, "slope ", slope, " fitted ", fitted);
  }
}

TEST_CASE("lognormal field is positively skewed") {
  TextureSpec spec;
  spec.shape = {320, 320};
  spec.seed = 5;
  CHECK(skewness(generate(spec)) > 0.5);
}

TEST_CASE("determinism and stationarity") {
  TextureSpec spec;
  spec.shape = {128, 128};
  spec.seed = 8;
  CHECK(generate(spec) == generate(spec));
  auto other = spec;
  other.seed = 9;
  CHECK_FALSE(generate(spec) == generate(other));

  spec.kind = TextureKind::GaussianRandomField;
  spec.spectral_slope = -0.5;
  const auto f = generate(spec);
  // Patch variances of a short-correlation field agree across the grid.
  std::vector<double> vars;
  for (std::size_t pr = 0; pr < 4; ++pr)
    for (std::size_t pc = 0; pc < 4; ++pc) {
      double s = 0, s2 = 0;
      for (std::size_t r = 0; r < 32; ++r)
        for (std::size_t c = 0; c < 32; ++c) {
          const double v = f.at(pr * 32 + r, pc * 32 + c);
          s += v, s2 += v * v;
        }
      vars.push_back(s2 / 1024 - (s / 1024) * (s / 1024));
    }
  const auto [lo, hi] = std::minmax_element(vars.begin(), vars.end());
  CHECK(*hi / *lo < 1.6);
}

TEST_CASE("texture validation and names") {
  TextureSpec spec;
  spec.spectral_slope = 0.5;
  CHECK_THROWS_AS(generate(spec), Error);
  CHECK(parse_texture_kind("lognormal") == TextureKind::Lognormal);
  CHECK(parse_texture_kind("gaussian_random_field") == TextureKind::GaussianRandomField);
  CHECK(to_string(TextureKind::Lognormal) == "lognormal_field");
  CHECK_THROWS_AS(parse_texture_kind("plasma"), Error);
}
