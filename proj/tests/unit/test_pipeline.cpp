#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "statsep/pipeline.hpp"

using namespace statsep;

namespace {

RunConfig small_config(Algorithm a = Algorithm::Vanilla) {
  RunConfig c;
  c.algorithm = a;
  c.seed = 17;
  c.texture.shape = {32, 32};
  c.representation.J = 3;
  c.Q = 8;
  c.T = 3;
  c.sigma = 0.5;
  return c;
}

bool same(const Field2D& a, const Field2D& b) { return a.storage() == b.storage(); }

}  // namespace

TEST_CASE("clean signal and noise model") {
  auto c = small_config();
  const auto clean = load_clean(c);
  CHECK(clean.shape() == Shape{32, 32});
  CHECK(same(clean, load_clean(c)));
  auto c2 = c;
  c2.seed = 18;
  CHECK_FALSE(same(clean, load_clean(c2)));

  const auto n = make_noise(c, clean, 0.5);
  CHECK(n.reference_std == doctest::Approx(std::sqrt(variance(clean))));
  CHECK(n.pixel_variance() == doctest::Approx(0.25 * variance(clean)));
  CHECK_THROWS_AS(make_noise(c, Field2D(4, 4, 1.0), 0.5), Error);
}

TEST_CASE("representation factory") {
  auto c = small_config();
  const auto y = load_clean(c);
  const auto bank = make_bank(c, y.shape());
  CHECK(bank->J == 3);
  CHECK(make_representation(c, y, bank)->size() == WphLayout::closed_form_count(3, 4, ClassMask::all()));
  c.representation.kind = RepresentationKind::PowerSpectrum;
  CHECK(make_representation(c, y, bank)->size() == 12);
  c.representation.kind = RepresentationKind::Identity;
  CHECK(make_representation(c, y, bank)->size() == 32 * 32);
  c = small_config(Algorithm::Perturbative);
  CHECK(make_representation(c, y, bank)->size() == WphLayout::closed_form_count(3, 4, c.effective_mask()));
}

TEST_CASE("run_cell") {
  const auto c = small_config();
  const auto clean = load_clean(c);

  SUBCASE("reruns are identical") {
    const auto a = run_cell(c, clean, 0.5, 0, 0);
    const auto b = run_cell(c, clean, 0.5, 0, 0);
    CHECK(same(a.estimate, b.estimate));
    CHECK(same(a.observation, b.observation));
    const auto other = run_cell(c, clean, 0.5, 0, 1);
    CHECK_FALSE(same(a.observation, other.observation));
    CHECK(a.report.algorithm == "vanilla");
    CHECK(a.report.realization == 0);
    CHECK(other.report.realization == 1);
    CHECK(a.trace.rows.size() == 3);
  }
  SUBCASE("vanishing noise is nearly a no-op") {
    const auto r = run_cell(c, clean, 1e-6, 0, 0);
    CHECK(r.report.psnr_input_db > 100.0);
    CHECK(r.report.psnr_db > 60.0);
  }
  SUBCASE("single-stage diffusive matches vanilla") {
    auto d = c;
    d.algorithm = Algorithm::Diffusive;
    d.P = 1;
    const auto a = run_cell(c, clean, 0.5, 2, 1);
    const auto b = run_cell(d, clean, 0.5, 2, 1);
    CHECK(same(a.estimate, b.estimate));
  }
  SUBCASE("analytic oracle is the pixelwise threshold") {
    auto o = c;
    o.algorithm = Algorithm::AnalyticOracle;
    const auto r = run_cell(o, clean, 0.5, 0, 0);
    CHECK(r.trace.rows.empty());
    const double s2 = 3.0 * 0.25 * variance(clean);
    for (std::size_t i = 0; i < clean.size(); ++i) {
      const double y = r.observation[i];
      const double want = y * y <= s2 ? 0.0 : std::copysign(std::sqrt(y * y - s2), y);
      CHECK(r.estimate[i] == doctest::Approx(want));
    }
    o.noise_kind = NoiseKind::Pink;
    CHECK_THROWS_AS(run_cell(o, clean, 0.5, 0, 0), Error);
  }
  SUBCASE("other algorithms run") {
    for (auto a : {Algorithm::Diffusive, Algorithm::Perturbative, Algorithm::Delouis}) {
      auto o = c;
      o.algorithm = a;
      o.P = 2;
      o.T = 2;
      const auto r = run_cell(o, clean, 0.5, 0, 0);
      CHECK_FALSE(r.trace.aborted);
      CHECK(r.trace.stage_outputs.size() == 2);
      CHECK(std::isfinite(r.report.psnr_db));
    }
  }
}

TEST_CASE("run_sweep") {
  auto c = small_config(Algorithm::AnalyticOracle);
  c.realizations = 5;
  const auto clean = load_clean(c);
  const auto sigmas = default_sigma_grid();

  SUBCASE("row count, order and job independence") {
    std::size_t calls = 0;
    const auto rows = run_sweep(c, clean, sigmas, 1, [&](const EvalReport&, const std::string& err) {
      ++calls;
      CHECK(err.empty());
    });
    REQUIRE(rows.size() == sigmas.size() * 5);
    CHECK(calls == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(rows[i].sigma == sigmas[i / 5]);
      CHECK(rows[i].realization == i % 5);
    }
    const auto parallel = run_sweep(c, clean, sigmas, 3);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(parallel[i].psnr_db == rows[i].psnr_db);

    // Noisy-input PSNR averaged over realizations falls as sigma grows.
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < sigmas.size(); ++s) {
      double m = 0.0;
      for (std::size_t r = 0; r < 5; ++r) m += rows[s * 5 + r].psnr_input_db / 5.0;
      CHECK(m < prev);
      prev = m;
    }

    const auto dir = std::filesystem::temp_directory_path() / "statsep_sweep_plot";
    std::filesystem::create_directories(dir);
    plot_sweep(rows, dir);
    CHECK(std::filesystem::file_size(dir / "psnr_vs_sigma.png") > 0);
    CHECK(std::filesystem::file_size(dir / "rel_err_vs_sigma.png") > 0);
    std::filesystem::remove_all(dir);
  }
  SUBCASE("failed cells become NaN rows") {
    c.noise_kind = NoiseKind::Blue;  // the analytic oracle needs white noise
    c.realizations = 2;
    std::size_t errors = 0;
    const auto rows = run_sweep(c, clean, {0.2, 0.4}, 2, [&](const EvalReport&, const std::string& err) {
      if (!err.empty()) ++errors;
    });
    REQUIRE(rows.size() == 4);
    CHECK(errors == 4);
    for (const auto& r : rows) {
      CHECK(std::isnan(r.psnr_db));
      CHECK(r.algorithm == "analytic-oracle");
    }
  }
}
