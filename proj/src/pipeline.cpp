#include "statsep/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "statsep/analytic.hpp"
#include "statsep/io.hpp"
#include "statsep/plot.hpp"

namespace statsep {

Field2D load_clean(const RunConfig& cfg) {
  if (cfg.image) return io::load_image(*cfg.image);
  TextureSpec spec = cfg.texture;
  spec.seed = derive_seed(cfg.seed, 0x7e7, cfg.texture.seed);
  return generate(spec);
}

std::shared_ptr<const FilterBank> make_bank(const RunConfig& cfg, Shape shape) {
  const std::size_t J = cfg.representation.J.value_or(default_scale_count(shape.height, shape.width));
  return std::make_shared<const FilterBank>(build_bank(shape.height, shape.width, J, cfg.representation.L));
}

std::unique_ptr<Representation> make_representation(const RunConfig& cfg, const Field2D& y,
                                                     std::shared_ptr<const FilterBank> bank) {
  switch (cfg.representation.kind) {
    case RepresentationKind::Wph: {
      std::optional<NormalizationRef> ref;
      if (cfg.representation.normalize) ref = NormalizationRef::from_observation(y, *bank);
      return std::make_unique<WphRepresentation>(std::move(bank), cfg.effective_mask(), ref);
    }
    case RepresentationKind::PowerSpectrum: return make_power_spectrum_representation(std::move(bank));
    case RepresentationKind::Identity: return LinearRepresentation::identity(y.shape());
  }
  throw Error(ErrorKind::Config, "unknown representation");
}

NoiseModel make_noise(const RunConfig& cfg, const Field2D& clean, double sigma) {
  NoiseModel m;
  m.kind = cfg.noise_kind;
  m.sigma = sigma;
  m.reference_std = std::sqrt(variance(clean));
  if (!(m.reference_std > 0.0)) throw Error(ErrorKind::InvalidArgument, "clean signal is constant");
  m.shape = clean.shape();
  m.crosses_density = cfg.crosses_density;
  return m;
}

RunOutputs run_cell(const RunConfig& cfg, const Field2D& clean, double sigma, std::size_t sigma_index,
                    std::size_t realization) {
  RunOutputs out;
  out.sigma = sigma;
  out.realization = realization;
  const NoiseModel noise = make_noise(cfg, clean, sigma);
  const std::uint64_t noise_seed = derive_seed(cfg.seed, 0x401, sigma_index, realization);
  const std::uint64_t run_seed = derive_seed(cfg.seed, 0x5e9, sigma_index, realization);
  out.observation = clean + sample(noise, noise_seed);

  auto bank = make_bank(cfg, clean.shape());
  if (cfg.algorithm == Algorithm::AnalyticOracle) {
    if (!noise.is_gaussian() || noise.kind != NoiseKind::White) {
      throw Error(ErrorKind::Config, "analytic-oracle needs white Gaussian noise");
    }
    out.estimate = analytic::sqrt_threshold_field(out.observation, sigma * noise.reference_std);
  } else {
    const auto rep = make_representation(cfg, out.observation, bank);
    const SeparationConfig sc = cfg.separation_config(sigma, run_seed);
    SeparationResult r;
    switch (cfg.algorithm) {
      case Algorithm::Vanilla: r = vanilla_separate(out.observation, noise, *rep, sc); break;
      case Algorithm::Diffusive:
      case Algorithm::Perturbative: r = diffusive_separate(out.observation, noise, *rep, sc); break;
      case Algorithm::Delouis: r = delouis_separate(out.observation, noise, *rep, sc); break;
      case Algorithm::AnalyticOracle: break;
    }
    out.estimate = std::move(r.estimate);
    out.trace = std::move(r.trace);
  }
  if (out.trace.aborted) {
    out.report = EvalReport::failed(to_string(cfg.algorithm), sigma, cfg.noise_kind, cfg.seed, realization);
    return out;
  }
  out.report = evaluate_estimate(out.estimate, out.observation, clean, *bank);
  out.report.algorithm = to_string(cfg.algorithm);
  out.report.sigma = sigma;
  out.report.noise_kind = cfg.noise_kind;
  out.report.seed = cfg.seed;
  out.report.realization = realization;
  return out;
}

std::vector<EvalReport> run_sweep(const RunConfig& cfg, const Field2D& clean, const std::vector<double>& sigmas,
                                  std::size_t jobs,
                                  const std::function<void(const EvalReport&, const std::string&)>& on_cell) {
  const std::size_t R = cfg.realizations;
  const std::size_t cells = sigmas.size() * R;
  std::vector<EvalReport> rows(cells);
  std::mutex report_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < cells; c = next++) {
      const std::size_t si = c / R, r = c % R;
      std::string error;
      try {
        auto out = run_cell(cfg, clean, sigmas[si], si, r);
        if (out.trace.aborted) error = out.trace.abort_message;
        rows[c] = std::move(out.report);
      } catch (const std::exception& e) {
        error = e.what();
        rows[c] = EvalReport::failed(to_string(cfg.algorithm), sigmas[si], cfg.noise_kind, cfg.seed, r);
      }
      if (on_cell) {
        std::lock_guard<std::mutex> lock(report_mutex);
        on_cell(rows[c], error);
      }
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, cells));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return rows;
}

void plot_sweep(const std::vector<EvalReport>& rows, const std::filesystem::path& dir) {
  // Mean over realizations per sigma, skipping NaN rows.
  struct Acc {
    double sum = 0.0;
    std::size_t n = 0;
    void add(double v) {
      if (std::isfinite(v)) sum += v, ++n;
    }
    double mean() const { return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN(); }
  };
  std::map<double, std::map<std::string, Acc>> by_sigma;
  for (const auto& r : rows) {
    auto& m = by_sigma[r.sigma];
    m["psnr"].add(r.psnr_db);
    m["psnr_input"].add(r.psnr_input_db);
    for (const auto& [c, v] : r.rel_err_by_class) m[to_string(c)].add(v);
    for (const auto& [c, v] : r.rel_err_input_by_class) m[to_string(c) + " noisy"].add(v);
  }
  auto series = [&](const std::string& key, const std::string& label) {
    plot::Series s{label, {}, {}};
    for (const auto& [sigma, m] : by_sigma) {
      s.x.push_back(sigma);
      const auto it = m.find(key);
      s.y.push_back(it == m.end() ? std::numeric_limits<double>::quiet_NaN() : it->second.mean());
    }
    return s;
  };
  const std::string algo = rows.empty() ? "" : rows.front().algorithm;
  plot::write_line_plot(dir / "psnr_vs_sigma.png", {"PSNR VS NOISE LEVEL", "SIGMA", "PSNR (DB)", true, false},
                        {series("psnr", algo), series("psnr_input", "noisy input")});
  std::vector<plot::Series> rel;
  for (auto c : {WphClass::S11, WphClass::S00, WphClass::S01, WphClass::C01}) rel.push_back(series(to_string(c), to_string(c)));
  rel.push_back(series("S11 noisy", "S11 noisy"));
  plot::write_line_plot(dir / "rel_err_vs_sigma.png", {"WPH RELATIVE ERROR PER CLASS", "SIGMA", "RELATIVE ERROR", true, true},
                        rel);
}

}  // namespace statsep
