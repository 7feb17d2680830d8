#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "statsep/config.hpp"
#include "statsep/io.hpp"
#include "statsep/oracle.hpp"
#include "statsep/pipeline.hpp"
#include "statsep/wavelets.hpp"
#include "statsep/wph.hpp"

namespace fs = std::filesystem;
using namespace statsep;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitAbort = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "INI run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "master seed (overrides the config)");
  cmd->add_option("--jobs", f.jobs, "parallel workers (STATSEP_THREADS takes precedence)")->check(CLI::PositiveNumber);
  cmd->add_option("--out", f.out, "output directory (overrides the config)");
}

std::size_t jobs_from_env(std::size_t fallback) {
  const char* env = std::getenv("STATSEP_THREADS");
  if (!env || !*env) return fallback;
  try {
    const long v = std::stol(env);
    if (v < 1) throw std::invalid_argument("");
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw Error(ErrorKind::Config, std::string("STATSEP_THREADS must be a positive integer, got '") + env + "'");
  }
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (f.jobs) cfg.jobs = *f.jobs;
  if (!f.out.empty()) cfg.out_dir = f.out;
  cfg.jobs = jobs_from_env(cfg.jobs);
  cfg.validate();
  return cfg;
}

void write_field(const fs::path& stem, const Field2D& f) {
  io::write_grid(fs::path(stem).concat(".ssf"), f);
  io::write_png(fs::path(stem).concat(".png"), f);
}

void save_effective_config(const RunConfig& cfg) {
  std::ofstream out(cfg.out_dir / "config.ini");
  write_config(out, cfg);
}

int cmd_denoise(const RunConfig& in) {
  RunConfig cfg = in;
  // A single cell: the workers go to the Monte Carlo batch instead.
  cfg.threads = std::max(cfg.threads, cfg.jobs);
  fs::create_directories(cfg.out_dir);
  save_effective_config(cfg);
  const Field2D clean = load_clean(cfg);
  const auto r = run_cell(cfg, clean, cfg.sigma, 0, 0);
  write_field(cfg.out_dir / "clean", clean);
  write_field(cfg.out_dir / "observation", r.observation);
  write_field(cfg.out_dir / "estimate", r.estimate);
  {
    std::ofstream trace(cfg.out_dir / "trace.csv");
    r.trace.write_csv(trace);
  }
  for (const auto& w : r.trace.warnings) std::cerr << "warning: " << w << "\n";
  if (r.trace.aborted) {
    std::cerr << "error: " << r.trace.abort_message << " (last finite iterate written)\n";
    return kExitAbort;
  }
  std::ofstream metrics(cfg.out_dir / "metrics.csv");
  metrics << EvalReport::csv_header() << "\n";
  r.report.write_csv_row(metrics);
  std::cout << "psnr " << r.report.psnr_db << " dB (input " << r.report.psnr_input_db << " dB), S11 rel err "
            << r.report.rel_err_by_class.at(WphClass::S11) << "\n";
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  save_effective_config(cfg);
  const Field2D clean = load_clean(cfg);
  const auto sigmas = cfg.sweep_sigmas.empty() ? default_sigma_grid() : cfg.sweep_sigmas;
  std::size_t failed = 0;
  const auto rows = run_sweep(cfg, clean, sigmas, cfg.jobs, [&](const EvalReport& row, const std::string& error) {
    if (!error.empty()) {
      ++failed;
      std::cerr << "cell sigma=" << row.sigma << " realization=" << row.realization << " failed: " << error << "\n";
    } else {
      std::cerr << "cell sigma=" << row.sigma << " realization=" << row.realization << " psnr=" << row.psnr_db << "\n";
    }
  });
  {
    std::ofstream metrics(cfg.out_dir / "metrics.csv");
    metrics << EvalReport::csv_header() << "\n";
    for (const auto& r : rows) r.write_csv_row(metrics);
  }
  plot_sweep(rows, cfg.out_dir);
  std::cout << rows.size() << " rows written, " << failed << " failed\n";
  return 0;
}

int cmd_synth(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  write_field(cfg.out_dir / "texture", load_clean(cfg));
  return 0;
}

int cmd_wph_dump(const RunConfig& cfg, const std::string& input, bool filters) {
  fs::create_directories(cfg.out_dir);
  const Field2D x = input.empty() ? load_clean(cfg) : io::load_image(input);
  const auto bank = make_bank(cfg, x.shape());
  const auto coeffs = wph_compute(x, *bank, cfg.representation.mask.value_or(ClassMask::all()));
  std::ofstream out(cfg.out_dir / "wph.csv");
  write_coefficients_csv(out, coeffs, *bank);
  if (filters) dump_bank(*bank, cfg.out_dir / "filters");
  std::cout << coeffs.size() << " coefficients (J=" << bank->J << ", L=" << bank->L << ")\n";
  return 0;
}

int cmd_oracle(std::optional<std::uint64_t> seed, std::size_t jobs, bool forced_bug) {
  oracle::OracleOptions o;
  if (seed) o.seed = *seed;
  o.threads = jobs_from_env(jobs);
  o.forced_bug = forced_bug;
  const auto results = oracle::run_all(o);
  oracle::print_table(std::cout, results);
  for (const auto& r : results)
    if (!r.pass) return kExitFailure;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Statistical component separation by representation matching"};
  app.require_subcommand(1);

  CommonFlags denoise_f, sweep_f, synth_f, dump_f, oracle_f;
  auto* denoise = app.add_subcommand("denoise", "separate one noisy observation");
  add_common(denoise, denoise_f);
  auto* sweep = app.add_subcommand("sweep", "run every (sigma, realization) cell and plot the metrics");
  add_common(sweep, sweep_f);
  auto* synth = app.add_subcommand("synth", "generate the configured synthetic texture");
  add_common(synth, synth_f);
  auto* dump = app.add_subcommand("wph-dump", "write the WPH coefficients of a field as CSV");
  add_common(dump, dump_f);
  std::string dump_input;
  bool dump_filters = false;
  dump->add_option("--input", dump_input, "image (.png) or grid file; default is the configured texture")
      ->check(CLI::ExistingFile);
  dump->add_flag("--filters", dump_filters, "also write the filter bank");
  auto* oracle_cmd = app.add_subcommand("oracle-check", "compare numerical minima with the closed-form oracles");
  add_common(oracle_cmd, oracle_f);
  bool forced_bug = false;
  oracle_cmd->add_flag("--forced-bug", forced_bug, "use a wrong threshold constant (negative control)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*denoise) return cmd_denoise(resolve(denoise_f));
    if (*sweep) return cmd_sweep(resolve(sweep_f));
    if (*synth) return cmd_synth(resolve(synth_f));
    if (*dump) return cmd_wph_dump(resolve(dump_f), dump_input, dump_filters);
    if (*oracle_cmd) return cmd_oracle(oracle_f.seed, oracle_f.jobs.value_or(1), forced_bug);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (e.kind() == ErrorKind::Config) return kExitConfig;
    if (e.kind() == ErrorKind::NumericalAbort) return kExitAbort;
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
