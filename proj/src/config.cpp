#include "statsep/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <type_traits>

namespace statsep {
namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"run", {"algorithm", "seed", "realizations", "out", "jobs", "threads"}},
      {"input", {"image", "texture", "slope", "height", "width", "seed", "contrast"}},
      {"noise", {"kind", "sigma", "crosses_density"}},
      {"representation", {"kind", "J", "L", "classes", "normalize"}},
      {"optimizer", {"Q", "T", "P", "history", "c1", "backtrack", "max_backtracks", "initial_step", "max_step",
                     "correction_gradient"}},
      {"sweep", {"sigmas", "sigma_min", "sigma_max", "count"}},
  };
  return keys;
}

// Strict conversion: the whole value must parse, so a typo is an error
// rather than a silent fallback to the default.
template <typename T>
T convert(const std::string& key, const std::string& text) {
  if constexpr (std::is_same_v<T, std::string>) {
    return text;
  } else {
    T v{};
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) throw Error(ErrorKind::Config, "bad value for " + key + ": '" + text + "'");
    return v;
  }
}

template <typename T>
std::optional<T> get_opt(const pt::ptree& tree, const std::string& key) {
  if (auto v = tree.get_optional<std::string>(key)) return convert<T>(key, *v);
  return std::nullopt;
}

template <typename T>
T get(const pt::ptree& tree, const std::string& key, T fallback) {
  return get_opt<T>(tree, key).value_or(fallback);
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw Error(ErrorKind::Config, "expected a boolean, got " + s);
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    out.push_back(convert<double>("list item", b == std::string::npos ? "" : item.substr(b, e - b + 1)));
  }
  return out;
}

// Library errors raised while interpreting names become configuration errors.
template <typename Fn>
auto as_config(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    throw Error(ErrorKind::Config, e.what());
  }
}

}  // namespace

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Vanilla: return "vanilla";
    case Algorithm::Diffusive: return "diffusive";
    case Algorithm::Perturbative: return "perturbative";
    case Algorithm::Delouis: return "delouis";
    case Algorithm::AnalyticOracle: return "analytic-oracle";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
  for (auto a : {Algorithm::Vanilla, Algorithm::Diffusive, Algorithm::Perturbative, Algorithm::Delouis,
                 Algorithm::AnalyticOracle})
    if (to_string(a) == name) return a;
  throw Error(ErrorKind::Config, "unknown algorithm: " + name);
}

std::string to_string(RepresentationKind k) {
  switch (k) {
    case RepresentationKind::Wph: return "wph";
    case RepresentationKind::PowerSpectrum: return "power_spectrum";
    case RepresentationKind::Identity: return "identity";
  }
  return "unknown";
}

RepresentationKind parse_representation_kind(const std::string& name) {
  for (auto k : {RepresentationKind::Wph, RepresentationKind::PowerSpectrum, RepresentationKind::Identity})
    if (to_string(k) == name) return k;
  throw Error(ErrorKind::Config, "unknown representation: " + name);
}

std::vector<double> log_spaced(double lo, double hi, std::size_t n) {
  if (n == 1) return {lo};
  std::vector<double> out(n);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

std::vector<double> default_sigma_grid() { return log_spaced(0.1, 2.14, 10); }

ClassMask RunConfig::effective_mask() const {
  if (representation.mask) return *representation.mask;
  if (algorithm == Algorithm::Perturbative) return ClassMask::only({WphClass::S11, WphClass::S01});
  return ClassMask::all();
}

void RunConfig::validate() const {
  if (realizations < 1) throw Error(ErrorKind::Config, "realizations must be >= 1");
  if (!(sigma > 0.0)) throw Error(ErrorKind::Config, "noise sigma must be > 0");
  if (jobs < 1 || threads < 1) throw Error(ErrorKind::Config, "jobs and threads must be >= 1");
  if (Q && *Q < 1) throw Error(ErrorKind::Config, "Q must be >= 1");
  if (T && *T < 1) throw Error(ErrorKind::Config, "T must be >= 1");
  if (P && *P < 1) throw Error(ErrorKind::Config, "P must be >= 1");
  if (algorithm == Algorithm::Delouis && Q && *Q < 2) throw Error(ErrorKind::Config, "delouis needs Q >= 2");
  if (image && !std::filesystem::exists(*image)) throw Error(ErrorKind::Config, "input image not found: " + image->string());
  if (!image) as_config([&] { texture.validate(); return 0; });
  if (representation.L < 1) throw Error(ErrorKind::Config, "L must be >= 1");
  if (representation.J && *representation.J < 1) throw Error(ErrorKind::Config, "J must be >= 1");
  if (!effective_mask().any()) throw Error(ErrorKind::Config, "class mask selects no coefficients");
  for (double s : sweep_sigmas)
    if (!(s > 0.0)) throw Error(ErrorKind::Config, "sweep sigmas must be > 0");
  optimizer.validate();
}

SeparationConfig RunConfig::separation_config(double s, std::uint64_t run_seed) const {
  SeparationConfig c;
  c.Q = Q.value_or(100);
  c.T = T.value_or(algorithm == Algorithm::Perturbative ? 10 : 30);
  if (algorithm == Algorithm::Diffusive || algorithm == Algorithm::Perturbative) {
    c.P = P.value_or(std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(10.0 * s))));
    c.schedule = uniform_schedule(c.P);
  } else if (algorithm == Algorithm::Delouis) {
    c.P = P.value_or(1);
    c.schedule = uniform_schedule(c.P);
  }
  c.optimizer = optimizer;
  c.loss_kind = algorithm == Algorithm::Perturbative ? LossKind::Perturbative : LossKind::MonteCarlo;
  c.correction_gradient = correction_gradient;
  c.seed = run_seed;
  c.threads = threads;
  return c;
}

RunConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::Config, std::string("config parse error: ") + e.what());
  }
  const auto& known = known_keys();
  for (const auto& [section, body] : tree) {
    const auto it = known.find(section);
    if (it == known.end()) throw Error(ErrorKind::Config, "unknown config section [" + section + "]");
    if (body.empty() && !body.data().empty()) throw Error(ErrorKind::Config, "key outside a section: " + section);
    for (const auto& [key, value] : body)
      if (!it->second.count(key)) throw Error(ErrorKind::Config, "unknown key " + section + "." + key);
  }

  RunConfig c;
  return as_config([&] {
    c.algorithm = parse_algorithm(get<std::string>(tree, "run.algorithm", "vanilla"));
    c.seed = get<std::uint64_t>(tree, "run.seed", 0);
    c.realizations = get<std::size_t>(tree, "run.realizations", 1);
    c.out_dir = get<std::string>(tree, "run.out", "out");
    c.jobs = get<std::size_t>(tree, "run.jobs", 1);
    c.threads = get<std::size_t>(tree, "run.threads", 1);

    if (auto img = get_opt<std::string>(tree, "input.image")) c.image = *img;
    c.texture.kind = parse_texture_kind(get<std::string>(tree, "input.texture", "lognormal_field"));
    c.texture.spectral_slope = get<double>(tree, "input.slope", -1.5);
    c.texture.shape = {get<std::size_t>(tree, "input.height", 64), get<std::size_t>(tree, "input.width", 64)};
    c.texture.seed = get<std::uint64_t>(tree, "input.seed", 0);
    c.texture.lognormal_contrast = get<double>(tree, "input.contrast", 1.0);

    c.noise_kind = parse_noise_kind(get<std::string>(tree, "noise.kind", "white"));
    c.sigma = get<double>(tree, "noise.sigma", 1.0);
    c.crosses_density = get<double>(tree, "noise.crosses_density", 2e-3);

    c.representation.kind = parse_representation_kind(get<std::string>(tree, "representation.kind", "wph"));
    c.representation.J = get_opt<std::size_t>(tree, "representation.J");
    c.representation.L = get<std::size_t>(tree, "representation.L", 4);
    if (auto m = get_opt<std::string>(tree, "representation.classes")) c.representation.mask = ClassMask::parse(*m);
    c.representation.normalize = parse_bool(get<std::string>(tree, "representation.normalize", "true"));

    c.Q = get_opt<std::size_t>(tree, "optimizer.Q");
    c.T = get_opt<std::size_t>(tree, "optimizer.T");
    c.P = get_opt<std::size_t>(tree, "optimizer.P");
    c.optimizer.history = get<std::size_t>(tree, "optimizer.history", c.optimizer.history);
    c.optimizer.c1 = get<double>(tree, "optimizer.c1", c.optimizer.c1);
    c.optimizer.backtrack = get<double>(tree, "optimizer.backtrack", c.optimizer.backtrack);
    c.optimizer.max_backtracks = get<std::size_t>(tree, "optimizer.max_backtracks", c.optimizer.max_backtracks);
    c.optimizer.initial_step = get<double>(tree, "optimizer.initial_step", c.optimizer.initial_step);
    c.optimizer.max_step = get<double>(tree, "optimizer.max_step", c.optimizer.max_step);
    const auto cg = get<std::string>(tree, "optimizer.correction_gradient", "analytic");
    if (cg == "analytic") c.correction_gradient = CorrectionGradient::Analytic;
    else if (cg == "finite_difference") c.correction_gradient = CorrectionGradient::FiniteDifference;
    else throw Error(ErrorKind::Config, "correction_gradient must be analytic or finite_difference");

    if (auto s = get_opt<std::string>(tree, "sweep.sigmas")) {
      c.sweep_sigmas = parse_list(*s);
    } else if (tree.get_child_optional("sweep")) {
      c.sweep_sigmas = log_spaced(get<double>(tree, "sweep.sigma_min", 0.1), get<double>(tree, "sweep.sigma_max", 2.14),
                                  get<std::size_t>(tree, "sweep.count", 10));
    }
    return c;
  });
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot open config: " + path.string());
  auto cfg = parse_config(in);
  // Relative image paths are resolved against the config file's directory.
  if (cfg.image && cfg.image->is_relative()) cfg.image = path.parent_path() / *cfg.image;
  return cfg;
}

void write_config(std::ostream& out, const RunConfig& c) {
  const auto old = out.precision(17);
  out << "[run]\nalgorithm = " << to_string(c.algorithm) << "\nseed = " << c.seed << "\nrealizations = " << c.realizations
      << "\nout = " << c.out_dir.string() << "\njobs = " << c.jobs << "\nthreads = " << c.threads << "\n\n[input]\n";
  if (c.image) out << "image = " << c.image->string() << '\n';
  out << "texture = " << to_string(c.texture.kind) << "\nslope = " << c.texture.spectral_slope
      << "\nheight = " << c.texture.shape.height << "\nwidth = " << c.texture.shape.width << "\nseed = " << c.texture.seed
      << "\ncontrast = " << c.texture.lognormal_contrast << "\n\n[noise]\nkind = " << to_string(c.noise_kind)
      << "\nsigma = " << c.sigma << "\ncrosses_density = " << c.crosses_density << "\n\n[representation]\nkind = "
      << to_string(c.representation.kind) << '\n';
  if (c.representation.J) out << "J = " << *c.representation.J << '\n';
  out << "L = " << c.representation.L << '\n';
  if (c.representation.mask) out << "classes = " << c.representation.mask->to_string() << '\n';
  out << "normalize = " << (c.representation.normalize ? "true" : "false") << "\n\n[optimizer]\n";
  if (c.Q) out << "Q = " << *c.Q << '\n';
  if (c.T) out << "T = " << *c.T << '\n';
  if (c.P) out << "P = " << *c.P << '\n';
  out << "history = " << c.optimizer.history << "\nc1 = " << c.optimizer.c1 << "\nbacktrack = " << c.optimizer.backtrack
      << "\nmax_backtracks = " << c.optimizer.max_backtracks << "\ninitial_step = " << c.optimizer.initial_step
      << "\nmax_step = " << c.optimizer.max_step << "\ncorrection_gradient = "
      << (c.correction_gradient == CorrectionGradient::Analytic ? "analytic" : "finite_difference") << '\n';
  if (!c.sweep_sigmas.empty()) {
    out << "\n[sweep]\nsigmas = ";
    for (std::size_t i = 0; i < c.sweep_sigmas.size(); ++i) out << (i ? "," : "") << c.sweep_sigmas[i];
    out << '\n';
  }
  out.precision(old);
}

}  // namespace statsep
