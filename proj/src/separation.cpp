#include "statsep/separation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <thread>

namespace statsep {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double inf_norm(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

// Partial sums over one block of Monte Carlo samples.
struct BlockResult {
  std::size_t n = 0;
  double value = 0.0;
  std::vector<double> grad;
  CVector mean;
  std::vector<double> m2;
};

void merge_into(BlockResult& a, const BlockResult& b) {
  if (b.n == 0) return;
  if (!a.grad.empty())
    for (std::size_t i = 0; i < a.grad.size(); ++i) a.grad[i] += b.grad[i];
  if (!a.mean.empty()) {
    // Chan et al. pairwise update of mean and sum of squared deviations.
    const double na = static_cast<double>(a.n), nb = static_cast<double>(b.n), n = na + nb;
    for (std::size_t k = 0; k < a.mean.size(); ++k) {
      const cplx delta = b.mean[k] - a.mean[k];
      a.mean[k] += delta * (nb / n);
      a.m2[k] += b.m2[k] + std::norm(delta) * na * nb / n;
    }
  }
  a.value += b.value;
  a.n += b.n;
}

BlockResult tree_reduce(std::vector<BlockResult> parts) {
  while (parts.size() > 1) {
    std::vector<BlockResult> next;
    next.reserve((parts.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < parts.size(); i += 2) {
      merge_into(parts[i], parts[i + 1]);
      next.push_back(std::move(parts[i]));
    }
    if (parts.size() % 2 == 1) next.push_back(std::move(parts.back()));
    parts = std::move(next);
  }
  return std::move(parts.front());
}

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  std::atomic<std::size_t> next{0};
  auto worker = [&](std::size_t id) {
    for (std::size_t i = next++; i < count; i = next++) fn(id, i);
  };
  if (threads == 1) {
    worker(0);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker, t);
  for (auto& t : pool) t.join();
}

}  // namespace

double LossEvaluation::standard_error() const {
  const std::size_t n = sample_losses.size();
  if (n < 2) return 0.0;
  const double mu = std::accumulate(sample_losses.begin(), sample_losses.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : sample_losses) ss += (v - mu) * (v - mu);
  return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
}

std::vector<double> LossEvaluation::phi_variance() const {
  const std::size_t n = sample_losses.size();
  std::vector<double> out(phi_m2.size(), 0.0);
  if (n < 2) return out;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = phi_m2[k] / static_cast<double>(n - 1);
  return out;
}

MonteCarloLoss::MonteCarloLoss(const Representation& rep, NoiseModel noise, std::size_t threads)
    : rep_(rep), sampler_(std::move(noise)), threads_(std::max<std::size_t>(1, threads)) {
  if (!(sampler_.model().shape == rep_.shape())) {
    throw Error(ErrorKind::ShapeMismatch, "noise shape " + to_string(sampler_.model().shape) +
                                              " does not match representation shape " + to_string(rep_.shape()));
  }
}

std::size_t MonteCarloLoss::block_size(std::size_t Q) { return std::max<std::size_t>(8, (Q + 255) / 256); }

LossEvaluation MonteCarloLoss::evaluate(const Field2D& x, std::span<const cplx> phi_y, double alpha, std::size_t Q,
                                        std::uint64_t seed, const LossOptions& options) const {
  if (Q < 1) throw Error(ErrorKind::InvalidArgument, "Monte Carlo batch size Q must be >= 1");
  if (!(x.shape() == rep_.shape())) throw Error(ErrorKind::ShapeMismatch, "mc_loss: x has the wrong shape");
  if (phi_y.size() != rep_.size()) throw Error(ErrorKind::ShapeMismatch, "mc_loss: phi_y length does not match K");

  const std::size_t K = rep_.size(), M = x.size();
  const std::size_t bs = block_size(Q);
  const std::size_t blocks = (Q + bs - 1) / bs;
  std::vector<BlockResult> parts(blocks);
  LossEvaluation out;
  out.sample_losses.assign(Q, 0.0);

  // One workspace per worker, created on first use.
  const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, blocks));
  std::vector<std::unique_ptr<RepresentationWorkspace>> spaces(threads);

  auto run_block = [&](std::size_t worker, std::size_t b) {
    if (!spaces[worker]) spaces[worker] = rep_.workspace();
    auto& ws = *spaces[worker];
    BlockResult& r = parts[b];
    if (options.with_gradient) r.grad.assign(M, 0.0);
    if (options.with_moments) {
      r.mean.assign(K, 0.0);
      r.m2.assign(K, 0.0);
    }
    auto rng = make_engine(derive_seed(seed, b));
    Field2D eps(x.shape()), xp(x.shape());
    CVector phi(K), diff(K);
    std::vector<double> g(M);
    const std::size_t begin = b * bs, end = std::min(Q, begin + bs);
    for (std::size_t q = begin; q < end; ++q) {
      sampler_.sample_into(rng, eps);
      for (std::size_t p = 0; p < M; ++p) xp[p] = x[p] + alpha * eps[p];
      ws.evaluate(xp, phi);
      double loss = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        diff[k] = phi[k] - phi_y[k];
        loss += std::norm(diff[k]);
      }
      out.sample_losses[q] = loss;
      r.value += loss;
      ++r.n;
      if (options.with_gradient) {
        ws.adjoint(diff, g);
        for (std::size_t p = 0; p < M; ++p) r.grad[p] += g[p];
      }
      if (options.with_moments) {
        const double n = static_cast<double>(r.n);
        for (std::size_t k = 0; k < K; ++k) {
          const cplx d = phi[k] - r.mean[k];
          r.mean[k] += d / n;
          r.m2[k] += (std::conj(d) * (phi[k] - r.mean[k])).real();
        }
      }
    }
  };
  parallel_for(blocks, threads, run_block);

  BlockResult total = tree_reduce(std::move(parts));
  const double inv_q = 1.0 / static_cast<double>(Q);
  out.value = total.value * inv_q;
  if (options.with_gradient) {
    out.gradient = Field2D(x.shape());
    for (std::size_t p = 0; p < M; ++p) out.gradient[p] = total.grad[p] * inv_q;
  }
  if (options.with_moments) {
    out.phi_mean = std::move(total.mean);
    out.phi_m2 = std::move(total.m2);
  }
  return out;
}

LossEvaluation mc_loss(const Field2D& x, std::span<const cplx> phi_y, const Representation& rep,
                       const NoiseModel& noise, double alpha, std::size_t Q, std::uint64_t seed,
                       const LossOptions& options) {
  return MonteCarloLoss(rep, noise, options.threads).evaluate(x, phi_y, alpha, Q, seed, options);
}

LossEvaluation perturbative_loss(const Field2D& x, std::span<const cplx> phi_y, const Representation& rep,
                                 const Field2D& pixel_variance, double alpha, bool with_gradient,
                                 CorrectionGradient method) {
  if (!rep.supports_perturbative()) {
    throw Error(ErrorKind::InvalidArgument, rep.name() + " representation does not support the perturbative loss");
  }
  if (phi_y.size() != rep.size()) throw Error(ErrorKind::ShapeMismatch, "perturbative_loss: phi_y length mismatch");
  const CVector phi = rep.eval(x);
  CVector diff(phi.size());
  LossEvaluation out;
  for (std::size_t k = 0; k < phi.size(); ++k) {
    diff[k] = phi[k] - phi_y[k];
    out.value += std::norm(diff[k]);
  }
  if (with_gradient) out.gradient = rep.gradient_adjoint(x, diff);
  if (alpha != 0.0) {
    const auto corr = method == CorrectionGradient::Analytic
                          ? rep.perturbative_correction(x, pixel_variance, phi_y, with_gradient)
                          : rep.Representation::perturbative_correction(x, pixel_variance, phi_y, with_gradient);
    const double a2 = alpha * alpha;
    out.value += a2 * corr.value;
    if (with_gradient)
      for (std::size_t p = 0; p < x.size(); ++p) out.gradient[p] += a2 * corr.gradient[p];
  }
  return out;
}

LossEvaluation weighted_loss(const Field2D& x, std::span<const cplx> target, std::span<const cplx> offset,
                             std::span<const double> weights, const Representation& rep, bool with_gradient) {
  const std::size_t K = rep.size();
  if (target.size() != K || offset.size() != K || weights.size() != K) {
    throw Error(ErrorKind::ShapeMismatch, "weighted_loss: vector lengths must equal K");
  }
  const CVector phi = rep.eval(x);
  CVector cot(K);
  LossEvaluation out;
  for (std::size_t k = 0; k < K; ++k) {
    const cplx r = phi[k] + offset[k] - target[k];
    out.value += weights[k] * std::norm(r);
    cot[k] = weights[k] * r;
  }
  if (with_gradient) out.gradient = rep.gradient_adjoint(x, cot);
  return out;
}

// --- L-BFGS ------------------------------------------------------------------

void LbfgsSettings::validate() const {
  if (history < 1) throw Error(ErrorKind::Config, "optimizer history must be >= 1");
  if (!(c1 > 0.0 && c1 < 1.0)) throw Error(ErrorKind::Config, "optimizer c1 must lie in (0, 1)");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw Error(ErrorKind::Config, "optimizer backtrack must lie in (0, 1)");
  if (max_backtracks < 1) throw Error(ErrorKind::Config, "optimizer max_backtracks must be >= 1");
  if (!(initial_step > 0.0)) throw Error(ErrorKind::Config, "optimizer initial_step must be > 0");
  if (!(max_step > 0.0)) throw Error(ErrorKind::Config, "optimizer max_step must be > 0");
}

Lbfgs::Lbfgs(LbfgsSettings settings) : settings_(settings) { settings_.validate(); }

std::vector<std::pair<std::vector<double>, std::vector<double>>> Lbfgs::history() const {
  std::vector<std::pair<std::vector<double>, std::vector<double>>> out;
  for (const auto& p : pairs_) out.emplace_back(p.s, p.y);
  return out;
}

std::vector<double> Lbfgs::direction(std::span<const double> g) const {
  std::vector<double> q(g.begin(), g.end());
  std::vector<double> a(pairs_.size());
  for (std::size_t i = pairs_.size(); i-- > 0;) {
    const auto& p = pairs_[i];
    a[i] = p.rho * dot(p.s, q);
    for (std::size_t j = 0; j < q.size(); ++j) q[j] -= a[i] * p.y[j];
  }
  const auto& last = pairs_.back();
  const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
  for (auto& v : q) v *= gamma;
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    const auto& p = pairs_[i];
    const double b = p.rho * dot(p.y, q);
    for (std::size_t j = 0; j < q.size(); ++j) q[j] += (a[i] - b) * p.s[j];
  }
  for (auto& v : q) v = -v;
  return q;
}

Lbfgs::StepResult Lbfgs::step(std::vector<double>& x, double& f, std::vector<double>& g, const Objective& objective) {
  StepResult res;
  const double gmax = inf_norm(g);
  if (gmax == 0.0 || !std::isfinite(gmax)) return res;

  auto steepest = [&] {
    std::vector<double> d(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) d[i] = -g[i] * settings_.initial_step / gmax;
    return d;
  };
  std::vector<double> d;
  if (!pairs_.empty()) {
    d = direction(g);
    if (!(dot(g, d) < 0.0) || !all_finite(d)) {
      pairs_.clear();
      d = steepest();
    }
  } else {
    d = steepest();
  }
  const double slope = dot(g, d);
  double t = 1.0;
  const double dmax = inf_norm(d);
  if (dmax > settings_.max_step) t = settings_.max_step / dmax;

  std::vector<double> xt(x.size()), gt(x.size());
  for (std::size_t bt = 0; bt <= settings_.max_backtracks; ++bt) {
    for (std::size_t i = 0; i < x.size(); ++i) xt[i] = x[i] + t * d[i];
    const double ft = objective(xt, gt);
    ++res.evaluations;
    if (std::isfinite(ft) && ft <= f + settings_.c1 * t * slope && all_finite(gt)) {
      Pair p{std::vector<double>(x.size()), std::vector<double>(x.size()), 0.0};
      for (std::size_t i = 0; i < x.size(); ++i) {
        p.s[i] = xt[i] - x[i];
        p.y[i] = gt[i] - g[i];
      }
      const double sy = dot(p.s, p.y);
      if (sy > settings_.curvature_eps * std::sqrt(dot(p.s, p.s) * dot(p.y, p.y))) {
        p.rho = 1.0 / sy;
        pairs_.push_back(std::move(p));
        if (pairs_.size() > settings_.history) pairs_.pop_front();
      }
      x.swap(xt);
      g.swap(gt);
      f = ft;
      res.moved = true;
      res.step_length = t;
      return res;
    }
    t *= settings_.backtrack;
  }
  pairs_.clear();
  res.line_search_failed = true;
  return res;
}

// --- algorithms -------------------------------------------------------------------

std::string to_string(LossKind kind) {
  return kind == LossKind::MonteCarlo ? "monte_carlo" : "perturbative";
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "monte_carlo" || name == "mc") return LossKind::MonteCarlo;
  if (name == "perturbative") return LossKind::Perturbative;
  throw Error(ErrorKind::Config, "unknown loss kind: " + name);
}

void SeparationConfig::validate() const {
  if (Q < 1) throw Error(ErrorKind::Config, "Q must be >= 1");
  if (T < 1) throw Error(ErrorKind::Config, "T must be >= 1");
  if (P < 1) throw Error(ErrorKind::Config, "P must be >= 1");
  if (schedule.size() != P) throw Error(ErrorKind::Config, "schedule length must equal P");
  try {
    schedule.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  optimizer.validate();
}

void SeparationTrace::write_csv(std::ostream& out) const {
  out << "stage,iteration,loss,grad_norm,wall_ms\n";
  out << std::setprecision(17);
  for (const auto& r : rows) out << r.stage << ',' << r.iteration << ',' << r.loss << ',' << r.grad_norm << ',' << r.wall_ms << '\n';
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Field2D to_field(Shape s, std::span<const double> v) { return Field2D(s.height, s.width, std::vector<double>(v.begin(), v.end())); }

void check_inputs(const Field2D& y, const NoiseModel& noise, const Representation& rep, const SeparationConfig& cfg) {
  if (!(y.shape() == rep.shape())) {
    throw Error(ErrorKind::ShapeMismatch, "observation " + to_string(y.shape()) + " does not match representation " +
                                              to_string(rep.shape()));
  }
  if (!(noise.shape == y.shape())) throw Error(ErrorKind::ShapeMismatch, "noise shape does not match observation");
  if (cfg.init && !(cfg.init->shape() == y.shape())) {
    throw Error(ErrorKind::ShapeMismatch, "initial point does not match observation shape");
  }
}

// Runs T optimizer iterations of `loss` from x. `loss(t)` returns the
// objective used for iteration t (resampled per iteration when stochastic).
// Returns false when a non-finite loss aborted the stage.
// On abort x is reset to the last iterate whose loss evaluated finite.
bool run_stage(std::size_t stage, std::size_t T, const LbfgsSettings& settings,
               const std::function<Lbfgs::Objective(std::size_t)>& loss, std::vector<double>& x,
               SeparationTrace& trace, Clock::time_point t0) {
  Lbfgs opt(settings);
  std::vector<double> g(x.size());
  std::vector<double> last_good = x;
  for (std::size_t t = 0; t < T; ++t) {
    const auto objective = loss(t);
    double f = objective(x, g);
    if (!std::isfinite(f) || !all_finite(g)) {
      x = std::move(last_good);
      trace.aborted = true;
      trace.abort_message = "non-finite loss at stage " + std::to_string(stage) + " iteration " + std::to_string(t);
      return false;
    }
    last_good = x;
    trace.rows.push_back({stage, t, f, std::sqrt(dot(g, g)), ms_since(t0)});
    const auto res = opt.step(x, f, g, objective);
    if (res.line_search_failed) {
      const double gmax = inf_norm(g);
      const double h = 0.1 * settings.initial_step / gmax;
      for (std::size_t i = 0; i < x.size(); ++i) x[i] -= h * g[i];
      ++trace.fallback_steps;
    }
  }
  return true;
}

SeparationResult run_diffusive(const Field2D& y, const NoiseModel& noise, const Representation& rep,
                               const SeparationConfig& cfg) {
  cfg.validate();
  check_inputs(y, noise, rep, cfg);
  const auto t0 = Clock::now();
  const Shape shape = y.shape();
  const MonteCarloLoss mc(rep, noise, cfg.threads);
  const Field2D variance = noise.pixelwise_variance();

  SeparationResult out;
  std::vector<double> x = cfg.init ? cfg.init->storage() : y.storage();
  CVector phi_target = rep.eval(y);
  for (std::size_t i = 0; i < cfg.P; ++i) {
    const double alpha = cfg.schedule.weights[i];
    const double stage_start = ms_since(t0);
    auto loss_for = [&](std::size_t t) -> Lbfgs::Objective {
      const std::uint64_t batch = derive_seed(cfg.seed, i, t);
      return [&, batch](std::span<const double> xs, std::span<double> grad) {
        const Field2D xf = to_field(shape, xs);
        const LossEvaluation e = cfg.loss_kind == LossKind::MonteCarlo
                                     ? mc.evaluate(xf, phi_target, alpha, cfg.Q, batch, {true, false, cfg.threads})
                                     : perturbative_loss(xf, phi_target, rep, variance, alpha, true, cfg.correction_gradient);
        std::copy(e.gradient.values().begin(), e.gradient.values().end(), grad.begin());
        return e.value;
      };
    };
    const bool ok = run_stage(i, cfg.T, cfg.optimizer, loss_for, x, out.trace, t0);
    if (!ok) {
      out.trace.stage_outputs.push_back(to_field(shape, x));
      out.trace.stage_wall_ms.push_back(ms_since(t0) - stage_start);
      break;
    }
    out.trace.stage_outputs.push_back(to_field(shape, x));
    out.trace.stage_wall_ms.push_back(ms_since(t0) - stage_start);
    phi_target = rep.eval(out.trace.stage_outputs.back());
  }
  out.estimate = to_field(shape, x);
  return out;
}

}  // namespace

SeparationResult vanilla_separate(const Field2D& y, const NoiseModel& noise, const Representation& rep,
                                  const SeparationConfig& cfg) {
  if (cfg.loss_kind != LossKind::MonteCarlo) {
    throw Error(ErrorKind::Config, "the vanilla algorithm uses the Monte Carlo loss");
  }
  SeparationConfig c = cfg;
  c.P = 1;
  c.schedule = DiffusionSchedule{{1.0}};
  return run_diffusive(y, noise, rep, c);
}

SeparationResult diffusive_separate(const Field2D& y, const NoiseModel& noise, const Representation& rep,
                                    const SeparationConfig& cfg) {
  return run_diffusive(y, noise, rep, cfg);
}

SeparationResult delouis_separate(const Field2D& y, const NoiseModel& noise, const Representation& rep,
                                  const SeparationConfig& cfg) {
  if (cfg.Q < 2) throw Error(ErrorKind::InvalidArgument, "the Delouis algorithm needs Q >= 2 to estimate spreads");
  if (cfg.T < 1 || cfg.P < 1) throw Error(ErrorKind::Config, "T and P must be >= 1");
  cfg.optimizer.validate();
  check_inputs(y, noise, rep, cfg);
  const auto t0 = Clock::now();
  const Shape shape = y.shape();
  const std::size_t K = rep.size();
  const MonteCarloLoss mc(rep, noise, cfg.threads);

  SeparationResult out;
  std::vector<double> x = cfg.init ? cfg.init->storage() : y.storage();
  const CVector phi_y = rep.eval(y);
  for (std::size_t i = 0; i < cfg.P; ++i) {
    const double stage_start = ms_since(t0);
    const Field2D xf = to_field(shape, x);
    const auto moments = mc.evaluate(xf, phi_y, 1.0, cfg.Q, derive_seed(cfg.seed, i, 0, 1), {false, true, cfg.threads});
    const CVector phi_x = rep.eval(xf);
    CVector bias(K);
    std::vector<double> weights(K);
    const auto var = moments.phi_variance();
    std::size_t clamped = 0;
    for (std::size_t k = 0; k < K; ++k) {
      bias[k] = moments.phi_mean[k] - phi_x[k];
      double s = std::sqrt(var[k]);
      if (!(s >= 1e-12)) {
        s = 1e-12;
        ++clamped;
      }
      weights[k] = 1.0 / (s * s);
    }
    if (clamped > 0) {
      out.trace.warnings.push_back("stage " + std::to_string(i) + ": clamped " + std::to_string(clamped) +
                                   " coefficient spreads at 1e-12");
    }
    auto loss_for = [&](std::size_t) -> Lbfgs::Objective {
      return [&](std::span<const double> xs, std::span<double> grad) {
        const auto e = weighted_loss(to_field(shape, xs), phi_y, bias, weights, rep);
        std::copy(e.gradient.values().begin(), e.gradient.values().end(), grad.begin());
        return e.value;
      };
    };
    const bool ok = run_stage(i, cfg.T, cfg.optimizer, loss_for, x, out.trace, t0);
    out.trace.stage_outputs.push_back(to_field(shape, x));
    out.trace.stage_wall_ms.push_back(ms_since(t0) - stage_start);
    if (!ok) break;
  }
  out.estimate = to_field(shape, x);
  return out;
}

}  // namespace statsep
