#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "statsep/fields.hpp"
#include "statsep/noise.hpp"
#include "statsep/representation.hpp"

namespace statsep {

// ---------------------------------------------------------------------------
// Losses

struct LossOptions {
  bool with_gradient = true;
  bool with_moments = false;  // mean and spread of phi(x + alpha eps)
  std::size_t threads = 1;
};

struct LossEvaluation {
  double value = 0.0;
  Field2D gradient;                  // empty when not requested
  std::vector<double> sample_losses;  // ||phi(x + alpha eps_k) - phi_y||^2
  CVector phi_mean;                   // with_moments only
  std::vector<double> phi_m2;         // sum_k |phi_k - mean|^2 per coefficient

  double standard_error() const;
  // Unbiased per-coefficient variance m2 / (Q - 1).
  std::vector<double> phi_variance() const;
};

// Monte Carlo estimate (1/Q) sum_k ||phi(x + alpha eps_k) - phi_y||^2 and its
// gradient. Samples are split into blocks whose layout depends only on Q;
// block b draws from derive_seed(seed, b). Block results are combined by a
// fixed pairwise tree, so results do not depend on the thread count.
class MonteCarloLoss {
 public:
  MonteCarloLoss(const Representation& rep, NoiseModel noise, std::size_t threads = 1);

  LossEvaluation evaluate(const Field2D& x, std::span<const cplx> phi_y, double alpha, std::size_t Q,
                          std::uint64_t seed, const LossOptions& options) const;
  LossEvaluation operator()(const Field2D& x, std::span<const cplx> phi_y, double alpha, std::size_t Q,
                            std::uint64_t seed) const {
    return evaluate(x, phi_y, alpha, Q, seed, LossOptions{true, false, threads_});
  }

  const Representation& representation() const { return rep_; }
  const NoiseSampler& sampler() const { return sampler_; }
  std::size_t threads() const { return threads_; }
  static std::size_t block_size(std::size_t Q);

 private:
  const Representation& rep_;
  NoiseSampler sampler_;
  std::size_t threads_;
};

LossEvaluation mc_loss(const Field2D& x, std::span<const cplx> phi_y, const Representation& rep,
                       const NoiseModel& noise, double alpha, std::size_t Q, std::uint64_t seed,
                       const LossOptions& options = {});

enum class CorrectionGradient { Analytic, FiniteDifference };

// ||phi(x) - phi_y||^2 + alpha^2 (sum jnorm + Re sum htrace conj(phi(x) - phi_y)).
LossEvaluation perturbative_loss(const Field2D& x, std::span<const cplx> phi_y, const Representation& rep,
                                 const Field2D& pixel_variance, double alpha, bool with_gradient = true,
                                 CorrectionGradient method = CorrectionGradient::Analytic);

// sum_k |phi_k(x) + offset_k - target_k|^2 * weight_k.
LossEvaluation weighted_loss(const Field2D& x, std::span<const cplx> target, std::span<const cplx> offset,
                             std::span<const double> weights, const Representation& rep, bool with_gradient = true);

// ---------------------------------------------------------------------------
// Optimizer

struct LbfgsSettings {
  std::size_t history = 10;
  double c1 = 1e-4;              // Armijo constant
  double backtrack = 0.5;
  std::size_t max_backtracks = 30;
  double initial_step = 0.1;     // max per-pixel change of a steepest-descent step
  double max_step = 1.0;         // cap on the per-pixel change of any step
  double curvature_eps = 1e-10;  // skip pairs with s.y <= eps |s| |y|

  void validate() const;
};

class Lbfgs {
 public:
  // Evaluates the loss at x and writes its gradient into grad.
  using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

  struct StepResult {
    bool moved = false;
    bool line_search_failed = false;
    double step_length = 0.0;
    std::size_t evaluations = 0;
  };

  explicit Lbfgs(LbfgsSettings settings = {});

  // One quasi-Newton iteration from (x, f, g) with backtracking on `objective`.
  // On success x, f and g hold the accepted point. On line-search failure
  // nothing is modified and the history is cleared.
  StepResult step(std::vector<double>& x, double& f, std::vector<double>& g, const Objective& objective);

  void reset() { pairs_.clear(); }
  std::size_t history_size() const { return pairs_.size(); }
  // Oldest first.
  std::vector<std::pair<std::vector<double>, std::vector<double>>> history() const;
  const LbfgsSettings& settings() const { return settings_; }

 private:
  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::vector<double> direction(std::span<const double> g) const;

  LbfgsSettings settings_;
  std::deque<Pair> pairs_;
};

// ---------------------------------------------------------------------------
// Algorithms

enum class LossKind { MonteCarlo, Perturbative };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& name);

struct SeparationConfig {
  std::size_t Q = 100;
  std::size_t T = 30;
  std::size_t P = 1;
  DiffusionSchedule schedule{{1.0}};
  LbfgsSettings optimizer{};
  LossKind loss_kind = LossKind::MonteCarlo;
  CorrectionGradient correction_gradient = CorrectionGradient::Analytic;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::optional<Field2D> init;  // starting point; defaults to y

  void validate() const;
};

struct TraceRow {
  std::size_t stage = 0;
  std::size_t iteration = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double wall_ms = 0.0;  // since the start of the run
};

struct SeparationTrace {
  std::vector<TraceRow> rows;
  std::vector<Field2D> stage_outputs;
  std::vector<double> stage_wall_ms;
  std::vector<std::string> warnings;
  std::size_t fallback_steps = 0;
  bool aborted = false;
  std::string abort_message;

  // Header: stage,iteration,loss,grad_norm,wall_ms
  void write_csv(std::ostream& out) const;
};

struct SeparationResult {
  Field2D estimate;
  SeparationTrace trace;
};

SeparationResult vanilla_separate(const Field2D& y, const NoiseModel& noise, const Representation& rep,
                                  const SeparationConfig& cfg);
SeparationResult diffusive_separate(const Field2D& y, const NoiseModel& noise, const Representation& rep,
                                    const SeparationConfig& cfg);
SeparationResult delouis_separate(const Field2D& y, const NoiseModel& noise, const Representation& rep,
                                  const SeparationConfig& cfg);

}  // namespace statsep
