#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "statsep/fields.hpp"

namespace statsep::analytic {

// Global minimizers for phi(x) = x^2 with Gaussian noise of std sigma.
struct QuadraticSolution {
  std::vector<double> values;  // {0} or {+r, -r}
  double single_valued = 0.0;  // sgn(y) * sqrt(max(0, y^2 - factor sigma^2))
};

inline constexpr double kThresholdFactor = 3.0;

// `factor` is exposed only so negative-control checks can inject a wrong
// threshold; leave it at the default otherwise.
QuadraticSolution sqrt_threshold(double y, double sigma, double factor = kThresholdFactor);
double sqrt_threshold_value(double y, double sigma, double factor = kThresholdFactor);
Field2D sqrt_threshold_field(const Field2D& y, double sigma);

// Minimizers of E(||A(x + eps)||^2 - ||A y||^2)^2 for eps ~ N(0, sigma^2 I).
// The minimizer set is the sphere ||A x||^2 = target_norm inside the
// eigenspace of A^T A for chosen_lambda, or {0} when lambda_set is empty.
struct SpectralSolutionSpec {
  std::vector<double> spectrum;    // distinct eigenvalues of A^T A, ascending
  std::vector<double> lambda_set;  // eigenvalues passing the threshold
  std::optional<double> chosen_lambda;
  double noise_energy = 0.0;  // E||A eps||^2 = sigma^2 tr(A^T A)
  double target_norm = 0.0;   // required ||A x||^2
  Eigen::MatrixXd eigenspace;  // orthonormal basis for chosen_lambda (M x d)
  Eigen::VectorXd representative;

  double minimizer_norm_sq() const { return chosen_lambda ? target_norm / *chosen_lambda : 0.0; }
};

SpectralSolutionSpec spectral_minimum_spec(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, double sigma);

// Exact expected loss at x (closed form, Gaussian noise) for the quadratic
// form representation. Used to cross-check Monte Carlo estimates.
double quadratic_form_expected_loss(const Eigen::MatrixXd& A, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                    double sigma);

// phi(y) - E[phi(eps)], component-wise.
CVector unbiased_ps_estimate(std::span<const cplx> phi_y, std::span<const cplx> phi_eps_mean);

// Injective linear representation with zero-mean noise: the minimizer is y.
Field2D linear_minimum(const Field2D& y);

struct GridAxis {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t points = 201;
};

struct BruteForceOptions {
  // Grid-level local minima within rel_tolerance * (max - min of the grid
  // values) of the best are kept and refined.
  double rel_tolerance = 0.01;
  std::size_t refine_iterations = 60;
};

struct BruteForceResult {
  std::vector<std::vector<double>> minima;
  std::vector<double> values;
};

using ScalarLoss = std::function<double(std::span<const double>)>;

// Exhaustive grid search in 1 or 2 dimensions followed by a shrinking
// pattern search around each candidate. Throws DomainTooLarge otherwise.
BruteForceResult brute_force_minimize(const ScalarLoss& loss, const std::vector<GridAxis>& domain,
                                      const BruteForceOptions& options = {});

}  // namespace statsep::analytic
