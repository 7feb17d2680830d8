#include "statsep/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace statsep::analytic {

QuadraticSolution sqrt_threshold(double y, double sigma, double factor) {
  if (!(sigma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "sqrt_threshold requires sigma >= 0");
  QuadraticSolution s;
  const double d = y * y - factor * sigma * sigma;
  if (d > 0.0) {
    const double r = std::sqrt(d);
    s.values = {r, -r};
  } else {
    s.values = {0.0};
  }
  s.single_valued = sqrt_threshold_value(y, sigma, factor);
  return s;
}

double sqrt_threshold_value(double y, double sigma, double factor) {
  const double r = std::sqrt(std::max(0.0, y * y - factor * sigma * sigma));
  return y < 0.0 ? -r : r;
}

Field2D sqrt_threshold_field(const Field2D& y, double sigma) {
  Field2D out(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = sqrt_threshold_value(y[i], sigma);
  return out;
}

SpectralSolutionSpec spectral_minimum_spec(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, double sigma) {
  if (A.cols() != y.size()) throw Error(ErrorKind::ShapeMismatch, "spectral_minimum_spec: A columns must equal |y|");
  if (!(sigma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "spectral_minimum_spec requires sigma >= 0");
  const Eigen::MatrixXd G = A.transpose() * A;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
  if (eig.info() != Eigen::Success) throw Error(ErrorKind::SingularMatrix, "eigendecomposition of A^T A failed");
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double lam_max = ev.cwiseAbs().maxCoeff();
  const double tol = 1e-9 * lam_max;
  if (lam_max == 0.0 || ev.minCoeff() <= tol) {
    throw Error(ErrorKind::SingularMatrix, "A^T A is singular; the representation is not injective");
  }

  SpectralSolutionSpec s;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (s.spectrum.empty() || ev[i] - s.spectrum.back() > tol) s.spectrum.push_back(ev[i]);

  const double energy_y = (A * y).squaredNorm();
  s.noise_energy = sigma * sigma * G.trace();
  for (double lam : s.spectrum)
    if (energy_y - s.noise_energy - 2.0 * sigma * sigma * lam >= 0.0) s.lambda_set.push_back(lam);

  const auto m = A.cols();
  if (s.lambda_set.empty()) {
    s.eigenspace = Eigen::MatrixXd(m, 0);
    s.representative = Eigen::VectorXd::Zero(m);
    return s;
  }
  const double lam = s.lambda_set.front();
  s.chosen_lambda = lam;
  s.target_norm = energy_y - s.noise_energy - 2.0 * sigma * sigma * lam;
  std::vector<Eigen::Index> cols;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (std::abs(ev[i] - lam) <= tol) cols.push_back(i);
  s.eigenspace.resize(m, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) s.eigenspace.col(static_cast<Eigen::Index>(c)) = eig.eigenvectors().col(cols[c]);
  s.representative = s.eigenspace.col(0) * std::sqrt(s.target_norm / lam);
  return s;
}

double quadratic_form_expected_loss(const Eigen::MatrixXd& A, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                    double sigma) {
  // ||A(x+e)||^2 = a + 2<Gx, e> + e'Ge with G = A'A, e ~ N(0, s^2 I).
  // Var(e'Ge) = 2 s^4 tr(G^2); the cross term is uncorrelated with e'Ge.
  const Eigen::MatrixXd G = A.transpose() * A;
  const double s2 = sigma * sigma;
  const double mean = (A * x).squaredNorm() + s2 * G.trace() - (A * y).squaredNorm();
  const double var = 4.0 * s2 * (G * x).squaredNorm() + 2.0 * s2 * s2 * (G * G).trace();
  return mean * mean + var;
}

CVector unbiased_ps_estimate(std::span<const cplx> phi_y, std::span<const cplx> phi_eps_mean) {
  if (phi_y.size() != phi_eps_mean.size()) {
    throw Error(ErrorKind::ShapeMismatch, "unbiased_ps_estimate: length mismatch");
  }
  CVector out(phi_y.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = phi_y[k] - phi_eps_mean[k];
  return out;
}

Field2D linear_minimum(const Field2D& y) { return y; }

namespace {

double axis_step(const GridAxis& a) { return (a.hi - a.lo) / static_cast<double>(a.points - 1); }

}  // namespace

BruteForceResult brute_force_minimize(const ScalarLoss& loss, const std::vector<GridAxis>& domain,
                                      const BruteForceOptions& options) {
  const std::size_t dim = domain.size();
  if (dim == 0 || dim > 2) {
    throw Error(ErrorKind::DomainTooLarge, "brute_force_minimize supports 1 or 2 dimensions, got " + std::to_string(dim));
  }
  for (const auto& a : domain)
    if (a.points < 3 || !(a.hi > a.lo)) throw Error(ErrorKind::InvalidArgument, "grid axis needs hi > lo and >= 3 points");

  const std::size_t n0 = domain[0].points;
  const std::size_t n1 = dim == 2 ? domain[1].points : 1;
  std::vector<double> grid(n0 * n1);
  std::vector<double> p(dim);
  auto coord = [&](std::size_t i, std::size_t j) {
    p[0] = domain[0].lo + axis_step(domain[0]) * static_cast<double>(i);
    if (dim == 2) p[1] = domain[1].lo + axis_step(domain[1]) * static_cast<double>(j);
  };
  for (std::size_t i = 0; i < n0; ++i)
    for (std::size_t j = 0; j < n1; ++j) {
      coord(i, j);
      grid[i * n1 + j] = loss(p);
    }
  const auto [lo_it, hi_it] = std::minmax_element(grid.begin(), grid.end());
  const double best = *lo_it;
  const double cutoff = best + options.rel_tolerance * (*hi_it - best);

  // Grid-level local minima (non-strict, so plateaus and ties survive).
  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t i = 0; i < n0; ++i)
    for (std::size_t j = 0; j < n1; ++j) {
      const double v = grid[i * n1 + j];
      if (v > cutoff) continue;
      bool local = true;
      for (int di = -1; di <= 1 && local; ++di)
        for (int dj = -1; dj <= 1 && local; ++dj) {
          if (di == 0 && dj == 0) continue;
          const auto ii = static_cast<std::ptrdiff_t>(i) + di;
          const auto jj = static_cast<std::ptrdiff_t>(j) + dj;
          if (ii < 0 || jj < 0 || ii >= static_cast<std::ptrdiff_t>(n0) || jj >= static_cast<std::ptrdiff_t>(n1)) continue;
          if (grid[static_cast<std::size_t>(ii) * n1 + static_cast<std::size_t>(jj)] < v) local = false;
        }
      if (local) candidates.emplace_back(i, j);
    }

  BruteForceResult result;
  std::vector<double> step(dim);
  for (auto [i, j] : candidates) {
    coord(i, j);
    std::vector<double> x = p;
    double fx = grid[i * n1 + j];
    for (std::size_t d = 0; d < dim; ++d) step[d] = axis_step(domain[d]);
    std::vector<double> trial(dim);
    for (std::size_t it = 0; it < options.refine_iterations; ++it) {
      bool moved = false;
      for (std::size_t d = 0; d < dim; ++d)
        for (double sgn : {-1.0, 1.0}) {
          trial = x;
          trial[d] = std::clamp(x[d] + sgn * step[d], domain[d].lo, domain[d].hi);
          const double ft = loss(trial);
          if (ft < fx) {
            fx = ft;
            x = trial;
            moved = true;
          }
        }
      if (!moved)
        for (auto& s : step) s *= 0.5;
    }
    // Plateau neighbours and refinements that converge to the same point.
    bool duplicate = false;
    for (const auto& m : result.minima) {
      double dist = 0.0;
      for (std::size_t d = 0; d < dim; ++d) dist = std::max(dist, std::abs(m[d] - x[d]) / axis_step(domain[d]));
      if (dist <= 1.5) duplicate = true;
    }
    if (!duplicate) {
      result.minima.push_back(x);
      result.values.push_back(fx);
    }
  }
  return result;
}

}  // namespace statsep::analytic
