#include "statsep/wavelets.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "statsep/io.hpp"

namespace statsep {
namespace {

constexpr double kPi = std::numbers::pi;

// exp(-d^2 / (xi^2 - d^2)) on |d| < xi, d = r - xi.
double radial_bump(double r, double xi) {
  const double d = r - xi;
  if (std::abs(d) >= xi) return 0.0;
  return std::exp(-d * d / (xi * xi - d * d));
}

double angular_lobe(double theta, double theta_l, std::size_t L) {
  const double dt = std::remainder(theta - theta_l, 2.0 * kPi);
  if (std::abs(dt) >= kPi / 2) return 0.0;
  return std::pow(std::cos(dt), static_cast<double>(L - 1));
}

double axis_frequency(std::size_t i, std::size_t n) {
  return 2.0 * kPi * static_cast<double>(signed_frequency(i, n)) / static_cast<double>(n);
}

}  // namespace

double FilterBank::orientation_angle(std::size_t l) const { return kPi * static_cast<double>(l) / static_cast<double>(L); }

// 0.85 pulls the finest bump inside the Nyquist square so that filters two
// scales apart stay nearly disjoint.
double bank_center_frequency(std::size_t j) { return 0.85 * kPi * std::ldexp(1.0, -static_cast<int>(j)); }

std::size_t default_scale_count(std::size_t height, std::size_t width) {
  const std::size_t m = std::min(height, width);
  std::size_t lg = 0;
  while ((std::size_t{2} << lg) <= m) ++lg;
  return lg >= 2 ? lg - 1 : 1;
}

FilterBank build_bank(std::size_t height, std::size_t width, std::size_t J, std::size_t L) {
  if (J == 0 || L == 0) throw Error(ErrorKind::InvalidArgument, "build_bank: J and L must be >= 1");
  if (height == 0 || width == 0) throw Error(ErrorKind::InvalidGeometry, "build_bank: empty grid");
  if (J >= 63 || (std::size_t{1} << J) > std::min(height, width)) {
    throw Error(ErrorKind::InvalidGeometry, "build_bank: 2^J = 2^" + std::to_string(J) + " exceeds min dimension " +
                                                std::to_string(std::min(height, width)));
  }
  FilterBank bank;
  bank.J = J;
  bank.L = L;
  bank.shape = {height, width};
  bank.filters.reserve(J * L);
  for (std::size_t j = 0; j < J; ++j) {
    const double xi = bank_center_frequency(j);
    bank.center_freqs.push_back(xi);
    for (std::size_t l = 0; l < L; ++l) {
      const double theta_l = bank.orientation_angle(l);
      Spectrum2D psi(height, width);
      double peak = 0.0;
      for (std::size_t r = 0; r < height; ++r) {
        const double wy = axis_frequency(r, height);
        for (std::size_t c = 0; c < width; ++c) {
          const double wx = axis_frequency(c, width);
          const double rad = radial_bump(std::hypot(wx, wy), xi);
          if (rad == 0.0) continue;
          const double v = rad * angular_lobe(std::atan2(wy, wx), theta_l, L);
          psi[r * width + c] = v;
          peak = std::max(peak, v);
        }
      }
      psi[0] = 0.0;
      if (peak > 0.0) psi *= cplx(1.0 / peak);
      bank.filters.push_back(std::move(psi));
    }
  }
  return bank;
}

Field2D littlewood_paley(const FilterBank& bank) {
  Field2D lp(bank.shape);
  const auto h = static_cast<std::ptrdiff_t>(bank.shape.height);
  const auto w = static_cast<std::ptrdiff_t>(bank.shape.width);
  for (const auto& psi : bank.filters) {
    for (std::ptrdiff_t r = 0; r < h; ++r) {
      for (std::ptrdiff_t c = 0; c < w; ++c) {
        lp[static_cast<std::size_t>(r * w + c)] += 0.5 * (std::norm(psi.at(r, c)) + std::norm(psi.at(-r, -c)));
      }
    }
  }
  return lp;
}

void dump_bank(const FilterBank& bank, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto name = "bank_j" + std::to_string(bank.scale_of(i)) + "_l" + std::to_string(bank.orientation_of(i)) + ".ssf";
    io::write_grid(dir / name, static_cast<const ComplexField2D&>(bank.filters[i]));
  }
  io::write_grid(dir / "littlewood_paley.ssf", littlewood_paley(bank));
}

}  // namespace statsep
