#include "statsep/wph.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ostream>
#include <sstream>

#include "statsep/fft.hpp"

namespace statsep {
namespace {

constexpr double kModulusFloor = 1e-12;
constexpr double kDegenerateRef = 1e-14;

std::size_t class_slot(WphClass c) { return static_cast<std::size_t>(c); }

cplx safe_sg(cplx z, double modulus) { return z / std::max(modulus, kModulusFloor); }

}  // namespace

std::string to_string(WphClass c) {
  switch (c) {
    case WphClass::S11: return "S11";
    case WphClass::S00: return "S00";
    case WphClass::S01: return "S01";
    case WphClass::C01: return "C01";
  }
  return "?";
}

WphClass parse_wph_class(const std::string& name) {
  std::string s;
  for (char ch : name) s += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (s == "s11") return WphClass::S11;
  if (s == "s00") return WphClass::S00;
  if (s == "s01") return WphClass::S01;
  if (s == "c01") return WphClass::C01;
  throw Error(ErrorKind::InvalidArgument, "unknown WPH class: " + name);
}

ClassMask ClassMask::only(std::initializer_list<WphClass> classes) {
  ClassMask m = none();
  for (auto c : classes) {
    switch (c) {
      case WphClass::S11: m.s11 = true; break;
      case WphClass::S00: m.s00 = true; break;
      case WphClass::S01: m.s01 = true; break;
      case WphClass::C01: m.c01 = true; break;
    }
  }
  return m;
}

ClassMask ClassMask::parse(const std::string& spec) {
  std::string trimmed;
  for (char ch : spec)
    if (!std::isspace(static_cast<unsigned char>(ch))) trimmed += ch;
  if (trimmed == "all" || trimmed.empty()) return all();
  ClassMask m = none();
  std::stringstream ss(trimmed);
  std::string item;
  while (std::getline(ss, item, ',')) {
    switch (parse_wph_class(item)) {
      case WphClass::S11: m.s11 = true; break;
      case WphClass::S00: m.s00 = true; break;
      case WphClass::S01: m.s01 = true; break;
      case WphClass::C01: m.c01 = true; break;
    }
  }
  return m;
}

bool ClassMask::has(WphClass c) const {
  switch (c) {
    case WphClass::S11: return s11;
    case WphClass::S00: return s00;
    case WphClass::S01: return s01;
    case WphClass::C01: return c01;
  }
  return false;
}

std::string ClassMask::to_string() const {
  std::string out;
  for (auto c : {WphClass::S11, WphClass::S00, WphClass::S01, WphClass::C01}) {
    if (!has(c)) continue;
    if (!out.empty()) out += ',';
    std::string n = statsep::to_string(c);
    for (auto& ch : n) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    out += n;
  }
  return out;
}

WphLayout::WphLayout(std::size_t J, std::size_t L, ClassMask mask) : J_(J), L_(L), mask_(mask) {
  const std::size_t n = J * L;
  for (auto c : {WphClass::S11, WphClass::S00, WphClass::S01}) {
    offsets_[class_slot(c)] = entries_.size();
    if (mask.has(c))
      for (std::size_t i = 0; i < n; ++i) entries_.push_back({c, i, i});
    counts_[class_slot(c)] = entries_.size() - offsets_[class_slot(c)];
  }
  offsets_[class_slot(WphClass::C01)] = entries_.size();
  if (mask.c01) {
    for (std::size_t j1 = 0; j1 < J; ++j1)
      for (std::size_t j2 = j1 + 1; j2 < J; ++j2)
        for (std::size_t l1 = 0; l1 < L; ++l1)
          for (std::size_t l2 = 0; l2 < L; ++l2) entries_.push_back({WphClass::C01, j1 * L + l1, j2 * L + l2});
  }
  counts_[class_slot(WphClass::C01)] = entries_.size() - offsets_[class_slot(WphClass::C01)];
}

std::size_t WphLayout::count(WphClass c) const { return counts_[class_slot(c)]; }
std::size_t WphLayout::offset(WphClass c) const { return offsets_[class_slot(c)]; }

std::size_t WphLayout::closed_form_count(std::size_t J, std::size_t L, ClassMask mask) {
  const std::size_t n = J * L;
  std::size_t k = 0;
  if (mask.s11) k += n;
  if (mask.s00) k += n;
  if (mask.s01) k += n;
  if (mask.c01) k += J * (J - 1) / 2 * L * L;
  return k;
}

const CVector& WphCoefficients::of(WphClass c) const {
  switch (c) {
    case WphClass::S11: return s11;
    case WphClass::S00: return s00;
    case WphClass::S01: return s01;
    default: return c01;
  }
}

CVector& WphCoefficients::of(WphClass c) {
  return const_cast<CVector&>(static_cast<const WphCoefficients&>(*this).of(c));
}

CVector WphCoefficients::flatten() const {
  CVector out;
  out.reserve(size());
  for (auto c : {WphClass::S11, WphClass::S00, WphClass::S01, WphClass::C01})
    out.insert(out.end(), of(c).begin(), of(c).end());
  return out;
}

WphCoefficients WphCoefficients::unflatten(std::span<const cplx> flat, const WphLayout& layout) {
  if (flat.size() != layout.size()) {
    throw Error(ErrorKind::ShapeMismatch, "coefficient vector length " + std::to_string(flat.size()) +
                                              " does not match layout size " + std::to_string(layout.size()));
  }
  WphCoefficients out;
  out.mask = layout.mask();
  for (auto c : {WphClass::S11, WphClass::S00, WphClass::S01, WphClass::C01}) {
    const auto first = flat.begin() + static_cast<std::ptrdiff_t>(layout.offset(c));
    out.of(c).assign(first, first + static_cast<std::ptrdiff_t>(layout.count(c)));
  }
  return out;
}

WphCoefficients wph_compute(const Field2D& x, const FilterBank& bank, ClassMask mask) {
  WphEngine engine(bank, mask);
  CVector flat(engine.size());
  engine.evaluate(x, flat);
  return WphCoefficients::unflatten(flat, engine.layout());
}

NormalizationRef NormalizationRef::from_observation(const Field2D& y, const FilterBank& bank) {
  auto c = wph_compute(y, bank, ClassMask::only({WphClass::S11}));
  NormalizationRef ref{std::move(c.s11)};
  return ref;
}

NormalizationRef NormalizationRef::unit(std::size_t filter_count) { return {CVector(filter_count, 1.0)}; }

void NormalizationRef::validate() const {
  for (std::size_t i = 0; i < s11_of_y.size(); ++i) {
    if (!std::isfinite(std::abs(s11_of_y[i]))) {
      throw Error(ErrorKind::DegenerateReference,
                  "normalization reference S11[" + std::to_string(i) + "] is not finite");
    }
    if (!(std::abs(s11_of_y[i]) >= kDegenerateRef)) {
      throw Error(ErrorKind::DegenerateReference,
                  "normalization reference S11[" + std::to_string(i) + "] is below 1e-14 (observation has no power "
                  "in that band)");
    }
  }
}

std::vector<double> normalization_factors(const WphLayout& layout, const NormalizationRef& ref) {
  ref.validate();
  if (ref.s11_of_y.size() != layout.filter_count()) {
    throw Error(ErrorKind::ShapeMismatch, "normalization reference has " + std::to_string(ref.s11_of_y.size()) +
                                              " entries, bank has " + std::to_string(layout.filter_count()));
  }
  std::vector<double> n(layout.size());
  for (std::size_t k = 0; k < layout.size(); ++k) {
    const auto& e = layout[k];
    if (e.cls == WphClass::C01) {
      n[k] = std::sqrt(std::abs(ref.s11_of_y[e.first]) * std::abs(ref.s11_of_y[e.second]));
    } else {
      n[k] = std::abs(ref.s11_of_y[e.first]);
    }
  }
  return n;
}

namespace {

WphCoefficients apply_normalization(const WphCoefficients& coeffs, const NormalizationRef& ref, bool inverse) {
  ref.validate();
  const std::size_t n = ref.s11_of_y.size();
  auto factor = [&](std::size_t i) { return std::abs(ref.s11_of_y[i]); };
  WphCoefficients out = coeffs;
  for (auto c : {WphClass::S11, WphClass::S00, WphClass::S01}) {
    auto& v = out.of(c);
    if (v.empty()) continue;
    if (v.size() != n) throw Error(ErrorKind::ShapeMismatch, "class size does not match normalization reference");
    for (std::size_t i = 0; i < n; ++i) v[i] = inverse ? v[i] * factor(i) : v[i] / factor(i);
  }
  if (!out.c01.empty()) {
    // Find (J, L) with J*L = n and C(J,2) L^2 = |C01|.
    std::size_t J = 0, L = 0;
    for (std::size_t l = 1; l <= n; ++l) {
      if (n % l) continue;
      const std::size_t j = n / l;
      if (j * (j - 1) / 2 * l * l == out.c01.size()) {
        J = j;
        L = l;
        break;
      }
    }
    if (J == 0) throw Error(ErrorKind::ShapeMismatch, "C01 block size does not match normalization reference");
    const WphLayout layout(J, L, ClassMask::only({WphClass::C01}));
    for (std::size_t k = 0; k < layout.size(); ++k) {
      const double f = std::sqrt(factor(layout[k].first) * factor(layout[k].second));
      out.c01[k] = inverse ? out.c01[k] * f : out.c01[k] / f;
    }
  }
  return out;
}

}  // namespace

WphCoefficients normalize(const WphCoefficients& coeffs, const NormalizationRef& ref) {
  return apply_normalization(coeffs, ref, false);
}

WphCoefficients denormalize(const WphCoefficients& coeffs, const NormalizationRef& ref) {
  return apply_normalization(coeffs, ref, true);
}

Field2D wph_jacobian_adjoint(const Field2D& x, const FilterBank& bank, std::span<const cplx> cotangent,
                             ClassMask mask) {
  WphEngine engine(bank, mask);
  if (cotangent.size() != engine.size()) {
    throw Error(ErrorKind::ShapeMismatch, "cotangent length " + std::to_string(cotangent.size()) +
                                              " does not match coefficient count " + std::to_string(engine.size()));
  }
  CVector phi(engine.size());
  engine.evaluate(x, phi);
  Field2D grad(x.shape());
  engine.adjoint(cotangent, grad.values());
  return grad;
}

void write_coefficients_csv(std::ostream& out, const WphCoefficients& coeffs, const FilterBank& bank) {
  const WphLayout layout(bank.J, bank.L, coeffs.mask);
  const auto flat = coeffs.flatten();
  if (flat.size() != layout.size()) throw Error(ErrorKind::ShapeMismatch, "coefficients do not match bank layout");
  out << "class,j1,l1,j2,l2,real,imag\n";
  out.precision(17);
  for (std::size_t k = 0; k < flat.size(); ++k) {
    const auto& e = layout[k];
    out << to_string(e.cls) << ',' << bank.scale_of(e.first) << ',' << bank.orientation_of(e.first) << ','
        << bank.scale_of(e.second) << ',' << bank.orientation_of(e.second) << ',' << flat[k].real() << ','
        << flat[k].imag() << '\n';
  }
}

WphEngine::WphEngine(const FilterBank& bank, ClassMask mask)
    : bank_(&bank), layout_(bank.J, bank.L, mask), need_modulus_(mask.s00 || mask.s01 || mask.c01),
      need_cross_(mask.s01 || mask.c01), need_c01_(mask.c01) {
  const std::size_t n = bank.size(), m = bank.shape.size();
  spectrum_.resize(m);
  u_.assign(n, std::vector<cplx>(m));
  const auto rows = static_cast<Eigen::Index>(n), cols = static_cast<Eigen::Index>(m);
  if (need_modulus_) mod_.resize(rows, cols);
  if (need_cross_) {
    ure_.resize(rows, cols), uim_.resize(rows, cols);
    cross_re_.setZero(rows, rows), cross_im_.setZero(rows, rows);
  }
  mean_mod_.assign(n, 0.0);
  adj_.assign(n, std::vector<cplx>(m));
  accum_.resize(m);

  bool real = true;
  for (const auto& f : bank.filters)
    for (std::size_t p = 0; p < m && real; ++p) real = f[p].imag() == 0.0;
  if (!real) return;
  support_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const cplx* psi = bank.filters[i].data();
    for (std::size_t p = 0; p < m; ++p) {
      if (psi[p].real() == 0.0) continue;
      support_[i].index.push_back(p);
      support_[i].value.push_back(psi[p].real());
    }
  }
}

namespace {

// Four independent partial sums so the reductions pipeline; the summation
// order is fixed, so results stay bit-reproducible.
double sum_norm(const cplx* u, std::size_t m) {
  double s[4] = {0, 0, 0, 0};
  std::size_t p = 0;
  for (; p + 4 <= m; p += 4)
    for (std::size_t q = 0; q < 4; ++q) s[q] += u[p + q].real() * u[p + q].real() + u[p + q].imag() * u[p + q].imag();
  for (; p < m; ++p) s[0] += std::norm(u[p]);
  return (s[0] + s[1]) + (s[2] + s[3]);
}

}  // namespace

void WphEngine::evaluate(const Field2D& x, std::span<cplx> out) {
  const Shape s = bank_->shape;
  if (!(x.shape() == s)) {
    throw Error(ErrorKind::ShapeMismatch, "wph: field " + to_string(x.shape()) + " vs bank " + to_string(s));
  }
  if (out.size() != layout_.size()) throw Error(ErrorKind::ShapeMismatch, "wph: output span has wrong length");
  const std::size_t m = s.size();
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t p = 0; p < m; ++p) spectrum_[p] = x[p];
  detail::dft_inplace(spectrum_.data(), s, -1);

  for (std::size_t i = 0; i < bank_->size(); ++i) {
    const cplx* psi = bank_->filters[i].data();
    auto& u = u_[i];
    if (support_.empty()) {
      for (std::size_t p = 0; p < m; ++p) u[p] = spectrum_[p] * psi[p] * inv_m;
    } else {
      const auto& sup = support_[i];
      std::fill(u.begin(), u.end(), cplx{});
      for (std::size_t q = 0; q < sup.index.size(); ++q) {
        const std::size_t p = sup.index[q];
        u[p] = spectrum_[p] * sup.value[q] * inv_m;
      }
    }
    detail::dft_inplace(u.data(), s, +1);
    if (need_modulus_) {
      double* a = mod_.row(static_cast<Eigen::Index>(i)).data();
      for (std::size_t p = 0; p < m; ++p) a[p] = std::sqrt(std::norm(u[p]));
      double acc = 0.0;
      for (std::size_t p = 0; p < m; ++p) acc += a[p];
      mean_mod_[i] = acc * inv_m;
    }
    if (need_cross_) {
      const auto r = static_cast<Eigen::Index>(i);
      for (std::size_t p = 0; p < m; ++p) {
        ure_(r, static_cast<Eigen::Index>(p)) = u[p].real();
        uim_(r, static_cast<Eigen::Index>(p)) = u[p].imag();
      }
    }
  }

  // sum_p |u_i[p]| conj(u_j[p]). Row i against rows j >= i in one
  // matrix-vector product per part; C01 partners all sit after i.
  if (need_cross_) {
    const auto n = static_cast<Eigen::Index>(bank_->size());
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index k = need_c01_ ? n - i : 1;
      const auto a = mod_.row(i).transpose();
      cross_re_.row(i).segment(i, k).transpose().noalias() = ure_.middleRows(i, k) * a;
      cross_im_.row(i).segment(i, k).transpose().noalias() = uim_.middleRows(i, k) * a;
    }
  }
  auto cross = [&](std::size_t i, std::size_t j) {
    const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
    return cplx(cross_re_(a, b), -cross_im_(a, b));
  };

  for (std::size_t k = 0; k < layout_.size(); ++k) {
    const auto& e = layout_[k];
    const auto& u = u_[e.first];
    switch (e.cls) {
      case WphClass::S11:
      case WphClass::S00: {
        double v = sum_norm(u.data(), m) * inv_m;
        if (e.cls == WphClass::S00) v -= mean_mod_[e.first] * mean_mod_[e.first];
        out[k] = v;
        break;
      }
      case WphClass::S01: {
        out[k] = cross(e.first, e.first) * inv_m;
        break;
      }
      case WphClass::C01: {
        out[k] = cross(e.first, e.second) * inv_m;
        break;
      }
    }
  }
}

void WphEngine::adjoint(std::span<const cplx> cotangent, std::span<double> grad) {
  const Shape s = bank_->shape;
  const std::size_t m = s.size();
  if (cotangent.size() != layout_.size()) throw Error(ErrorKind::ShapeMismatch, "wph adjoint: cotangent length");
  if (grad.size() != m) throw Error(ErrorKind::ShapeMismatch, "wph adjoint: gradient length");
  const double inv_m = 1.0 / static_cast<double>(m);
  const std::size_t n = bank_->size();
  std::vector<bool> touched(n, false);
  auto touch = [&](std::size_t i) -> std::vector<cplx>& {
    if (!touched[i]) {
      std::fill(adj_[i].begin(), adj_[i].end(), cplx{});
      touched[i] = true;
    }
    return adj_[i];
  };

  // With f = Re sum_k conj(c_k) phi_k, the complex adjoint a_i of u_i
  // satisfies df = Re sum_p conj(a_i[p]) du_i[p].
  for (std::size_t k = 0; k < layout_.size(); ++k) {
    const cplx c = cotangent[k];
    if (c == cplx{}) continue;
    const auto& e = layout_[k];
    const auto& u = u_[e.first];
    switch (e.cls) {
      case WphClass::S11: {
        auto& a = touch(e.first);
        const double w = 2.0 * c.real() * inv_m;
        for (std::size_t p = 0; p < m; ++p) a[p] += w * u[p];
        break;
      }
      case WphClass::S00: {
        auto& a = touch(e.first);
        const double* md = mod_.row(static_cast<Eigen::Index>(e.first)).data();
        const double w = 2.0 * c.real() * inv_m;
        const double mu = mean_mod_[e.first];
        for (std::size_t p = 0; p < m; ++p) a[p] += w * (u[p] - mu * safe_sg(u[p], md[p]));
        break;
      }
      case WphClass::S01: {
        auto& a = touch(e.first);
        const double* md = mod_.row(static_cast<Eigen::Index>(e.first)).data();
        const cplx cc = std::conj(c);
        for (std::size_t p = 0; p < m; ++p) {
          a[p] += inv_m * ((c * u[p]).real() * safe_sg(u[p], md[p]) + md[p] * cc);
        }
        break;
      }
      case WphClass::C01: {
        const double* md = mod_.row(static_cast<Eigen::Index>(e.first)).data();
        const auto& v = u_[e.second];
        auto& a1 = touch(e.first);
        for (std::size_t p = 0; p < m; ++p) a1[p] += inv_m * (c * v[p]).real() * safe_sg(u[p], md[p]);
        auto& a2 = touch(e.second);
        const cplx cc = std::conj(c);
        for (std::size_t p = 0; p < m; ++p) a2[p] += inv_m * md[p] * cc;
        break;
      }
    }
  }

  std::fill(accum_.begin(), accum_.end(), cplx{});
  for (std::size_t i = 0; i < n; ++i) {
    if (!touched[i]) continue;
    auto& a = adj_[i];
    detail::dft_inplace(a.data(), s, -1);
    if (support_.empty()) {
      const cplx* psi = bank_->filters[i].data();
      for (std::size_t p = 0; p < m; ++p) accum_[p] += std::conj(psi[p]) * a[p];
    } else {
      const auto& sup = support_[i];
      for (std::size_t q = 0; q < sup.index.size(); ++q) accum_[sup.index[q]] += sup.value[q] * a[sup.index[q]];
    }
  }
  detail::dft_inplace(accum_.data(), s, +1);
  for (std::size_t p = 0; p < m; ++p) grad[p] = 2.0 * accum_[p].real() * inv_m;
}

}  // namespace statsep
