// Second-order noise terms of the WPH statistics.
//
// Every coefficient is a spatial mean of a pointwise function F of the
// wavelet fields u = h * x (h the spatial kernel of a filter). With the
// Wirtinger partials F_u, F_ubar, ...
//   d phi / d x_j = (1/M) sum_i F_u[i] h[i-j] + F_ubar[i] conj(h[i-j])
//   sum_j var_j d^2 phi / d x_j^2
//       = (1/M) sum_i F_uu W(h^2) + 2 F_uubar W(|h|^2) + F_ubarubar W(conj(h)^2)
// where W(K) = K * var. The two-filter C01 terms add the mixed products
// h1 conj(h2) and conj(h1) conj(h2). Everything is assembled on an ad::Tape
// whose leaves are the u fields, so the same graph yields the gradient of
// the correction term.
#include <algorithm>
#include <deque>
#include <cmath>

#include "statsep/autodiff.hpp"
#include "statsep/fft.hpp"
#include "statsep/wph.hpp"

namespace statsep {
namespace {

constexpr double kSingular = 1e-12;

struct FilterTerms {
  CVector reflected;   // psi(-k): correlation with h
  CVector adjoint;     // conj(psi(k)): correlation with conj(h)
  CVector kernel;      // spatial h
  CVector w_uu, w_uub, w_ubub;
};

CVector weight_field(const CVector& kernel_product, const CVector& variance, Shape shape) {
  ComplexField2D k(shape.height, shape.width, kernel_product);
  const Spectrum2D mult = multiplier_from_kernel(k);
  CVector w = variance;
  detail::convolve_inplace(w.data(), shape, mult.data());
  return w;
}

class Context {
 public:
  Context(const Field2D& x, const FilterBank& bank, const Field2D& variance, ClassMask mask)
      : bank_(bank), shape_(bank.shape), layout_(bank.J, bank.L, mask) {
    if (!(x.shape() == shape_)) throw Error(ErrorKind::ShapeMismatch, "perturbative terms: field vs bank shape");
    if (!(variance.shape() == shape_)) throw Error(ErrorKind::ShapeMismatch, "perturbative terms: variance shape");
    for (double v : variance.values())
      if (!(v >= 0.0)) throw Error(ErrorKind::InvalidArgument, "pixel variance must be >= 0");
    const std::size_t m = shape_.size();
    variance_.assign(variance.values().begin(), variance.values().end());
    const std::size_t n = bank.size();
    filters_.resize(n);
    u_.resize(n);
    const Spectrum2D xs = fft_forward(x);
    std::vector<bool> need_modulus(n, false);
    for (const auto& e : layout_.entries())
      if (e.cls != WphClass::S11) need_modulus[e.first] = true;
    for (std::size_t i = 0; i < n; ++i) {
      const Spectrum2D& psi = bank.filters[i];
      auto& f = filters_[i];
      const Spectrum2D refl = point_reflect(psi);
      f.reflected = refl.storage();
      f.adjoint = adjoint_filter(psi).storage();
      f.kernel = kernel_from_multiplier(psi).storage();
      CVector sq(m), mod2(m), csq(m);
      for (std::size_t p = 0; p < m; ++p) {
        const cplx h = f.kernel[p];
        sq[p] = h * h;
        mod2[p] = std::norm(h);
        csq[p] = std::conj(h) * std::conj(h);
      }
      f.w_uu = weight_field(sq, variance_, shape_);
      f.w_uub = weight_field(mod2, variance_, shape_);
      f.w_ubub = weight_field(csq, variance_, shape_);
      CVector u(m);
      for (std::size_t p = 0; p < m; ++p) u[p] = xs[p] * psi[p];
      const double scale = 1.0 / std::sqrt(static_cast<double>(m));
      detail::dft_inplace(u.data(), shape_, +1);
      for (auto& v : u) v *= scale;
      if (need_modulus[i]) {
        for (std::size_t p = 0; p < m; ++p) {
          if (std::abs(u[p]) < kSingular) {
            throw Error(ErrorKind::NearZeroModulus,
                        "|psi * x| < 1e-12 at pixel " + std::to_string(p) + " of filter (j=" +
                            std::to_string(bank.scale_of(i)) + ", l=" + std::to_string(bank.orientation_of(i)) +
                            "); the modulus Hessian terms are singular there");
          }
        }
      }
      u_[i] = std::move(u);
    }
  }

  const WphLayout& layout() const { return layout_; }

  struct Nodes {
    ad::Tape::Id phi, jnorm, htrace, leaf1, leaf2;
    bool two_leaves;
  };

  // Builds phi, jnorm and htrace for coefficient k on a fresh tape.
  Nodes build(ad::Tape& t, std::size_t k, std::deque<CVector>& pair_storage) const {
    const auto& e = layout_[k];
    const double inv_m = 1.0 / static_cast<double>(shape_.size());
    const auto& f1 = filters_[e.first];
    Nodes out{};
    out.leaf1 = t.input(u_[e.first]);
    out.two_leaves = false;
    const auto u = out.leaf1;

    auto gradient_field = [&](ad::Tape::Id fu, ad::Tape::Id fub, const FilterTerms& f) {
      return t.add(t.conv(fu, f.reflected.data()), t.conv(fub, f.adjoint.data()));
    };
    auto jnorm_of = [&](ad::Tape::Id g_times_m) {
      const auto g = t.scale(g_times_m, inv_m);
      return t.real(t.wsum(t.mul(g, t.conj(g)), variance_storage()));
    };

    switch (e.cls) {
      case WphClass::S11: {
        const auto cu = t.conj(u);
        out.phi = t.mean(t.mul(u, cu));
        out.jnorm = jnorm_of(gradient_field(cu, u, f1));
        cplx acc = 0.0;
        for (const auto& w : f1.w_uub) acc += w;
        out.htrace = t.constant(CVector{2.0 * inv_m * acc});
        break;
      }
      case WphClass::S01: {
        const auto a = t.abs(u);
        const auto s = t.sg(u);
        const auto cu = t.conj(u);
        const auto cs = t.conj(s);
        out.phi = t.mean(t.mul(a, cu));
        const auto fu = t.mul(t.mul(cu, cu), t.scale(t.recip(a), 0.5));
        const auto fub = t.scale(a, 1.5);
        out.jnorm = jnorm_of(gradient_field(fu, fub, f1));
        const auto fuu = t.scale(t.mul(t.mul(cs, cs), cs), -0.25);
        const auto fuub = t.scale(cs, 0.75);
        const auto fubub = t.scale(s, 0.75);
        out.htrace = t.scale(t.add(t.add(t.wsum(fuu, f1.w_uu.data()), t.scale(t.wsum(fuub, f1.w_uub.data()), 2.0)),
                                   t.wsum(fubub, f1.w_ubub.data())),
                             inv_m);
        break;
      }
      case WphClass::S00: {
        const auto a = t.abs(u);
        const auto s = t.sg(u);
        const auto cu = t.conj(u);
        const auto cs = t.conj(s);
        const auto mu = t.mean(a);
        out.phi = t.sub(t.mean(t.mul(u, cu)), t.mul(mu, mu));
        const auto g11 = gradient_field(cu, u, f1);
        const auto d = gradient_field(t.scale(cs, 0.5), t.scale(s, 0.5), f1);  // M * d<|u|>/dx
        const auto g = t.sub(g11, t.scale(t.mul(mu, d), 2.0));
        out.jnorm = jnorm_of(g);
        cplx acc = 0.0;
        for (const auto& w : f1.w_uub) acc += w;
        const auto h11 = t.constant(CVector{2.0 * inv_m * acc});
        const auto dd = t.scale(t.wsum(t.mul(d, d), variance_storage()), inv_m * inv_m);
        const auto inv4a = t.scale(t.recip(a), 0.25);
        const auto auu = t.scale(t.mul(t.mul(cs, cs), inv4a), -1.0);
        const auto aubub = t.scale(t.mul(t.mul(s, s), inv4a), -1.0);
        const auto hmod = t.scale(t.add(t.add(t.wsum(auu, f1.w_uu.data()), t.scale(t.wsum(inv4a, f1.w_uub.data()), 2.0)),
                                        t.wsum(aubub, f1.w_ubub.data())),
                                  inv_m);
        out.htrace = t.sub(t.sub(h11, t.scale(dd, 2.0)), t.scale(t.mul(mu, hmod), 2.0));
        break;
      }
      case WphClass::C01: {
        const auto& f2 = filters_[e.second];
        out.leaf2 = t.input(u_[e.second]);
        out.two_leaves = true;
        const auto v = out.leaf2;
        const auto a = t.abs(u);
        const auto s = t.sg(u);
        const auto cs = t.conj(s);
        const auto cv = t.conj(v);
        out.phi = t.mean(t.mul(a, cv));
        const auto fu = t.scale(t.mul(cs, cv), 0.5);
        const auto fub = t.scale(t.mul(s, cv), 0.5);
        const auto g = t.add(gradient_field(fu, fub, f1), t.conv(a, f2.adjoint.data()));
        out.jnorm = jnorm_of(g);
        // pair weights
        const std::size_t m = shape_.size();
        CVector ka(m), kb(m);
        for (std::size_t p = 0; p < m; ++p) {
          ka[p] = f1.kernel[p] * std::conj(f2.kernel[p]);
          kb[p] = std::conj(f1.kernel[p]) * std::conj(f2.kernel[p]);
        }
        pair_storage.push_back(weight_field(ka, variance_, shape_));
        const cplx* wa = pair_storage.back().data();
        pair_storage.push_back(weight_field(kb, variance_, shape_));
        const cplx* wb = pair_storage.back().data();
        const auto inv4a = t.scale(t.recip(a), 0.25);
        const auto fuu = t.scale(t.mul(t.mul(t.mul(cs, cs), inv4a), cv), -1.0);
        const auto fuub = t.mul(inv4a, cv);
        const auto fubub = t.scale(t.mul(t.mul(t.mul(s, s), inv4a), cv), -1.0);
        const auto fuvb = t.scale(cs, 0.5);
        const auto fubvb = t.scale(s, 0.5);
        auto h = t.add(t.wsum(fuu, f1.w_uu.data()), t.scale(t.wsum(fuub, f1.w_uub.data()), 2.0));
        h = t.add(h, t.wsum(fubub, f1.w_ubub.data()));
        h = t.add(h, t.scale(t.wsum(fuvb, wa), 2.0));
        h = t.add(h, t.scale(t.wsum(fubvb, wb), 2.0));
        out.htrace = t.scale(h, inv_m);
        break;
      }
    }
    return out;
  }

  // sum_i Re(h_i^dagger * G_i) for per-filter leaf gradients G_i.
  Field2D assemble_gradient(const std::vector<CVector>& leaf_grads) const {
    const std::size_t m = shape_.size();
    CVector acc(m);
    CVector buf;
    for (std::size_t i = 0; i < leaf_grads.size(); ++i) {
      if (leaf_grads[i].empty()) continue;
      buf = leaf_grads[i];
      detail::dft_inplace(buf.data(), shape_, -1);
      const cplx* psi = bank_.filters[i].data();
      for (std::size_t p = 0; p < m; ++p) acc[p] += std::conj(psi[p]) * buf[p];
    }
    detail::dft_inplace(acc.data(), shape_, +1);
    Field2D grad(shape_);
    for (std::size_t p = 0; p < m; ++p) grad[p] = acc[p].real() / static_cast<double>(m);
    return grad;
  }

  std::size_t filter_count() const { return filters_.size(); }
  Shape shape() const { return shape_; }

 private:
  const cplx* variance_storage() const { return variance_.data(); }

  const FilterBank& bank_;
  Shape shape_;
  WphLayout layout_;
  CVector variance_;
  std::vector<FilterTerms> filters_;
  std::vector<CVector> u_;
};

}  // namespace

PerturbativeTerms wph_perturbative_terms(const Field2D& x, const FilterBank& bank, const Field2D& pixel_variance,
                                         ClassMask mask) {
  const Context ctx(x, bank, pixel_variance, mask);
  PerturbativeTerms out;
  const std::size_t k_total = ctx.layout().size();
  out.jnorm.resize(k_total);
  out.htrace.resize(k_total);
  for (std::size_t k = 0; k < k_total; ++k) {
    ad::Tape t(ctx.shape());
    std::deque<CVector> storage;
    const auto nodes = ctx.build(t, k, storage);
    out.jnorm[k] = t.value(nodes.jnorm)[0].real();
    out.htrace[k] = t.value(nodes.htrace)[0];
  }
  return out;
}

PerturbativeCorrection wph_perturbative_correction(const Field2D& x, const FilterBank& bank,
                                                   const Field2D& pixel_variance, ClassMask mask,
                                                   std::span<const double> norm_factors,
                                                   std::span<const cplx> target, bool with_gradient) {
  const Context ctx(x, bank, pixel_variance, mask);
  const std::size_t k_total = ctx.layout().size();
  if (norm_factors.size() != k_total || target.size() != k_total) {
    throw Error(ErrorKind::ShapeMismatch, "perturbative correction: factor/target length mismatch");
  }
  PerturbativeCorrection out;
  std::vector<CVector> leaf_grads(with_gradient ? ctx.filter_count() : 0);
  auto add_grad = [&](std::size_t i, const CVector& g) {
    if (g.empty()) return;
    auto& dst = leaf_grads[i];
    if (dst.empty()) dst.assign(g.size(), cplx{});
    for (std::size_t p = 0; p < g.size(); ++p) dst[p] += g[p];
  };
  for (std::size_t k = 0; k < k_total; ++k) {
    ad::Tape t(ctx.shape());
    std::deque<CVector> storage;
    const auto nodes = ctx.build(t, k, storage);
    const double n = norm_factors[k];
    const auto r = t.shift(t.scale(nodes.phi, 1.0 / n), -target[k]);
    const auto cross = t.scale(t.real(t.mul(nodes.htrace, t.conj(r))), 1.0 / n);
    const auto root = t.add(t.scale(nodes.jnorm, 1.0 / (n * n)), cross);
    out.value += t.value(root)[0].real();
    if (with_gradient) {
      t.backward(root);
      const auto& e = ctx.layout()[k];
      add_grad(e.first, t.grad(nodes.leaf1));
      if (nodes.two_leaves) add_grad(e.second, t.grad(nodes.leaf2));
    }
  }
  if (with_gradient) out.gradient = ctx.assemble_gradient(leaf_grads);
  return out;
}

}  // namespace statsep
