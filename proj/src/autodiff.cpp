#include "statsep/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "statsep/fft.hpp"

namespace statsep::ad {
namespace {

constexpr double kFloor = 1e-12;

// Value of a (possibly scalar) node at position p.
inline cplx at(const CVector& v, std::size_t p) { return v.size() == 1 ? v[0] : v[p]; }

}  // namespace

Tape::Tape(Shape shape) : shape_(shape) { nodes_.reserve(64); }

Tape::Id Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

Tape::Id Tape::input(CVector value) { return push({Op::Input, 0, 0, {}, nullptr, std::move(value), {}}); }
Tape::Id Tape::constant(CVector value) { return push({Op::Const, 0, 0, {}, nullptr, std::move(value), {}}); }

Tape::Id Tape::add(Id a, Id b) {
  const auto& va = nodes_[a].value;
  const auto& vb = nodes_[b].value;
  CVector out(std::max(va.size(), vb.size()));
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = at(va, p) + at(vb, p);
  return push({Op::Add, a, b, {}, nullptr, std::move(out), {}});
}

Tape::Id Tape::sub(Id a, Id b) {
  const auto& va = nodes_[a].value;
  const auto& vb = nodes_[b].value;
  CVector out(std::max(va.size(), vb.size()));
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = at(va, p) - at(vb, p);
  return push({Op::Sub, a, b, {}, nullptr, std::move(out), {}});
}

Tape::Id Tape::mul(Id a, Id b) {
  const auto& va = nodes_[a].value;
  const auto& vb = nodes_[b].value;
  CVector out(std::max(va.size(), vb.size()));
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = at(va, p) * at(vb, p);
  return push({Op::Mul, a, b, {}, nullptr, std::move(out), {}});
}

Tape::Id Tape::scale(Id a, cplx s) {
  CVector out = nodes_[a].value;
  for (auto& v : out) v *= s;
  return push({Op::Scale, a, 0, s, nullptr, std::move(out), {}});
}

Tape::Id Tape::shift(Id a, cplx s) {
  CVector out = nodes_[a].value;
  for (auto& v : out) v += s;
  return push({Op::Shift, a, 0, s, nullptr, std::move(out), {}});
}

Tape::Id Tape::conj(Id a) {
  CVector out = nodes_[a].value;
  for (auto& v : out) v = std::conj(v);
  return push({Op::Conj, a, 0, {}, nullptr, std::move(out), {}});
}

Tape::Id Tape::abs(Id a) {
  CVector out = nodes_[a].value;
  for (auto& v : out) v = std::abs(v);
  return push({Op::Abs, a, 0, {}, nullptr, std::move(out), {}});
}

Tape::Id Tape::sg(Id a) {
  CVector out = nodes_[a].value;
  for (auto& v : out) v /= std::max(std::abs(v), kFloor);
  return push({Op::Sg, a, 0, {}, nullptr, std::move(out), {}});
}

Tape::Id Tape::recip(Id a) {
  CVector out = nodes_[a].value;
  for (auto& v : out) v = 1.0 / v.real();
  return push({Op::Recip, a, 0, {}, nullptr, std::move(out), {}});
}

Tape::Id Tape::real(Id a) {
  CVector out = nodes_[a].value;
  for (auto& v : out) v = v.real();
  return push({Op::Real, a, 0, {}, nullptr, std::move(out), {}});
}

Tape::Id Tape::sum(Id a) {
  cplx acc = 0.0;
  for (const auto& v : nodes_[a].value) acc += v;
  return push({Op::Sum, a, 0, {}, nullptr, CVector{acc}, {}});
}

Tape::Id Tape::mean(Id a) {
  cplx acc = 0.0;
  for (const auto& v : nodes_[a].value) acc += v;
  return push({Op::Mean, a, 0, {}, nullptr, CVector{acc / static_cast<double>(nodes_[a].value.size())}, {}});
}

Tape::Id Tape::wsum(Id a, const cplx* w) {
  const auto& va = nodes_[a].value;
  cplx acc = 0.0;
  for (std::size_t p = 0; p < va.size(); ++p) acc += w[p] * va[p];
  return push({Op::WSum, a, 0, {}, w, CVector{acc}, {}});
}

Tape::Id Tape::conv(Id a, const cplx* k) {
  CVector out = nodes_[a].value;
  if (out.size() != grid()) throw Error(ErrorKind::ShapeMismatch, "tape conv needs a grid node");
  detail::convolve_inplace(out.data(), shape_, k);
  return push({Op::Conv, a, 0, {}, k, std::move(out), {}});
}

void Tape::accumulate(Id target, const CVector& g) {
  auto& t = nodes_[target];
  if (t.grad.empty()) t.grad.assign(t.value.size(), cplx{});
  if (t.grad.size() == g.size()) {
    for (std::size_t p = 0; p < g.size(); ++p) t.grad[p] += g[p];
  } else {
    // grid gradient flowing into a broadcast scalar
    cplx acc = 0.0;
    for (const auto& v : g) acc += v;
    t.grad[0] += acc;
  }
}

void Tape::backward(Id root) {
  for (auto& n : nodes_) n.grad.clear();
  nodes_[root].grad.assign(nodes_[root].value.size(), cplx(1.0));
  for (Id id = root + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.empty()) continue;
    const CVector g = n.grad;
    const std::size_t sz = n.value.size();
    switch (n.op) {
      case Op::Input:
      case Op::Const:
        break;
      case Op::Add:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::Sub: {
        accumulate(n.a, g);
        CVector ng(g.size());
        for (std::size_t p = 0; p < g.size(); ++p) ng[p] = -g[p];
        accumulate(n.b, ng);
        break;
      }
      case Op::Mul: {
        const CVector va = nodes_[n.a].value;
        const CVector vb = nodes_[n.b].value;
        CVector ga(sz), gb(sz);
        for (std::size_t p = 0; p < sz; ++p) {
          ga[p] = g[p] * std::conj(at(vb, p));
          gb[p] = g[p] * std::conj(at(va, p));
        }
        accumulate(n.a, ga);
        accumulate(n.b, gb);
        break;
      }
      case Op::Scale: {
        CVector ga(g);
        for (auto& v : ga) v *= std::conj(n.s);
        accumulate(n.a, ga);
        break;
      }
      case Op::Shift:
        accumulate(n.a, g);
        break;
      case Op::Conj: {
        CVector ga(g);
        for (auto& v : ga) v = std::conj(v);
        accumulate(n.a, ga);
        break;
      }
      case Op::Abs: {
        const auto& va = nodes_[n.a].value;
        CVector ga(sz);
        for (std::size_t p = 0; p < sz; ++p) ga[p] = g[p].real() * va[p] / std::max(std::abs(va[p]), kFloor);
        accumulate(n.a, ga);
        break;
      }
      case Op::Sg: {
        const auto& va = nodes_[n.a].value;
        CVector ga(sz);
        for (std::size_t p = 0; p < sz; ++p) {
          const double r = std::max(std::abs(va[p]), kFloor);
          const cplx s = va[p] / r;
          ga[p] = (g[p] - (std::conj(g[p]) * s).real() * s) / r;
        }
        accumulate(n.a, ga);
        break;
      }
      case Op::Recip: {
        CVector ga(sz);
        for (std::size_t p = 0; p < sz; ++p) ga[p] = -g[p].real() * n.value[p].real() * n.value[p].real();
        accumulate(n.a, ga);
        break;
      }
      case Op::Real: {
        CVector ga(sz);
        for (std::size_t p = 0; p < sz; ++p) ga[p] = g[p].real();
        accumulate(n.a, ga);
        break;
      }
      case Op::Sum:
      case Op::Mean: {
        const std::size_t m = nodes_[n.a].value.size();
        const cplx v = n.op == Op::Mean ? g[0] / static_cast<double>(m) : g[0];
        accumulate(n.a, CVector(m, v));
        break;
      }
      case Op::WSum: {
        const std::size_t m = nodes_[n.a].value.size();
        CVector ga(m);
        for (std::size_t p = 0; p < m; ++p) ga[p] = g[0] * std::conj(n.ptr[p]);
        accumulate(n.a, ga);
        break;
      }
      case Op::Conv: {
        CVector ga(g);
        detail::convolve_adjoint_inplace(ga.data(), shape_, n.ptr);
        accumulate(n.a, ga);
        break;
      }
    }
  }
}

}  // namespace statsep::ad
