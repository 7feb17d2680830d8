#pragma once

#include <vector>

#include "statsep/fields.hpp"

namespace statsep::ad {

// Reverse-mode tape over complex grids. Every node holds either a full grid
// (shape.size() values) or a scalar (one value); binary ops broadcast a
// scalar against a grid. Gradients follow the real-loss convention
//   df = Re sum conj(grad(v)) dv,
// so for a real input x with v = psi * x one gets df/dx = Re(psi^dagger * grad(v)).
class Tape {
 public:
  using Id = std::size_t;

  explicit Tape(Shape shape);

  Id input(CVector value);
  Id constant(CVector value);

  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id mul(Id a, Id b);
  Id scale(Id a, cplx s);
  Id shift(Id a, cplx s);
  Id conj(Id a);
  Id abs(Id a);   // |a|; backward clamps the modulus at 1e-12
  Id sg(Id a);    // a / |a|
  Id recip(Id a); // 1 / a for real-valued a
  Id real(Id a);
  Id mean(Id a);
  Id sum(Id a);
  // sum_p w[p] a[p]; w must outlive the tape and have grid size.
  Id wsum(Id a, const cplx* w);
  // Periodic convolution with Fourier multiplier k (grid size, outlives tape).
  Id conv(Id a, const cplx* k);

  const CVector& value(Id id) const { return nodes_[id].value; }
  const CVector& grad(Id id) const { return nodes_[id].grad; }
  std::size_t node_count() const { return nodes_.size(); }

  // Seeds d root = 1 (root must be a real-valued scalar) and propagates.
  void backward(Id root);

 private:
  enum class Op { Input, Const, Add, Sub, Mul, Scale, Shift, Conj, Abs, Sg, Recip, Real, Mean, Sum, WSum, Conv };
  struct Node {
    Op op;
    Id a = 0, b = 0;
    cplx s{};
    const cplx* ptr = nullptr;
    CVector value;
    CVector grad;
  };

  Id push(Node n);
  std::size_t grid() const { return shape_.size(); }
  void accumulate(Id target, const CVector& g);

  Shape shape_;
  std::vector<Node> nodes_;
};

}  // namespace statsep::ad
