#pragma once

#include <functional>
#include <vector>

#include "hycomp/types.hpp"

// Minimal reverse-accumulation tape over dense matrices. Nodes are created
// in topological order, so the backward sweep is a reverse walk over the
// Wengert list. Scalars travel as 1x1 matrices.

namespace hycomp::ad {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  Var leaf(Mat value);

  const Mat& val(Var v) const { return nodes_[v.id].val; }
  Mat& grad(Var v) { return nodes_[v.id].grad; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(root)/d(root) = 1 (root must be 1x1) and sweeps backward.
  void backward(Var root);

  // Elementwise, same shape.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);

  // Constant scalars.
  Var scale(Var a, double c);
  Var add_const(Var a, double c);

  // 1x1 Var broadcast over every entry.
  Var mul_scalar(Var a, Var s);
  Var add_scalar(Var a, Var s);

  Var matmul(Var a, Var b);     // A * B
  Var matmul_nt(Var a, Var b);  // A * B^T
  Var matmul_tn(Var a, Var b);  // A^T * B
  Var transpose(Var a);

  // Column [n x 1] broadcast across the columns of A [n x m].
  Var mul_cols(Var a, Var col);
  Var add_cols(Var a, Var col);
  // Row [1 x m] broadcast down the rows of A [n x m].
  Var add_row(Var a, Var row);

  Var relu(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var sqrt(Var a);
  Var cosh(Var a);
  Var sinh(Var a);
  Var sinhc(Var a);  // sinh(x)/x, finite at 0
  Var recip(Var a);
  Var pow_const(Var a, double p);

  // Clamped inverse trig/hyperbolic; gradient is zero in the clamped region.
  Var acosh_min1(Var a);
  Var acos_clamped(Var a);
  Var asin_clamped(Var a);

  Var max_const(Var a, double c);
  Var min_const(Var a, double c);

  Var rowwise_sum(Var a);     // [n x m] -> [n x 1]
  Var colwise_sum(Var a);     // [n x m] -> [1 x m]
  Var sum_all(Var a);         // -> [1 x 1]
  Var mean_all(Var a);        // -> [1 x 1]
  Var rowwise_sqnorm(Var a);  // -> [n x 1]
  // sqrt(|row|^2 + eps2); smooth at zero rows.
  Var rowwise_norm(Var a, double eps2 = 1e-24);
  Var rowwise_dot(Var a, Var b);  // -> [n x 1]

  Var gather_rows(Var a, std::vector<int> idx);
  Var concat_rows(const std::vector<Var>& parts);
  Var concat_cols(const std::vector<Var>& parts);
  Var slice_cols(Var a, Eigen::Index start, Eigen::Index len);

  // Row maxima as a constant [n x 1]; no gradient flows (used as a softmax
  // stabilizer, where the shift cancels exactly).
  Var rowwise_max_detached(Var a);

 private:
  struct Node {
    Mat val;
    Mat grad;
    std::function<void(Tape&)> back;
  };

  std::vector<Node> nodes_;

  Var push(Mat v);
  void set_back(Var v, std::function<void(Tape&)> fn) {
    nodes_[v.id].back = std::move(fn);
  }
};

}  // namespace hycomp::ad
