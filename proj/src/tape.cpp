#include "hycomp/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace hycomp::ad {

namespace {

constexpr double kTrigLim = 1.0 - 1e-12;

double sinhc_val(double x) {
  if (std::abs(x) < 1e-4) {
    const double x2 = x * x;
    return 1.0 + x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sinh(x) / x;
}

// d/dx sinh(x)/x
double sinhc_grad(double x) {
  if (std::abs(x) < 1e-4) {
    const double x2 = x * x;
    return x / 3.0 + x * x2 / 30.0;
  }
  return (x * std::cosh(x) - std::sinh(x)) / (x * x);
}

}  // namespace

Var Tape::push(Mat v) {
  Node n;
  n.val = std::move(v);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Var Tape::leaf(Mat value) { return push(std::move(value)); }

void Tape::backward(Var root) {
  if (val(root).size() != 1)
    throw std::logic_error("backward: root must be scalar");
  for (auto& n : nodes_) n.grad = Mat::Zero(n.val.rows(), n.val.cols());
  nodes_[root.id].grad(0, 0) = 1.0;
  for (int i = root.id; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back(*this);
}

Var Tape::add(Var a, Var b) {
  Var r = push(val(a) + val(b));
  set_back(r, [a, b, r](Tape& t) {
    t.grad(a) += t.grad(r);
    t.grad(b) += t.grad(r);
  });
  return r;
}

Var Tape::sub(Var a, Var b) {
  Var r = push(val(a) - val(b));
  set_back(r, [a, b, r](Tape& t) {
    t.grad(a) += t.grad(r);
    t.grad(b) -= t.grad(r);
  });
  return r;
}

Var Tape::mul(Var a, Var b) {
  Var r = push(val(a).cwiseProduct(val(b)));
  set_back(r, [a, b, r](Tape& t) {
    t.grad(a) += t.grad(r).cwiseProduct(t.val(b));
    t.grad(b) += t.grad(r).cwiseProduct(t.val(a));
  });
  return r;
}

Var Tape::scale(Var a, double c) {
  Var r = push(c * val(a));
  set_back(r, [a, r, c](Tape& t) { t.grad(a) += c * t.grad(r); });
  return r;
}

Var Tape::add_const(Var a, double c) {
  Var r = push(val(a).array() + c);
  set_back(r, [a, r](Tape& t) { t.grad(a) += t.grad(r); });
  return r;
}

Var Tape::mul_scalar(Var a, Var s) {
  Var r = push(val(s)(0, 0) * val(a));
  set_back(r, [a, s, r](Tape& t) {
    t.grad(a) += t.val(s)(0, 0) * t.grad(r);
    t.grad(s)(0, 0) += t.grad(r).cwiseProduct(t.val(a)).sum();
  });
  return r;
}

Var Tape::add_scalar(Var a, Var s) {
  Var r = push(val(a).array() + val(s)(0, 0));
  set_back(r, [a, s, r](Tape& t) {
    t.grad(a) += t.grad(r);
    t.grad(s)(0, 0) += t.grad(r).sum();
  });
  return r;
}

Var Tape::matmul(Var a, Var b) {
  Var r = push(val(a) * val(b));
  set_back(r, [a, b, r](Tape& t) {
    t.grad(a) += t.grad(r) * t.val(b).transpose();
    t.grad(b) += t.val(a).transpose() * t.grad(r);
  });
  return r;
}

Var Tape::matmul_nt(Var a, Var b) {
  Var r = push(val(a) * val(b).transpose());
  set_back(r, [a, b, r](Tape& t) {
    t.grad(a) += t.grad(r) * t.val(b);
    t.grad(b) += t.grad(r).transpose() * t.val(a);
  });
  return r;
}

Var Tape::matmul_tn(Var a, Var b) {
  Var r = push(val(a).transpose() * val(b));
  set_back(r, [a, b, r](Tape& t) {
    t.grad(a) += t.val(b) * t.grad(r).transpose();
    t.grad(b) += t.val(a) * t.grad(r);
  });
  return r;
}

Var Tape::transpose(Var a) {
  Var r = push(val(a).transpose());
  set_back(r, [a, r](Tape& t) { t.grad(a) += t.grad(r).transpose(); });
  return r;
}

Var Tape::mul_cols(Var a, Var col) {
  Var r = push(val(a).array().colwise() * val(col).col(0).array());
  set_back(r, [a, col, r](Tape& t) {
    t.grad(a) +=
        (t.grad(r).array().colwise() * t.val(col).col(0).array()).matrix();
    t.grad(col).col(0) +=
        t.grad(r).cwiseProduct(t.val(a)).rowwise().sum();
  });
  return r;
}

Var Tape::add_cols(Var a, Var col) {
  Var r = push(val(a).array().colwise() + val(col).col(0).array());
  set_back(r, [a, col, r](Tape& t) {
    t.grad(a) += t.grad(r);
    t.grad(col).col(0) += t.grad(r).rowwise().sum();
  });
  return r;
}

Var Tape::add_row(Var a, Var row) {
  Var r = push(val(a).array().rowwise() + val(row).row(0).array());
  set_back(r, [a, row, r](Tape& t) {
    t.grad(a) += t.grad(r);
    t.grad(row).row(0) += t.grad(r).colwise().sum();
  });
  return r;
}

Var Tape::relu(Var a) {
  Var r = push(val(a).cwiseMax(0.0));
  set_back(r, [a, r](Tape& t) {
    t.grad(a) += t.grad(r)
                     .cwiseProduct((t.val(a).array() > 0.0).cast<double>().matrix());
  });
  return r;
}

Var Tape::exp(Var a) {
  Var r = push(val(a).array().exp());
  set_back(r, [a, r](Tape& t) { t.grad(a) += t.grad(r).cwiseProduct(t.val(r)); });
  return r;
}

Var Tape::log(Var a) {
  Var r = push(val(a).array().log());
  set_back(r, [a, r](Tape& t) {
    t.grad(a) += t.grad(r).cwiseQuotient(t.val(a));
  });
  return r;
}

Var Tape::sqrt(Var a) {
  Var r = push(val(a).array().sqrt());
  set_back(r, [a, r](Tape& t) {
    t.grad(a) += (t.grad(r).array() / (2.0 * t.val(r).array())).matrix();
  });
  return r;
}

Var Tape::cosh(Var a) {
  Var r = push(val(a).array().cosh());
  set_back(r, [a, r](Tape& t) {
    t.grad(a) += t.grad(r).cwiseProduct(t.val(a).array().sinh().matrix());
  });
  return r;
}

Var Tape::sinh(Var a) {
  Var r = push(val(a).array().sinh());
  set_back(r, [a, r](Tape& t) {
    t.grad(a) += t.grad(r).cwiseProduct(t.val(a).array().cosh().matrix());
  });
  return r;
}

Var Tape::sinhc(Var a) {
  Var r = push(val(a).unaryExpr([](double x) { return sinhc_val(x); }));
  set_back(r, [a, r](Tape& t) {
    t.grad(a) += t.grad(r).cwiseProduct(
        t.val(a).unaryExpr([](double x) { return sinhc_grad(x); }));
  });
  return r;
}

Var Tape::recip(Var a) {
  Var r = push(val(a).cwiseInverse());
  set_back(r, [a, r](Tape& t) {
    t.grad(a) -= t.grad(r).cwiseProduct(t.val(r).cwiseAbs2());
  });
  return r;
}

Var Tape::pow_const(Var a, double p) {
  if (p == 1.0) return a;
  Var r = push(val(a).array().pow(p));
  set_back(r, [a, r, p](Tape& t) {
    Mat d = t.val(a).unaryExpr([p](double x) {
      return x == 0.0 ? 0.0 : p * std::pow(x, p - 1.0);
    });
    t.grad(a) += t.grad(r).cwiseProduct(d);
  });
  return r;
}

Var Tape::acosh_min1(Var a) {
  Var r = push(val(a).unaryExpr(
      [](double x) { return std::acosh(std::max(1.0, x)); }));
  set_back(r, [a, r](Tape& t) {
    Mat d = t.val(a).unaryExpr([](double x) {
      return x > 1.0 + 1e-12 ? 1.0 / std::sqrt(x * x - 1.0) : 0.0;
    });
    t.grad(a) += t.grad(r).cwiseProduct(d);
  });
  return r;
}

Var Tape::acos_clamped(Var a) {
  Var r = push(val(a).unaryExpr([](double x) {
    return std::acos(std::clamp(x, -kTrigLim, kTrigLim));
  }));
  set_back(r, [a, r](Tape& t) {
    Mat d = t.val(a).unaryExpr([](double x) {
      return std::abs(x) < kTrigLim ? -1.0 / std::sqrt(1.0 - x * x) : 0.0;
    });
    t.grad(a) += t.grad(r).cwiseProduct(d);
  });
  return r;
}

Var Tape::asin_clamped(Var a) {
  Var r = push(val(a).unaryExpr([](double x) {
    return std::asin(std::clamp(x, -kTrigLim, kTrigLim));
  }));
  set_back(r, [a, r](Tape& t) {
    Mat d = t.val(a).unaryExpr([](double x) {
      return std::abs(x) < kTrigLim ? 1.0 / std::sqrt(1.0 - x * x) : 0.0;
    });
    t.grad(a) += t.grad(r).cwiseProduct(d);
  });
  return r;
}

Var Tape::max_const(Var a, double c) {
  Var r = push(val(a).cwiseMax(c));
  set_back(r, [a, r, c](Tape& t) {
    t.grad(a) += t.grad(r)
                     .cwiseProduct((t.val(a).array() > c).cast<double>().matrix());
  });
  return r;
}

Var Tape::min_const(Var a, double c) {
  Var r = push(val(a).cwiseMin(c));
  set_back(r, [a, r, c](Tape& t) {
    t.grad(a) += t.grad(r)
                     .cwiseProduct((t.val(a).array() < c).cast<double>().matrix());
  });
  return r;
}

Var Tape::rowwise_sum(Var a) {
  Var r = push(val(a).rowwise().sum());
  set_back(r, [a, r](Tape& t) {
    t.grad(a) +=
        t.grad(r).col(0).replicate(1, t.val(a).cols());
  });
  return r;
}

Var Tape::colwise_sum(Var a) {
  Var r = push(val(a).colwise().sum());
  set_back(r, [a, r](Tape& t) {
    t.grad(a) += t.grad(r).row(0).replicate(t.val(a).rows(), 1);
  });
  return r;
}

Var Tape::sum_all(Var a) {
  Mat s(1, 1);
  s(0, 0) = val(a).sum();
  Var r = push(std::move(s));
  set_back(r, [a, r](Tape& t) {
    t.grad(a).array() += t.grad(r)(0, 0);
  });
  return r;
}

Var Tape::mean_all(Var a) {
  const double n = static_cast<double>(val(a).size());
  Mat s(1, 1);
  s(0, 0) = val(a).sum() / n;
  Var r = push(std::move(s));
  set_back(r, [a, r, n](Tape& t) {
    t.grad(a).array() += t.grad(r)(0, 0) / n;
  });
  return r;
}

Var Tape::rowwise_sqnorm(Var a) {
  Var r = push(val(a).rowwise().squaredNorm());
  set_back(r, [a, r](Tape& t) {
    t.grad(a) += 2.0 * (t.val(a).array().colwise() * t.grad(r).col(0).array())
                           .matrix();
  });
  return r;
}

Var Tape::rowwise_norm(Var a, double eps2) {
  Var r = push((val(a).rowwise().squaredNorm().array() + eps2).sqrt());
  set_back(r, [a, r](Tape& t) {
    Eigen::ArrayXd coef = t.grad(r).col(0).array() / t.val(r).col(0).array();
    t.grad(a) += (t.val(a).array().colwise() * coef).matrix();
  });
  return r;
}

Var Tape::rowwise_dot(Var a, Var b) {
  Var r = push(val(a).cwiseProduct(val(b)).rowwise().sum());
  set_back(r, [a, b, r](Tape& t) {
    t.grad(a) +=
        (t.val(b).array().colwise() * t.grad(r).col(0).array()).matrix();
    t.grad(b) +=
        (t.val(a).array().colwise() * t.grad(r).col(0).array()).matrix();
  });
  return r;
}

Var Tape::gather_rows(Var a, std::vector<int> idx) {
  Mat out(static_cast<Eigen::Index>(idx.size()), val(a).cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(i) = val(a).row(idx[i]);
  Var r = push(std::move(out));
  set_back(r, [a, r, idx = std::move(idx)](Tape& t) {
    for (std::size_t i = 0; i < idx.size(); ++i)
      t.grad(a).row(idx[i]) += t.grad(r).row(i);
  });
  return r;
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  Eigen::Index rows = 0;
  for (Var p : parts) rows += val(p).rows();
  Mat out(rows, val(parts[0]).cols());
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleRows(at, val(p).rows()) = val(p);
    at += val(p).rows();
  }
  Var r = push(std::move(out));
  set_back(r, [parts, r](Tape& t) {
    Eigen::Index at = 0;
    for (Var p : parts) {
      const Eigen::Index n = t.val(p).rows();
      t.grad(p) += t.grad(r).middleRows(at, n);
      at += n;
    }
  });
  return r;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  Eigen::Index cols = 0;
  for (Var p : parts) cols += val(p).cols();
  Mat out(val(parts[0]).rows(), cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, val(p).cols()) = val(p);
    at += val(p).cols();
  }
  Var r = push(std::move(out));
  set_back(r, [parts, r](Tape& t) {
    Eigen::Index at = 0;
    for (Var p : parts) {
      const Eigen::Index n = t.val(p).cols();
      t.grad(p) += t.grad(r).middleCols(at, n);
      at += n;
    }
  });
  return r;
}

Var Tape::slice_cols(Var a, Eigen::Index start, Eigen::Index len) {
  Var r = push(val(a).middleCols(start, len));
  set_back(r, [a, r, start, len](Tape& t) {
    t.grad(a).middleCols(start, len) += t.grad(r);
  });
  return r;
}

Var Tape::rowwise_max_detached(Var a) {
  return push(val(a).rowwise().maxCoeff());
}

}  // namespace hycomp::ad
