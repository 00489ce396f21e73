#include "caibc/nn.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>

namespace caibc::nn {

Var Tape::make(Matrix value, std::function<void(Tape&)> back) {
  nodes_.push_back(Node{std::move(value), Matrix(), std::move(back)});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::accum(int id, const Matrix& g) {
  Matrix& dst = nodes_[id].grad;
  if (dst.size() == 0) {
    dst = g;
  } else {
    dst += g;
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::leaf(Matrix value) { return make(std::move(value), nullptr); }

Var Tape::constant(Matrix value) { return make(std::move(value), nullptr); }

Var Tape::detach(Var v) { return make(nodes_[v.id].value, nullptr); }

Var Tape::add(Var a, Var b) {
  int self = static_cast<int>(nodes_.size());
  int ia = a.id, ib = b.id;
  return make(value(a) + value(b), [self, ia, ib](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    t.accum(ia, g);
    t.accum(ib, g);
  });
}

Var Tape::sub(Var a, Var b) {
  int self = static_cast<int>(nodes_.size());
  int ia = a.id, ib = b.id;
  return make(value(a) - value(b), [self, ia, ib](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    t.accum(ia, g);
    t.accum(ib, -g);
  });
}

Var Tape::mul(Var a, Var b) {
  int self = static_cast<int>(nodes_.size());
  int ia = a.id, ib = b.id;
  return make(value(a).cwiseProduct(value(b)), [self, ia, ib](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    t.accum(ia, g.cwiseProduct(t.nodes_[ib].value));
    t.accum(ib, g.cwiseProduct(t.nodes_[ia].value));
  });
}

Var Tape::div(Var a, Var b) {
  int self = static_cast<int>(nodes_.size());
  int ia = a.id, ib = b.id;
  return make(value(a).cwiseQuotient(value(b)), [self, ia, ib](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& bv = t.nodes_[ib].value;
    const Matrix& av = t.nodes_[ia].value;
    t.accum(ia, g.cwiseQuotient(bv));
    t.accum(ib, -g.cwiseProduct(av).cwiseQuotient(bv.cwiseProduct(bv)));
  });
}

Var Tape::scale(Var a, double c) {
  int self = static_cast<int>(nodes_.size());
  int ia = a.id;
  return make(value(a) * c, [self, ia, c](Tape& t) {
    t.accum(ia, t.nodes_[self].grad * c);
  });
}

Var Tape::scale_by(Var a, Var s) {
  int self = static_cast<int>(nodes_.size());
  int ia = a.id, is = s.id;
  return make(value(a) * value(s)(0, 0), [self, ia, is](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    t.accum(ia, g * t.nodes_[is].value(0, 0));
    Matrix ds(1, 1);
    ds(0, 0) = g.cwiseProduct(t.nodes_[ia].value).sum();
    t.accum(is, ds);
  });
}

Var Tape::add_const(Var a, double c) {
  int self = static_cast<int>(nodes_.size());
  int ia = a.id;
  return make(value(a).array() + c, [self, ia](Tape& t) {
    t.accum(ia, t.nodes_[self].grad);
  });
}

Var Tape::matmul(Var a, Var b) {
  int self = static_cast<int>(nodes_.size());
  int ia = a.id, ib = b.id;
  return make(value(a) * value(b), [self, ia, ib](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    t.accum(ia, g * t.nodes_[ib].value.transpose());
    t.accum(ib, t.nodes_[ia].value.transpose() * g);
  });
}

Var Tape::transpose(Var a) {
  int self = static_cast<int>(nodes_.size());
  int ia = a.id;
  return make(value(a).transpose(), [self, ia](Tape& t) {
    t.accum(ia, t.nodes_[self].grad.transpose());
  });
}

Var Tape::add_colvec(Var m, Var b) {
  int self = static_cast<int>(nodes_.size());
  int im = m.id, ib = b.id;
  Matrix v = value(m);
  v.colwise() += Eigen::VectorXd(value(b).col(0));
  return make(std::move(v), [self, im, ib](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    t.accum(im, g);
    t.accum(ib, g.rowwise().sum());
  });
}

Var Tape::sigmoid(Var a) {
  int self = static_cast<int>(nodes_.size());
  int ia = a.id;
  Matrix v = value(a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return make(std::move(v), [self, ia](Tape& t) {
    const Matrix& y = t.nodes_[self].value;
    const Matrix& g = t.nodes_[self].grad;
    t.accum(ia, g.cwiseProduct(y.cwiseProduct(Matrix::Ones(y.rows(), y.cols()) - y)));
  });
}

Var Tape::tanh_(Var a) {
  int self = static_cast<int>(nodes_.size());
  int ia = a.id;
  Matrix v = value(a).array().tanh();
  return make(std::move(v), [self, ia](Tape& t) {
    const Matrix& y = t.nodes_[self].value;
    const Matrix& g = t.nodes_[self].grad;
    t.accum(ia, g.cwiseProduct(Matrix::Ones(y.rows(), y.cols()) - y.cwiseProduct(y)));
  });
}

Var Tape::relu(Var a) {
  int self = static_cast<int>(nodes_.size());
  int ia = a.id;
  Matrix v = value(a).cwiseMax(0.0);
  return make(std::move(v), [self, ia](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& x = t.nodes_[ia].value;
    Matrix mask = (x.array() > 0.0).cast<double>();
    t.accum(ia, g.cwiseProduct(mask));
  });
}

Var Tape::sqrt_(Var a) {
  int self = static_cast<int>(nodes_.size());
  int ia = a.id;
  Matrix v = value(a).array().sqrt();
  return make(std::move(v), [self, ia](Tape& t) {
    const Matrix& y = t.nodes_[self].value;
    const Matrix& g = t.nodes_[self].grad;
    t.accum(ia, g.cwiseQuotient(2.0 * y));
  });
}

Var Tape::log_floor(Var a, double eps) {
  int self = static_cast<int>(nodes_.size());
  int ia = a.id;
  Matrix v = value(a).unaryExpr([eps](double x) { return std::log(std::max(x, eps)); });
  return make(std::move(v), [self, ia, eps](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& x = t.nodes_[ia].value;
    Matrix dg = g.binaryExpr(x, [eps](double gv, double xv) {
      return xv > eps ? gv / xv : 0.0;
    });
    t.accum(ia, dg);
  });
}

Var Tape::rowwise_max(Var a) {
  int self = static_cast<int>(nodes_.size());
  int ia = a.id;
  const Matrix& x = value(a);
  Matrix v(x.rows(), 1);
  auto argmax = std::make_shared<std::vector<int>>(x.rows());
  for (int r = 0; r < x.rows(); ++r) {
    int c;
    v(r, 0) = x.row(r).maxCoeff(&c);
    (*argmax)[r] = c;
  }
  return make(std::move(v), [self, ia, argmax](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& x = t.nodes_[ia].value;
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    for (int r = 0; r < x.rows(); ++r) dx(r, (*argmax)[r]) += g(r, 0);
    t.accum(ia, dx);
  });
}

Var Tape::colwise_max(Var a) {
  int self = static_cast<int>(nodes_.size());
  int ia = a.id;
  const Matrix& x = value(a);
  Matrix v(1, x.cols());
  auto argmax = std::make_shared<std::vector<int>>(x.cols());
  for (int c = 0; c < x.cols(); ++c) {
    int r;
    v(0, c) = x.col(c).maxCoeff(&r);
    (*argmax)[c] = r;
  }
  return make(std::move(v), [self, ia, argmax](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& x = t.nodes_[ia].value;
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    for (int c = 0; c < x.cols(); ++c) dx((*argmax)[c], c) += g(0, c);
    t.accum(ia, dx);
  });
}

Var Tape::cols_block(Var a, int start, int count) {
  int self = static_cast<int>(nodes_.size());
  int ia = a.id;
  return make(value(a).middleCols(start, count), [self, ia, start, count](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& x = t.nodes_[ia].value;
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    dx.middleCols(start, count) = g;
    t.accum(ia, dx);
  });
}

Var Tape::select_rows(Var a, std::vector<int> idx) {
  int self = static_cast<int>(nodes_.size());
  int ia = a.id;
  const Matrix& x = value(a);
  Matrix v(static_cast<int>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) v.row(static_cast<int>(i)) = x.row(idx[i]);
  auto rows = std::make_shared<std::vector<int>>(std::move(idx));
  return make(std::move(v), [self, ia, rows](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& x = t.nodes_[ia].value;
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    for (std::size_t i = 0; i < rows->size(); ++i) {
      dx.row((*rows)[i]) += g.row(static_cast<int>(i));
    }
    t.accum(ia, dx);
  });
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  int self = static_cast<int>(nodes_.size());
  if (parts.empty()) throw std::logic_error("concat_rows: no parts");
  int rows = 0;
  int cols = static_cast<int>(value(parts[0]).cols());
  for (Var p : parts) rows += static_cast<int>(value(p).rows());
  Matrix v(rows, cols);
  auto ids = std::make_shared<std::vector<int>>();
  int r = 0;
  for (Var p : parts) {
    const Matrix& pv = value(p);
    v.middleRows(r, pv.rows()) = pv;
    r += static_cast<int>(pv.rows());
    ids->push_back(p.id);
  }
  return make(std::move(v), [self, ids](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    int r = 0;
    for (int pid : *ids) {
      int pr = static_cast<int>(t.nodes_[pid].value.rows());
      t.accum(pid, g.middleRows(r, pr));
      r += pr;
    }
  });
}

Var Tape::scale_rows(Var m, Var s) {
  int self = static_cast<int>(nodes_.size());
  int im = m.id, is = s.id;
  Matrix v = value(m);
  const Matrix& sv = value(s);
  for (int r = 0; r < v.rows(); ++r) v.row(r) *= sv(r, 0);
  return make(std::move(v), [self, im, is](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& mv = t.nodes_[im].value;
    const Matrix& sv = t.nodes_[is].value;
    Matrix dm = g;
    for (int r = 0; r < dm.rows(); ++r) dm.row(r) *= sv(r, 0);
    t.accum(im, dm);
    Matrix ds(sv.rows(), 1);
    for (int r = 0; r < sv.rows(); ++r) ds(r, 0) = g.row(r).dot(mv.row(r));
    t.accum(is, ds);
  });
}

Var Tape::sum(Var a) {
  int self = static_cast<int>(nodes_.size());
  int ia = a.id;
  Matrix v(1, 1);
  v(0, 0) = value(a).sum();
  return make(std::move(v), [self, ia](Tape& t) {
    const Matrix& x = t.nodes_[ia].value;
    double g = t.nodes_[self].grad(0, 0);
    t.accum(ia, Matrix::Constant(x.rows(), x.cols(), g));
  });
}

Var Tape::dot(Var a, Var b) {
  int self = static_cast<int>(nodes_.size());
  int ia = a.id, ib = b.id;
  Matrix v(1, 1);
  v(0, 0) = value(a).cwiseProduct(value(b)).sum();
  return make(std::move(v), [self, ia, ib](Tape& t) {
    double g = t.nodes_[self].grad(0, 0);
    t.accum(ia, g * t.nodes_[ib].value);
    t.accum(ib, g * t.nodes_[ia].value);
  });
}

Var Tape::softmax_col(Var a) {
  int self = static_cast<int>(nodes_.size());
  int ia = a.id;
  const Matrix& x = value(a);
  Matrix v(x.rows(), x.cols());
  for (int c = 0; c < x.cols(); ++c) {
    Eigen::VectorXd col = x.col(c);
    double m = col.maxCoeff();
    Eigen::VectorXd e = (col.array() - m).exp();
    v.col(c) = e / e.sum();
  }
  return make(std::move(v), [self, ia](Tape& t) {
    const Matrix& p = t.nodes_[self].value;
    const Matrix& g = t.nodes_[self].grad;
    Matrix dx(p.rows(), p.cols());
    for (int c = 0; c < p.cols(); ++c) {
      double s = g.col(c).dot(p.col(c));
      dx.col(c) = p.col(c).array() * (g.col(c).array() - s);
    }
    t.accum(ia, dx);
  });
}

Var Tape::conv2d(Var input, Var weight, Var bias, int in_ch, int h, int w,
                 int out_ch, int ksize, int stride, int pad) {
  const Matrix& x = value(input);
  if (x.rows() != in_ch || x.cols() != static_cast<Eigen::Index>(h) * w) {
    throw std::logic_error("conv2d: input shape mismatch");
  }
  int oh = conv_out_extent(h, ksize, stride, pad);
  int ow = conv_out_extent(w, ksize, stride, pad);

  auto xcol = std::make_shared<Matrix>(Matrix::Zero(in_ch * ksize * ksize, oh * ow));
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      int col = oy * ow + ox;
      for (int ky = 0; ky < ksize; ++ky) {
        int iy = oy * stride - pad + ky;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < ksize; ++kx) {
          int ix = ox * stride - pad + kx;
          if (ix < 0 || ix >= w) continue;
          for (int c = 0; c < in_ch; ++c) {
            (*xcol)((c * ksize + ky) * ksize + kx, col) = x(c, iy * w + ix);
          }
        }
      }
    }
  }

  Matrix v = value(weight) * (*xcol);
  v.colwise() += Eigen::VectorXd(value(bias).col(0));

  int self = static_cast<int>(nodes_.size());
  int ii = input.id, iw = weight.id, ib = bias.id;
  return make(std::move(v), [self, ii, iw, ib, xcol, in_ch, h, w, ksize, stride,
                             pad, oh, ow](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    t.accum(iw, g * xcol->transpose());
    t.accum(ib, g.rowwise().sum());
    Matrix dxcol = t.nodes_[iw].value.transpose() * g;
    Matrix dx = Matrix::Zero(in_ch, static_cast<Eigen::Index>(h) * w);
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        int col = oy * ow + ox;
        for (int ky = 0; ky < ksize; ++ky) {
          int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < ksize; ++kx) {
            int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            for (int c = 0; c < in_ch; ++c) {
              dx(c, iy * w + ix) += dxcol((c * ksize + ky) * ksize + kx, col);
            }
          }
        }
      }
    }
    t.accum(ii, dx);
  });
}

void Tape::backward(Var root) {
  Node& r = nodes_[root.id];
  if (r.value.rows() != 1 || r.value.cols() != 1) {
    throw std::logic_error("backward: root must be a scalar");
  }
  accum(root.id, Matrix::Ones(1, 1));
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0 || !n.back) continue;
    n.back(*this);
  }
}

int conv_out_extent(int extent, int ksize, int stride, int pad) {
  return (extent + 2 * pad - ksize) / stride + 1;
}

}  // namespace caibc::nn
