#ifndef CAIBC_NN_HPP_
#define CAIBC_NN_HPP_

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <vector>

namespace caibc::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Handle into a Tape node. Default-constructed handles are invalid.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff tape. Nodes are created in topological order by
// construction; backward() walks them in reverse. One tape per training
// step; values and gradients live inside the tape.
class Tape {
 public:
  Var leaf(Matrix value);
  // Constant: participates in forward values but receives no gradient.
  Var constant(Matrix value);
  // Cuts the gradient flow at v.
  Var detach(Var v);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  // Zero-filled if the node never received a gradient.
  Matrix grad(Var v) const;

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var div(Var a, Var b);  // elementwise
  Var scale(Var a, double c);
  Var scale_by(Var a, Var s);  // s is 1x1
  Var add_const(Var a, double c);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add_colvec(Var m, Var b);  // broadcast column vector b over columns of m
  Var sigmoid(Var a);
  Var tanh_(Var a);
  Var relu(Var a);
  Var sqrt_(Var a);
  // log(max(a, eps)); gradient is 1/a where a > eps, else 0.
  Var log_floor(Var a, double eps);
  Var rowwise_max(Var a);  // R x C -> R x 1
  Var colwise_max(Var a);  // R x C -> 1 x C
  Var cols_block(Var a, int start, int count);
  // Gather rows; duplicate indices accumulate gradient.
  Var select_rows(Var a, std::vector<int> idx);
  Var concat_rows(const std::vector<Var>& parts);  // vertical stack
  Var scale_rows(Var m, Var s);  // row i of m scaled by s(i, 0)
  Var sum(Var a);                // 1 x 1
  Var dot(Var a, Var b);         // 1 x 1
  // Softmax over the rows of each column.
  Var softmax_col(Var a);

  // 2-D convolution on a C x (H*W) row-major-flattened map.
  // weight: out_ch x (in_ch*ksize*ksize), bias: out_ch x 1.
  Var conv2d(Var input, Var weight, Var bias, int in_ch, int h, int w,
             int out_ch, int ksize, int stride, int pad);

  // Seeds d(root)/d(root) = 1 (root must be 1x1) and propagates.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;  // empty until touched
    std::function<void(Tape&)> back;
  };

  Var make(Matrix value, std::function<void(Tape&)> back);
  void accum(int id, const Matrix& g);

  std::vector<Node> nodes_;
};

inline double scalar(const Tape& t, Var v) { return t.value(v)(0, 0); }

// Output spatial extent of a strided convolution.
int conv_out_extent(int extent, int ksize, int stride, int pad);

}  // namespace caibc::nn

#endif  // CAIBC_NN_HPP_
