#pragma once

#include <functional>
#include <string>
#include <vector>

#include "intercross/blobio.hpp"

namespace intercross::ad {

using intercross::Matrix;

// Reverse-mode tape over dense double matrices. One tape per forward pass;
// node ids are indices into the tape. Scalars are 1x1 matrices.
class Tape {
 public:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&)> backward;
    bool needs_grad = false;
    Matrix* grad_sink = nullptr;  // parameter leaves accumulate here
  };

  int constant(Matrix value);
  // Copies `value`; after backward() the leaf's gradient is added into *grad_sink
  // (pass nullptr to get a differentiable leaf whose grad stays on the tape).
  int param(const Matrix& value, Matrix* grad_sink);

  const Matrix& val(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  const Matrix& grad_of(int id) const { return nodes_[static_cast<size_t>(id)].grad; }
  double scalar(int id) const { return nodes_[static_cast<size_t>(id)].value(0, 0); }
  size_t size() const { return nodes_.size(); }

  int matmul(int a, int b);
  int add(int a, int b);
  int sub(int a, int b);
  int hadamard(int a, int b);
  int scale(int a, double s);
  int add_rowvec(int a, int rowvec);   // a: RxC, rowvec: 1xC
  int repeat_row(int rowvec, int n);   // 1xC -> nxC
  int concat_cols(int a, int b);
  int concat_rows(const std::vector<int>& parts);
  int slice_cols(int a, int col0, int ncols);
  int slice_rows(int a, int row0, int nrows);
  int gather_rows(int a, std::vector<int> rows);  // embedding lookup
  int reshape(int a, int rows, int cols);         // row-major reinterpret
  int transpose(int a);
  int tanh(int a);
  int sigmoid(int a);
  int relu(int a);
  int softmax_rows(int a);
  int sum(int a);
  int mean_all(int a);
  int frobenius_sq(int a);
  int l2_normalize_rows(int a);
  // im2col over time: rows of `a` are timesteps; output row t is the
  // concatenation of rows t*stride - pad .. t*stride - pad + k - 1 (zeros
  // outside the range).
  int unfold_time(int a, int kernel, int stride);

  // Mean of mask-weighted squared error; mask entries are 0/1.
  int masked_mse(int pred, const Matrix& target, const Matrix& mask);
  // Numerically stable BCE on logits, mean over mask.
  int masked_bce_logits(int logits, const Matrix& targets, const Matrix& mask);
  // Mean over rows of cross-entropy between row-softmax(logits) and labels.
  int softmax_xent(int logits, const std::vector<int>& labels);

  // Seeds d(root)=1, walks the tape in reverse, then flushes parameter
  // leaves into their grad sinks. `root` must be 1x1.
  void backward(int root);

 private:
  int push(Matrix value, bool needs_grad, std::function<void(Tape&)> back);
  bool any_needs_grad(int a) const { return nodes_[static_cast<size_t>(a)].needs_grad; }
  Matrix& mutable_grad(int id) { return nodes_[static_cast<size_t>(id)].grad; }

  std::vector<Node> nodes_;
};

}  // namespace intercross::ad
