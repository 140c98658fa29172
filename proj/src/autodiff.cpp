#include "intercross/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace intercross::ad {

namespace {

using RowMajorMap = Eigen::Map<
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void check(bool cond, const char* what) {
  if (!cond) throw std::logic_error(std::string("autodiff: ") + what);
}

}  // namespace

int Tape::push(Matrix value, bool needs_grad, std::function<void(Tape&)> back) {
  Node node;
  node.value = std::move(value);
  node.needs_grad = needs_grad;
  node.backward = std::move(back);
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

int Tape::param(const Matrix& value, Matrix* grad_sink) {
  const int id = push(value, true, nullptr);
  nodes_[static_cast<size_t>(id)].grad_sink = grad_sink;
  return id;
}

int Tape::matmul(int a, int b) {
  check(val(a).cols() == val(b).rows(), "matmul shape mismatch");
  const bool ng = any_needs_grad(a) || any_needs_grad(b);
  int id = push(val(a) * val(b), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward = [a, b, id](Tape& t) {
      const Matrix& g = t.grad_of(id);
      if (t.any_needs_grad(a)) t.mutable_grad(a).noalias() += g * t.val(b).transpose();
      if (t.any_needs_grad(b)) t.mutable_grad(b).noalias() += t.val(a).transpose() * g;
    };
  return id;
}

int Tape::add(int a, int b) {
  check(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(),
        "add shape mismatch");
  const bool ng = any_needs_grad(a) || any_needs_grad(b);
  int id = push(val(a) + val(b), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward = [a, b, id](Tape& t) {
      if (t.any_needs_grad(a)) t.mutable_grad(a) += t.grad_of(id);
      if (t.any_needs_grad(b)) t.mutable_grad(b) += t.grad_of(id);
    };
  return id;
}

int Tape::sub(int a, int b) {
  check(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(),
        "sub shape mismatch");
  const bool ng = any_needs_grad(a) || any_needs_grad(b);
  int id = push(val(a) - val(b), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward = [a, b, id](Tape& t) {
      if (t.any_needs_grad(a)) t.mutable_grad(a) += t.grad_of(id);
      if (t.any_needs_grad(b)) t.mutable_grad(b) -= t.grad_of(id);
    };
  return id;
}

int Tape::hadamard(int a, int b) {
  check(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(),
        "hadamard shape mismatch");
  const bool ng = any_needs_grad(a) || any_needs_grad(b);
  int id = push(val(a).cwiseProduct(val(b)), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward = [a, b, id](Tape& t) {
      const Matrix& g = t.grad_of(id);
      if (t.any_needs_grad(a)) t.mutable_grad(a) += g.cwiseProduct(t.val(b));
      if (t.any_needs_grad(b)) t.mutable_grad(b) += g.cwiseProduct(t.val(a));
    };
  return id;
}

int Tape::scale(int a, double s) {
  const bool ng = any_needs_grad(a);
  int id = push(val(a) * s, ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward = [a, s, id](Tape& t) {
      t.mutable_grad(a) += t.grad_of(id) * s;
    };
  return id;
}

int Tape::add_rowvec(int a, int rowvec) {
  check(val(rowvec).rows() == 1 && val(rowvec).cols() == val(a).cols(),
        "add_rowvec shape mismatch");
  const bool ng = any_needs_grad(a) || any_needs_grad(rowvec);
  int id = push(val(a).rowwise() + val(rowvec).row(0), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward = [a, rowvec, id](Tape& t) {
      const Matrix& g = t.grad_of(id);
      if (t.any_needs_grad(a)) t.mutable_grad(a) += g;
      if (t.any_needs_grad(rowvec))
        t.mutable_grad(rowvec).row(0) += g.colwise().sum();
    };
  return id;
}

int Tape::repeat_row(int rowvec, int n) {
  check(val(rowvec).rows() == 1, "repeat_row expects a row vector");
  const bool ng = any_needs_grad(rowvec);
  Matrix out = val(rowvec).replicate(n, 1);
  int id = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward = [rowvec, id](Tape& t) {
      t.mutable_grad(rowvec).row(0) += t.grad_of(id).colwise().sum();
    };
  return id;
}

int Tape::concat_cols(int a, int b) {
  check(val(a).rows() == val(b).rows(), "concat_cols row mismatch");
  const bool ng = any_needs_grad(a) || any_needs_grad(b);
  Matrix out(val(a).rows(), val(a).cols() + val(b).cols());
  out << val(a), val(b);
  const int ca = static_cast<int>(val(a).cols());
  int id = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward = [a, b, ca, id](Tape& t) {
      const Matrix& g = t.grad_of(id);
      if (t.any_needs_grad(a)) t.mutable_grad(a) += g.leftCols(ca);
      if (t.any_needs_grad(b)) t.mutable_grad(b) += g.rightCols(g.cols() - ca);
    };
  return id;
}

int Tape::concat_rows(const std::vector<int>& parts) {
  check(!parts.empty(), "concat_rows needs at least one part");
  Eigen::Index rows = 0;
  bool ng = false;
  for (int p : parts) {
    rows += val(p).rows();
    ng = ng || any_needs_grad(p);
  }
  Matrix out(rows, val(parts[0]).cols());
  Eigen::Index r = 0;
  for (int p : parts) {
    check(val(p).cols() == out.cols(), "concat_rows col mismatch");
    out.middleRows(r, val(p).rows()) = val(p);
    r += val(p).rows();
  }
  int id = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward = [parts, id](Tape& t) {
      const Matrix& g = t.grad_of(id);
      Eigen::Index r = 0;
      for (int p : parts) {
        const Eigen::Index n = t.val(p).rows();
        if (t.any_needs_grad(p)) t.mutable_grad(p) += g.middleRows(r, n);
        r += n;
      }
    };
  return id;
}

int Tape::slice_cols(int a, int col0, int ncols) {
  check(col0 >= 0 && col0 + ncols <= val(a).cols(), "slice_cols out of range");
  const bool ng = any_needs_grad(a);
  int id = push(val(a).middleCols(col0, ncols), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward = [a, col0, ncols, id](Tape& t) {
      t.mutable_grad(a).middleCols(col0, ncols) += t.grad_of(id);
    };
  return id;
}

int Tape::slice_rows(int a, int row0, int nrows) {
  check(row0 >= 0 && row0 + nrows <= val(a).rows(), "slice_rows out of range");
  const bool ng = any_needs_grad(a);
  int id = push(val(a).middleRows(row0, nrows), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward = [a, row0, nrows, id](Tape& t) {
      t.mutable_grad(a).middleRows(row0, nrows) += t.grad_of(id);
    };
  return id;
}

int Tape::gather_rows(int a, std::vector<int> rows) {
  const bool ng = any_needs_grad(a);
  Matrix out(static_cast<Eigen::Index>(rows.size()), val(a).cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    check(rows[i] >= 0 && rows[i] < val(a).rows(), "gather_rows out of range");
    out.row(static_cast<Eigen::Index>(i)) = val(a).row(rows[i]);
  }
  int id = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward = [a, rows = std::move(rows), id](Tape& t) {
      const Matrix& g = t.grad_of(id);
      for (size_t i = 0; i < rows.size(); ++i)
        t.mutable_grad(a).row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
    };
  return id;
}

int Tape::reshape(int a, int rows, int cols) {
  check(val(a).size() == static_cast<Eigen::Index>(rows) * cols, "reshape size mismatch");
  const bool ng = any_needs_grad(a);
  // Row-major reinterpretation of the source values.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm_src =
      val(a);
  Matrix out = RowMajorMap(rm_src.data(), rows, cols);
  const int src_rows = static_cast<int>(val(a).rows());
  const int src_cols = static_cast<int>(val(a).cols());
  int id = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward = [a, src_rows, src_cols, id](Tape& t) {
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm_g =
          t.grad_of(id);
      t.mutable_grad(a) += RowMajorMap(rm_g.data(), src_rows, src_cols);
    };
  return id;
}

int Tape::transpose(int a) {
  const bool ng = any_needs_grad(a);
  int id = push(val(a).transpose(), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward = [a, id](Tape& t) {
      t.mutable_grad(a) += t.grad_of(id).transpose();
    };
  return id;
}

int Tape::tanh(int a) {
  const bool ng = any_needs_grad(a);
  int id = push(val(a).array().tanh().matrix(), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward = [a, id](Tape& t) {
      const Matrix& y = t.val(id);
      t.mutable_grad(a).array() +=
          t.grad_of(id).array() * (1.0 - y.array().square());
    };
  return id;
}

int Tape::sigmoid(int a) {
  const bool ng = any_needs_grad(a);
  Matrix out = (1.0 / (1.0 + (-val(a).array()).exp())).matrix();
  int id = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward = [a, id](Tape& t) {
      const auto y = t.val(id).array();
      t.mutable_grad(a).array() += t.grad_of(id).array() * y * (1.0 - y);
    };
  return id;
}

int Tape::relu(int a) {
  const bool ng = any_needs_grad(a);
  int id = push(val(a).cwiseMax(0.0), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward = [a, id](Tape& t) {
      t.mutable_grad(a).array() +=
          t.grad_of(id).array() * (t.val(a).array() > 0.0).cast<double>();
    };
  return id;
}

int Tape::softmax_rows(int a) {
  const bool ng = any_needs_grad(a);
  Matrix out = val(a);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double mx = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - mx).exp();
    out.row(r) /= out.row(r).sum();
  }
  int id = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward = [a, id](Tape& t) {
      const Matrix& y = t.val(id);
      const Matrix& g = t.grad_of(id);
      Matrix& ga = t.mutable_grad(a);
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const double dot = g.row(r).dot(y.row(r));
        ga.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
      }
    };
  return id;
}

int Tape::sum(int a) {
  const bool ng = any_needs_grad(a);
  Matrix out(1, 1);
  out(0, 0) = val(a).sum();
  int id = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward = [a, id](Tape& t) {
      t.mutable_grad(a).array() += t.grad_of(id)(0, 0);
    };
  return id;
}

int Tape::mean_all(int a) {
  const double inv = 1.0 / static_cast<double>(val(a).size());
  return scale(sum(a), inv);
}

int Tape::frobenius_sq(int a) {
  const bool ng = any_needs_grad(a);
  Matrix out(1, 1);
  out(0, 0) = val(a).squaredNorm();
  int id = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward = [a, id](Tape& t) {
      t.mutable_grad(a) += 2.0 * t.grad_of(id)(0, 0) * t.val(a);
    };
  return id;
}

int Tape::l2_normalize_rows(int a) {
  const bool ng = any_needs_grad(a);
  const double eps = 1e-12;
  Matrix out = val(a);
  std::vector<double> norms(static_cast<size_t>(out.rows()));
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    norms[static_cast<size_t>(r)] = out.row(r).norm() + eps;
    out.row(r) /= norms[static_cast<size_t>(r)];
  }
  int id = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward = [a, norms = std::move(norms), id](Tape& t) {
      const Matrix& y = t.val(id);
      const Matrix& g = t.grad_of(id);
      Matrix& ga = t.mutable_grad(a);
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const double dot = g.row(r).dot(y.row(r));
        ga.row(r) += (g.row(r) - dot * y.row(r)) / norms[static_cast<size_t>(r)];
      }
    };
  return id;
}

int Tape::unfold_time(int a, int kernel, int stride) {
  check(kernel >= 1 && stride >= 1, "unfold_time bad kernel/stride");
  const int T = static_cast<int>(val(a).rows());
  const int C = static_cast<int>(val(a).cols());
  const int pad = (kernel - 1) / 2;
  const int T_out = (T + 2 * pad - kernel) / stride + 1;
  check(T_out >= 1, "unfold_time produced empty output");
  const bool ng = any_needs_grad(a);
  Matrix out = Matrix::Zero(T_out, kernel * C);
  for (int t = 0; t < T_out; ++t) {
    for (int j = 0; j < kernel; ++j) {
      const int src = t * stride + j - pad;
      if (src >= 0 && src < T) out.block(t, j * C, 1, C) = val(a).row(src);
    }
  }
  int id = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward = [a, kernel, stride, pad, T, C, T_out,
                                                id](Tape& t) {
      const Matrix& g = t.grad_of(id);
      Matrix& ga = t.mutable_grad(a);
      for (int r = 0; r < T_out; ++r) {
        for (int j = 0; j < kernel; ++j) {
          const int src = r * stride + j - pad;
          if (src >= 0 && src < T) ga.row(src) += g.block(r, j * C, 1, C);
        }
      }
    };
  return id;
}

int Tape::masked_mse(int pred, const Matrix& target, const Matrix& mask) {
  check(val(pred).rows() == target.rows() && val(pred).cols() == target.cols(),
        "masked_mse target shape mismatch");
  check(mask.rows() == target.rows() && mask.cols() == target.cols(),
        "masked_mse mask shape mismatch");
  const double denom = mask.sum();
  check(denom > 0.0, "masked_mse empty mask");
  const bool ng = any_needs_grad(pred);
  Matrix diff = (val(pred) - target).cwiseProduct(mask);
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm() / denom;
  int id = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward =
        [pred, diff = std::move(diff), denom, id](Tape& t) {
          t.mutable_grad(pred) += (2.0 / denom) * t.grad_of(id)(0, 0) * diff;
        };
  return id;
}

int Tape::masked_bce_logits(int logits, const Matrix& targets, const Matrix& mask) {
  check(val(logits).rows() == targets.rows() && val(logits).cols() == targets.cols(),
        "masked_bce shape mismatch");
  const double denom = mask.sum();
  check(denom > 0.0, "masked_bce empty mask");
  const bool ng = any_needs_grad(logits);
  const auto x = val(logits).array();
  const auto y = targets.array();
  // max(x,0) - x*y + log(1 + exp(-|x|))
  Matrix losses =
      ((x.max(0.0) - x * y + (1.0 + (-x.abs()).exp()).log()) * mask.array()).matrix();
  Matrix out(1, 1);
  out(0, 0) = losses.sum() / denom;
  int id = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward = [logits, targets, mask, denom, id](Tape& t) {
      const auto x = t.val(logits).array();
      Matrix d = ((1.0 / (1.0 + (-x).exp()) - targets.array()) * mask.array()).matrix();
      t.mutable_grad(logits) += (t.grad_of(id)(0, 0) / denom) * d;
    };
  return id;
}

int Tape::softmax_xent(int logits, const std::vector<int>& labels) {
  check(static_cast<Eigen::Index>(labels.size()) == val(logits).rows(),
        "softmax_xent label count mismatch");
  const bool ng = any_needs_grad(logits);
  const Matrix& x = val(logits);
  Matrix probs = x;
  double loss = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mx = x.row(r).maxCoeff();
    const double lse = mx + std::log((x.row(r).array() - mx).exp().sum());
    loss += lse - x(r, labels[static_cast<size_t>(r)]);
    probs.row(r) = (x.row(r).array() - lse).exp();
  }
  Matrix out(1, 1);
  out(0, 0) = loss / static_cast<double>(x.rows());
  int id = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_[static_cast<size_t>(id)].backward =
        [logits, labels, probs = std::move(probs), id](Tape& t) {
          Matrix d = probs;
          for (Eigen::Index r = 0; r < d.rows(); ++r)
            d(r, labels[static_cast<size_t>(r)]) -= 1.0;
          t.mutable_grad(logits) +=
              (t.grad_of(id)(0, 0) / static_cast<double>(d.rows())) * d;
        };
  return id;
}

void Tape::backward(int root) {
  check(val(root).size() == 1, "backward root must be scalar");
  check(any_needs_grad(root), "backward root does not depend on parameters");
  for (auto& node : nodes_)
    if (node.needs_grad) node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
  mutable_grad(root)(0, 0) = 1.0;
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& node = nodes_[static_cast<size_t>(i)];
    if (node.needs_grad && node.backward) node.backward(*this);
  }
  for (auto& node : nodes_)
    if (node.grad_sink != nullptr) *node.grad_sink += node.grad;
}

}  // namespace intercross::ad
