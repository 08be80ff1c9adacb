#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "tahp/errors.hpp"
#include "tahp/rng.hpp"

namespace tahp::ad {

using Matrix = Eigen::MatrixXd;

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One node of the dynamically built computation graph: a dense 64-bit real
// tensor, a same-shape gradient accumulator, references to the producing
// operation's inputs, and an op tag. The parent graph is acyclic by
// construction (parents exist before their consumers).
struct Node {
  Matrix value;
  Matrix grad;  // zero-initialized, same shape as value
  std::vector<NodePtr> parents;
  std::function<void()> backward;  // accumulates into parents' grad
  const char* op = "leaf";

  static NodePtr make(Matrix v, const char* op_tag, std::vector<NodePtr> parents);

  ~Node();  // iterative teardown, safe for deep graphs
};

// Value-semantic handle to a graph node.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}

  // Leaf holding a learnable or input tensor. Rejects non-finite entries:
  // NaN/Inf is an error surface, never a silent state.
  static Var leaf(Matrix v);
  // Leaf holding a fixed tensor (gradients accumulate but are never used).
  static Var constant(Matrix v);
  static Var scalar(double v);

  const Matrix& value() const { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  Matrix& grad_mutable() { return node_->grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double item() const;  // value of a 1x1 tensor
  const char* op() const { return node_->op; }

  explicit operator bool() const { return node_ != nullptr; }
  Node* get() const { return node_.get(); }
  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

std::string shape_str(const Matrix& m);

// ---- core linear algebra ----
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var neg(const Var& a);
Var scalar_mul(const Var& a, double s);
Var add_const(const Var& a, const Matrix& m);
Var mul_const(const Var& a, const Matrix& m);
Var hadamard(const Var& a, const Var& b);

// ---- broadcasts ----
Var add_rowvec(const Var& m, const Var& row);     // m[r x c] + row[1 x c] on every row
Var add_colvec(const Var& m, const Var& col);     // m[r x c] + col[r x 1] on every column
Var add_scalar_var(const Var& m, const Var& s);   // m + s[1 x 1] everywhere
Var bcast_cols(const Var& col, Eigen::Index n);   // col[r x 1] -> [r x n]

// ---- slicing / assembly ----
Var col(const Var& m, Eigen::Index j);
Var entry(const Var& m, Eigen::Index i, Eigen::Index j);
Var slice_rows(const Var& m, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& m, Eigen::Index start, Eigen::Index count);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var flatten_to_row(const Var& m);  // row-major [r x c] -> [1 x r*c]
Var pick_entries(const Var& m, const std::vector<std::pair<Eigen::Index, Eigen::Index>>& at);

// ---- reductions ----
Var rowwise_sum(const Var& m);   // [r x c] -> [r x 1]
Var rowwise_mean(const Var& m);  // [r x c] -> [r x 1]
Var sum_all(const Var& m);       // [r x c] -> [1 x 1]

// ---- elementwise nonlinearities ----
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var tanh_of(const Var& a);
Var log_of(const Var& a);
// log with a floor; entries at or below the floor get zero gradient.
Var log_clamped(const Var& a, double min_log = -745.0);
Var square(const Var& a);
// Overflow-safe (1/beta) * log(1 + exp(beta x)); strictly positive output.
Var softplus(const Var& a, double beta);

// ---- structured ops ----
// Row softmax of a square score matrix under the causal mask (entries
// strictly above the main diagonal are excluded; diagonal permitted).
// Stabilized by subtracting each row's max over permitted entries.
Var masked_softmax_rows(const Var& scores);
Var softmax_rows(const Var& scores);
// Per-row normalization to zero mean / unit variance (eps = 1e-5 inside the
// square root), then elementwise gain and bias. gain/bias are [1 x D].
Var layer_norm(const Var& x, const Var& gain, const Var& bias);
// 1-channel signal [1 x L] -> conv(4 out channels, kernel 3, stride 2,
// pad 0) -> ReLU -> max-pool(size 2, stride 2) -> [4 x L2],
// L1 = floor((L-3)/2)+1, L2 = floor(L1/2). kernels is [4 x 3].
Var conv1d_relu_maxpool(const Var& x, const Var& kernels);
// Inverted dropout: entries kept with probability 1-rate and scaled by
// 1/(1-rate). Mask entries are drawn row-major from rng.
Var dropout(const Var& x, double rate, RngStream& rng);
// Gathers columns of an embedding [D x C]: row i of the result is
// embedding.col(types[i]) transposed. Realizes the one-hot product.
Var embed_cols(const Var& embedding, const std::vector<int>& types);

inline constexpr int conv_out_len(int len) { return (len - 3) / 2 + 1; }
inline constexpr int pool_out_len(int len) { return len / 2; }

// Reverse accumulation from a scalar loss. Gradients add into every
// reachable node; calling twice without resetting grads doubles them, so a
// training loop must reset gradients each step.
void backward(const Var& loss);

}  // namespace tahp::ad
