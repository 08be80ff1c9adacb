#include "tahp/autodiff.hpp"

#include <cmath>
#include <unordered_set>

namespace tahp::ad {

namespace {

void check_present(const Var& v, const char* op) {
  if (!v) throw ShapeError(std::string(op) + ": empty Var");
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x, double beta) {
  // max(x, 0) + (1/beta) * log1p(exp(-beta |x|))
  return std::max(x, 0.0) + std::log1p(std::exp(-beta * std::abs(x))) / beta;
}

}  // namespace

std::string shape_str(const Matrix& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

NodePtr Node::make(Matrix v, const char* op_tag, std::vector<NodePtr> parents) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->grad = Matrix::Zero(n->value.rows(), n->value.cols());
  n->parents = std::move(parents);
  n->op = op_tag;
  return n;
}

Node::~Node() {
  // Unrolled release of the parent chain so long graphs (RNNs over long
  // sequences) cannot overflow the stack via recursive shared_ptr teardown.
  std::vector<NodePtr> stack(std::make_move_iterator(parents.begin()),
                             std::make_move_iterator(parents.end()));
  parents.clear();
  while (!stack.empty()) {
    NodePtr p = std::move(stack.back());
    stack.pop_back();
    if (p.use_count() == 1) {
      for (auto& q : p->parents) stack.push_back(std::move(q));
      p->parents.clear();
    }
  }
}

Var Var::leaf(Matrix v) {
  if (!v.allFinite()) throw NumericsError("leaf: tensor contains NaN/Inf");
  return Var(Node::make(std::move(v), "leaf", {}));
}

Var Var::constant(Matrix v) {
  if (!v.allFinite()) throw NumericsError("constant: tensor contains NaN/Inf");
  return Var(Node::make(std::move(v), "const", {}));
}

Var Var::scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

double Var::item() const {
  if (rows() != 1 || cols() != 1) {
    throw ShapeError("item: tensor is not scalar, got " + shape_str(node_->value));
  }
  return node_->value(0, 0);
}

Var matmul(const Var& a, const Var& b) {
  check_present(a, "matmul");
  check_present(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree: " + shape_str(a.value()) +
                     " * " + shape_str(b.value()));
  }
  auto n = Node::make(a.value() * b.value(), "matmul", {a.node(), b.node()});
  Node* pa = a.get();
  Node* pb = b.get();
  Node* self = n.get();
  n->backward = [pa, pb, self] {
    pa->grad.noalias() += self->grad * pb->value.transpose();
    pb->grad.noalias() += pa->value.transpose() * self->grad;
  };
  return Var(n);
}

Var transpose(const Var& a) {
  check_present(a, "transpose");
  auto n = Node::make(a.value().transpose(), "transpose", {a.node()});
  Node* pa = a.get();
  Node* self = n.get();
  n->backward = [pa, self] { pa->grad += self->grad.transpose(); };
  return Var(n);
}

Var add(const Var& a, const Var& b) {
  check_present(a, "add");
  check_present(b, "add");
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("add: shapes disagree: " + shape_str(a.value()) + " + " +
                     shape_str(b.value()));
  }
  auto n = Node::make(a.value() + b.value(), "add", {a.node(), b.node()});
  Node* pa = a.get();
  Node* pb = b.get();
  Node* self = n.get();
  n->backward = [pa, pb, self] {
    pa->grad += self->grad;
    pb->grad += self->grad;
  };
  return Var(n);
}

Var sub(const Var& a, const Var& b) {
  check_present(a, "sub");
  check_present(b, "sub");
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("sub: shapes disagree: " + shape_str(a.value()) + " - " +
                     shape_str(b.value()));
  }
  auto n = Node::make(a.value() - b.value(), "sub", {a.node(), b.node()});
  Node* pa = a.get();
  Node* pb = b.get();
  Node* self = n.get();
  n->backward = [pa, pb, self] {
    pa->grad += self->grad;
    pb->grad -= self->grad;
  };
  return Var(n);
}

Var neg(const Var& a) {
  check_present(a, "neg");
  auto n = Node::make(-a.value(), "neg", {a.node()});
  Node* pa = a.get();
  Node* self = n.get();
  n->backward = [pa, self] { pa->grad -= self->grad; };
  return Var(n);
}

Var scalar_mul(const Var& a, double s) {
  check_present(a, "scalar_mul");
  auto n = Node::make(a.value() * s, "scalar_mul", {a.node()});
  Node* pa = a.get();
  Node* self = n.get();
  n->backward = [pa, self, s] { pa->grad += s * self->grad; };
  return Var(n);
}

Var add_const(const Var& a, const Matrix& m) {
  check_present(a, "add_const");
  if (a.rows() != m.rows() || a.cols() != m.cols()) {
    throw ShapeError("add_const: shapes disagree: " + shape_str(a.value()) + " + " +
                     shape_str(m));
  }
  auto n = Node::make(a.value() + m, "add_const", {a.node()});
  Node* pa = a.get();
  Node* self = n.get();
  n->backward = [pa, self] { pa->grad += self->grad; };
  return Var(n);
}

Var mul_const(const Var& a, const Matrix& m) {
  check_present(a, "mul_const");
  if (a.rows() != m.rows() || a.cols() != m.cols()) {
    throw ShapeError("mul_const: shapes disagree: " + shape_str(a.value()) + " .* " +
                     shape_str(m));
  }
  auto n = Node::make(a.value().cwiseProduct(m), "mul_const", {a.node()});
  Node* pa = a.get();
  Node* self = n.get();
  Matrix mc = m;
  n->backward = [pa, self, mc = std::move(mc)] {
    pa->grad += self->grad.cwiseProduct(mc);
  };
  return Var(n);
}

Var hadamard(const Var& a, const Var& b) {
  check_present(a, "hadamard");
  check_present(b, "hadamard");
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("hadamard: shapes disagree: " + shape_str(a.value()) + " .* " +
                     shape_str(b.value()));
  }
  auto n = Node::make(a.value().cwiseProduct(b.value()), "hadamard",
                      {a.node(), b.node()});
  Node* pa = a.get();
  Node* pb = b.get();
  Node* self = n.get();
  n->backward = [pa, pb, self] {
    pa->grad += self->grad.cwiseProduct(pb->value);
    pb->grad += self->grad.cwiseProduct(pa->value);
  };
  return Var(n);
}

Var add_rowvec(const Var& m, const Var& row) {
  check_present(m, "add_rowvec");
  check_present(row, "add_rowvec");
  if (row.rows() != 1 || row.cols() != m.cols()) {
    throw ShapeError("add_rowvec: " + shape_str(m.value()) + " + row " +
                     shape_str(row.value()));
  }
  Matrix v = m.value();
  v.rowwise() += row.value().row(0);
  auto n = Node::make(std::move(v), "add_rowvec", {m.node(), row.node()});
  Node* pm = m.get();
  Node* pr = row.get();
  Node* self = n.get();
  n->backward = [pm, pr, self] {
    pm->grad += self->grad;
    pr->grad.row(0) += self->grad.colwise().sum();
  };
  return Var(n);
}

Var add_colvec(const Var& m, const Var& colv) {
  check_present(m, "add_colvec");
  check_present(colv, "add_colvec");
  if (colv.cols() != 1 || colv.rows() != m.rows()) {
    throw ShapeError("add_colvec: " + shape_str(m.value()) + " + col " +
                     shape_str(colv.value()));
  }
  Matrix v = m.value();
  v.colwise() += colv.value().col(0);
  auto n = Node::make(std::move(v), "add_colvec", {m.node(), colv.node()});
  Node* pm = m.get();
  Node* pc = colv.get();
  Node* self = n.get();
  n->backward = [pm, pc, self] {
    pm->grad += self->grad;
    pc->grad.col(0) += self->grad.rowwise().sum();
  };
  return Var(n);
}

Var add_scalar_var(const Var& m, const Var& s) {
  check_present(m, "add_scalar_var");
  check_present(s, "add_scalar_var");
  if (s.rows() != 1 || s.cols() != 1) {
    throw ShapeError("add_scalar_var: scalar operand is " + shape_str(s.value()));
  }
  auto n = Node::make(m.value().array() + s.value()(0, 0), "add_scalar_var",
                      {m.node(), s.node()});
  Node* pm = m.get();
  Node* ps = s.get();
  Node* self = n.get();
  n->backward = [pm, ps, self] {
    pm->grad += self->grad;
    ps->grad(0, 0) += self->grad.sum();
  };
  return Var(n);
}

Var bcast_cols(const Var& colv, Eigen::Index ncols) {
  check_present(colv, "bcast_cols");
  if (colv.cols() != 1) {
    throw ShapeError("bcast_cols: operand must be a column, got " +
                     shape_str(colv.value()));
  }
  auto n = Node::make(colv.value().col(0).replicate(1, ncols), "bcast_cols",
                      {colv.node()});
  Node* pc = colv.get();
  Node* self = n.get();
  n->backward = [pc, self] { pc->grad.col(0) += self->grad.rowwise().sum(); };
  return Var(n);
}

Var col(const Var& m, Eigen::Index j) {
  check_present(m, "col");
  if (j < 0 || j >= m.cols()) {
    throw ShapeError("col: index " + std::to_string(j) + " out of range for " +
                     shape_str(m.value()));
  }
  auto n = Node::make(m.value().col(j), "col", {m.node()});
  Node* pm = m.get();
  Node* self = n.get();
  n->backward = [pm, self, j] { pm->grad.col(j) += self->grad.col(0); };
  return Var(n);
}

Var entry(const Var& m, Eigen::Index i, Eigen::Index j) {
  check_present(m, "entry");
  if (i < 0 || i >= m.rows() || j < 0 || j >= m.cols()) {
    throw ShapeError("entry: (" + std::to_string(i) + "," + std::to_string(j) +
                     ") out of range for " + shape_str(m.value()));
  }
  Matrix v(1, 1);
  v(0, 0) = m.value()(i, j);
  auto n = Node::make(std::move(v), "entry", {m.node()});
  Node* pm = m.get();
  Node* self = n.get();
  n->backward = [pm, self, i, j] { pm->grad(i, j) += self->grad(0, 0); };
  return Var(n);
}

Var slice_rows(const Var& m, Eigen::Index start, Eigen::Index count) {
  check_present(m, "slice_rows");
  if (start < 0 || count < 0 || start + count > m.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(start) + ", +" +
                     std::to_string(count) + ") out of range for " +
                     shape_str(m.value()));
  }
  auto n = Node::make(m.value().middleRows(start, count), "slice_rows", {m.node()});
  Node* pm = m.get();
  Node* self = n.get();
  n->backward = [pm, self, start, count] {
    pm->grad.middleRows(start, count) += self->grad;
  };
  return Var(n);
}

Var slice_cols(const Var& m, Eigen::Index start, Eigen::Index count) {
  check_present(m, "slice_cols");
  if (start < 0 || count < 0 || start + count > m.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", +" +
                     std::to_string(count) + ") out of range for " +
                     shape_str(m.value()));
  }
  auto n = Node::make(m.value().middleCols(start, count), "slice_cols", {m.node()});
  Node* pm = m.get();
  Node* self = n.get();
  n->backward = [pm, self, start, count] {
    pm->grad.middleCols(start, count) += self->grad;
  };
  return Var(n);
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  std::vector<NodePtr> parents;
  parents.reserve(parts.size());
  for (const auto& p : parts) {
    check_present(p, "concat_rows");
    if (p.cols() != cols) {
      throw ShapeError("concat_rows: column mismatch: " + shape_str(p.value()) +
                       " vs " + shape_str(parts.front().value()));
    }
    rows += p.rows();
    parents.push_back(p.node());
  }
  Matrix v(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  auto n = Node::make(std::move(v), "concat_rows", std::move(parents));
  Node* self = n.get();
  std::vector<Node*> raw;
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    raw.push_back(p.get());
    offsets.push_back(off);
    off += p.rows();
  }
  n->backward = [self, raw = std::move(raw), offsets = std::move(offsets)] {
    for (std::size_t k = 0; k < raw.size(); ++k) {
      raw[k]->grad += self->grad.middleRows(offsets[k], raw[k]->value.rows());
    }
  };
  return Var(n);
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  std::vector<NodePtr> parents;
  parents.reserve(parts.size());
  for (const auto& p : parts) {
    check_present(p, "concat_cols");
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row mismatch: " + shape_str(p.value()) + " vs " +
                       shape_str(parts.front().value()));
    }
    cols += p.cols();
    parents.push_back(p.node());
  }
  Matrix v(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  auto n = Node::make(std::move(v), "concat_cols", std::move(parents));
  Node* self = n.get();
  std::vector<Node*> raw;
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    raw.push_back(p.get());
    offsets.push_back(off);
    off += p.cols();
  }
  n->backward = [self, raw = std::move(raw), offsets = std::move(offsets)] {
    for (std::size_t k = 0; k < raw.size(); ++k) {
      raw[k]->grad += self->grad.middleCols(offsets[k], raw[k]->value.cols());
    }
  };
  return Var(n);
}

Var flatten_to_row(const Var& m) {
  check_present(m, "flatten_to_row");
  const Matrix& v = m.value();
  Matrix out(1, v.rows() * v.cols());
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      out(0, i * v.cols() + j) = v(i, j);
    }
  }
  auto n = Node::make(std::move(out), "flatten_to_row", {m.node()});
  Node* pm = m.get();
  Node* self = n.get();
  n->backward = [pm, self] {
    const Eigen::Index r = pm->value.rows();
    const Eigen::Index c = pm->value.cols();
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) {
        pm->grad(i, j) += self->grad(0, i * c + j);
      }
    }
  };
  return Var(n);
}

Var pick_entries(const Var& m,
                 const std::vector<std::pair<Eigen::Index, Eigen::Index>>& at) {
  check_present(m, "pick_entries");
  Matrix v(static_cast<Eigen::Index>(at.size()), 1);
  for (std::size_t k = 0; k < at.size(); ++k) {
    const auto [i, j] = at[k];
    if (i < 0 || i >= m.rows() || j < 0 || j >= m.cols()) {
      throw ShapeError("pick_entries: (" + std::to_string(i) + "," +
                       std::to_string(j) + ") out of range for " +
                       shape_str(m.value()));
    }
    v(static_cast<Eigen::Index>(k), 0) = m.value()(i, j);
  }
  auto n = Node::make(std::move(v), "pick_entries", {m.node()});
  Node* pm = m.get();
  Node* self = n.get();
  auto idx = at;
  n->backward = [pm, self, idx = std::move(idx)] {
    for (std::size_t k = 0; k < idx.size(); ++k) {
      pm->grad(idx[k].first, idx[k].second) +=
          self->grad(static_cast<Eigen::Index>(k), 0);
    }
  };
  return Var(n);
}

Var rowwise_sum(const Var& m) {
  check_present(m, "rowwise_sum");
  auto n = Node::make(m.value().rowwise().sum(), "rowwise_sum", {m.node()});
  Node* pm = m.get();
  Node* self = n.get();
  n->backward = [pm, self] {
    pm->grad.colwise() += self->grad.col(0);
  };
  return Var(n);
}

Var rowwise_mean(const Var& m) {
  check_present(m, "rowwise_mean");
  const double inv = 1.0 / static_cast<double>(m.cols());
  auto n = Node::make(m.value().rowwise().sum() * inv, "rowwise_mean", {m.node()});
  Node* pm = m.get();
  Node* self = n.get();
  n->backward = [pm, self, inv] {
    pm->grad.colwise() += (self->grad.col(0) * inv).eval();
  };
  return Var(n);
}

Var sum_all(const Var& m) {
  check_present(m, "sum_all");
  Matrix v(1, 1);
  v(0, 0) = m.value().sum();
  auto n = Node::make(std::move(v), "sum_all", {m.node()});
  Node* pm = m.get();
  Node* self = n.get();
  n->backward = [pm, self] { pm->grad.array() += self->grad(0, 0); };
  return Var(n);
}

Var relu(const Var& a) {
  check_present(a, "relu");
  auto n = Node::make(a.value().cwiseMax(0.0), "relu", {a.node()});
  Node* pa = a.get();
  Node* self = n.get();
  n->backward = [pa, self] {
    pa->grad += self->grad.cwiseProduct(
        (pa->value.array() > 0.0).cast<double>().matrix());
  };
  return Var(n);
}

Var sigmoid(const Var& a) {
  check_present(a, "sigmoid");
  Matrix v = a.value().unaryExpr([](double x) { return stable_sigmoid(x); });
  auto n = Node::make(std::move(v), "sigmoid", {a.node()});
  Node* pa = a.get();
  Node* self = n.get();
  n->backward = [pa, self] {
    pa->grad += self->grad.cwiseProduct(
        self->value.cwiseProduct((1.0 - self->value.array()).matrix()));
  };
  return Var(n);
}

Var tanh_of(const Var& a) {
  check_present(a, "tanh");
  Matrix v = a.value().array().tanh();
  auto n = Node::make(std::move(v), "tanh", {a.node()});
  Node* pa = a.get();
  Node* self = n.get();
  n->backward = [pa, self] {
    pa->grad += self->grad.cwiseProduct(
        (1.0 - self->value.array().square()).matrix());
  };
  return Var(n);
}

Var log_of(const Var& a) {
  check_present(a, "log");
  Matrix v = a.value().array().log();
  auto n = Node::make(std::move(v), "log", {a.node()});
  Node* pa = a.get();
  Node* self = n.get();
  n->backward = [pa, self] {
    pa->grad += self->grad.cwiseQuotient(pa->value);
  };
  return Var(n);
}

Var log_clamped(const Var& a, double min_log) {
  check_present(a, "log_clamped");
  Matrix v = a.value().unaryExpr(
      [min_log](double x) { return std::max(std::log(x), min_log); });
  auto n = Node::make(std::move(v), "log_clamped", {a.node()});
  Node* pa = a.get();
  Node* self = n.get();
  n->backward = [pa, self, min_log] {
    for (Eigen::Index i = 0; i < self->grad.rows(); ++i) {
      for (Eigen::Index j = 0; j < self->grad.cols(); ++j) {
        if (self->value(i, j) > min_log) {
          pa->grad(i, j) += self->grad(i, j) / pa->value(i, j);
        }
      }
    }
  };
  return Var(n);
}

Var square(const Var& a) {
  check_present(a, "square");
  auto n = Node::make(a.value().array().square(), "square", {a.node()});
  Node* pa = a.get();
  Node* self = n.get();
  n->backward = [pa, self] {
    pa->grad += 2.0 * self->grad.cwiseProduct(pa->value);
  };
  return Var(n);
}

Var softplus(const Var& a, double beta) {
  check_present(a, "softplus");
  if (!(beta > 0.0)) {
    throw ConfigError("softplus: beta must be positive, got " + std::to_string(beta));
  }
  Matrix v = a.value().unaryExpr(
      [beta](double x) { return stable_softplus(x, beta); });
  auto n = Node::make(std::move(v), "softplus", {a.node()});
  Node* pa = a.get();
  Node* self = n.get();
  n->backward = [pa, self, beta] {
    pa->grad += self->grad.cwiseProduct(pa->value.unaryExpr(
        [beta](double x) { return stable_sigmoid(beta * x); }));
  };
  return Var(n);
}

Var masked_softmax_rows(const Var& scores) {
  check_present(scores, "masked_softmax_rows");
  if (scores.rows() != scores.cols()) {
    throw ShapeError("masked_softmax_rows: score matrix must be square, got " +
                     shape_str(scores.value()));
  }
  const Matrix& s = scores.value();
  const Eigen::Index n_rows = s.rows();
  Matrix p = Matrix::Zero(n_rows, n_rows);
  for (Eigen::Index i = 0; i < n_rows; ++i) {
    double row_max = s(i, 0);
    for (Eigen::Index j = 1; j <= i; ++j) row_max = std::max(row_max, s(i, j));
    double denom = 0.0;
    for (Eigen::Index j = 0; j <= i; ++j) {
      p(i, j) = std::exp(s(i, j) - row_max);
      denom += p(i, j);
    }
    for (Eigen::Index j = 0; j <= i; ++j) p(i, j) /= denom;
  }
  auto n = Node::make(std::move(p), "masked_softmax_rows", {scores.node()});
  Node* ps = scores.get();
  Node* self = n.get();
  n->backward = [ps, self] {
    const Matrix& prob = self->value;
    for (Eigen::Index i = 0; i < prob.rows(); ++i) {
      double dot = 0.0;
      for (Eigen::Index j = 0; j <= i; ++j) dot += self->grad(i, j) * prob(i, j);
      for (Eigen::Index j = 0; j <= i; ++j) {
        ps->grad(i, j) += prob(i, j) * (self->grad(i, j) - dot);
      }
    }
  };
  return Var(n);
}

Var softmax_rows(const Var& scores) {
  check_present(scores, "softmax_rows");
  const Matrix& s = scores.value();
  Matrix p(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double row_max = s.row(i).maxCoeff();
    p.row(i) = (s.row(i).array() - row_max).exp();
    p.row(i) /= p.row(i).sum();
  }
  auto n = Node::make(std::move(p), "softmax_rows", {scores.node()});
  Node* ps = scores.get();
  Node* self = n.get();
  n->backward = [ps, self] {
    const Matrix& prob = self->value;
    for (Eigen::Index i = 0; i < prob.rows(); ++i) {
      const double dot = self->grad.row(i).dot(prob.row(i));
      ps->grad.row(i) += prob.row(i).cwiseProduct(
          (self->grad.row(i).array() - dot).matrix());
    }
  };
  return Var(n);
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias) {
  check_present(x, "layer_norm");
  check_present(gain, "layer_norm");
  check_present(bias, "layer_norm");
  const Eigen::Index d = x.cols();
  if (d < 2) {
    throw ShapeError("layer_norm: needs at least 2 features, got " +
                     shape_str(x.value()));
  }
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d) {
    throw ShapeError("layer_norm: gain/bias must be [1x" + std::to_string(d) +
                     "], got " + shape_str(gain.value()) + " and " +
                     shape_str(bias.value()));
  }
  constexpr double kEps = 1e-5;
  const Matrix& xv = x.value();
  Matrix xhat(xv.rows(), d);
  Eigen::VectorXd inv_std(xv.rows());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    const double mean = xv.row(i).mean();
    const double var = (xv.row(i).array() - mean).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + kEps);
    xhat.row(i) = (xv.row(i).array() - mean) * inv_std(i);
  }
  Matrix out = xhat;
  out.array().rowwise() *= gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  auto n = Node::make(std::move(out), "layer_norm",
                      {x.node(), gain.node(), bias.node()});
  Node* px = x.get();
  Node* pg = gain.get();
  Node* pb = bias.get();
  Node* self = n.get();
  n->backward = [px, pg, pb, self, xhat = std::move(xhat),
                 inv_std = std::move(inv_std)] {
    const Eigen::Index dd = px->value.cols();
    for (Eigen::Index i = 0; i < px->value.rows(); ++i) {
      const Eigen::ArrayXd dy = self->grad.row(i).array();
      const Eigen::ArrayXd g = pg->value.row(0).array();
      const Eigen::ArrayXd xh = xhat.row(i).array();
      const Eigen::ArrayXd dyg = dy * g;
      const double m1 = dyg.mean();
      const double m2 = (dyg * xh).mean();
      px->grad.row(i).array() += inv_std(i) * (dyg - m1 - xh * m2);
      pg->grad.row(0).array() += dy * xh;
      pb->grad.row(0).array() += dy;
    }
    (void)dd;
  };
  return Var(n);
}

Var conv1d_relu_maxpool(const Var& x, const Var& kernels) {
  check_present(x, "conv1d_relu_maxpool");
  check_present(kernels, "conv1d_relu_maxpool");
  if (x.rows() != 1) {
    throw ShapeError("conv1d_relu_maxpool: input must be [1xL], got " +
                     shape_str(x.value()));
  }
  if (kernels.rows() != 4 || kernels.cols() != 3) {
    throw ShapeError("conv1d_relu_maxpool: kernels must be [4x3], got " +
                     shape_str(kernels.value()));
  }
  const int len = static_cast<int>(x.cols());
  if (len < 3) {
    throw ShapeError("conv1d_relu_maxpool: input length " + std::to_string(len) +
                     " below kernel size 3");
  }
  const int l1 = conv_out_len(len);
  const int l2 = pool_out_len(l1);
  const Matrix& xv = x.value();
  const Matrix& kv = kernels.value();
  Matrix conv(4, l1);
  for (int o = 0; o < 4; ++o) {
    for (int p = 0; p < l1; ++p) {
      conv(o, p) = kv(o, 0) * xv(0, 2 * p) + kv(o, 1) * xv(0, 2 * p + 1) +
                   kv(o, 2) * xv(0, 2 * p + 2);
    }
  }
  Matrix pooled(4, l2);
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> argmax(4, l2);
  for (int o = 0; o < 4; ++o) {
    for (int q = 0; q < l2; ++q) {
      const double a = std::max(conv(o, 2 * q), 0.0);
      const double b = std::max(conv(o, 2 * q + 1), 0.0);
      if (b > a) {
        pooled(o, q) = b;
        argmax(o, q) = 2 * q + 1;
      } else {
        pooled(o, q) = a;
        argmax(o, q) = 2 * q;  // ties keep the earlier window position
      }
    }
  }
  auto n = Node::make(std::move(pooled), "conv1d_relu_maxpool",
                      {x.node(), kernels.node()});
  Node* px = x.get();
  Node* pk = kernels.get();
  Node* self = n.get();
  n->backward = [px, pk, self, conv = std::move(conv), argmax = std::move(argmax),
                 l2] {
    for (int o = 0; o < 4; ++o) {
      for (int q = 0; q < l2; ++q) {
        const int p = argmax(o, q);
        if (conv(o, p) <= 0.0) continue;  // ReLU gate
        const double g = self->grad(o, q);
        if (g == 0.0) continue;
        for (int k = 0; k < 3; ++k) {
          pk->grad(o, k) += g * px->value(0, 2 * p + k);
          px->grad(0, 2 * p + k) += g * pk->value(o, k);
        }
      }
    }
  };
  return Var(n);
}

Var dropout(const Var& x, double rate, RngStream& rng) {
  check_present(x, "dropout");
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (rate == 0.0) return x;
  const double scale = 1.0 / (1.0 - rate);
  Matrix mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.rows(); ++i) {
    for (Eigen::Index j = 0; j < mask.cols(); ++j) {
      mask(i, j) = rng.uniform01() >= rate ? scale : 0.0;
    }
  }
  auto n = Node::make(x.value().cwiseProduct(mask), "dropout", {x.node()});
  Node* px = x.get();
  Node* self = n.get();
  n->backward = [px, self, mask = std::move(mask)] {
    px->grad += self->grad.cwiseProduct(mask);
  };
  return Var(n);
}

Var embed_cols(const Var& embedding, const std::vector<int>& types) {
  check_present(embedding, "embed_cols");
  const Matrix& e = embedding.value();
  Matrix out(static_cast<Eigen::Index>(types.size()), e.rows());
  for (std::size_t i = 0; i < types.size(); ++i) {
    if (types[i] < 0 || types[i] >= e.cols()) {
      throw ShapeError("embed_cols: type index " + std::to_string(types[i]) +
                       " out of range for embedding " + shape_str(e));
    }
    out.row(static_cast<Eigen::Index>(i)) = e.col(types[i]).transpose();
  }
  auto n = Node::make(std::move(out), "embed_cols", {embedding.node()});
  Node* pe = embedding.get();
  Node* self = n.get();
  auto idx = types;
  n->backward = [pe, self, idx = std::move(idx)] {
    for (std::size_t i = 0; i < idx.size(); ++i) {
      pe->grad.col(idx[i]) +=
          self->grad.row(static_cast<Eigen::Index>(i)).transpose();
    }
  };
  return Var(n);
}

void backward(const Var& loss) {
  check_present(loss, "backward");
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw ShapeError("backward: loss must be scalar, got " +
                     shape_str(loss.value()));
  }
  if (!std::isfinite(loss.value()(0, 0))) {
    throw NumericsError("backward: loss is not finite");
  }
  // Iterative post-order DFS: every node appears after all of its parents,
  // so the reversed order visits consumers before producers.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* n;
    std::size_t next;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.get(), 0});
  visited.insert(loss.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.n->parents.size()) {
      Node* p = f.n->parents[f.next++].get();
      if (visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }
  // Interior grads are scratch space for this pass; only leaves accumulate
  // across calls (so a second backward doubles leaf gradients).
  for (Node* n : order) {
    if (n->backward) n->grad.setZero();
  }
  loss.get()->grad(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward();
  }
}

}  // namespace tahp::ad
