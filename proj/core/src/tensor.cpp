#include "eegfest/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "eegfest/errors.hpp"

namespace eegfest {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto d : shape_) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape_));
  }
  data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
  for (auto d : shape_) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape_));
  }
  if (element_count(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_string(shape_) + " does not hold " + std::to_string(data_.size()) +
                         " values");
  }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::row(std::initializer_list<double> values) {
  return Tensor({1, values.size()}, std::vector<double>(values));
}

Tensor Tensor::row(std::span<const double> values) {
  return Tensor({1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

Tensor Tensor::scalar(double value) { return Tensor({1, 1}, std::vector<double>{value}); }

std::size_t Tensor::rows_other() const {
  switch (shape_.size()) {
    case 0:
      return data_.empty() ? 0 : 1;
    case 1:
      return 1;
    case 2:
      return shape_[0];
    default:
      throw DimensionError("matrix view of rank-" + std::to_string(shape_.size()) + " tensor");
  }
}

std::size_t Tensor::cols_other() const {
  switch (shape_.size()) {
    case 0:
      return data_.empty() ? 0 : 1;
    case 1:
      return shape_[0];
    case 2:
      return shape_[1];
    default:
      throw DimensionError("matrix view of rank-" + std::to_string(shape_.size()) + " tensor");
  }
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

// ---- graph ---------------------------------------------------------------

Tensor& detail::Node::ensure_grad() {
  if (grad.size() != value.size()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

namespace {

thread_local bool g_grad_enabled = true;

const Tensor kEmptyTensor{};

using NodePtr = std::shared_ptr<detail::Node>;

// Builds the result node; records parents and the backward closure only when
// some parent needs a gradient and recording is enabled.
Var make_result(Tensor value, std::initializer_list<NodePtr> parents,
                std::function<void(detail::Node&)> backward_fn) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->leaf = false;
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p->requires_grad;
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.assign(parents.begin(), parents.end());
    node->backward_fn = std::move(backward_fn);
  }
  return Var(std::move(node));
}

Var make_result(Tensor value, std::vector<NodePtr> parents, std::function<void(detail::Node&)> backward_fn) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->leaf = false;
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p->requires_grad;
  }
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return Var(std::move(node));
}

const Tensor& val(const Var& v) { return v.value(); }

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

}  // namespace

const Tensor& Var::value() const {
  if (!node_) throw UsageError("empty Var");
  return node_->value;
}

Tensor& Var::mutable_value() {
  if (!node_) throw UsageError("empty Var");
  if (!node_->leaf) throw UsageError("only leaf tensors may be mutated");
  return node_->value;
}

double Var::item() const {
  const Tensor& v = value();
  if (v.size() != 1) throw UsageError("item() on tensor of shape " + shape_string(v.shape()));
  return v[0];
}

bool Var::requires_grad() const { return node_ && node_->requires_grad; }
void Var::set_requires_grad(bool on) {
  if (!node_ || !node_->leaf) throw UsageError("requires_grad can only be toggled on leaves");
  node_->requires_grad = on;
}
bool Var::has_grad() const { return node_ && node_->grad.size() == node_->value.size() && !node_->grad.empty(); }
const Tensor& Var::grad() const { return node_ ? node_->grad : kEmptyTensor; }
void Var::zero_grad() {
  if (node_) node_->grad = Tensor{};
}

Var constant(Tensor value) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var parameter(Tensor value) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const Var& loss) {
  if (!loss) throw UsageError("backward on empty Var");
  if (loss.value().size() != 1) {
    throw UsageError("backward requires a scalar loss, got shape " + shape_string(loss.value().shape()));
  }
  detail::Node* root = loss.handle().get();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (detail::Node* n : order) {
    if (!n->leaf) n->grad = Tensor{};
  }
  root->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (!n->leaf && n->backward_fn && n->grad.size() == n->value.size()) n->backward_fn(*n);
  }
}

// ---- primitives ----------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require_matrix(A, "matmul");
  require_matrix(B, "matmul");
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  if (B.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(A.shape()) + " x " +
                         shape_string(B.shape()));
  }
  Tensor out({m, n}, 0.0);
  const double* ap = A.values().data();
  const double* bp = B.values().data();
  double* op = out.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = op + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ap[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bp + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  auto an = a.handle(), bn = b.handle();
  return make_result(std::move(out), {an, bn}, [m, k, n](detail::Node& self) {
    const Tensor& G = self.grad;
    detail::Node& pa = *self.parents[0];
    detail::Node& pb = *self.parents[1];
    const double* g = G.values().data();
    if (pa.requires_grad) {
      double* ga = pa.ensure_grad().values().data();
      const double* bp = pb.value.values().data();
      // dA = G · Bᵀ
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          const double* grow = g + i * n;
          const double* brow = bp + p * n;
          for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
          ga[i * k + p] += s;
        }
    }
    if (pb.requires_grad) {
      double* gb = pb.ensure_grad().values().data();
      const double* ap = pa.value.values().data();
      // dB = Aᵀ · G
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = ap[i * k + p];
          if (aip == 0.0) continue;
          double* gbrow = gb + p * n;
          const double* grow = g + i * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
        }
    }
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require_matrix(A, "matmul_nt");
  require_matrix(B, "matmul_nt");
  const std::size_t m = A.rows(), k = A.cols(), n = B.rows();
  if (B.cols() != k) {
    throw DimensionError("matmul_nt: inner dimensions differ, " + shape_string(A.shape()) + " x " +
                         shape_string(B.shape()) + "^T");
  }
  Tensor out({m, n}, 0.0);
  const double* ap = A.values().data();
  const double* bp = B.values().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ap[i * k + p] * bp[j * k + p];
      out[i * n + j] = s;
    }
  auto an = a.handle(), bn = b.handle();
  return make_result(std::move(out), {an, bn}, [m, k, n](detail::Node& self) {
    const Tensor& G = self.grad;
    detail::Node& pa = *self.parents[0];
    detail::Node& pb = *self.parents[1];
    const double* gp = G.values().data();
    if (pa.requires_grad) {
      double* ga = pa.ensure_grad().values().data();
      const double* bp = pb.value.values().data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double g = gp[i * n + j];
          for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += g * bp[j * k + p];
        }
    }
    if (pb.requires_grad) {
      double* gb = pb.ensure_grad().values().data();
      const double* ap = pa.value.values().data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double g = gp[i * n + j];
          for (std::size_t p = 0; p < k; ++p) gb[j * k + p] += g * ap[i * k + p];
        }
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(val(a), val(b), "add");
  Tensor out = val(a);
  const auto& bv = val(b).values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return make_result(std::move(out), {a.handle(), b.handle()}, [](detail::Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      Tensor& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(val(a), val(b), "sub");
  Tensor out = val(a);
  const auto& bv = val(b).values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return make_result(std::move(out), {a.handle(), b.handle()}, [](detail::Node& self) {
    detail::Node& pa = *self.parents[0];
    detail::Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Tensor& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      Tensor& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(val(a), val(b), "mul");
  Tensor out = val(a);
  const auto& bv = val(b).values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return make_result(std::move(out), {a.handle(), b.handle()}, [](detail::Node& self) {
    detail::Node& pa = *self.parents[0];
    detail::Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Tensor& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      Tensor& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

Var div(const Var& a, const Var& b) {
  require_same_shape(val(a), val(b), "div");
  Tensor out = val(a);
  const auto& bv = val(b).values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= bv[i];
  return make_result(std::move(out), {a.handle(), b.handle()}, [](detail::Node& self) {
    detail::Node& pa = *self.parents[0];
    detail::Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Tensor& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / pb.value[i];
    }
    if (pb.requires_grad) {
      Tensor& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double d = pb.value[i];
        g[i] -= self.grad[i] * pa.value[i] / (d * d);
      }
    }
  });
}

Var scale(const Var& a, double factor) {
  Tensor out = val(a);
  for (auto& x : out.values()) x *= factor;
  return make_result(std::move(out), {a.handle()}, [factor](detail::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Var add_scalar(const Var& a, double offset) {
  Tensor out = val(a);
  for (auto& x : out.values()) x += offset;
  return make_result(std::move(out), {a.handle()}, [](detail::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Var add_row(const Var& a, const Var& row) {
  const Tensor& A = val(a);
  const Tensor& R = val(row);
  require_matrix(A, "add_row");
  if (R.size() != A.cols() || R.rows() != 1) {
    throw DimensionError("add_row: row " + shape_string(R.shape()) + " does not broadcast over " +
                         shape_string(A.shape()));
  }
  Tensor out = A;
  const std::size_t m = A.rows(), n = A.cols();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) += R[j];
  return make_result(std::move(out), {a.handle(), row.handle()}, [m, n](detail::Node& self) {
    detail::Node& pa = *self.parents[0];
    detail::Node& pr = *self.parents[1];
    if (pa.requires_grad) {
      Tensor& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pr.requires_grad) {
      Tensor& g = pr.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad(i, j);
    }
  });
}

Var relu(const Var& x) {
  Tensor out = val(x);
  for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
  return make_result(std::move(out), {x.handle()}, [](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    Tensor& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (p.value[i] > 0.0) g[i] += self.grad[i];
  });
}

Var softmax_rows(const Var& x) {
  const Tensor& X = val(x);
  require_matrix(X, "softmax_rows");
  const std::size_t m = X.rows(), n = X.cols();
  Tensor out({m, n}, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = X(i, j);
      if (std::isnan(v)) throw NumericError("softmax_rows: NaN input");
      mx = std::max(mx, v);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out(i, j) = std::exp(X(i, j) - mx);
      z += out(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) out(i, j) /= z;
  }
  return make_result(std::move(out), {x.handle()}, [m, n](detail::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    const Tensor& Y = self.value;
    const Tensor& G = self.grad;
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += G(i, j) * Y(i, j);
      for (std::size_t j = 0; j < n; ++j) g(i, j) += Y(i, j) * (G(i, j) - dot);
    }
  });
}

Var log_softmax_rows(const Var& x) {
  const Tensor& X = val(x);
  require_matrix(X, "log_softmax_rows");
  const std::size_t m = X.rows(), n = X.cols();
  Tensor out({m, n}, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::isnan(X(i, j))) throw NumericError("log_softmax_rows: NaN input");
      mx = std::max(mx, X(i, j));
    }
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(X(i, j) - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) out(i, j) = X(i, j) - lse;
  }
  return make_result(std::move(out), {x.handle()}, [m, n](detail::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    const Tensor& Y = self.value;
    const Tensor& G = self.grad;
    for (std::size_t i = 0; i < m; ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < n; ++j) gs += G(i, j);
      for (std::size_t j = 0; j < n; ++j) g(i, j) += G(i, j) - std::exp(Y(i, j)) * gs;
    }
  });
}

Var layer_norm(const Var& x, double eps) {
  const Tensor& X = val(x);
  const std::size_t n = X.size();
  if (n < 2) throw DimensionError("layer_norm needs at least 2 elements, got " + shape_string(X.shape()));
  double mu = 0.0;
  for (double v : X.values()) mu += v;
  mu /= static_cast<double>(n);
  double var = 0.0;
  for (double v : X.values()) var += (v - mu) * (v - mu);
  var /= static_cast<double>(n);
  const double inv_std = 1.0 / std::sqrt(var + eps);
  Tensor out = X;
  for (auto& v : out.values()) v = (v - mu) * inv_std;
  return make_result(std::move(out), {x.handle()}, [inv_std, n](detail::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    const Tensor& Y = self.value;
    const Tensor& G = self.grad;
    double mean_g = 0.0, mean_gy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mean_g += G[i];
      mean_gy += G[i] * Y[i];
    }
    mean_g /= static_cast<double>(n);
    mean_gy /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) g[i] += inv_std * (G[i] - mean_g - Y[i] * mean_gy);
  });
}

Var sqrt(const Var& x) {
  Tensor out = val(x);
  for (auto& v : out.values()) {
    if (v < 0.0 || std::isnan(v)) throw NumericError("sqrt of negative or NaN value");
    v = std::sqrt(v);
  }
  return make_result(std::move(out), {x.handle()}, [](detail::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = self.value[i];
      if (y > 0.0) g[i] += self.grad[i] * 0.5 / y;
    }
  });
}

Var slice_cols(const Var& x, std::size_t start, std::size_t count) {
  const Tensor& X = val(x);
  require_matrix(X, "slice_cols");
  const std::size_t m = X.rows(), n = X.cols();
  if (count == 0 || start + count > n) {
    throw DimensionError("slice_cols: columns [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") outside " + shape_string(X.shape()));
  }
  Tensor out({m, count}, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = X(i, start + j);
  return make_result(std::move(out), {x.handle()}, [m, start, count](detail::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < count; ++j) g(i, start + j) += self.grad(i, j);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t m = parts.front().value().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_matrix(p.value(), "concat_cols");
    if (p.value().rows() != m) {
      throw DimensionError("concat_cols: row mismatch " + shape_string(parts.front().shape()) + " vs " +
                           shape_string(p.shape()));
    }
    total += p.value().cols();
  }
  Tensor out({m, total}, 0.0);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const Tensor& P = p.value();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < P.cols(); ++j) out(i, off + j) = P(i, j);
    off += P.cols();
  }
  std::vector<NodePtr> parents;
  parents.reserve(parts.size());
  for (const auto& p : parts) parents.push_back(p.handle());
  return make_result(std::move(out), std::move(parents), [offsets, m](detail::Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      detail::Node& p = *self.parents[k];
      if (!p.requires_grad) continue;
      Tensor& g = p.ensure_grad();
      const std::size_t w = p.value.cols();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) g(i, j) += self.grad(i, offsets[k] + j);
    }
  });
}

Var mean_rows(const Var& x) {
  const Tensor& X = val(x);
  require_matrix(X, "mean_rows");
  const std::size_t m = X.rows(), n = X.cols();
  Tensor out({1, n}, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += X(i, j);
  for (auto& v : out.values()) v /= static_cast<double>(m);
  return make_result(std::move(out), {x.handle()}, [m, n](detail::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    const double w = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g(i, j) += w * self.grad[j];
  });
}

Var average(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("average: no inputs");
  Tensor out = parts.front().value();
  for (std::size_t k = 1; k < parts.size(); ++k) {
    require_same_shape(out, parts[k].value(), "average");
    const auto& pv = parts[k].value().values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += pv[i];
  }
  const double w = 1.0 / static_cast<double>(parts.size());
  for (auto& v : out.values()) v *= w;
  std::vector<NodePtr> parents;
  parents.reserve(parts.size());
  for (const auto& p : parts) parents.push_back(p.handle());
  return make_result(std::move(out), std::move(parents), [w](detail::Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      Tensor& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += w * self.grad[i];
    }
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : val(x).values()) s += v;
  return make_result(Tensor::scalar(s), {x.handle()}, [](detail::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    const double gs = self.grad[0];
    for (auto& v : g.values()) v += gs;
  });
}

Var mean(const Var& x) {
  const double n = static_cast<double>(val(x).size());
  return scale(sum(x), 1.0 / n);
}

Var pick(const Var& x, std::size_t index) {
  const Tensor& X = val(x);
  if (index >= X.size()) {
    throw UsageError("pick: index " + std::to_string(index) + " outside " + shape_string(X.shape()));
  }
  return make_result(Tensor::scalar(X[index]), {x.handle()}, [index](detail::Node& self) {
    self.parents[0]->ensure_grad()[index] += self.grad[0];
  });
}

}  // namespace eegfest
