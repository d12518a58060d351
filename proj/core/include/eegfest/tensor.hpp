#pragma once

// Dense row-major tensors and a define-by-run reverse-mode graph.
//
// Values are held in 64-bit precision in memory. Parameters are persisted as
// 32-bit floats (see io.hpp), so a checkpoint round trip rounds once.
//
// Every differentiable op is a free function taking and returning `Var`.
// A `Var` wraps a graph node: its value, an optional gradient buffer and the
// closure that pushes the node's gradient into its parents. The graph is
// rebuilt on every forward pass; leaves created with `parameter()` outlive it
// and keep accumulating gradients until `zero_grad()`.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace eegfest {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<double> values);
  static Tensor row(std::initializer_list<double> values);
  static Tensor row(std::span<const double> values);
  static Tensor scalar(double value);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  // Matrix view. Rank-1 tensors are treated as a single row.
  std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : rows_other(); }
  std::size_t cols() const { return shape_.size() == 2 ? shape_[1] : cols_other(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }

  void fill(double v);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t rows_other() const;
  std::size_t cols_other() const;

  Shape shape_;
  std::vector<double> data_;
};

namespace detail {
struct Node;
}

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  const Tensor& value() const;
  // Leaf parameters only: mutable access for optimizer updates and loading.
  Tensor& mutable_value();
  const Shape& shape() const { return value().shape(); }
  double item() const;

  bool requires_grad() const;
  // Leaves only. Used to freeze parameters.
  void set_requires_grad(bool on);
  bool has_grad() const;
  // Gradient buffer. Empty tensor when nothing has been accumulated.
  const Tensor& grad() const;
  void zero_grad();

  explicit operator bool() const noexcept { return node_ != nullptr; }
  const detail::Node* node() const noexcept { return node_.get(); }
  const std::shared_ptr<detail::Node>& handle() const noexcept { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

namespace detail {
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad();
};
}  // namespace detail

// Leaf that never receives gradients.
Var constant(Tensor value);
// Leaf that accumulates gradients across backward passes.
Var parameter(Tensor value);

// Populates gradients of every requires_grad leaf reachable from `loss`.
// Interior gradients are reset first, so calling this twice on the same graph
// doubles leaf gradients exactly. Throws UsageError for non-scalar losses.
void backward(const Var& loss);

bool grad_enabled();

// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// ---- differentiable primitives ------------------------------------------

Var matmul(const Var& a, const Var& b);
// a · bᵀ
Var matmul_nt(const Var& a, const Var& b);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);
// m×n plus a 1×n row broadcast over rows.
Var add_row(const Var& a, const Var& row);

// Subgradient at 0 is 0.
Var relu(const Var& x);
// Row-wise softmax with max subtraction. NaN input throws NumericError.
Var softmax_rows(const Var& x);
Var log_softmax_rows(const Var& x);
// (x - E[x]) / sqrt(Var[x] + eps) over every element of the tensor, 1/n variance.
Var layer_norm(const Var& x, double eps = 1e-5);
// Elementwise sqrt; gradient at exactly 0 is taken as 0.
Var sqrt(const Var& x);

Var slice_cols(const Var& x, std::size_t start, std::size_t count);
Var concat_cols(std::span<const Var> parts);

// Column means: m×n → 1×n.
Var mean_rows(const Var& x);
// Elementwise mean of equally shaped tensors.
Var average(std::span<const Var> parts);
Var sum(const Var& x);
Var mean(const Var& x);
// Single element as a 1×1 tensor.
Var pick(const Var& x, std::size_t index);

}  // namespace eegfest
