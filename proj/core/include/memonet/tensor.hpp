#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace memonet {

/// Raised for any contract violation inside the library: shape mismatches,
/// out-of-range indices, malformed files, non-finite training state.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles. Vectors are 1xN matrices.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  std::array<std::size_t, 2> shape() const { return {rows_, cols_}; }
  std::string shape_str() const;

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  void fill(double v);
  bool all_finite() const;
  /// Relabels the dimensions; the element count must stay the same.
  void reshape(std::size_t rows, std::size_t cols);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// A learnable tensor with its gradient accumulator.
///
/// Row-sparse parameters (embedding tables, the codebook) record which rows
/// received gradient so the optimizer can leave every other row untouched.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool row_sparse = false;
  std::vector<std::uint32_t> touched_rows;
  std::vector<std::uint8_t> row_touched;
  bool all_rows_touched = false;

  Parameter() = default;
  Parameter(std::string name, Tensor value, bool row_sparse = false);

  void zero_grad();
  void mark_row(std::size_t r);
  void mark_all() { all_rows_touched = true; }
};

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  /// Gradient accumulated by the last backward pass (zeros if none reached it).
  Tensor grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Reverse-mode gradient tape. Ops append nodes in execution order and
/// backward() replays their rules in exact reverse order.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::uint32_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to a parameter; gradients land in parameter.grad.
  Var param(Parameter& parameter);
  /// Read-only leaf over a parameter; requesting its gradient throws.
  Var frozen(const Parameter& parameter);

  /// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be 1x1.
  void backward(Var loss);

  const Tensor& value(std::uint32_t id) const;
  /// Gradient buffer of a node, allocated as zeros on first use. For
  /// parameter leaves this is the parameter's own grad; `mark_all_rows`
  /// tells a row-sparse parameter that a dense op wrote to it.
  Tensor& grad_ref(std::uint32_t id, bool mark_all_rows = true);
  bool has_grad(std::uint32_t id) const;
  Parameter* parameter_of(std::uint32_t id) const;
  std::size_t size() const { return nodes_.size(); }

  Var record(Tensor value, BackwardFn backward);
  /// Execution-order log of backward rules run by the last backward().
  const std::vector<std::uint32_t>& backward_order() const { return backward_order_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool grad_ready = false;
    Parameter* parameter = nullptr;
    bool frozen = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> backward_order_;
};

// Primitive ops. Every op checks shapes and registers a backward rule.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
/// x (BxN) plus a 1xN row vector broadcast over rows.
Var add_row(Var x, Var row);
Var relu(Var x);
Var sigmoid(Var x);
Var elementwise_mul(Var a, Var b);
/// Multiplies row r of x (BxN) by w(r, 0), w being Bx1.
Var scale_rows(Var x, Var w);
/// Column-wise concatenation of equally tall operands.
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
Var slice_cols(Var x, std::size_t start, std::size_t count);
Var reshape(Var x, std::size_t rows, std::size_t cols);
Var flatten(Var x);
/// Stacks table rows; backward scatter-adds so duplicate indices accumulate.
Var gather_rows(Var table, std::span<const std::uint32_t> indices);
Var clamp(Var x, double lo, double hi);
Var sum(Var x);
/// Mean binary cross-entropy of Bx1 probabilities against 0/1 labels.
Var binary_logloss(Var probabilities, std::span<const double> labels);

double stable_sigmoid(double x);

}  // namespace memonet
