// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

// Dense row-major tensors with a dynamically recorded gradient tape.
//
// A Tensor is a cheap shared handle: copies alias the same storage, the way
// parameters are shared between a model and its optimizer. Every op that
// sees an input with requires_grad records a node holding its inputs and a
// backward closure; backward() on a scalar walks that DAG in reverse
// topological order, visiting each node once.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace pedpipe {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something flows into it
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into inputs' grads.
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Direct write access; used by optimizers and initializers on leaves.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  // Only valid on leaves; toggles whether parameters collect gradients.
  void set_requires_grad(bool on);
  bool is_leaf() const;
  const char* op_name() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  // New leaf holding a copy of the values, detached from any graph.
  Tensor detach() const;

  // Reverse-mode pass from this scalar. Gradients accumulate into every
  // reachable tensor that requires grad.
  void backward() const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

struct NamedParam {
  std::string name;
  Tensor tensor;
};

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

namespace detail {

using BackwardFn = std::function<void(Node&)>;

// Builds an op result; records inputs and backward only when grad mode is on
// and some input requires grad.
Tensor make_result(Shape shape, std::vector<double> value, const char* op,
                   std::initializer_list<Tensor> inputs, BackwardFn backward);
Tensor make_result(Shape shape, std::vector<double> value, const char* op,
                   const std::vector<Tensor>& inputs, BackwardFn backward);

// Gradient accumulation target for input i, or nullptr when it needs none.
double* input_grad(Node& node, std::size_t i);

}  // namespace detail

}  // namespace pedpipe
