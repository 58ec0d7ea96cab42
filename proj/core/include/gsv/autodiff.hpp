#pragma once

#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "gsv/tensor.hpp"

namespace gsv {

class GradTape;

namespace detail {

struct Node {
  Tensor owned;
  const Tensor* external = nullptr;
  Tensor grad;
  bool requires_grad = false;
  GradTape* tape = nullptr;
  // Receives d(out)/d(this) and accumulates adjoints into the inputs.
  std::function<void(const Tensor&)> backward;

  const Tensor& value() const { return external ? *external : owned; }
  void accumulate(const Tensor& g);
};

}  // namespace detail

/// Handle to a value in a (possibly recorded) computation. Without a tape a
/// Var is a plain value holder and no graph is retained.
class Var {
 public:
  Var() = default;

  static Var constant(Tensor t);
  /// Non-owning; `t` must outlive every use of the returned Var.
  static Var view(const Tensor& t);

  const Tensor& value() const { return node_->value(); }
  const Shape& shape() const { return node_->value().shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool valid() const { return static_cast<bool>(node_); }

  /// Adjoint accumulated by the last backward pass (empty if none reached it).
  const Tensor& grad() const { return node_->grad; }

  void add_grad(const Tensor& g) const {
    if (requires_grad()) node_->accumulate(g);
  }

  /// Builds the output of a primitive. When any input requires a gradient the
  /// result is recorded on that input's tape with `backward` as its adjoint.
  static Var make(Tensor value, std::initializer_list<const Var*> inputs,
                  std::function<void(const Tensor&)> backward);
  static Var make(Tensor value, const std::vector<Var>& inputs,
                  std::function<void(const Tensor&)> backward);

 private:
  explicit Var(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;
  friend class GradTape;
};

/// Ordered record of executed primitives. Parameters are registered with
/// `watch`; `backward` replays adjoints in reverse execution order.
class GradTape {
 public:
  GradTape() = default;
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  /// Leaf for a parameter tensor, cached by address. The tensor must stay
  /// alive and unmodified while the tape references it.
  Var watch(const Tensor& param);

  void record(const std::shared_ptr<detail::Node>& node) { ops_.push_back(node); }
  std::size_t recorded() const { return ops_.size(); }

  /// Seeds `output` with `seed` and propagates. Gradients accumulate into the
  /// watched leaves across calls until `zero_grad`. Throws std::logic_error
  /// when nothing has been recorded.
  void backward(const Var& output, const Tensor& seed);
  /// Scalar convenience: seed of ones.
  void backward(const Var& output);

  /// Accumulated gradient for a watched tensor; zeros when never reached.
  Tensor gradient(const Tensor& param) const;

  /// Drops the recorded graph but keeps the leaves and their gradients.
  void clear_graph();
  void zero_grad();

 private:
  std::vector<std::shared_ptr<detail::Node>> ops_;
  std::unordered_map<const Tensor*, std::shared_ptr<detail::Node>> leaves_;
};

/// Maps model parameters to Vars: recorded leaves when training, plain views
/// for inference.
class ParamBinder {
 public:
  ParamBinder() = default;
  explicit ParamBinder(GradTape& tape) : tape_(&tape) {}
  Var operator()(const Tensor& p) const { return tape_ ? tape_->watch(p) : Var::view(p); }
  GradTape* tape() const { return tape_; }

 private:
  GradTape* tape_ = nullptr;
};

}  // namespace gsv
