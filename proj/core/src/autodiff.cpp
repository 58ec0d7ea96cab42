#include "gsv/autodiff.hpp"

#include <stdexcept>

namespace gsv {

namespace detail {

void Node::accumulate(const Tensor& g) {
  if (grad.empty()) {
    require_same_shape(value(), g, "gradient accumulation");
    grad = g;
    return;
  }
  require_same_shape(grad, g, "gradient accumulation");
  Real* dst = grad.raw();
  const Real* src = g.raw();
  for (std::size_t i = 0; i < grad.size(); ++i) dst[i] += src[i];
}

}  // namespace detail

Var Var::constant(Tensor t) {
  auto n = std::make_shared<detail::Node>();
  n->owned = std::move(t);
  return Var(std::move(n));
}

Var Var::view(const Tensor& t) {
  auto n = std::make_shared<detail::Node>();
  n->external = &t;
  return Var(std::move(n));
}

Var Var::make(Tensor value, std::initializer_list<const Var*> inputs,
              std::function<void(const Tensor&)> backward) {
  auto n = std::make_shared<detail::Node>();
  n->owned = std::move(value);
  for (const Var* in : inputs) {
    if (in->requires_grad()) {
      n->tape = in->node_->tape;
      break;
    }
  }
  if (n->tape) {
    n->requires_grad = true;
    n->backward = std::move(backward);
    n->tape->record(n);
  }
  return Var(std::move(n));
}

Var Var::make(Tensor value, const std::vector<Var>& inputs,
              std::function<void(const Tensor&)> backward) {
  auto n = std::make_shared<detail::Node>();
  n->owned = std::move(value);
  for (const Var& in : inputs) {
    if (in.requires_grad()) {
      n->tape = in.node_->tape;
      break;
    }
  }
  if (n->tape) {
    n->requires_grad = true;
    n->backward = std::move(backward);
    n->tape->record(n);
  }
  return Var(std::move(n));
}

Var GradTape::watch(const Tensor& param) {
  auto it = leaves_.find(&param);
  if (it != leaves_.end()) return Var(it->second);
  auto n = std::make_shared<detail::Node>();
  n->external = &param;
  n->requires_grad = true;
  n->tape = this;
  leaves_.emplace(&param, n);
  return Var(std::move(n));
}

void GradTape::backward(const Var& output, const Tensor& seed) {
  if (ops_.empty()) throw std::logic_error("backward called before any forward pass was recorded");
  if (!output.requires_grad() || output.node_->tape != this) {
    throw std::logic_error("backward output is not recorded on this tape");
  }
  for (auto& n : ops_) n->grad = Tensor();
  output.node_->accumulate(seed);
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    detail::Node& n = **it;
    if (n.grad.empty() || !n.backward) continue;
    n.backward(n.grad);
  }
}

void GradTape::backward(const Var& output) {
  backward(output, Tensor(output.shape(), Real(1)));
}

Tensor GradTape::gradient(const Tensor& param) const {
  auto it = leaves_.find(&param);
  if (it == leaves_.end() || it->second->grad.empty()) return Tensor(param.shape());
  return it->second->grad;
}

void GradTape::clear_graph() { ops_.clear(); }

void GradTape::zero_grad() {
  for (auto& [_, n] : leaves_) n->grad = Tensor();
}

}  // namespace gsv
