#include "higarment/autograd.hpp"

#include "higarment/errors.hpp"

namespace hg {

Parameter& ParameterStore::add(std::string name, Tensor init) {
  if (params_.contains(name)) throw ValidationError("duplicate parameter name: " + name);
  Parameter p;
  p.name = name;
  p.grad = Tensor(init.shape(), 0.0);
  p.value = std::move(init);
  auto [it, _] = params_.emplace(std::move(name), std::move(p));
  return it->second;
}

Parameter& ParameterStore::at(std::string_view name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ValidationError("unknown parameter: " + std::string(name));
  return it->second;
}

const Parameter& ParameterStore::at(std::string_view name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ValidationError("unknown parameter: " + std::string(name));
  return it->second;
}

bool ParameterStore::contains(std::string_view name) const { return params_.contains(name); }

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& [_, p] : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& [_, p] : params_) out.push_back(&p);
  return out;
}

std::size_t ParameterStore::element_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [_, p] : params_) p.zero_grad();
}

const Tensor& Var::value() const { return tape().value(*this); }
const Tensor& Var::grad() const { return tape().grad(*this); }

Tape& Var::tape() const {
  if (!tape_) throw GraphError("use of an unbound Var");
  return *tape_;
}

const Tape::Node& Tape::node(const Var& v) const {
  if (v.tape_ != this) throw GraphError("Var belongs to a different tape");
  if (v.id_ >= nodes_.size()) throw GraphError("Var refers to a freed node");
  return nodes_[v.id_];
}

Tape::Node& Tape::node(const Var& v) {
  return const_cast<Node&>(static_cast<const Tape*>(this)->node(v));
}

void Tape::check_live() const {
  if (consumed_) throw GraphError("tape already ran backward; reset() before reuse");
}

Var Tape::constant(Tensor value) {
  check_live();
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
  check_live();
  if (auto it = leaf_of_.find(&p); it != leaf_of_.end()) return Var(this, it->second);
  Node n;
  n.external = &p.value;
  n.parameter = &p;
  n.requires_grad = grad_enabled_ && !p.frozen;
  nodes_.push_back(std::move(n));
  leaf_of_.emplace(&p, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  check_live();
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (const Var& in : inputs) {
      if (node(in).requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

bool Tape::requires_grad(const Var& v) const { return node(v).requires_grad; }

Tensor& Tape::grad_buffer(const Var& v) {
  Node& n = node(v);
  if (!n.has_grad) {
    n.grad = Tensor(value(v).shape(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

const Tensor& Tape::value(const Var& v) const {
  const Node& n = node(v);
  return n.external ? *n.external : n.value;
}

const Tensor& Tape::grad(const Var& v) const {
  const Node& n = node(v);
  if (!n.has_grad) throw GraphError("no gradient recorded for this node");
  return n.grad;
}

void Tape::backward(const Var& loss, bool accumulate) {
  check_live();
  if (!grad_enabled_) throw GraphError("backward on a no-grad tape");
  const Tensor& lv = value(loss);
  if (lv.size() != 1) {
    throw GraphError("backward needs a scalar loss, got shape " + shape_to_string(lv.shape()));
  }
  consumed_ = true;
  if (!node(loss).requires_grad) return;
  grad_buffer(loss).fill(1.0);
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
  if (accumulate) accumulate_parameter_grads();
}

void Tape::accumulate_parameter_grads() {
  for (auto& n : nodes_) {
    if (!n.parameter || !n.has_grad) continue;
    auto dst = n.parameter->grad.data();
    auto src = n.grad.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
}

void Tape::reset() {
  nodes_.clear();
  leaf_of_.clear();
  consumed_ = false;
}

}  // namespace hg
