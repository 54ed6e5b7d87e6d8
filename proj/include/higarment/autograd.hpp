#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "higarment/tensor.hpp"

namespace hg {

// A named trainable tensor plus its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  // Frozen parameters enter the tape as constants and are skipped by the
  // optimizer.
  bool frozen = false;

  void zero_grad() { grad.fill(0.0); }
};

// Owns every Parameter of a model, keyed and iterated in sorted name order.
// Parameter addresses are stable for the lifetime of the store.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  // Throws ValidationError if the name is taken.
  Parameter& add(std::string name, Tensor init);
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t size() const { return params_.size(); }
  std::size_t element_count() const;
  void zero_grad();

 private:
  std::map<std::string, Parameter, std::less<>> params_;
};

class Tape;

// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const;
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so reverse
// creation order is a valid topological order for backward.
class Tape {
 public:
  // Propagates the node's output gradient into its inputs' gradients.
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf bound to `p`; repeated calls with the same parameter return the same
  // node. Frozen parameters (or a no-grad tape) yield constants.
  Var parameter(Parameter& p);

  // Used by op implementations.
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                  std::move(backward));
  }
  bool requires_grad(const Var& v) const;
  // Gradient buffer of `v`, zero-initialised on first access.
  Tensor& grad_buffer(const Var& v);

  const Tensor& value(const Var& v) const;
  const Tensor& grad(const Var& v) const;

  // Seeds d(loss)/d(loss) = 1 and runs every recorded backward function.
  // The loss must be 1x1. When `accumulate` is set, leaf gradients are added
  // into the bound Parameter::grad tensors. A tape supports one backward.
  void backward(const Var& loss, bool accumulate = true);
  void accumulate_parameter_grads();

  bool grad_enabled() const { return grad_enabled_; }
  bool consumed() const { return consumed_; }
  std::size_t node_count() const { return nodes_.size(); }
  // Drops every node so the tape can record a new graph.
  void reset();

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;  // parameter leaves alias their value
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* parameter = nullptr;
  };

  const Node& node(const Var& v) const;
  Node& node(const Var& v);
  void check_live() const;

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> leaf_of_;
  bool grad_enabled_;
  bool consumed_ = false;
};

}  // namespace hg
