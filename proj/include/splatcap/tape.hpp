#pragma once

#include <deque>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "splatcap/param_store.hpp"
#include "splatcap/tensor.hpp"

namespace splatcap {

class Tape;

// Lightweight handle to a node on a tape.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    const Tensor& val() const;
    double scalar() const { return val()[0]; }
};

// Define-by-run reverse-mode tape. Rebuilt every iteration; parameters are
// copied in as leaves and their gradients flushed back to the ParamStore
// when backward() reaches them.
class Tape {
  public:
    struct Node {
        Tensor val;
        Tensor grad;  // lazily allocated
        std::function<void(Tape&, Node&)> back;
        const char* op = "leaf";
    };

    Var leaf(Tensor v, const char* op = "leaf");
    Var constant(const Tensor& v) { return leaf(v, "const"); }
    Var scalar(double x) { return leaf(Tensor::scalar(x), "const"); }

    // Leaf bound to a ParamStore group; backward adds into the group's grad.
    Var param(ParamStore& store, const std::string& group_name);

    Var record(Tensor out, const char* op, std::function<void(Tape&, Node&)> back);

    Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

    // Gradient buffer of a node, allocated (zeroed) on first use.
    Tensor& grad(int id);
    bool has_grad(int id) const { return !nodes_[static_cast<std::size_t>(id)].grad.empty(); }

    // Reverse sweep from a finite scalar root. Node gradients are reset on
    // every call, so calling twice doubles what lands in the ParamStore.
    void backward(Var root);

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // When set, every recorded tensor is scanned and the first non-finite
    // value reported with its producing op. Off by default (used to diagnose
    // NaN losses by replaying the forward pass).
    bool check_finite = false;

  private:
    // deque: recording must not invalidate references handed out via Var::val()
    std::deque<Node> nodes_;
};

inline const Tensor& Var::val() const { return tape->node(id).val; }

// Throws if t contains a non-finite value; what = producing op name.
void throw_if_nonfinite(const Tensor& t, const char* what);

}  // namespace splatcap
