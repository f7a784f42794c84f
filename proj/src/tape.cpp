#include "splatcap/tape.hpp"

#include <cmath>

namespace splatcap {

void throw_if_nonfinite(const Tensor& t, const char* what) {
    for (std::size_t i = 0; i < t.numel(); ++i) {
        if (!std::isfinite(t[i]))
            throw std::runtime_error(std::string("non-finite value produced by op '") + what +
                                     "' at flat index " + std::to_string(i));
    }
}

Var Tape::leaf(Tensor v, const char* op) {
    Node n;
    n.val = std::move(v);
    n.op = op;
    if (check_finite) throw_if_nonfinite(n.val, op);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::param(ParamStore& store, const std::string& group_name) {
    ParamStore::Group* g = &store.group(group_name);
    Node n;
    n.val = g->value;
    n.op = "param";
    n.back = [g](Tape& t, Node& self) {
        (void)t;
        if (self.grad.empty()) return;
        for (std::size_t i = 0; i < self.grad.numel(); ++i) g->grad[i] += self.grad[i];
        g->grad_set = true;
    };
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::record(Tensor out, const char* op, std::function<void(Tape&, Node&)> back) {
    Node n;
    n.val = std::move(out);
    n.op = op;
    n.back = std::move(back);
    if (check_finite) throw_if_nonfinite(n.val, op);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Tensor& Tape::grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) n.grad = Tensor::zeros_like(n.val);
    return n.grad;
}

void Tape::backward(Var root) {
    if (root.tape != this) throw std::runtime_error("backward: root from another tape");
    const Node& r = node(root.id);
    if (!r.val.is_scalar()) throw std::runtime_error("backward: root is not a scalar");
    if (!std::isfinite(r.val[0]))
        throw std::runtime_error(std::string("backward: root is non-finite (op '") + r.op + "')");

    for (auto& n : nodes_)
        if (!n.grad.empty()) n.grad.zero();

    grad(root.id)[0] = 1.0;
    for (int id = root.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.back && !n.grad.empty()) n.back(*this, n);
    }
}

}  // namespace splatcap
