#include "splatcap/mlp.hpp"

#include <cmath>

namespace splatcap {

namespace {

Tensor kaiming_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    Tensor w({fan_in, fan_out});
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
    return w;
}

}  // namespace

void Mlp::register_params(ParamStore& store, Rng& rng, double lr, bool zero_init_heads) const {
    int in = spec_.input;
    for (std::size_t l = 0; l < spec_.trunk.size(); ++l) {
        int out = spec_.trunk[l];
        store.add(prefix_ + "/L" + std::to_string(l) + ".W",
                  kaiming_uniform(static_cast<std::size_t>(in), static_cast<std::size_t>(out), rng), lr);
        store.add(prefix_ + "/L" + std::to_string(l) + ".b", Tensor({1, static_cast<std::size_t>(out)}), lr);
        in = out;
    }
    for (const auto& h : spec_.heads) {
        int hin = in;
        if (h.hidden > 0) {
            store.add(prefix_ + "/head." + h.name + ".H.W",
                      kaiming_uniform(static_cast<std::size_t>(hin), static_cast<std::size_t>(h.hidden), rng), lr);
            store.add(prefix_ + "/head." + h.name + ".H.b",
                      Tensor({1, static_cast<std::size_t>(h.hidden)}), lr);
            hin = h.hidden;
        }
        Tensor w = zero_init_heads
                       ? Tensor({static_cast<std::size_t>(hin), static_cast<std::size_t>(h.out)})
                       : kaiming_uniform(static_cast<std::size_t>(hin), static_cast<std::size_t>(h.out), rng);
        store.add(prefix_ + "/head." + h.name + ".W", std::move(w), lr);
        store.add(prefix_ + "/head." + h.name + ".b", Tensor({1, static_cast<std::size_t>(h.out)}), lr);
    }
}

std::map<std::string, Var> Mlp::forward(Tape& tape, ParamStore& store, Var x) const {
    Var h = x;
    for (std::size_t l = 0; l < spec_.trunk.size(); ++l) {
        Var w = tape.param(store, prefix_ + "/L" + std::to_string(l) + ".W");
        Var b = tape.param(store, prefix_ + "/L" + std::to_string(l) + ".b");
        h = op::relu(op::add_rowvec(op::matmul(h, w), b));
    }
    std::map<std::string, Var> outs;
    for (const auto& hd : spec_.heads) {
        Var y = h;
        if (hd.hidden > 0) {
            Var w = tape.param(store, prefix_ + "/head." + hd.name + ".H.W");
            Var b = tape.param(store, prefix_ + "/head." + hd.name + ".H.b");
            y = op::relu(op::add_rowvec(op::matmul(y, w), b));
        }
        Var w = tape.param(store, prefix_ + "/head." + hd.name + ".W");
        Var b = tape.param(store, prefix_ + "/head." + hd.name + ".b");
        outs[hd.name] = op::add_rowvec(op::matmul(y, w), b);
    }
    return outs;
}

std::size_t Mlp::param_count() const {
    std::size_t n = 0;
    int in = spec_.input;
    for (int w : spec_.trunk) {
        n += static_cast<std::size_t>(in + 1) * static_cast<std::size_t>(w);
        in = w;
    }
    for (const auto& h : spec_.heads) {
        int hin = in;
        if (h.hidden > 0) {
            n += static_cast<std::size_t>(hin + 1) * static_cast<std::size_t>(h.hidden);
            hin = h.hidden;
        }
        n += static_cast<std::size_t>(hin + 1) * static_cast<std::size_t>(h.out);
    }
    return n;
}

}  // namespace splatcap
