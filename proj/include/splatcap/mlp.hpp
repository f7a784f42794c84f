#pragma once

#include <map>
#include <string>
#include <vector>

#include "splatcap/ops.hpp"
#include "splatcap/param_store.hpp"
#include "splatcap/rng.hpp"
#include "splatcap/tape.hpp"

namespace splatcap {

// Fully-connected trunk with ReLU between layers, plus named output heads.
// A head with hidden > 0 is linear->ReLU->linear; hidden == 0 is a single
// linear layer. Zero-initialized head finals make the network output exactly
// zero at the start of training.
class Mlp {
  public:
    struct Head {
        std::string name;
        int hidden = 0;
        int out = 0;
    };

    struct Spec {
        int input = 0;
        std::vector<int> trunk;  // widths of trunk layers (each followed by ReLU)
        std::vector<Head> heads;
    };

    Mlp(std::string prefix, Spec spec) : prefix_(std::move(prefix)), spec_(std::move(spec)) {}

    void register_params(ParamStore& store, Rng& rng, double lr, bool zero_init_heads) const;

    // x: [B, input] -> one [B, out] per head
    std::map<std::string, Var> forward(Tape& tape, ParamStore& store, Var x) const;

    // sum over layers of (fan_in + 1) * fan_out
    std::size_t param_count() const;

    const Spec& spec() const { return spec_; }
    const std::string& prefix() const { return prefix_; }

  private:
    std::string prefix_;
    Spec spec_;
};

}  // namespace splatcap
