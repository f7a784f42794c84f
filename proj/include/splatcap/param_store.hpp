#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "splatcap/tensor.hpp"

namespace splatcap {

// Flat registry of learnable parameter groups. Each group carries its own
// learning rate and Adam moment buffers; the tape flushes gradients here.
class ParamStore {
  public:
    struct Group {
        std::string name;
        Tensor value;
        Tensor grad;
        Tensor m;  // Adam first moment
        Tensor v;  // Adam second moment
        double lr = 0.0;
        bool grad_set = false;
    };

    Group& add(const std::string& name, Tensor init, double lr);
    bool has(const std::string& name) const { return index_.count(name) != 0; }
    Group& group(const std::string& name);
    const Group& group(const std::string& name) const;

    std::vector<Group>& groups() { return groups_; }
    const std::vector<Group>& groups() const { return groups_; }

    void zero_grad();

    // Standard Adam with per-group learning rates, bias correction on.
    // Groups without gradients are skipped with a warning on stderr.
    void adam_step(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    std::int64_t step_count() const { return step_count_; }

    std::size_t total_params() const;

    // Versioned little-endian binary container; round-trips exactly.
    void save(const std::string& path) const;
    void load(const std::string& path);

  private:
    std::vector<Group> groups_;
    std::map<std::string, std::size_t> index_;
    std::int64_t step_count_ = 0;
};

}  // namespace splatcap
