#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "splatcap/param_store.hpp"
#include "splatcap/rng.hpp"
#include "splatcap/tape.hpp"

namespace testutil {

using splatcap::ParamStore;
using splatcap::Rng;
using splatcap::Tape;
using splatcap::Tensor;
using splatcap::Var;

// Builds the loss on a fresh tape from current store values.
using LossBuilder = std::function<Var(Tape&, ParamStore&)>;

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst;  // "group[i]"
    int checked = 0;
};

inline double rel_err(double a, double b, double atol = 1e-9) {
    double d = std::fabs(a - b);
    double m = std::max(std::fabs(a), std::fabs(b));
    return d / std::max(m, atol / 1e-3);
}

// Central finite differences over every element of the named groups
// (or a random subset of max_per_group elements if positive).
inline GradCheckResult gradcheck(const LossBuilder& f, ParamStore& store,
                                 const std::vector<std::string>& groups, double h = 1e-5,
                                 int max_per_group = 0, std::uint64_t subset_seed = 17) {
    store.zero_grad();
    {
        Tape tape;
        Var loss = f(tape, store);
        tape.backward(loss);
    }
    GradCheckResult res;
    Rng pick(subset_seed);
    for (const auto& gname : groups) {
        auto& g = store.group(gname);
        std::vector<std::size_t> idx;
        if (max_per_group > 0 && g.value.numel() > static_cast<std::size_t>(max_per_group)) {
            for (int k = 0; k < max_per_group; ++k)
                idx.push_back(static_cast<std::size_t>(pick.next_below(g.value.numel())));
        } else {
            for (std::size_t i = 0; i < g.value.numel(); ++i) idx.push_back(i);
        }
        for (std::size_t i : idx) {
            double orig = g.value[i];
            g.value[i] = orig + h;
            double fp;
            {
                Tape tape;
                fp = f(tape, store).scalar();
            }
            g.value[i] = orig - h;
            double fm;
            {
                Tape tape;
                fm = f(tape, store).scalar();
            }
            g.value[i] = orig;
            double fd = (fp - fm) / (2.0 * h);
            double an = g.grad[i];
            double e = rel_err(an, fd, 1e-7);
            ++res.checked;
            if (e > res.max_rel_err) {
                res.max_rel_err = e;
                res.worst = gname + "[" + std::to_string(i) + "] analytic=" + std::to_string(an) +
                            " fd=" + std::to_string(fd);
            }
        }
    }
    return res;
}

// Directional derivative check: perturbs all elements of `groups` along a
// random unit direction u and compares (f(p+hu) - f(p-hu)) / 2h with g.u.
inline double directional_check(const LossBuilder& f, ParamStore& store,
                                const std::vector<std::string>& groups, Rng& rng,
                                double h = 1e-5) {
    store.zero_grad();
    {
        Tape tape;
        Var loss = f(tape, store);
        tape.backward(loss);
    }
    // random direction
    std::vector<std::vector<double>> dir;
    double norm2 = 0;
    for (const auto& gname : groups) {
        auto& g = store.group(gname);
        std::vector<double> d(g.value.numel());
        for (auto& x : d) {
            x = rng.normal();
            norm2 += x * x;
        }
        dir.push_back(std::move(d));
    }
    double inv = 1.0 / std::sqrt(norm2);
    double analytic = 0;
    for (std::size_t k = 0; k < groups.size(); ++k) {
        auto& g = store.group(groups[k]);
        for (std::size_t i = 0; i < dir[k].size(); ++i) {
            dir[k][i] *= inv;
            analytic += g.grad[i] * dir[k][i];
        }
    }
    auto shift = [&](double s) {
        for (std::size_t k = 0; k < groups.size(); ++k) {
            auto& g = store.group(groups[k]);
            for (std::size_t i = 0; i < dir[k].size(); ++i) g.value[i] += s * dir[k][i];
        }
    };
    shift(h);
    double fp;
    {
        Tape tape;
        fp = f(tape, store).scalar();
    }
    shift(-2 * h);
    double fm;
    {
        Tape tape;
        fm = f(tape, store).scalar();
    }
    shift(h);
    double fd = (fp - fm) / (2.0 * h);
    return rel_err(analytic, fd, 1e-9);
}

}  // namespace testutil
