#include "splatcap/param_store.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace splatcap {

ParamStore::Group& ParamStore::add(const std::string& name, Tensor init, double lr) {
    if (index_.count(name)) throw std::runtime_error("ParamStore: duplicate group '" + name + "'");
    Group g;
    g.name = name;
    g.grad = Tensor::zeros_like(init);
    g.m = Tensor::zeros_like(init);
    g.v = Tensor::zeros_like(init);
    g.value = std::move(init);
    g.lr = lr;
    index_[name] = groups_.size();
    groups_.push_back(std::move(g));
    return groups_.back();
}

ParamStore::Group& ParamStore::group(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::runtime_error("ParamStore: unknown group '" + name + "'");
    return groups_[it->second];
}

const ParamStore::Group& ParamStore::group(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::runtime_error("ParamStore: unknown group '" + name + "'");
    return groups_[it->second];
}

void ParamStore::zero_grad() {
    for (auto& g : groups_) {
        g.grad.zero();
        g.grad_set = false;
    }
}

void ParamStore::adam_step(double beta1, double beta2, double eps) {
    ++step_count_;
    const double t = static_cast<double>(step_count_);
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    for (auto& g : groups_) {
        if (!g.grad_set) {
            std::fprintf(stderr, "[adam] warning: no gradient for group '%s', skipping\n",
                         g.name.c_str());
            continue;
        }
        const std::size_t n = g.value.numel();
        for (std::size_t i = 0; i < n; ++i) {
            double gr = g.grad[i];
            g.m[i] = beta1 * g.m[i] + (1.0 - beta1) * gr;
            g.v[i] = beta2 * g.v[i] + (1.0 - beta2) * gr * gr;
            double mhat = g.m[i] / bc1;
            double vhat = g.v[i] / bc2;
            g.value[i] -= g.lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

std::size_t ParamStore::total_params() const {
    std::size_t n = 0;
    for (const auto& g : groups_) n += g.value.numel();
    return n;
}

namespace {

constexpr char kMagic[4] = {'S', 'P', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& os, const T& x) {
    os.write(reinterpret_cast<const char*>(&x), sizeof(T));
}

template <typename T>
void get(std::ifstream& is, T& x) {
    is.read(reinterpret_cast<char*>(&x), sizeof(T));
}

void put_tensor(std::ofstream& os, const Tensor& t) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.dims().size()));
    for (auto d : t.dims()) put<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

Tensor get_tensor(std::ifstream& is) {
    std::uint32_t rank = 0;
    get(is, rank);
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) {
        std::uint64_t x = 0;
        get(is, x);
        d = static_cast<std::size_t>(x);
    }
    Tensor t(dims);
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
    return t;
}

}  // namespace

void ParamStore::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
    os.write(kMagic, 4);
    put<std::uint32_t>(os, kVersion);
    put<std::int64_t>(os, step_count_);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(groups_.size()));
    for (const auto& g : groups_) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(g.name.size()));
        os.write(g.name.data(), static_cast<std::streamsize>(g.name.size()));
        put<double>(os, g.lr);
        put_tensor(os, g.value);
        put_tensor(os, g.m);
        put_tensor(os, g.v);
    }
    if (!os) throw std::runtime_error("short write on checkpoint: " + path);
}

void ParamStore::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    std::uint32_t version = 0;
    get(is, version);
    if (version != kVersion) throw std::runtime_error("unsupported checkpoint version");
    get(is, step_count_);
    std::uint32_t ngroups = 0;
    get(is, ngroups);
    for (std::uint32_t i = 0; i < ngroups; ++i) {
        std::uint32_t len = 0;
        get(is, len);
        std::string name(len, '\0');
        is.read(name.data(), len);
        double lr = 0;
        get(is, lr);
        Tensor value = get_tensor(is);
        Tensor m = get_tensor(is);
        Tensor v = get_tensor(is);
        if (!is) throw std::runtime_error("truncated checkpoint: " + path);
        if (has(name)) {
            Group& g = group(name);
            if (!g.value.same_shape(value))
                throw std::runtime_error("checkpoint shape mismatch for group '" + name + "'");
            g.value = std::move(value);
            g.m = std::move(m);
            g.v = std::move(v);
            g.lr = lr;
        } else {
            Group& g = add(name, std::move(value), lr);
            g.m = std::move(m);
            g.v = std::move(v);
        }
    }
}

}  // namespace splatcap
