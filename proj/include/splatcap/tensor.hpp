#pragma once

#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

namespace splatcap {

// Dense row-major tensor of doubles, rank 1..3. Rank-2 is the workhorse;
// rank-3 is used for images (H x W x C).
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
        v.assign(numel_of(dims_), 0.0);
    }
    Tensor(std::initializer_list<std::size_t> dims) : Tensor(std::vector<std::size_t>(dims)) {}

    static Tensor scalar(double x) {
        Tensor t({1});
        t.v[0] = x;
        return t;
    }
    static Tensor zeros_like(const Tensor& o) { return Tensor(o.dims_); }

    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t rank() const { return dims_.size(); }
    std::size_t numel() const { return v.size(); }
    bool empty() const { return v.empty(); }

    std::size_t rows() const { return dims_.empty() ? 0 : dims_[0]; }
    std::size_t cols() const { return dims_.empty() ? 0 : numel() / dims_[0]; }

    bool is_scalar() const { return numel() == 1; }
    bool same_shape(const Tensor& o) const { return dims_ == o.dims_; }

    double* data() { return v.data(); }
    const double* data() const { return v.data(); }

    double& operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }

    double& at(std::size_t i, std::size_t j) { return v[i * cols() + j]; }
    double at(std::size_t i, std::size_t j) const { return v[i * cols() + j]; }

    // rank-3 access (H, W, C)
    double& at3(std::size_t i, std::size_t j, std::size_t k) {
        return v[(i * dims_[1] + j) * dims_[2] + k];
    }
    double at3(std::size_t i, std::size_t j, std::size_t k) const {
        return v[(i * dims_[1] + j) * dims_[2] + k];
    }

    void fill(double x) { std::fill(v.begin(), v.end(), x); }
    void zero() { fill(0.0); }

    static std::size_t numel_of(const std::vector<std::size_t>& dims) {
        std::size_t n = dims.empty() ? 0 : 1;
        for (auto d : dims) n *= d;
        return n;
    }

    std::vector<double> v;

  private:
    std::vector<std::size_t> dims_;
};

}  // namespace splatcap
