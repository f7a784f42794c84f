#include "splatcap/ops.hpp"

#include <cmath>
#include <cstring>

#include "splatcap/kernels.hpp"
#include "splatcap/threading.hpp"

namespace splatcap::op {

namespace {

void check_same_shape(const Var& a, const Var& b, const char* what) {
    if (!a.val().same_shape(b.val()))
        throw std::runtime_error(std::string(what) + ": shape mismatch");
}

// generic elementwise unary; df(x, y) with y the forward output
template <class F, class DF>
Var unary_elem(Var a, const char* name, F f, DF df) {
    Tape& t = *a.tape;
    const Tensor& av = a.val();
    Tensor out(av.dims());
    for (std::size_t i = 0; i < av.numel(); ++i) out[i] = f(av[i]);
    int aid = a.id;
    return t.record(std::move(out), name, [aid, df](Tape& tp, Tape::Node& self) {
        const Tensor& av = tp.node(aid).val;
        Tensor& ga = tp.grad(aid);
        for (std::size_t i = 0; i < av.numel(); ++i) ga[i] += self.grad[i] * df(av[i], self.val[i]);
    });
}

}  // namespace

Var add(Var a, Var b) {
    check_same_shape(a, b, "add");
    Tape& t = *a.tape;
    Tensor out(a.val().dims());
    kernels::active().add(a.val().data(), b.val().data(), out.data(), out.numel());
    int aid = a.id, bid = b.id;
    return t.record(std::move(out), "add", [aid, bid](Tape& tp, Tape::Node& self) {
        kernels::active().axpy(1.0, self.grad.data(), tp.grad(aid).data(), self.grad.numel());
        kernels::active().axpy(1.0, self.grad.data(), tp.grad(bid).data(), self.grad.numel());
    });
}

Var sub(Var a, Var b) {
    check_same_shape(a, b, "sub");
    Tape& t = *a.tape;
    Tensor out(a.val().dims());
    kernels::active().sub(a.val().data(), b.val().data(), out.data(), out.numel());
    int aid = a.id, bid = b.id;
    return t.record(std::move(out), "sub", [aid, bid](Tape& tp, Tape::Node& self) {
        kernels::active().axpy(1.0, self.grad.data(), tp.grad(aid).data(), self.grad.numel());
        kernels::active().axpy(-1.0, self.grad.data(), tp.grad(bid).data(), self.grad.numel());
    });
}

Var mul(Var a, Var b) {
    check_same_shape(a, b, "mul");
    Tape& t = *a.tape;
    Tensor out(a.val().dims());
    kernels::active().mul(a.val().data(), b.val().data(), out.data(), out.numel());
    int aid = a.id, bid = b.id;
    return t.record(std::move(out), "mul", [aid, bid](Tape& tp, Tape::Node& self) {
        const Tensor& av = tp.node(aid).val;
        const Tensor& bv = tp.node(bid).val;
        kernels::active().fmadd(self.grad.data(), bv.data(), tp.grad(aid).data(), self.grad.numel());
        kernels::active().fmadd(self.grad.data(), av.data(), tp.grad(bid).data(), self.grad.numel());
    });
}

Var div(Var a, Var b) {
    check_same_shape(a, b, "div");
    Tape& t = *a.tape;
    const Tensor& av = a.val();
    const Tensor& bv = b.val();
    Tensor out(av.dims());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] / bv[i];
    int aid = a.id, bid = b.id;
    return t.record(std::move(out), "div", [aid, bid](Tape& tp, Tape::Node& self) {
        const Tensor& av = tp.node(aid).val;
        const Tensor& bv = tp.node(bid).val;
        Tensor& ga = tp.grad(aid);
        Tensor& gb = tp.grad(bid);
        for (std::size_t i = 0; i < self.grad.numel(); ++i) {
            double inv = 1.0 / bv[i];
            ga[i] += self.grad[i] * inv;
            gb[i] -= self.grad[i] * av[i] * inv * inv;
        }
    });
}

Var add_const(Var a, double c) {
    return unary_elem(
        a, "add_const", [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var mul_const(Var a, double c) {
    Tape& t = *a.tape;
    Tensor out(a.val().dims());
    kernels::active().scale(c, a.val().data(), out.data(), out.numel());
    int aid = a.id;
    return t.record(std::move(out), "mul_const", [aid, c](Tape& tp, Tape::Node& self) {
        kernels::active().axpy(c, self.grad.data(), tp.grad(aid).data(), self.grad.numel());
    });
}

Var neg(Var a) { return mul_const(a, -1.0); }

Var relu(Var a) {
    // subgradient at 0 is 0
    return unary_elem(
        a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
    return unary_elem(
        a, "sigmoid",
        [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
        [](double, double y) { return y * (1.0 - y); });
}

Var softplus(Var a) {
    return unary_elem(
        a, "softplus",
        [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
        [](double x, double) {
            return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        });
}

Var exp(Var a) {
    Tape& t = *a.tape;
    Tensor out(a.val().dims());
    kernels::active().exp_v(a.val().data(), out.data(), out.numel());
    int aid = a.id;
    return t.record(std::move(out), "exp", [aid](Tape& tp, Tape::Node& self) {
        kernels::active().fmadd(self.grad.data(), self.val.data(), tp.grad(aid).data(),
                                self.grad.numel());
    });
}

Var log(Var a) {
    return unary_elem(
        a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sqrt(Var a) {
    return unary_elem(
        a, "sqrt", [](double x) { return std::sqrt(x); },
        [](double, double y) { return 0.5 / y; });
}

Var sqrt_eps(Var a, double eps) {
    return unary_elem(
        a, "sqrt_eps", [eps](double x) { return std::sqrt(x + eps); },
        [](double, double y) { return 0.5 / y; });
}

Var sin(Var a) {
    return unary_elem(
        a, "sin", [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

Var cos(Var a) {
    return unary_elem(
        a, "cos", [](double x) { return std::cos(x); },
        [](double x, double) { return -std::sin(x); });
}

Var abs(Var a) {
    return unary_elem(
        a, "abs", [](double x) { return std::fabs(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var square(Var a) {
    return unary_elem(
        a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var clamp(Var a, double lo, double hi) {
    return unary_elem(
        a, "clamp", [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
        [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var rot_coef_a(Var t2) {
    auto f = [](double x) {
        if (x < 1e-8) return 1.0 - x / 6.0 + x * x / 120.0 - x * x * x / 5040.0;
        double s = std::sqrt(x);
        return std::sin(s) / s;
    };
    auto df = [](double x, double y) {
        if (x < 1e-8) return -1.0 / 6.0 + x / 60.0 - x * x / 1680.0;
        double s = std::sqrt(x);
        return (std::cos(s) - y) / (2.0 * x);
    };
    return unary_elem(t2, "rot_coef_a", f, df);
}

Var rot_coef_b(Var t2) {
    auto f = [](double x) {
        if (x < 1e-8) return 0.5 - x / 24.0 + x * x / 720.0 - x * x * x / 40320.0;
        double s = std::sqrt(x);
        return (1.0 - std::cos(s)) / x;
    };
    auto df = [](double x, double) {
        if (x < 1e-8) return -1.0 / 24.0 + x / 360.0 - x * x / 13440.0;
        double s = std::sqrt(x);
        return (0.5 * s * std::sin(s) - (1.0 - std::cos(s))) / (x * x);
    };
    return unary_elem(t2, "rot_coef_b", f, df);
}

Var rot_log_coef(Var c) {
    auto f = [](double x) {
        double u = 1.0 - x;
        if (u < 1e-6) return 0.5 + u / 6.0 + u * u / 15.0;
        double s2 = 1.0 - x * x;
        return std::acos(x) / (2.0 * std::sqrt(s2));
    };
    auto df = [](double x, double) {
        double u = 1.0 - x;
        if (u < 1e-6) return -(1.0 / 6.0 + 2.0 * u / 15.0);
        double s2 = 1.0 - x * x;
        double s = std::sqrt(s2);
        return (-1.0 + std::acos(x) * x / s) / (2.0 * s2);
    };
    return unary_elem(c, "rot_log_coef", f, df);
}

Var where(const Tensor& mask, Var a, Var b) {
    check_same_shape(a, b, "where");
    if (!mask.same_shape(a.val())) throw std::runtime_error("where: mask shape mismatch");
    Tape& t = *a.tape;
    const Tensor& av = a.val();
    const Tensor& bv = b.val();
    Tensor out(av.dims());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = mask[i] != 0.0 ? av[i] : bv[i];
    int aid = a.id, bid = b.id;
    Tensor m = mask;
    return t.record(std::move(out), "where", [aid, bid, m](Tape& tp, Tape::Node& self) {
        Tensor& ga = tp.grad(aid);
        Tensor& gb = tp.grad(bid);
        for (std::size_t i = 0; i < self.grad.numel(); ++i) {
            if (m[i] != 0.0)
                ga[i] += self.grad[i];
            else
                gb[i] += self.grad[i];
        }
    });
}

Var mul_mask(Var a, const Tensor& mask) {
    if (!mask.same_shape(a.val())) throw std::runtime_error("mul_mask: shape mismatch");
    Tape& t = *a.tape;
    Tensor out(a.val().dims());
    kernels::active().mul(a.val().data(), mask.data(), out.data(), out.numel());
    int aid = a.id;
    Tensor m = mask;
    return t.record(std::move(out), "mul_mask", [aid, m](Tape& tp, Tape::Node& self) {
        kernels::active().fmadd(self.grad.data(), m.data(), tp.grad(aid).data(), self.grad.numel());
    });
}

Var sum(Var a) {
    Tape& t = *a.tape;
    const Tensor& av = a.val();
    double s = 0.0;
    for (std::size_t i = 0; i < av.numel(); ++i) s += av[i];
    int aid = a.id;
    return t.record(Tensor::scalar(s), "sum", [aid](Tape& tp, Tape::Node& self) {
        Tensor& ga = tp.grad(aid);
        double g = self.grad[0];
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g;
    });
}

Var mean(Var a) {
    std::size_t n = a.val().numel();
    return mul_const(sum(a), 1.0 / static_cast<double>(n));
}

namespace {

Var matmul_impl(Var* a, const Tensor* aconst, Var* b, const Tensor* bconst, Tape& t) {
    const Tensor& av = a ? a->val() : *aconst;
    const Tensor& bv = b ? b->val() : *bconst;
    if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows())
        throw std::runtime_error("matmul: bad shapes");
    const std::size_t M = av.rows(), K = av.cols(), N = bv.cols();
    Tensor out({M, N});
    ThreadPool::instance().parallel_for(
        0, M, [&](std::size_t r0, std::size_t r1) {
            kernels::gemm_nn(M, N, K, av.data(), bv.data(), out.data(), r0, r1);
        },
        std::max<std::size_t>(1, 65536 / std::max<std::size_t>(1, K * N)));
    int aid = a ? a->id : -1;
    int bid = b ? b->id : -1;
    Tensor ac = aconst ? *aconst : Tensor();
    Tensor bc = bconst ? *bconst : Tensor();
    return t.record(std::move(out), "matmul", [aid, bid, ac, bc, M, K, N](Tape& tp, Tape::Node& self) {
        const Tensor& av = aid >= 0 ? tp.node(aid).val : ac;
        const Tensor& bv = bid >= 0 ? tp.node(bid).val : bc;
        if (aid >= 0) {
            Tensor& ga = tp.grad(aid);
            ThreadPool::instance().parallel_for(
                0, M, [&](std::size_t r0, std::size_t r1) {
                    kernels::gemm_nt(M, K, N, self.grad.data(), bv.data(), ga.data(), r0, r1);
                },
                std::max<std::size_t>(1, 65536 / std::max<std::size_t>(1, K * N)));
        }
        if (bid >= 0) {
            Tensor& gb = tp.grad(bid);
            ThreadPool::instance().parallel_for(
                0, K, [&](std::size_t k0, std::size_t k1) {
                    kernels::gemm_tn(M, N, K, av.data(), self.grad.data(), gb.data(), k0, k1);
                },
                std::max<std::size_t>(1, 65536 / std::max<std::size_t>(1, M * N / std::max<std::size_t>(1, K))));
        }
    });
}

}  // namespace

Var matmul(Var a, Var b) { return matmul_impl(&a, nullptr, &b, nullptr, *a.tape); }
Var matmul_const(Var a, const Tensor& b) { return matmul_impl(&a, nullptr, nullptr, &b, *a.tape); }
Var const_matmul(const Tensor& a, Var b) { return matmul_impl(nullptr, &a, &b, nullptr, *b.tape); }

Var add_rowvec(Var a, Var r) {
    const Tensor& av = a.val();
    const Tensor& rv = r.val();
    if (rv.rank() != 2 || rv.rows() != 1 || rv.cols() != av.cols())
        throw std::runtime_error("add_rowvec: bad shapes");
    Tape& t = *a.tape;
    const std::size_t M = av.rows(), N = av.cols();
    Tensor out({M, N});
    for (std::size_t i = 0; i < M; ++i)
        kernels::active().add(av.data() + i * N, rv.data(), out.data() + i * N, N);
    int aid = a.id, rid = r.id;
    return t.record(std::move(out), "add_rowvec", [aid, rid, M, N](Tape& tp, Tape::Node& self) {
        kernels::active().axpy(1.0, self.grad.data(), tp.grad(aid).data(), M * N);
        Tensor& gr = tp.grad(rid);
        for (std::size_t i = 0; i < M; ++i)
            kernels::active().axpy(1.0, self.grad.data() + i * N, gr.data(), N);
    });
}

Var mul_colvec(Var a, Var c) {
    const Tensor& av = a.val();
    const Tensor& cv = c.val();
    if (cv.rank() != 2 || cv.rows() != av.rows() || cv.cols() != 1)
        throw std::runtime_error("mul_colvec: bad shapes");
    Tape& t = *a.tape;
    const std::size_t M = av.rows(), N = av.cols();
    Tensor out({M, N});
    for (std::size_t i = 0; i < M; ++i)
        kernels::active().scale(cv[i], av.data() + i * N, out.data() + i * N, N);
    int aid = a.id, cid = c.id;
    return t.record(std::move(out), "mul_colvec", [aid, cid, M, N](Tape& tp, Tape::Node& self) {
        const Tensor& av = tp.node(aid).val;
        const Tensor& cv = tp.node(cid).val;
        Tensor& ga = tp.grad(aid);
        Tensor& gc = tp.grad(cid);
        for (std::size_t i = 0; i < M; ++i) {
            kernels::active().axpy(cv[i], self.grad.data() + i * N, ga.data() + i * N, N);
            gc[i] += kernels::active().dot(self.grad.data() + i * N, av.data() + i * N, N);
        }
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::runtime_error("concat_cols: empty");
    Tape& t = *parts[0].tape;
    const std::size_t M = parts[0].val().rows();
    std::size_t N = 0;
    for (const auto& p : parts) {
        if (p.val().rank() != 2 || p.val().rows() != M)
            throw std::runtime_error("concat_cols: row mismatch");
        N += p.val().cols();
    }
    Tensor out({M, N});
    std::vector<int> ids;
    std::vector<std::size_t> widths;
    std::size_t off = 0;
    for (const auto& p : parts) {
        const Tensor& pv = p.val();
        const std::size_t w = pv.cols();
        for (std::size_t i = 0; i < M; ++i)
            std::memcpy(out.data() + i * N + off, pv.data() + i * w, w * sizeof(double));
        ids.push_back(p.id);
        widths.push_back(w);
        off += w;
    }
    return t.record(std::move(out), "concat_cols", [ids, widths, M, N](Tape& tp, Tape::Node& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            Tensor& g = tp.grad(ids[k]);
            const std::size_t w = widths[k];
            for (std::size_t i = 0; i < M; ++i)
                kernels::active().axpy(1.0, self.grad.data() + i * N + off, g.data() + i * w, w);
            off += w;
        }
    });
}

Var slice_cols(Var a, std::size_t c0, std::size_t c1) {
    const Tensor& av = a.val();
    if (av.rank() != 2 || c1 > av.cols() || c0 >= c1)
        throw std::runtime_error("slice_cols: bad range");
    Tape& t = *a.tape;
    const std::size_t M = av.rows(), N = av.cols(), W = c1 - c0;
    Tensor out({M, W});
    for (std::size_t i = 0; i < M; ++i)
        std::memcpy(out.data() + i * W, av.data() + i * N + c0, W * sizeof(double));
    int aid = a.id;
    return t.record(std::move(out), "slice_cols", [aid, c0, M, N, W](Tape& tp, Tape::Node& self) {
        Tensor& ga = tp.grad(aid);
        for (std::size_t i = 0; i < M; ++i)
            kernels::active().axpy(1.0, self.grad.data() + i * W, ga.data() + i * N + c0, W);
    });
}

Var stack_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::runtime_error("stack_rows: empty");
    Tape& t = *parts[0].tape;
    const std::size_t N = parts[0].val().cols();
    std::size_t M = 0;
    for (const auto& p : parts) {
        if (p.val().rank() != 2 || p.val().cols() != N)
            throw std::runtime_error("stack_rows: col mismatch");
        M += p.val().rows();
    }
    Tensor out({M, N});
    std::vector<int> ids;
    std::vector<std::size_t> counts;
    std::size_t off = 0;
    for (const auto& p : parts) {
        const Tensor& pv = p.val();
        std::memcpy(out.data() + off * N, pv.data(), pv.numel() * sizeof(double));
        ids.push_back(p.id);
        counts.push_back(pv.rows());
        off += pv.rows();
    }
    return t.record(std::move(out), "stack_rows", [ids, counts, N](Tape& tp, Tape::Node& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            Tensor& g = tp.grad(ids[k]);
            kernels::active().axpy(1.0, self.grad.data() + off * N, g.data(), counts[k] * N);
            off += counts[k];
        }
    });
}

Var reshape(Var a, std::vector<std::size_t> dims) {
    const Tensor& av = a.val();
    if (Tensor::numel_of(dims) != av.numel()) throw std::runtime_error("reshape: numel mismatch");
    Tape& t = *a.tape;
    Tensor out(dims);
    std::memcpy(out.data(), av.data(), av.numel() * sizeof(double));
    int aid = a.id;
    return t.record(std::move(out), "reshape", [aid](Tape& tp, Tape::Node& self) {
        kernels::active().axpy(1.0, self.grad.data(), tp.grad(aid).data(), self.grad.numel());
    });
}

Var gather_rows(Var a, std::vector<std::size_t> idx) {
    const Tensor& av = a.val();
    if (av.rank() != 2) throw std::runtime_error("gather_rows: rank != 2");
    Tape& t = *a.tape;
    const std::size_t N = av.cols();
    Tensor out({idx.size(), N});
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::memcpy(out.data() + i * N, av.data() + idx[i] * N, N * sizeof(double));
    int aid = a.id;
    return t.record(std::move(out), "gather_rows",
                    [aid, idx = std::move(idx), N](Tape& tp, Tape::Node& self) {
                        Tensor& ga = tp.grad(aid);
                        for (std::size_t i = 0; i < idx.size(); ++i)
                            kernels::active().axpy(1.0, self.grad.data() + i * N,
                                                   ga.data() + idx[i] * N, N);
                    });
}

Var vsum(const std::vector<Var>& terms) {
    if (terms.empty()) throw std::runtime_error("vsum: empty");
    Tape& t = *terms[0].tape;
    Tensor out = terms[0].val();
    std::vector<int> ids{terms[0].id};
    for (std::size_t k = 1; k < terms.size(); ++k) {
        check_same_shape(terms[0], terms[k], "vsum");
        kernels::active().axpy(1.0, terms[k].val().data(), out.data(), out.numel());
        ids.push_back(terms[k].id);
    }
    return t.record(std::move(out), "vsum", [ids](Tape& tp, Tape::Node& self) {
        for (int id : ids)
            kernels::active().axpy(1.0, self.grad.data(), tp.grad(id).data(), self.grad.numel());
    });
}

Var rows_dot3(Var a, Var b) {
    check_same_shape(a, b, "rows_dot3");
    const Tensor& av = a.val();
    if (av.cols() != 3) throw std::runtime_error("rows_dot3: cols != 3");
    Tape& t = *a.tape;
    const std::size_t M = av.rows();
    const Tensor& bv = b.val();
    Tensor out({M, 1});
    for (std::size_t i = 0; i < M; ++i)
        out[i] = av[i * 3] * bv[i * 3] + av[i * 3 + 1] * bv[i * 3 + 1] + av[i * 3 + 2] * bv[i * 3 + 2];
    int aid = a.id, bid = b.id;
    return t.record(std::move(out), "rows_dot3", [aid, bid, M](Tape& tp, Tape::Node& self) {
        const Tensor& av = tp.node(aid).val;
        const Tensor& bv = tp.node(bid).val;
        Tensor& ga = tp.grad(aid);
        Tensor& gb = tp.grad(bid);
        for (std::size_t i = 0; i < M; ++i) {
            double g = self.grad[i];
            for (int k = 0; k < 3; ++k) {
                ga[i * 3 + k] += g * bv[i * 3 + k];
                gb[i * 3 + k] += g * av[i * 3 + k];
            }
        }
    });
}

Var rows_cross3(Var a, Var b) {
    check_same_shape(a, b, "rows_cross3");
    const Tensor& av = a.val();
    if (av.cols() != 3) throw std::runtime_error("rows_cross3: cols != 3");
    Tape& t = *a.tape;
    const std::size_t M = av.rows();
    const Tensor& bv = b.val();
    Tensor out({M, 3});
    auto cross = [](const double* x, const double* y, double* o) {
        o[0] = x[1] * y[2] - x[2] * y[1];
        o[1] = x[2] * y[0] - x[0] * y[2];
        o[2] = x[0] * y[1] - x[1] * y[0];
    };
    for (std::size_t i = 0; i < M; ++i) cross(av.data() + i * 3, bv.data() + i * 3, out.data() + i * 3);
    int aid = a.id, bid = b.id;
    return t.record(std::move(out), "rows_cross3", [aid, bid, M, cross](Tape& tp, Tape::Node& self) {
        const Tensor& av = tp.node(aid).val;
        const Tensor& bv = tp.node(bid).val;
        Tensor& ga = tp.grad(aid);
        Tensor& gb = tp.grad(bid);
        double tmp[3];
        for (std::size_t i = 0; i < M; ++i) {
            // da += b x g, db += g x a
            cross(bv.data() + i * 3, self.grad.data() + i * 3, tmp);
            for (int k = 0; k < 3; ++k) ga[i * 3 + k] += tmp[k];
            cross(self.grad.data() + i * 3, av.data() + i * 3, tmp);
            for (int k = 0; k < 3; ++k) gb[i * 3 + k] += tmp[k];
        }
    });
}

Var rows_normalize3(Var a) {
    const Tensor& av = a.val();
    if (av.cols() != 3) throw std::runtime_error("rows_normalize3: cols != 3");
    Tape& t = *a.tape;
    const std::size_t M = av.rows();
    Tensor out({M, 3});
    for (std::size_t i = 0; i < M; ++i) {
        const double* v = av.data() + i * 3;
        double len = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        if (len < 1e-18) continue;  // degenerate rows stay zero
        for (int k = 0; k < 3; ++k) out[i * 3 + k] = v[k] / len;
    }
    int aid = a.id;
    return t.record(std::move(out), "rows_normalize3", [aid, M](Tape& tp, Tape::Node& self) {
        const Tensor& av = tp.node(aid).val;
        Tensor& ga = tp.grad(aid);
        for (std::size_t i = 0; i < M; ++i) {
            const double* v = av.data() + i * 3;
            const double* n = self.val.data() + i * 3;
            const double* g = self.grad.data() + i * 3;
            double len = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
            if (len < 1e-18) continue;
            double ndotg = n[0] * g[0] + n[1] * g[1] + n[2] * g[2];
            for (int k = 0; k < 3; ++k) ga[i * 3 + k] += (g[k] - n[k] * ndotg) / len;
        }
    });
}

Var rows_skew3(Var v) {
    const Tensor& vv = v.val();
    if (vv.cols() != 3) throw std::runtime_error("rows_skew3: cols != 3");
    Tape& t = *v.tape;
    const std::size_t M = vv.rows();
    Tensor out({M, 9});
    for (std::size_t i = 0; i < M; ++i) {
        double x = vv[i * 3], y = vv[i * 3 + 1], z = vv[i * 3 + 2];
        double* o = out.data() + i * 9;
        o[0] = 0;  o[1] = -z; o[2] = y;
        o[3] = z;  o[4] = 0;  o[5] = -x;
        o[6] = -y; o[7] = x;  o[8] = 0;
    }
    int vid = v.id;
    return t.record(std::move(out), "rows_skew3", [vid, M](Tape& tp, Tape::Node& self) {
        Tensor& gv = tp.grad(vid);
        for (std::size_t i = 0; i < M; ++i) {
            const double* g = self.grad.data() + i * 9;
            gv[i * 3] += g[7] - g[5];
            gv[i * 3 + 1] += g[2] - g[6];
            gv[i * 3 + 2] += g[3] - g[1];
        }
    });
}

namespace {
inline void mat3_mul(const double* a, const double* b, double* c) {
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            c[i * 3 + j] = a[i * 3] * b[j] + a[i * 3 + 1] * b[3 + j] + a[i * 3 + 2] * b[6 + j];
}
inline void mat3_mul_t2(const double* a, const double* bt, double* c) {  // a * bt^T
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            c[i * 3 + j] = a[i * 3] * bt[j * 3] + a[i * 3 + 1] * bt[j * 3 + 1] + a[i * 3 + 2] * bt[j * 3 + 2];
}
inline void mat3_t1_mul(const double* at, const double* b, double* c) {  // at^T * b
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            c[i * 3 + j] = at[i] * b[j] + at[3 + i] * b[3 + j] + at[6 + i] * b[6 + j];
}
}  // namespace

Var rows_mat3_mul(Var a, Var b) {
    check_same_shape(a, b, "rows_mat3_mul");
    const Tensor& av = a.val();
    if (av.cols() != 9) throw std::runtime_error("rows_mat3_mul: cols != 9");
    Tape& t = *a.tape;
    const std::size_t M = av.rows();
    const Tensor& bv = b.val();
    Tensor out({M, 9});
    for (std::size_t i = 0; i < M; ++i)
        mat3_mul(av.data() + i * 9, bv.data() + i * 9, out.data() + i * 9);
    int aid = a.id, bid = b.id;
    return t.record(std::move(out), "rows_mat3_mul", [aid, bid, M](Tape& tp, Tape::Node& self) {
        const Tensor& av = tp.node(aid).val;
        const Tensor& bv = tp.node(bid).val;
        Tensor& ga = tp.grad(aid);
        Tensor& gb = tp.grad(bid);
        double tmp[9];
        for (std::size_t i = 0; i < M; ++i) {
            const double* g = self.grad.data() + i * 9;
            mat3_mul_t2(g, bv.data() + i * 9, tmp);  // dA = G B^T
            for (int k = 0; k < 9; ++k) ga[i * 9 + k] += tmp[k];
            mat3_t1_mul(av.data() + i * 9, g, tmp);  // dB = A^T G
            for (int k = 0; k < 9; ++k) gb[i * 9 + k] += tmp[k];
        }
    });
}

Var rows_mat3_transpose(Var a) {
    const Tensor& av = a.val();
    if (av.cols() != 9) throw std::runtime_error("rows_mat3_transpose: cols != 9");
    Tape& t = *a.tape;
    const std::size_t M = av.rows();
    Tensor out({M, 9});
    static const int perm[9] = {0, 3, 6, 1, 4, 7, 2, 5, 8};
    for (std::size_t i = 0; i < M; ++i)
        for (int k = 0; k < 9; ++k) out[i * 9 + k] = av[i * 9 + perm[k]];
    int aid = a.id;
    return t.record(std::move(out), "rows_mat3_transpose", [aid, M](Tape& tp, Tape::Node& self) {
        Tensor& ga = tp.grad(aid);
        for (std::size_t i = 0; i < M; ++i)
            for (int k = 0; k < 9; ++k) ga[i * 9 + perm[k]] += self.grad[i * 9 + k];
    });
}

Var rows_mat3_vec3(Var a, Var v) {
    const Tensor& av = a.val();
    const Tensor& vv = v.val();
    if (av.cols() != 9 || vv.cols() != 3 || av.rows() != vv.rows())
        throw std::runtime_error("rows_mat3_vec3: bad shapes");
    Tape& t = *a.tape;
    const std::size_t M = av.rows();
    Tensor out({M, 3});
    for (std::size_t i = 0; i < M; ++i) {
        const double* m = av.data() + i * 9;
        const double* x = vv.data() + i * 3;
        double* o = out.data() + i * 3;
        for (int r = 0; r < 3; ++r) o[r] = m[r * 3] * x[0] + m[r * 3 + 1] * x[1] + m[r * 3 + 2] * x[2];
    }
    int aid = a.id, vid = v.id;
    return t.record(std::move(out), "rows_mat3_vec3", [aid, vid, M](Tape& tp, Tape::Node& self) {
        const Tensor& av = tp.node(aid).val;
        const Tensor& vv = tp.node(vid).val;
        Tensor& ga = tp.grad(aid);
        Tensor& gv = tp.grad(vid);
        for (std::size_t i = 0; i < M; ++i) {
            const double* m = av.data() + i * 9;
            const double* x = vv.data() + i * 3;
            const double* g = self.grad.data() + i * 3;
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) {
                    ga[i * 9 + r * 3 + c] += g[r] * x[c];
                    gv[i * 3 + c] += g[r] * m[r * 3 + c];
                }
        }
    });
}

Var mat3_from_cols(Var c0, Var c1, Var c2) {
    check_same_shape(c0, c1, "mat3_from_cols");
    check_same_shape(c0, c2, "mat3_from_cols");
    const Tensor& v0 = c0.val();
    if (v0.cols() != 3) throw std::runtime_error("mat3_from_cols: cols != 3");
    Tape& t = *c0.tape;
    const std::size_t M = v0.rows();
    const Tensor& v1 = c1.val();
    const Tensor& v2 = c2.val();
    Tensor out({M, 9});
    for (std::size_t i = 0; i < M; ++i)
        for (int r = 0; r < 3; ++r) {
            out[i * 9 + r * 3] = v0[i * 3 + r];
            out[i * 9 + r * 3 + 1] = v1[i * 3 + r];
            out[i * 9 + r * 3 + 2] = v2[i * 3 + r];
        }
    int i0 = c0.id, i1 = c1.id, i2 = c2.id;
    return t.record(std::move(out), "mat3_from_cols", [i0, i1, i2, M](Tape& tp, Tape::Node& self) {
        Tensor& g0 = tp.grad(i0);
        Tensor& g1 = tp.grad(i1);
        Tensor& g2 = tp.grad(i2);
        for (std::size_t i = 0; i < M; ++i)
            for (int r = 0; r < 3; ++r) {
                g0[i * 3 + r] += self.grad[i * 9 + r * 3];
                g1[i * 3 + r] += self.grad[i * 9 + r * 3 + 1];
                g2[i * 3 + r] += self.grad[i * 9 + r * 3 + 2];
            }
    });
}

Var pose_gate(Var theta, const Tensor& gate) {
    const Tensor& tv = theta.val();
    if (tv.cols() != 3 || gate.cols() != tv.rows())
        throw std::runtime_error("pose_gate: bad shapes");
    Tape& t = *theta.tape;
    const std::size_t K = tv.rows(), V = gate.rows();
    Tensor out({V, 3 * K});
    for (std::size_t v = 0; v < V; ++v)
        for (std::size_t j = 0; j < K; ++j) {
            double w = gate.at(v, j);
            if (w == 0.0) continue;
            for (int k = 0; k < 3; ++k) out[v * 3 * K + 3 * j + k] = w * tv[j * 3 + k];
        }
    int tid = theta.id;
    Tensor g = gate;
    return t.record(std::move(out), "pose_gate", [tid, g, K, V](Tape& tp, Tape::Node& self) {
        Tensor& gt = tp.grad(tid);
        for (std::size_t v = 0; v < V; ++v)
            for (std::size_t j = 0; j < K; ++j) {
                double w = g.at(v, j);
                if (w == 0.0) continue;
                for (int k = 0; k < 3; ++k) gt[j * 3 + k] += w * self.grad[v * 3 * K + 3 * j + k];
            }
    });
}

Var affine_rows(Var transforms, Var points) {
    const Tensor& tv = transforms.val();
    const Tensor& pv = points.val();
    if (tv.cols() != 12 || pv.cols() != 3 || tv.rows() != pv.rows())
        throw std::runtime_error("affine_rows: bad shapes");
    Tape& t = *transforms.tape;
    const std::size_t M = tv.rows();
    Tensor out({M, 3});
    for (std::size_t i = 0; i < M; ++i) {
        const double* T = tv.data() + i * 12;
        const double* x = pv.data() + i * 3;
        double* o = out.data() + i * 3;
        for (int r = 0; r < 3; ++r)
            o[r] = T[4 * r] * x[0] + T[4 * r + 1] * x[1] + T[4 * r + 2] * x[2] + T[4 * r + 3];
    }
    int tid = transforms.id, pid = points.id;
    return t.record(std::move(out), "affine_rows", [tid, pid, M](Tape& tp, Tape::Node& self) {
        const Tensor& tv = tp.node(tid).val;
        const Tensor& pv = tp.node(pid).val;
        Tensor& gt = tp.grad(tid);
        Tensor& gp = tp.grad(pid);
        for (std::size_t i = 0; i < M; ++i) {
            const double* T = tv.data() + i * 12;
            const double* x = pv.data() + i * 3;
            const double* g = self.grad.data() + i * 3;
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) {
                    gt[i * 12 + 4 * r + c] += g[r] * x[c];
                    gp[i * 3 + c] += g[r] * T[4 * r + c];
                }
                gt[i * 12 + 4 * r + 3] += g[r];
            }
        }
    });
}

Var quadform23(Var j, Var s) {
    const Tensor& jv = j.val();
    const Tensor& sv = s.val();
    if (jv.cols() != 6 || sv.cols() != 9 || jv.rows() != sv.rows())
        throw std::runtime_error("quadform23: bad shapes");
    Tape& t = *j.tape;
    const std::size_t M = jv.rows();
    Tensor out({M, 3});
    for (std::size_t i = 0; i < M; ++i) {
        const double* J = jv.data() + i * 6;   // rows u = J[0..3), w = J[3..6)
        const double* S = sv.data() + i * 9;
        double Su[3], Sw[3];
        for (int r = 0; r < 3; ++r) {
            Su[r] = S[r * 3] * J[0] + S[r * 3 + 1] * J[1] + S[r * 3 + 2] * J[2];
            Sw[r] = S[r * 3] * J[3] + S[r * 3 + 1] * J[4] + S[r * 3 + 2] * J[5];
        }
        out[i * 3] = J[0] * Su[0] + J[1] * Su[1] + J[2] * Su[2];
        out[i * 3 + 1] = J[0] * Sw[0] + J[1] * Sw[1] + J[2] * Sw[2];
        out[i * 3 + 2] = J[3] * Sw[0] + J[4] * Sw[1] + J[5] * Sw[2];
    }
    int jid = j.id, sid = s.id;
    return t.record(std::move(out), "quadform23", [jid, sid, M](Tape& tp, Tape::Node& self) {
        const Tensor& jv = tp.node(jid).val;
        const Tensor& sv = tp.node(sid).val;
        Tensor& gj = tp.grad(jid);
        Tensor& gs = tp.grad(sid);
        for (std::size_t i = 0; i < M; ++i) {
            const double* J = jv.data() + i * 6;
            const double* S = sv.data() + i * 9;
            const double* g = self.grad.data() + i * 3;  // (gxx, gxy, gyy)
            const double* u = J;
            const double* w = J + 3;
            double Su[3], Sw[3], Stu[3], Stw[3];
            for (int r = 0; r < 3; ++r) {
                Su[r] = S[r * 3] * u[0] + S[r * 3 + 1] * u[1] + S[r * 3 + 2] * u[2];
                Sw[r] = S[r * 3] * w[0] + S[r * 3 + 1] * w[1] + S[r * 3 + 2] * w[2];
                Stu[r] = S[r] * u[0] + S[3 + r] * u[1] + S[6 + r] * u[2];
                Stw[r] = S[r] * w[0] + S[3 + r] * w[1] + S[6 + r] * w[2];
            }
            // a = u^T S u, b = u^T S w, c = w^T S w
            // da/du = (S + S^T) u; db/du = S w; db/dw = S^T u; dc/dw = (S + S^T) w
            for (int c = 0; c < 3; ++c) {
                gj[i * 6 + c] += g[0] * (Su[c] + Stu[c]) + g[1] * Sw[c];
                gj[i * 6 + 3 + c] += g[2] * (Sw[c] + Stw[c]) + g[1] * Stu[c];
            }
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    gs[i * 9 + r * 3 + c] +=
                        g[0] * u[r] * u[c] + g[1] * u[r] * w[c] + g[2] * w[r] * w[c];
        }
    });
}

Var channel(Var img, std::size_t c) {
    const Tensor& iv = img.val();
    if (iv.rank() != 3 || c >= iv.dims()[2]) throw std::runtime_error("channel: bad args");
    Tape& t = *img.tape;
    const std::size_t H = iv.dims()[0], W = iv.dims()[1], C = iv.dims()[2];
    Tensor out({H, W});
    for (std::size_t i = 0; i < H * W; ++i) out[i] = iv[i * C + c];
    int iid = img.id;
    return t.record(std::move(out), "channel", [iid, c, H, W, C](Tape& tp, Tape::Node& self) {
        Tensor& gi = tp.grad(iid);
        for (std::size_t i = 0; i < H * W; ++i) gi[i * C + c] += self.grad[i];
    });
}

Var slice_patch(Var img, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
    const Tensor& iv = img.val();
    if (iv.rank() != 3 || y0 + h > iv.dims()[0] || x0 + w > iv.dims()[1])
        throw std::runtime_error("slice_patch: out of bounds");
    Tape& t = *img.tape;
    const std::size_t W = iv.dims()[1], C = iv.dims()[2];
    Tensor out({h, w, C});
    for (std::size_t y = 0; y < h; ++y)
        std::memcpy(out.data() + y * w * C, iv.data() + ((y0 + y) * W + x0) * C,
                    w * C * sizeof(double));
    int iid = img.id;
    return t.record(std::move(out), "slice_patch",
                    [iid, y0, x0, h, w, W, C](Tape& tp, Tape::Node& self) {
                        Tensor& gi = tp.grad(iid);
                        for (std::size_t y = 0; y < h; ++y)
                            kernels::active().axpy(1.0, self.grad.data() + y * w * C,
                                                   gi.data() + ((y0 + y) * W + x0) * C, w * C);
                    });
}

Var conv_separable_valid(Var img, const std::vector<double>& kernel) {
    const Tensor& iv = img.val();
    if (iv.rank() != 2) throw std::runtime_error("conv_separable_valid: rank != 2");
    const std::size_t K = kernel.size();
    const std::size_t H = iv.dims()[0], W = iv.dims()[1];
    if (H < K || W < K) throw std::runtime_error("conv_separable_valid: image smaller than kernel");
    Tape& t = *img.tape;
    const std::size_t OH = H - K + 1, OW = W - K + 1;

    // horizontal then vertical
    Tensor tmp({H, OW});
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < OW; ++x) {
            double s = 0;
            for (std::size_t k = 0; k < K; ++k) s += kernel[k] * iv[y * W + x + k];
            tmp[y * OW + x] = s;
        }
    Tensor out({OH, OW});
    for (std::size_t y = 0; y < OH; ++y)
        for (std::size_t x = 0; x < OW; ++x) {
            double s = 0;
            for (std::size_t k = 0; k < K; ++k) s += kernel[k] * tmp[(y + k) * OW + x];
            out[y * OW + x] = s;
        }
    int iid = img.id;
    return t.record(std::move(out), "conv_separable_valid",
                    [iid, kernel, H, W, OH, OW, K](Tape& tp, Tape::Node& self) {
                        Tensor& gi = tp.grad(iid);
                        Tensor gtmp({H, OW});
                        for (std::size_t y = 0; y < OH; ++y)
                            for (std::size_t x = 0; x < OW; ++x) {
                                double g = self.grad[y * OW + x];
                                if (g == 0.0) continue;
                                for (std::size_t k = 0; k < K; ++k)
                                    gtmp[(y + k) * OW + x] += kernel[k] * g;
                            }
                        for (std::size_t y = 0; y < H; ++y)
                            for (std::size_t x = 0; x < OW; ++x) {
                                double g = gtmp[y * OW + x];
                                if (g == 0.0) continue;
                                for (std::size_t k = 0; k < K; ++k)
                                    gi[y * W + x + k] += kernel[k] * g;
                            }
                    });
}

}  // namespace splatcap::op
