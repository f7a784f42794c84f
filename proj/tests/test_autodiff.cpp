#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "splatcap/mlp.hpp"
#include "splatcap/ops.hpp"
#include "splatcap/param_store.hpp"
#include "splatcap/rng.hpp"
#include "splatcap/tape.hpp"
#include "testutil.hpp"

using namespace splatcap;
namespace o = splatcap::op;

TEST_CASE("product rule on scalars") {
    ParamStore store;
    store.add("x", Tensor::scalar(3.0), 0.1);
    store.add("y", Tensor::scalar(4.0), 0.1);
    Tape tape;
    Var x = tape.param(store, "x");
    Var y = tape.param(store, "y");
    Var root = o::mul(x, y);
    tape.backward(root);
    CHECK(store.group("x").grad[0] == doctest::Approx(4.0));
    CHECK(store.group("y").grad[0] == doctest::Approx(3.0));
}

TEST_CASE("dead relu kills the gradient") {
    ParamStore store;
    store.add("w", Tensor::scalar(1.5), 0.1);
    Tape tape;
    Var w = tape.param(store, "w");
    Var root = o::mul(o::relu(tape.scalar(-2.0)), w);
    tape.backward(root);
    CHECK(store.group("w").grad[0] == 0.0);
}

TEST_CASE("backward twice accumulates additively") {
    ParamStore store;
    store.add("x", Tensor::scalar(2.0), 0.1);
    Tape tape;
    Var x = tape.param(store, "x");
    Var root = o::mul(x, x);
    tape.backward(root);
    double once = store.group("x").grad[0];
    tape.backward(root);
    CHECK(store.group("x").grad[0] == doctest::Approx(2.0 * once));
}

TEST_CASE("non-scalar root and NaN root are rejected") {
    ParamStore store;
    store.add("x", Tensor({2, 2}), 0.1);
    Tape tape;
    Var x = tape.param(store, "x");
    CHECK_THROWS(tape.backward(x));
    Var bad = tape.leaf(Tensor::scalar(std::nan("")));
    CHECK_THROWS(tape.backward(bad));
}

TEST_CASE("finite check names the producing op") {
    Tape tape;
    tape.check_finite = true;
    Var x = tape.leaf(Tensor::scalar(-1.0));
    CHECK_THROWS_WITH_AS(o::log(x), doctest::Contains("log"), std::runtime_error);
}

TEST_CASE("random 3-layer mlp gradient matches finite differences") {
    ParamStore store;
    Rng rng(123);
    Mlp mlp("net", Mlp::Spec{5, {8, 8, 8}, {{"out", 0, 3}}});
    mlp.register_params(store, rng, 1e-3, false);

    Tensor input({4, 5});
    for (auto& v : input.v) v = rng.uniform(-1.0, 1.0);

    std::vector<std::string> groups;
    for (auto& g : store.groups()) groups.push_back(g.name);

    auto f = [&](Tape& t, ParamStore& s) -> Var {
        Var x = t.constant(input);
        auto heads = mlp.forward(t, s, x);
        return o::mean(o::square(heads.at("out")));
    };
    auto res = testutil::gradcheck(f, store, groups, 1e-5);
    CAPTURE(res.worst);
    CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("mlp parameter count identity") {
    Mlp mlp("m", Mlp::Spec{7, {16, 16}, {{"a", 8, 3}, {"b", 0, 2}}});
    ParamStore store;
    Rng rng(5);
    mlp.register_params(store, rng, 1e-3, false);
    CHECK(store.total_params() == mlp.param_count());
    CHECK(mlp.param_count() == (7 + 1) * 16 + (16 + 1) * 16     // trunk
                                   + (16 + 1) * 8 + (8 + 1) * 3  // head a
                                   + (16 + 1) * 2);              // head b
}

TEST_CASE("zero-initialized heads output exactly zero") {
    Mlp mlp("m", Mlp::Spec{4, {8}, {{"y", 8, 2}}});
    ParamStore store;
    Rng rng(6);
    mlp.register_params(store, rng, 1e-3, true);
    Tape tape;
    Tensor x({3, 4});
    Rng rx(9);
    for (auto& v : x.v) v = rx.normal();
    auto heads = mlp.forward(tape, store, tape.constant(x));
    for (double v : heads.at("y").val().v) CHECK(v == 0.0);
}

TEST_CASE("elementwise op gradients match finite differences") {
    Rng rng(77);
    auto check_unary = [&](const char* name, std::function<Var(Var)> fn, double lo, double hi,
                           double h = 1e-6) {
        ParamStore store;
        Tensor x({3, 3});
        for (auto& v : x.v) v = rng.uniform(lo, hi);
        store.add("x", x, 0.1);
        auto f = [&](Tape& t, ParamStore& s) -> Var { return o::sum(fn(t.param(s, "x"))); };
        auto res = testutil::gradcheck(f, store, {"x"}, h);
        CAPTURE(name);
        CAPTURE(res.worst);
        CHECK(res.max_rel_err < 1e-5);
    };
    check_unary("softplus", [](Var v) { return o::softplus(v); }, -2, 2);
    check_unary("sin", [](Var v) { return o::sin(v); }, -2, 2);
    check_unary("cos", [](Var v) { return o::cos(v); }, -2, 2);
    check_unary("exp", [](Var v) { return o::exp(v); }, -2, 2);
    check_unary("log", [](Var v) { return o::log(v); }, 0.5, 3);
    check_unary("sqrt", [](Var v) { return o::sqrt(v); }, 0.5, 3);
    check_unary("sigmoid", [](Var v) { return o::sigmoid(v); }, -3, 3);
    check_unary("square", [](Var v) { return o::square(v); }, -2, 2);
    check_unary("abs", [](Var v) { return o::abs(v); }, 0.2, 2);
    check_unary("rot_coef_a", [](Var v) { return o::rot_coef_a(v); }, 0.1, 4);
    check_unary("rot_coef_b", [](Var v) { return o::rot_coef_b(v); }, 0.1, 4);
    check_unary("rot_log_coef", [](Var v) { return o::rot_log_coef(v); }, -0.7, 0.9);
    // series branches near zero; larger h avoids catastrophic cancellation in
    // the finite differences (the functions are low-order polynomials there)
    check_unary("rot_coef_a0", [](Var v) { return o::rot_coef_a(v); }, 0.0, 1e-9, 1e-3);
    check_unary("rot_coef_b0", [](Var v) { return o::rot_coef_b(v); }, 0.0, 1e-9, 1e-3);
}

TEST_CASE("vector geometry op gradients") {
    Rng rng(31);
    ParamStore store;
    Tensor a({5, 3}), b({5, 3});
    for (auto& v : a.v) v = rng.uniform(-2, 2);
    for (auto& v : b.v) v = rng.uniform(-2, 2);
    store.add("a", a, 0.1);
    store.add("b", b, 0.1);

    auto f_cross = [&](Tape& t, ParamStore& s) -> Var {
        Var c = o::rows_cross3(t.param(s, "a"), t.param(s, "b"));
        return o::sum(o::mul(c, c));
    };
    auto r1 = testutil::gradcheck(f_cross, store, {"a", "b"}, 1e-6);
    CAPTURE(r1.worst);
    CHECK(r1.max_rel_err < 1e-5);

    auto f_norm = [&](Tape& t, ParamStore& s) -> Var {
        Var n = o::rows_normalize3(t.param(s, "a"));
        Var w = o::rows_dot3(n, t.param(s, "b"));
        return o::sum(w);
    };
    auto r2 = testutil::gradcheck(f_norm, store, {"a", "b"}, 1e-6);
    CAPTURE(r2.worst);
    CHECK(r2.max_rel_err < 1e-5);

    auto f_mat = [&](Tape& t, ParamStore& s) -> Var {
        Var sk = o::rows_skew3(t.param(s, "a"));
        Var m = o::rows_mat3_mul(sk, o::rows_mat3_transpose(sk));
        Var v = o::rows_mat3_vec3(m, t.param(s, "b"));
        return o::mean(o::square(v));
    };
    auto r3 = testutil::gradcheck(f_mat, store, {"a", "b"}, 1e-6);
    CAPTURE(r3.worst);
    CHECK(r3.max_rel_err < 1e-5);
}

TEST_CASE("matmul and structural op gradients") {
    Rng rng(53);
    ParamStore store;
    Tensor a({4, 6}), b({6, 3}), r({1, 3}), c({4, 1});
    for (auto& v : a.v) v = rng.uniform(-1, 1);
    for (auto& v : b.v) v = rng.uniform(-1, 1);
    for (auto& v : r.v) v = rng.uniform(-1, 1);
    for (auto& v : c.v) v = rng.uniform(0.5, 1.5);
    store.add("a", a, 0.1);
    store.add("b", b, 0.1);
    store.add("r", r, 0.1);
    store.add("c", c, 0.1);

    auto f = [&](Tape& t, ParamStore& s) -> Var {
        Var m = o::matmul(t.param(s, "a"), t.param(s, "b"));
        m = o::add_rowvec(m, t.param(s, "r"));
        m = o::mul_colvec(m, t.param(s, "c"));
        Var sliced = o::slice_cols(m, 1, 3);
        Var cat = o::concat_cols({sliced, m});
        Var g = o::gather_rows(cat, {0, 2, 2, 3});
        return o::mean(o::square(g));
    };
    auto res = testutil::gradcheck(f, store, {"a", "b", "r", "c"}, 1e-6);
    CAPTURE(res.worst);
    CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("quadform23 and affine_rows gradients") {
    Rng rng(71);
    ParamStore store;
    Tensor j({4, 6}), sym({4, 9}), tr({4, 12}), pts({4, 3});
    for (auto& v : j.v) v = rng.uniform(-1, 1);
    for (auto& v : tr.v) v = rng.uniform(-1, 1);
    for (auto& v : pts.v) v = rng.uniform(-1, 1);
    // symmetric per-row 3x3
    for (int i = 0; i < 4; ++i) {
        double m[9];
        for (auto& x : m) x = rng.uniform(-1, 1);
        for (int r = 0; r < 3; ++r)
            for (int cc = 0; cc < 3; ++cc) sym[i * 9 + r * 3 + cc] = m[r * 3 + cc] + m[cc * 3 + r];
    }
    store.add("j", j, 0.1);
    store.add("s", sym, 0.1);
    store.add("t", tr, 0.1);
    store.add("p", pts, 0.1);

    auto f = [&](Tape& t, ParamStore& s) -> Var {
        Var q = o::quadform23(t.param(s, "j"), t.param(s, "s"));
        Var x = o::affine_rows(t.param(s, "t"), t.param(s, "p"));
        return o::add(o::mean(o::square(q)), o::mean(o::square(x)));
    };
    auto res = testutil::gradcheck(f, store, {"j", "s", "t", "p"}, 1e-6);
    CAPTURE(res.worst);
    CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("pose_gate gradient") {
    Rng rng(83);
    ParamStore store;
    Tensor th({4, 3});
    for (auto& v : th.v) v = rng.uniform(-1, 1);
    store.add("th", th, 0.1);
    Tensor gate({6, 4});
    for (auto& v : gate.v) v = rng.uniform() < 0.4 ? 0.0 : rng.uniform(0.1, 1.0);

    auto f = [&](Tape& t, ParamStore& s) -> Var {
        Var code = o::pose_gate(t.param(s, "th"), gate);
        return o::mean(o::square(code));
    };
    auto res = testutil::gradcheck(f, store, {"th"}, 1e-6);
    CAPTURE(res.worst);
    CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("adam first step magnitude and zero-grad fixed point") {
    ParamStore store;
    store.add("w", Tensor::scalar(1.0), 0.1);
    store.group("w").grad[0] = 1.0;
    store.group("w").grad_set = true;
    store.adam_step();
    CHECK(store.group("w").value[0] == doctest::Approx(0.9).epsilon(1e-6));

    // fresh parameter with an all-zero gradient stays put
    ParamStore store2;
    store2.add("w", Tensor::scalar(0.7), 0.1);
    store2.group("w").grad_set = true;
    store2.adam_step();
    CHECK(store2.group("w").value[0] == 0.7);
}

TEST_CASE("adam drives x^2 toward zero, matches independent update rule") {
    // engine version
    ParamStore store;
    store.add("x", Tensor::scalar(1.0), 0.1);
    for (int i = 0; i < 100; ++i) {
        store.zero_grad();
        Tape tape;
        Var x = tape.param(store, "x");
        tape.backward(o::mul(x, x));
        store.adam_step();
    }
    // independent oracle: plain Adam on f(x)=x^2
    double x = 1.0, m = 0, v = 0;
    for (int t = 1; t <= 100; ++t) {
        double g = 2.0 * x;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        double mhat = m / (1.0 - std::pow(0.9, t));
        double vhat = v / (1.0 - std::pow(0.999, t));
        x -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
    }
    CHECK(std::fabs(x) < 0.05);
    CHECK(store.group("x").value[0] == doctest::Approx(x).epsilon(1e-12));
}

TEST_CASE("adam is deterministic given seed and step count") {
    auto run = [] {
        ParamStore store;
        Rng rng(99);
        Mlp mlp("n", Mlp::Spec{3, {8}, {{"o", 0, 1}}});
        mlp.register_params(store, rng, 1e-2, false);
        Tensor in({2, 3});
        Rng ri(5);
        for (auto& v : in.v) v = ri.normal();
        for (int i = 0; i < 10; ++i) {
            store.zero_grad();
            Tape tape;
            auto y = mlp.forward(tape, store, tape.constant(in));
            tape.backward(o::mean(o::square(y.at("o"))));
            store.adam_step();
        }
        return store;
    };
    ParamStore a = run();
    ParamStore b = run();
    for (std::size_t g = 0; g < a.groups().size(); ++g)
        for (std::size_t i = 0; i < a.groups()[g].value.numel(); ++i)
            CHECK(a.groups()[g].value[i] == b.groups()[g].value[i]);
}

TEST_CASE("checkpoint round-trip is exact") {
    ParamStore store;
    Rng rng(3);
    Mlp mlp("n", Mlp::Spec{3, {4}, {{"o", 0, 2}}});
    mlp.register_params(store, rng, 1e-2, false);
    // dirty the moments
    for (int i = 0; i < 3; ++i) {
        store.zero_grad();
        Tape tape;
        Tensor in({1, 3});
        in[0] = 0.3;
        in[1] = -0.2;
        in[2] = 0.9;
        auto y = mlp.forward(tape, store, tape.constant(in));
        tape.backward(o::sum(o::square(y.at("o"))));
        store.adam_step();
    }
    store.save("/tmp/splatcap_test_ckpt.bin");
    ParamStore loaded;
    loaded.load("/tmp/splatcap_test_ckpt.bin");
    CHECK(loaded.step_count() == store.step_count());
    REQUIRE(loaded.groups().size() == store.groups().size());
    for (auto& g : store.groups()) {
        auto& h = loaded.group(g.name);
        for (std::size_t i = 0; i < g.value.numel(); ++i) {
            CHECK(h.value[i] == g.value[i]);
            CHECK(h.m[i] == g.m[i]);
            CHECK(h.v[i] == g.v[i]);
        }
    }
}
