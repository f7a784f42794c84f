#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "splatcap/renderer.hpp"
#include "testutil.hpp"

using namespace splatcap;
namespace o = splatcap::op;

namespace {

// independent all-splats-per-pixel reference with the contract semantics:
// stable depth order, q > 9 cut, alpha clamp 0.99, skip < 1/255, stop at
// transmittance < 1e-4
Tensor naive_rasterize(const Tensor& means, const Tensor& conic, const Tensor& opacity,
                       const Tensor& color, const std::vector<double>& depths, int W, int H,
                       const std::array<double, 3>& bg) {
    const std::size_t M = means.rows();
    std::vector<std::size_t> order(M);
    for (std::size_t i = 0; i < M; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return depths[a] < depths[b]; });
    Tensor img({static_cast<std::size_t>(H), static_cast<std::size_t>(W), 4});
    for (int py = 0; py < H; ++py)
        for (int px = 0; px < W; ++px) {
            double T = 1.0, rgb[3] = {0, 0, 0};
            for (std::size_t i = 0; i < M; ++i) {
                std::size_t k = order[i];
                double dx = px - means[k * 2], dy = py - means[k * 2 + 1];
                double q = conic[k * 3] * dx * dx + 2 * conic[k * 3 + 1] * dx * dy +
                           conic[k * 3 + 2] * dy * dy;
                if (q > 9.0 || q < 0.0) continue;
                double alpha = opacity[k] * std::exp(-0.5 * q);
                if (alpha > 0.99) alpha = 0.99;
                if (alpha < 1.0 / 255.0) continue;
                for (int c = 0; c < 3; ++c) rgb[c] += color[k * 3 + static_cast<std::size_t>(c)] * alpha * T;
                T *= 1.0 - alpha;
                if (T < 1e-4) break;
            }
            for (int c = 0; c < 3; ++c)
                img.at3(static_cast<std::size_t>(py), static_cast<std::size_t>(px), static_cast<std::size_t>(c)) =
                    rgb[c] + bg[static_cast<std::size_t>(c)] * T;
            img.at3(static_cast<std::size_t>(py), static_cast<std::size_t>(px), 3) = 1.0 - T;
        }
    return img;
}

struct RandomScene {
    Tensor means, conic, opacity, color;
    std::vector<double> depths;
};

RandomScene random_scene(std::size_t M, int W, int H, Rng& rng) {
    RandomScene s;
    s.means = Tensor({M, 2});
    s.conic = Tensor({M, 3});
    s.opacity = Tensor({M, 1});
    s.color = Tensor({M, 3});
    for (std::size_t k = 0; k < M; ++k) {
        s.means[k * 2] = rng.uniform(-4, W + 4);
        s.means[k * 2 + 1] = rng.uniform(-4, H + 4);
        // random SPD conic with moderate anisotropy
        double l1 = rng.uniform(0.02, 0.8), l2 = rng.uniform(0.02, 0.8);
        double ang = rng.uniform(0, 3.14159);
        double ca = std::cos(ang), sa = std::sin(ang);
        s.conic[k * 3] = ca * ca * l1 + sa * sa * l2;
        s.conic[k * 3 + 1] = ca * sa * (l1 - l2);
        s.conic[k * 3 + 2] = sa * sa * l1 + ca * ca * l2;
        s.opacity[k] = rng.uniform(0.2, 0.95);
        for (int c = 0; c < 3; ++c) s.color[k * 3 + static_cast<std::size_t>(c)] = rng.uniform(0, 1);
        s.depths.push_back(rng.uniform(0.5, 5.0));
    }
    return s;
}

ProjectedSplats to_projected(Tape& tape, const RandomScene& s, int W, int H) {
    ProjectedSplats p;
    p.means = tape.constant(s.means);
    p.conic = tape.constant(s.conic);
    p.opacity = tape.constant(s.opacity);
    p.color = tape.constant(s.color);
    p.depths = s.depths;
    p.width = W;
    p.height = H;
    return p;
}

}  // namespace

TEST_CASE("projection: optical axis, isotropic covariance") {
    CameraModel cam;
    cam.fx = cam.fy = 100.0;
    cam.cx = 32.0;
    cam.cy = 32.0;
    cam.width = 64;
    cam.height = 64;
    // camera at origin looking down +z (identity extrinsics)
    const double d = 2.0, sigma = 0.05;
    Tensor centers({1, 3}), cov({1, 9}), color({1, 3}), op({1, 1});
    centers.at(0, 2) = d;
    for (int i = 0; i < 3; ++i) cov[static_cast<std::size_t>(i * 3 + i)] = sigma * sigma;
    op[0] = 0.8;
    Tape tape;
    auto proj = project_gaussians(tape, cam, tape.constant(centers), tape.constant(cov),
                                  tape.constant(color), tape.constant(op));
    REQUIRE(proj.means.val().rows() == 1);
    CHECK(proj.means.val()[0] == doctest::Approx(32.0));
    CHECK(proj.means.val()[1] == doctest::Approx(32.0));
    double expect = (cam.fx * sigma / d) * (cam.fx * sigma / d);
    CHECK(proj.cov2d[0] == doctest::Approx(expect + 0.3).epsilon(1e-9));
    CHECK(proj.cov2d[2] == doctest::Approx(expect + 0.3).epsilon(1e-9));
    CHECK(std::fabs(proj.cov2d[1]) < 1e-12);
}

TEST_CASE("projection: center behind the camera is culled") {
    CameraModel cam;
    cam.fx = cam.fy = 100.0;
    cam.cx = cam.cy = 32.0;
    cam.width = cam.height = 64;
    Tensor centers({2, 3}), cov({2, 9}), color({2, 3}), op({2, 1});
    centers.at(0, 2) = -1.0;  // behind
    centers.at(1, 2) = 2.0;
    for (std::size_t k = 0; k < 2; ++k)
        for (int i = 0; i < 3; ++i) cov[k * 9 + static_cast<std::size_t>(i * 3 + i)] = 1e-4;
    Tape tape;
    auto proj = project_gaussians(tape, cam, tape.constant(centers), tape.constant(cov),
                                  tape.constant(color), tape.constant(op));
    REQUIRE(proj.source_index.size() == 1);
    CHECK(proj.source_index[0] == 1);
}

TEST_CASE("projected covariance matches a finite-difference Jacobian oracle") {
    CameraModel cam = CameraModel::look_at({1.2, 0.4, -2.0}, {0, 0, 0}, 90, 95, 64, 48);
    Rng rng(19);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor centers({1, 3}), cov({1, 9}), color({1, 3}), op({1, 1});
        for (int i = 0; i < 3; ++i) centers[static_cast<std::size_t>(i)] = rng.uniform(-0.3, 0.3);
        // random SPD 3x3 = L L^T + small ridge
        Eigen::Matrix3d L;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) L(i, j) = rng.uniform(-0.05, 0.05);
        Eigen::Matrix3d S = L * L.transpose() + 1e-6 * Eigen::Matrix3d::Identity();
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) cov[static_cast<std::size_t>(i * 3 + j)] = S(i, j);
        op[0] = 0.5;

        Tape tape;
        auto proj = project_gaussians(tape, cam, tape.constant(centers), tape.constant(cov),
                                      tape.constant(color), tape.constant(op));
        REQUIRE(proj.source_index.size() == 1);

        // numerical Jacobian of world -> pixel projection at the center
        Eigen::Vector3d c(centers[0], centers[1], centers[2]);
        Eigen::Matrix<double, 2, 3> J;
        const double h = 1e-6;
        for (int j = 0; j < 3; ++j) {
            Eigen::Vector3d cp = c, cm = c;
            cp(j) += h;
            cm(j) -= h;
            Eigen::Vector3d pp = cam.project(cp), pm = cam.project(cm);
            J(0, j) = (pp.x() - pm.x()) / (2 * h);
            J(1, j) = (pp.y() - pm.y()) / (2 * h);
        }
        Eigen::Matrix2d expect = J * S * J.transpose();
        CHECK(proj.cov2d[0] == doctest::Approx(expect(0, 0) + 0.3).epsilon(1e-6));
        CHECK(proj.cov2d[1] == doctest::Approx(expect(0, 1)).epsilon(1e-5));
        CHECK(proj.cov2d[2] == doctest::Approx(expect(1, 1) + 0.3).epsilon(1e-6));
    }
}

TEST_CASE("rasterize: empty scene gives background and zero alpha") {
    Tape tape;
    ProjectedSplats p;
    p.means = tape.constant(Tensor({0, 2}));
    p.conic = tape.constant(Tensor({0, 3}));
    p.opacity = tape.constant(Tensor({0, 1}));
    p.color = tape.constant(Tensor({0, 3}));
    p.width = 8;
    p.height = 8;
    Var img = rasterize(tape, p, {0.2, 0.4, 0.6});
    for (std::size_t i = 0; i < 64; ++i) {
        CHECK(img.val()[i * 4] == 0.2);
        CHECK(img.val()[i * 4 + 1] == 0.4);
        CHECK(img.val()[i * 4 + 2] == 0.6);
        CHECK(img.val()[i * 4 + 3] == 0.0);
    }
}

TEST_CASE("rasterize: opacity clamp at the splat center") {
    Tape tape;
    RandomScene s;
    s.means = Tensor({1, 2});
    s.means[0] = 4.0;
    s.means[1] = 4.0;
    s.conic = Tensor({1, 3});
    s.conic[0] = s.conic[2] = 1.0;
    s.opacity = Tensor({1, 1});
    s.opacity[0] = 5.0;  // forces the clamp at the center pixel
    s.color = Tensor({1, 3});
    s.color[0] = 1.0;
    s.color[1] = 0.5;
    s.depths = {1.0};
    Var img = rasterize(tape, to_projected(tape, s, 9, 9), {0.0, 0.0, 1.0});
    CHECK(img.val().at3(4, 4, 0) == doctest::Approx(0.99 * 1.0).epsilon(1e-12));
    CHECK(img.val().at3(4, 4, 1) == doctest::Approx(0.99 * 0.5).epsilon(1e-12));
    CHECK(img.val().at3(4, 4, 2) == doctest::Approx(0.01 * 1.0).epsilon(1e-12));
    CHECK(img.val().at3(4, 4, 3) == doctest::Approx(0.99).epsilon(1e-12));
}

TEST_CASE("tile renderer equals the naive oracle on random scenes") {
    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        int W = 16 + static_cast<int>(rng.next_below(49));
        int H = 16 + static_cast<int>(rng.next_below(49));
        std::size_t M = 1 + rng.next_below(200);
        RandomScene s = random_scene(M, W, H, rng);
        std::array<double, 3> bg = {rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)};
        Tape tape;
        Var img = rasterize(tape, to_projected(tape, s, W, H), bg);
        Tensor ref = naive_rasterize(s.means, s.conic, s.opacity, s.color, s.depths, W, H, bg);
        double max_diff = 0;
        for (std::size_t i = 0; i < ref.numel(); ++i)
            max_diff = std::max(max_diff, std::fabs(ref[i] - img.val()[i]));
        CAPTURE(trial);
        CHECK(max_diff <= 1e-10);
    }
}

TEST_CASE("order independence for non-overlapping splats") {
    Rng rng(29);
    const int W = 48, H = 48;
    // small, well-separated splats on a grid
    RandomScene s;
    const std::size_t M = 9;
    s.means = Tensor({M, 2});
    s.conic = Tensor({M, 3});
    s.opacity = Tensor({M, 1});
    s.color = Tensor({M, 3});
    for (std::size_t k = 0; k < M; ++k) {
        s.means[k * 2] = 8.0 + 16.0 * (k % 3);
        s.means[k * 2 + 1] = 8.0 + 16.0 * (k / 3);
        s.conic[k * 3] = s.conic[k * 3 + 2] = 2.0;  // ~2px footprint, 3 sigma < 8px
        s.opacity[k] = rng.uniform(0.3, 0.9);
        for (int c = 0; c < 3; ++c) s.color[k * 3 + static_cast<std::size_t>(c)] = rng.uniform(0, 1);
        s.depths.push_back(rng.uniform(1, 5));
    }
    Tape tape;
    Var img1 = rasterize(tape, to_projected(tape, s, W, H), {0, 0, 0});

    // permute input order
    std::vector<std::size_t> perm = {4, 2, 7, 0, 8, 3, 6, 1, 5};
    RandomScene sp = s;
    for (std::size_t k = 0; k < M; ++k) {
        std::size_t j = perm[k];
        sp.means[k * 2] = s.means[j * 2];
        sp.means[k * 2 + 1] = s.means[j * 2 + 1];
        for (int c = 0; c < 3; ++c) {
            sp.conic[k * 3 + static_cast<std::size_t>(c)] = s.conic[j * 3 + static_cast<std::size_t>(c)];
            sp.color[k * 3 + static_cast<std::size_t>(c)] = s.color[j * 3 + static_cast<std::size_t>(c)];
        }
        sp.opacity[k] = s.opacity[j];
        sp.depths[k] = s.depths[j];
    }
    Var img2 = rasterize(tape, to_projected(tape, sp, W, H), {0, 0, 0});
    for (std::size_t i = 0; i < img1.val().numel(); ++i)
        CHECK(img1.val()[i] == img2.val()[i]);
}

TEST_CASE("alpha channel equals 1 - prod(1 - alpha_k) and stays in [0,1]") {
    Rng rng(31);
    const int W = 24, H = 24;
    RandomScene s = random_scene(60, W, H, rng);
    Tape tape;
    Var img = rasterize(tape, to_projected(tape, s, W, H), {0.5, 0.5, 0.5});
    Tensor ref = naive_rasterize(s.means, s.conic, s.opacity, s.color, s.depths, W, H,
                                 {0.5, 0.5, 0.5});
    for (std::size_t i = 0; i < static_cast<std::size_t>(W * H); ++i) {
        double a = img.val()[i * 4 + 3];
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
        CHECK(a == doctest::Approx(ref[i * 4 + 3]).epsilon(1e-12));
    }
}

TEST_CASE("deterministic images across repeated runs") {
    Rng rng(37);
    RandomScene s = random_scene(120, 40, 40, rng);
    Tape t1, t2;
    Var a = rasterize(t1, to_projected(t1, s, 40, 40), {0.1, 0.2, 0.3});
    Var b = rasterize(t2, to_projected(t2, s, 40, 40), {0.1, 0.2, 0.3});
    for (std::size_t i = 0; i < a.val().numel(); ++i) CHECK(a.val()[i] == b.val()[i]);
}

TEST_CASE("backward: zero upstream gradient yields zero parameter gradients") {
    Rng rng(41);
    RandomScene s = random_scene(30, 24, 24, rng);
    ParamStore store;
    store.add("means", s.means, 0);
    Tape tape;
    ProjectedSplats p;
    p.means = tape.param(store, "means");
    p.conic = tape.constant(s.conic);
    p.opacity = tape.constant(s.opacity);
    p.color = tape.constant(s.color);
    p.depths = s.depths;
    p.width = p.height = 24;
    Var img = rasterize(tape, p, {0, 0, 0});
    Var loss = o::mul_const(o::sum(img), 0.0);
    tape.backward(loss);
    for (double g : store.group("means").grad.v) CHECK(g == 0.0);
}

TEST_CASE("backward: single-splat opacity gradient matches central differences") {
    Tape tape;
    ParamStore store;
    Tensor op({1, 1});
    op[0] = 0.6;
    store.add("op", op, 0);

    auto build = [&](Tape& t, ParamStore& s) -> Var {
        RandomScene sc;
        sc.means = Tensor({1, 2});
        sc.means[0] = 5.3;
        sc.means[1] = 4.2;
        sc.conic = Tensor({1, 3});
        sc.conic[0] = 0.4;
        sc.conic[1] = 0.05;
        sc.conic[2] = 0.3;
        sc.color = Tensor({1, 3});
        sc.color[0] = 0.9;
        sc.color[1] = 0.4;
        sc.color[2] = 0.2;
        sc.depths = {2.0};
        ProjectedSplats p;
        p.means = t.constant(sc.means);
        p.conic = t.constant(sc.conic);
        p.opacity = s.group("op").value.is_scalar() ? t.param(s, "op") : t.param(s, "op");
        p.color = t.constant(sc.color);
        p.depths = sc.depths;
        p.width = p.height = 11;
        Var img = rasterize(t, p, {0.1, 0.1, 0.1});
        // single pixel probe
        Var px = o::slice_patch(img, 4, 5, 1, 1);
        return o::sum(o::slice_cols(o::reshape(px, {1, 4}), 0, 3));
    };
    auto res = testutil::gradcheck(build, store, {"op"}, 1e-6);
    CAPTURE(res.worst);
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("backward: full-scene directional derivative matches finite differences") {
    Rng rng(47);
    RandomScene s = random_scene(80, 32, 32, rng);
    ParamStore store;
    store.add("means", s.means, 0);
    store.add("conic", s.conic, 0);
    store.add("opacity", s.opacity, 0);
    store.add("color", s.color, 0);

    Tensor target({32, 32, 4});
    for (auto& v : target.v) v = rng.uniform(0, 1);

    auto build = [&](Tape& t, ParamStore& st) -> Var {
        ProjectedSplats p;
        p.means = t.param(st, "means");
        p.conic = t.param(st, "conic");
        p.opacity = t.param(st, "opacity");
        p.color = t.param(st, "color");
        p.depths = s.depths;
        p.width = p.height = 32;
        Var img = rasterize(t, p, {0.3, 0.2, 0.6});
        return o::mean(o::square(o::sub(img, t.constant(target))));
    };
    Rng dir_rng(101);
    for (int k = 0; k < 5; ++k) {
        double err = testutil::directional_check(build, store, {"means", "conic", "opacity", "color"},
                                                 dir_rng, 1e-5);
        CAPTURE(k);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("backward through projection: centers and covariances") {
    CameraModel cam = CameraModel::look_at({0.5, 0.3, -2.2}, {0, 0, 0}, 60, 60, 32, 32);
    Rng rng(53);
    const std::size_t N = 12;
    Tensor centers({N, 3}), covf({N, 9}), color({N, 3}), op({N, 1});
    for (std::size_t k = 0; k < N; ++k) {
        for (int i = 0; i < 3; ++i) centers[k * 3 + static_cast<std::size_t>(i)] = rng.uniform(-0.4, 0.4);
        Eigen::Matrix3d L;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) L(i, j) = rng.uniform(-0.08, 0.08);
        Eigen::Matrix3d S = L * L.transpose() + 1e-5 * Eigen::Matrix3d::Identity();
        for (int i = 0; i < 9; ++i) covf[k * 9 + static_cast<std::size_t>(i)] = S(i / 3, i % 3);
        for (int c = 0; c < 3; ++c) color[k * 3 + static_cast<std::size_t>(c)] = rng.uniform(0, 1);
        op[k] = rng.uniform(0.3, 0.8);
    }
    ParamStore store;
    store.add("centers", centers, 0);
    store.add("cov", covf, 0);
    store.add("color", color, 0);
    store.add("op", op, 0);
    Tensor target({32, 32, 4});
    for (auto& v : target.v) v = rng.uniform(0, 1);

    auto build = [&](Tape& t, ParamStore& st) -> Var {
        auto proj = project_gaussians(t, cam, t.param(st, "centers"), t.param(st, "cov"),
                                      t.param(st, "color"), t.param(st, "op"));
        Var img = rasterize(t, proj, {0.2, 0.2, 0.2});
        return o::mean(o::square(o::sub(img, t.constant(target))));
    };
    Rng dir_rng(59);
    for (int k = 0; k < 3; ++k) {
        double err =
            testutil::directional_check(build, store, {"centers", "cov", "color", "op"}, dir_rng, 1e-5);
        CAPTURE(k);
        CHECK(err < 1e-4);
    }
}
