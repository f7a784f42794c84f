#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "splatcap/kinematics.hpp"
#include "splatcap/personalization.hpp"
#include "splatcap/synthetic.hpp"
#include "testutil.hpp"

using namespace splatcap;
namespace o = splatcap::op;

namespace {
const SkinnedTemplate& humanoid() {
    static SkinnedTemplate tmpl = make_procedural_humanoid();
    return tmpl;
}
}  // namespace

TEST_CASE("pose code: gating by skinning weights") {
    const auto& tmpl = humanoid();
    MeshPersonalizer pers(tmpl, {});
    const std::size_t K = tmpl.joint_count() - 1;

    Rng rng(3);
    Tensor theta({K, 3});
    for (auto& v : theta.v) v = rng.uniform(-1, 1);

    Tape tape;
    Var code = pers.encode_pose(tape.constant(theta));
    REQUIRE(code.val().cols() == 3 * K);

    const Tensor& gate = pers.pose_gate_matrix();
    // zero pose -> zero code everywhere
    Var zcode = pers.encode_pose(tape.constant(Tensor({K, 3})));
    for (double v : zcode.val().v) CHECK(v == 0.0);

    // each vertex: code block j equals w_vj * theta_j (w below threshold -> 0)
    for (std::size_t v = 0; v < 25; ++v) {
        for (std::size_t j = 0; j < K; ++j)
            for (std::size_t k = 0; k < 3; ++k)
                CHECK(code.val().at(v, 3 * j + k) ==
                      doctest::Approx(gate.at(v, j) * theta.at(j, k)).epsilon(1e-15));
    }
    // identical weight rows give identical codes
    const auto& W = tmpl.skinning_weights;
    for (std::size_t v = 1; v < 200; ++v) {
        bool same = true;
        for (std::size_t j = 0; j < tmpl.joint_count(); ++j)
            if (W.at(v, j) != W.at(0, j)) same = false;
        if (!same) continue;
        for (std::size_t c = 0; c < 3 * K; ++c) CHECK(code.val().at(v, c) == code.val().at(0, c));
    }
}

TEST_CASE("mesh mlp: zero-init heads give undeformed unshaded output") {
    const auto& tmpl = humanoid();
    MeshPersonalizer pers(tmpl, {});
    ParamStore store;
    Rng rng(11);
    pers.register_params(store, rng, 1e-4, 5e-4, 2.5e-3);

    Tape tape;
    Var feats = tape.param(store, "mesh/features");
    const std::size_t K = tmpl.joint_count() - 1;
    Tensor theta({K, 3});
    Rng rt(4);
    for (auto& v : theta.v) v = rt.uniform(-0.7, 0.7);
    Var code = pers.encode_pose(tape.constant(theta));
    auto out = pers.mesh_mlp(tape, store, feats, code);

    for (double v : out.motion.val().v) CHECK(v == 0.0);
    for (double v : out.shading.val().v) CHECK(v == 1.0);
}

TEST_CASE("mesh mlp: hand/face rows are pinned for random weights") {
    const auto& tmpl = humanoid();
    MeshPersonalizer pers(tmpl, {});
    ParamStore store;
    Rng rng(13);
    pers.register_params(store, rng, 1e-4, 5e-4, 2.5e-3);
    // randomize the zero-initialized head finals
    for (auto& g : store.groups())
        if (g.name.find("head") != std::string::npos)
            for (auto& v : g.value.v) v = rng.uniform(-0.5, 0.5);

    Tape tape;
    const std::size_t K = tmpl.joint_count() - 1;
    Tensor theta({K, 3});
    for (auto& v : theta.v) v = rng.uniform(-0.7, 0.7);
    auto out = pers.mesh_mlp(tape, store, tape.param(store, "mesh/features"),
                             pers.encode_pose(tape.constant(theta)));

    int pinned = 0;
    for (std::size_t v = 0; v < tmpl.vertex_count(); ++v) {
        if (tmpl.labels[v] != Region::Body) {
            ++pinned;
            CHECK(out.motion.val().at(v, 0) == 0.0);
            CHECK(out.motion.val().at(v, 1) == 0.0);
            CHECK(out.motion.val().at(v, 2) == 0.0);
            CHECK(out.shading.val()[v] == 1.0);
        } else {
            CHECK(out.shading.val()[v] > 0.0);
            CHECK(out.shading.val()[v] < 2.0);
        }
    }
    CHECK(pinned > 100);
}

TEST_CASE("shading head range sweep stays in [0,2]") {
    const auto& tmpl = humanoid();
    MeshPersonalizer::Config cfg;
    cfg.hidden = 16;
    cfg.head_hidden = 16;
    MeshPersonalizer pers(tmpl, cfg);
    ParamStore store;
    Rng rng(17);
    pers.register_params(store, rng, 1e-4, 5e-4, 2.5e-3);
    for (auto& g : store.groups())
        if (g.name.find("mesh_mlp") != std::string::npos)
            for (auto& v : g.value.v) v = rng.uniform(-2.0, 2.0);

    const std::size_t K = tmpl.joint_count() - 1;
    // 10 random poses x V vertices > 1e4 samples
    for (int trial = 0; trial < 10; ++trial) {
        Tape tape;
        Tensor theta({K, 3});
        for (auto& v : theta.v) v = rng.uniform(-2, 2);
        auto out = pers.mesh_mlp(tape, store, tape.param(store, "mesh/features"),
                                 pers.encode_pose(tape.constant(theta)));
        for (double s : out.shading.val().v) {
            CHECK(s >= 0.0);
            CHECK(s <= 2.0);
        }
    }
}

TEST_CASE("personalize is the exact three-term sum") {
    const auto& tmpl = humanoid();
    MeshPersonalizer pers(tmpl, {});
    Rng rng(23);
    const std::size_t V = tmpl.vertex_count();
    Tensor dv({V, 3}), m({V, 3});
    for (auto& v : dv.v) v = rng.uniform(-0.01, 0.01);
    for (auto& v : m.v) v = rng.uniform(-0.01, 0.01);

    Tape tape;
    Var shaped = shaped_vertices(tape, tmpl, tape.constant(Tensor({4, 1})));
    Var out = pers.personalize(tape, shaped, tape.constant(dv), tape.constant(m));
    // independent summation oracle, bitwise at 64-bit
    for (std::size_t i = 0; i < V * 3; ++i) {
        double expect = shaped.val()[i] + dv[i] + m[i];
        CHECK(out.val()[i] == expect);
    }

    // constant shift on body rows
    Tensor dvc({V, 3});
    for (std::size_t v = 0; v < V; ++v) dvc.at(v, 1) = 0.05;
    Var pinned = pers.pinned_offsets(tape.constant(dvc));
    Var out2 = pers.personalize(tape, shaped, pinned, tape.constant(Tensor({V, 3})));
    for (std::size_t v = 0; v < V; ++v) {
        double expect = tmpl.labels[v] == Region::Body ? 0.05 : 0.0;
        CHECK(out2.val().at(v, 1) - shaped.val().at(v, 1) == doctest::Approx(expect).epsilon(1e-15));
    }
}

TEST_CASE("face normals: canonical triangles and unit length") {
    SkinnedTemplate t;
    t.vertices = Tensor({3, 3});
    t.vertices.at(1, 0) = 1.0;
    t.vertices.at(2, 1) = 1.0;
    t.faces.push_back({0, 1, 2});
    t.parents = {-1};
    t.joint_names = {"root"};
    t.joint_regressor = Tensor({1, 3});
    t.joint_regressor.at(0, 0) = 1.0;
    t.blendshapes = Tensor({9, 1});
    t.skinning_weights = Tensor({3, 1});
    t.skinning_weights.fill(1.0);
    t.labels = {Region::Body, Region::Body, Region::Body};
    t.body_joint_count = 1;

    Tape tape;
    auto fn = face_normals(tape, t, tape.constant(t.vertices));
    CHECK(fn.normals.val().at(0, 0) == doctest::Approx(0.0));
    CHECK(fn.normals.val().at(0, 1) == doctest::Approx(0.0));
    CHECK(fn.normals.val().at(0, 2) == doctest::Approx(1.0));
    CHECK_FALSE(fn.degenerate[0]);

    // reversed winding flips the normal
    SkinnedTemplate t2 = t;
    t2.faces[0] = {0, 2, 1};
    auto fn2 = face_normals(tape, t2, tape.constant(t2.vertices));
    CHECK(fn2.normals.val().at(0, 2) == doctest::Approx(-1.0));

    // random triangles have unit normals
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor verts({3, 3});
        for (auto& v : verts.v) v = rng.uniform(-1, 1);
        auto fn3 = face_normals(tape, t, tape.constant(verts));
        if (fn3.degenerate[0]) continue;
        double n2 = 0;
        for (int k = 0; k < 3; ++k) n2 += fn3.normals.val()[static_cast<std::size_t>(k)] * fn3.normals.val()[static_cast<std::size_t>(k)];
        CHECK(std::sqrt(n2) == doctest::Approx(1.0).epsilon(1e-12));
    }

    // degenerate face flagged, normal zeroed
    Tensor degen({3, 3});
    degen.at(1, 0) = 1.0;
    degen.at(2, 0) = 2.0;  // collinear
    auto fn4 = face_normals(tape, t, tape.constant(degen));
    CHECK(fn4.degenerate[0]);
    for (int k = 0; k < 3; ++k) CHECK(fn4.normals.val()[static_cast<std::size_t>(k)] == 0.0);
}

TEST_CASE("personalized vertex gradients pass finite differences") {
    const auto& tmpl = humanoid();
    MeshPersonalizer::Config cfg;
    cfg.latent_dim = 8;
    cfg.hidden = 16;
    cfg.head_hidden = 16;
    MeshPersonalizer pers(tmpl, cfg);
    ParamStore store;
    Rng rng(29);
    store.add("beta", Tensor({4, 1}), 1e-3);
    for (auto& v : store.group("beta").value.v) v = rng.uniform(-0.5, 0.5);
    pers.register_params(store, rng, 1e-4, 5e-4, 2.5e-3);
    // non-zero heads so the MLP path carries gradient
    for (auto& g : store.groups())
        if (g.name.find("head") != std::string::npos && g.name.find("mesh_mlp") != std::string::npos)
            for (auto& v : g.value.v) v = rng.uniform(-0.3, 0.3);

    const std::size_t K = tmpl.joint_count() - 1;
    Tensor theta({K, 3});
    for (auto& v : theta.v) v = rng.uniform(-0.5, 0.5);

    auto f = [&](Tape& t, ParamStore& s) -> Var {
        Var shaped = shaped_vertices(t, tmpl, t.param(s, "beta"));
        Var code = pers.encode_pose(t.constant(theta));
        auto mm = pers.mesh_mlp(t, s, t.param(s, "mesh/features"), code);
        Var dv = pers.pinned_offsets(t.param(s, "mesh/offsets"));
        Var v = pers.personalize(t, shaped, dv, mm.motion);
        Var shade_term = o::mean(o::square(mm.shading));
        return o::add(o::mean(o::square(v)), shade_term);
    };
    std::vector<std::string> groups = {"beta", "mesh/offsets", "mesh/features",
                                       "mesh_mlp/L0.W", "mesh_mlp/head.motion.W",
                                       "mesh_mlp/head.shading.W", "mesh_mlp/head.shading.H.W"};
    auto res = testutil::gradcheck(f, store, groups, 1e-5, 25);
    CAPTURE(res.worst);
    CHECK(res.max_rel_err < 1e-5);
}
