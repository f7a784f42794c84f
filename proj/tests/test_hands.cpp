#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "splatcap/hand_pose.hpp"
#include "splatcap/kinematics.hpp"
#include "splatcap/synthetic.hpp"
#include "testutil.hpp"

using namespace splatcap;
namespace o = splatcap::op;

namespace {
constexpr double kPi = 3.14159265358979323846;

Tensor left_axes() { return make_procedural_humanoid().left_hand_axes; }
}  // namespace

TEST_CASE("dof table shape and bounds") {
    HandDofSpec spec(left_axes());
    CHECK(spec.dofs().size() == 22);
    int bends = 0, spreads = 0, twists = 0;
    for (const auto& d : spec.dofs()) {
        if (d.axis == 0) {
            ++bends;
            CHECK(d.lo == 0.0);
            CHECK(d.hi == doctest::Approx(kPi / 2));
        } else if (d.axis == 1) {
            ++spreads;
        } else {
            ++twists;
        }
    }
    CHECK(bends == 15);
    CHECK(spreads == 6);  // 5 first joints + thumb second joint
    CHECK(twists == 1);
}

TEST_CASE("neutral raw decodes to the flat hand") {
    HandDofSpec spec(left_axes());
    Tensor aa = spec.decode_plain(spec.neutral_raw());
    for (double v : aa.v) CHECK(std::fabs(v) < 1e-9);
}

TEST_CASE("random raws never leave the declared bounds") {
    HandDofSpec spec(left_axes());
    Rng rng(41);
    for (int trial = 0; trial < 10000; ++trial) {
        std::vector<double> raw(22);
        for (auto& r : raw) r = rng.uniform(-50, 50);
        auto angles = spec.decode_angles(raw);
        for (std::size_t d = 0; d < 22; ++d) {
            CHECK(angles[d] >= spec.dofs()[d].lo - 1e-12);
            CHECK(angles[d] <= spec.dofs()[d].hi + 1e-12);
        }
    }
}

TEST_CASE("full fist: 90 degree bends, fingertip at the analytic position") {
    HandDofSpec spec(left_axes());
    // mapped = 1 on all bends (raw = pi/2), neutral spreads/twist
    Tensor raw = spec.neutral_raw();
    for (int d = 0; d < 15; ++d) raw[static_cast<std::size_t>(d)] = kPi / 2.0;
    Tensor aa = spec.decode_plain(raw);

    // every bend joint rotated 90 degrees about its bend axis
    for (int j = 0; j < 15; ++j) {
        double angle = std::sqrt(aa.at(static_cast<std::size_t>(j), 0) * aa.at(static_cast<std::size_t>(j), 0) +
                                 aa.at(static_cast<std::size_t>(j), 1) * aa.at(static_cast<std::size_t>(j), 1) +
                                 aa.at(static_cast<std::size_t>(j), 2) * aa.at(static_cast<std::size_t>(j), 2));
        CHECK(angle == doctest::Approx(kPi / 2).epsilon(1e-9));
        const Tensor& axes = spec.axes();
        for (int k = 0; k < 3; ++k)
            CHECK(aa.at(static_cast<std::size_t>(j), static_cast<std::size_t>(k)) ==
                  doctest::Approx(kPi / 2 * axes.at(static_cast<std::size_t>(j), static_cast<std::size_t>(k))).epsilon(1e-9));
    }

    // FK a 3-segment unit-length index finger (straight along +x at rest):
    // after three 90 degree curls the tip lands at base + (-1, 0, 0)
    SkinnedTemplate chain;
    chain.vertices = Tensor({3, 3});
    chain.vertices.at(0, 0) = 0.0;
    chain.vertices.at(1, 0) = 1.0;
    chain.vertices.at(2, 0) = 2.0;
    chain.faces.push_back({0, 1, 2});
    chain.parents = {-1, 0, 1};
    chain.joint_names = {"j1", "j2", "j3"};
    chain.joint_regressor = Tensor({3, 3});
    for (std::size_t j = 0; j < 3; ++j) chain.joint_regressor.at(j, j) = 1.0;
    chain.blendshapes = Tensor({9, 1});
    chain.skinning_weights = Tensor({3, 3});
    for (std::size_t v = 0; v < 3; ++v) chain.skinning_weights.at(v, v) = 1.0;
    chain.labels = {Region::Body, Region::Body, Region::Body};
    chain.body_joint_count = 3;

    // index finger joints are rows 3,4,5 of the hand table
    PoseState pose = PoseState::rest(3);
    for (int seg = 0; seg < 2; ++seg)
        for (int k = 0; k < 3; ++k)
            pose.theta.at(static_cast<std::size_t>(seg), static_cast<std::size_t>(k)) =
                aa.at(static_cast<std::size_t>(4 + seg), static_cast<std::size_t>(k));
    // root joint bend enters through global orientation
    for (int k = 0; k < 3; ++k) pose.root_orient[static_cast<std::size_t>(k)] = aa.at(3, static_cast<std::size_t>(k));

    Tensor posed = posed_joint_positions(chain, Tensor({1, 1}), pose);
    // tip = joint 2 position + last segment direction; with unit segments the
    // analytic fist chain gives joints at (0,0,0), (0,-1,0), (-1,-1,0)
    CHECK(posed.at(1, 0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(posed.at(1, 1) == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(posed.at(2, 0) == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(posed.at(2, 1) == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(std::fabs(posed.at(2, 2)) < 1e-9);
}

TEST_CASE("decode gradients pass finite differences") {
    HandDofSpec spec(left_axes());
    ParamStore store;
    Rng rng(43);
    Tensor raw({1, 22});
    for (auto& v : raw.v) v = rng.uniform(-1.0, 1.0);
    store.add("raw", raw, 0);
    auto f = [&](Tape& t, ParamStore& s) -> Var {
        Var aa = spec.decode(t.param(s, "raw"));
        return o::mean(o::square(aa));
    };
    auto res = testutil::gradcheck(f, store, {"raw"}, 1e-6);
    CAPTURE(res.worst);
    CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("thumb spread range is asymmetric") {
    HandDofSpec spec(left_axes());
    const auto& d = spec.dofs()[15];  // thumb first-joint spread
    CHECK(d.joint == 0);
    CHECK(d.lo == doctest::Approx(-15.0 * kPi / 180));
    CHECK(d.hi == doctest::Approx(45.0 * kPi / 180));
}
