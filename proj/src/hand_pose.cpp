#include "splatcap/hand_pose.hpp"

#include <cmath>

#include "splatcap/kinematics.hpp"

namespace splatcap {

namespace o = splatcap::op;

namespace {
constexpr double kDeg = 3.14159265358979323846 / 180.0;
}

HandDofSpec::HandDofSpec(Tensor axes) : axes_(std::move(axes)) {
    if (axes_.rows() != kJointsPerHand || axes_.cols() != 9)
        throw std::runtime_error("HandDofSpec: axes must be [15,9]");
    // bends: every joint, 0..90 deg
    for (int j = 0; j < kJointsPerHand; ++j) dofs_.push_back({j, 0, 0.0, 90.0 * kDeg});
    // first-joint spreads: thumb is finger 0 (joints 0,1,2), then index..pinky
    dofs_.push_back({0, 1, -15.0 * kDeg, 45.0 * kDeg});  // thumb spread
    for (int f = 1; f < 5; ++f) dofs_.push_back({f * 3, 1, -5.0 * kDeg, 5.0 * kDeg});
    dofs_.push_back({0, 2, -30.0 * kDeg, 30.0 * kDeg});  // thumb twist
    dofs_.push_back({1, 1, -5.0 * kDeg, 5.0 * kDeg});    // thumb second-joint spread
}

Tensor HandDofSpec::neutral_raw() const {
    // choose raw so the decoded angle is 0: (sin(raw)+1)/2 = -lo/(hi-lo)
    Tensor raw({1, static_cast<std::size_t>(kDofCount)});
    for (int d = 0; d < kDofCount; ++d) {
        double m = -dofs_[static_cast<std::size_t>(d)].lo /
                   (dofs_[static_cast<std::size_t>(d)].hi - dofs_[static_cast<std::size_t>(d)].lo);
        raw[static_cast<std::size_t>(d)] = std::asin(2.0 * m - 1.0);
    }
    return raw;
}

std::vector<double> HandDofSpec::decode_angles(const std::vector<double>& raw) const {
    std::vector<double> angles(dofs_.size());
    for (std::size_t d = 0; d < dofs_.size(); ++d) {
        double mapped = (std::sin(raw[d]) + 1.0) * 0.5;
        angles[d] = dofs_[d].lo + mapped * (dofs_[d].hi - dofs_[d].lo);
    }
    return angles;
}

Var HandDofSpec::decode(Var raw) const {
    Tape& t = *raw.tape;
    if (raw.val().rows() != 1 || raw.val().cols() != kDofCount)
        throw std::runtime_error("hand decode: raw must be [1,22]");

    Tensor span({1, static_cast<std::size_t>(kDofCount)}), lo({1, static_cast<std::size_t>(kDofCount)});
    for (int d = 0; d < kDofCount; ++d) {
        span[static_cast<std::size_t>(d)] = dofs_[static_cast<std::size_t>(d)].hi - dofs_[static_cast<std::size_t>(d)].lo;
        lo[static_cast<std::size_t>(d)] = dofs_[static_cast<std::size_t>(d)].lo;
    }
    Var mapped = o::mul_const(o::add_const(o::sin(raw), 1.0), 0.5);
    Var angles = o::add(o::mul_mask(mapped, span), t.constant(lo));  // [1,22]

    // per-joint angle triplets in the fixed order bend, spread, twist
    std::vector<std::array<int, 3>> joint_dofs(kJointsPerHand, {-1, -1, -1});
    for (std::size_t d = 0; d < dofs_.size(); ++d)
        joint_dofs[static_cast<std::size_t>(dofs_[d].joint)][static_cast<std::size_t>(dofs_[d].axis)] =
            static_cast<int>(d);

    std::vector<Var> rows;
    rows.reserve(kJointsPerHand);
    for (int j = 0; j < kJointsPerHand; ++j) {
        Var rot;  // composed rotation, bend applied last: R = Rb * Rs * Rt
        bool first = true;
        for (int axis = 2; axis >= 0; --axis) {
            int d = joint_dofs[static_cast<std::size_t>(j)][static_cast<std::size_t>(axis)];
            if (d < 0) continue;
            Tensor axis_row({1, 3});
            for (int k = 0; k < 3; ++k) axis_row[static_cast<std::size_t>(k)] = axes_.at(static_cast<std::size_t>(j), static_cast<std::size_t>(axis * 3 + k));
            Var aa = o::mul_colvec(t.constant(axis_row),
                                   o::slice_cols(angles, static_cast<std::size_t>(d), static_cast<std::size_t>(d + 1)));
            Var r = axis_angle_to_rotation(aa);
            rot = first ? r : o::rows_mat3_mul(r, rot);
            first = false;
        }
        rows.push_back(rotation_to_axis_angle(rot));
    }
    return o::stack_rows(rows);  // [15,3]
}

Tensor HandDofSpec::decode_plain(const Tensor& raw) const {
    Tape tape;
    return decode(tape.constant(raw)).val();
}

}  // namespace splatcap
