#pragma once

#include "splatcap/ops.hpp"
#include "splatcap/template_model.hpp"

namespace splatcap {

// 22-DoF anatomy-consistent hand parametrization. Raw values are mapped
// through (sin(raw)+1)/2 onto [0,1] and scaled to per-DoF bounds, so decoded
// angles can never leave their intervals:
//   15 bend DoFs, one per joint, [0, 90] deg
//   4 non-thumb spreads on first joints, [-5, 5] deg
//   thumb first-joint spread [-15, 45] deg, twist [-30, 30] deg
//   thumb second-joint spread [-5, 5] deg
// Raw layout: [15 bends (finger-major), 5 first-joint spreads
// (thumb..pinky), thumb twist, thumb second-joint spread].
class HandDofSpec {
  public:
    static constexpr int kDofCount = 22;
    static constexpr int kJointsPerHand = 15;

    struct Dof {
        int joint = 0;  // hand joint 0..14 (finger-major, 3 per finger)
        int axis = 0;   // row of the hand axes table: 0 bend, 1 spread, 2 twist
        double lo = 0, hi = 0;  // radians
    };

    // axes: [15,9] per-joint rows (bend, spread, twist), unit vectors
    explicit HandDofSpec(Tensor axes);

    const std::vector<Dof>& dofs() const { return dofs_; }
    const Tensor& axes() const { return axes_; }

    // raw values that decode to the flat hand (all joint rotations zero)
    Tensor neutral_raw() const;  // [1,22]

    // raw [1,22] -> per-joint axis-angle [15,3]
    Var decode(Var raw) const;
    Tensor decode_plain(const Tensor& raw) const;

    // mapped [0,1] values -> angles, plain helper for tests/tools
    std::vector<double> decode_angles(const std::vector<double>& raw) const;

  private:
    Tensor axes_;
    std::vector<Dof> dofs_;
};

}  // namespace splatcap
