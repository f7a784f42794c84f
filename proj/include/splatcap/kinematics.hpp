#pragma once

#include "splatcap/ops.hpp"
#include "splatcap/tape.hpp"
#include "splatcap/template_model.hpp"

namespace splatcap {

// Rodrigues formula on rows of [M,3]; the zero-angle limit is handled by
// series expansion so gradients stay finite everywhere.
Var axis_angle_to_rotation(Var aa);  // -> [M,9]

// matrix log on rows of [M,9]; valid for rotation angles < pi
Var rotation_to_axis_angle(Var rot);  // -> [M,3]

// beta clamped to +-5 before use
Var clamp_shape(Var beta);

// rest joints = regressor * (v_temp + blendshapes * beta); beta is [B,1]
Var regress_joints(Tape& tape, const SkinnedTemplate& tmpl, Var beta);  // -> [J,3]

// template vertices after shape blendshapes (canonical T-pose, no offsets)
Var shaped_vertices(Tape& tape, const SkinnedTemplate& tmpl, Var beta);  // -> [V,3]

struct FkVars {
    Var world;         // [J,12] world transforms, rows are 3x4 row-major
    Var posed_joints;  // [J,3]
    Var skinning;      // [J,12] world composed with inverse (translation-only) rest
};

// root_aa/trans are [1,3]; theta is [J-1,3] (row j-1 drives joint j)
FkVars forward_kinematics(Tape& tape, const SkinnedTemplate& tmpl, Var rest_joints, Var root_aa,
                          Var trans, Var theta);

// v' = sum_j w_vj * (M_j [v;1]) with the template's skinning weights
Var linear_blend_skinning(Tape& tape, const SkinnedTemplate& tmpl, Var vertices, Var skinning);

// convenience: plain-value FK (scratch tape) for metrics and data generation
Tensor posed_joint_positions(const SkinnedTemplate& tmpl, const Tensor& beta, const PoseState& pose);

}  // namespace splatcap
