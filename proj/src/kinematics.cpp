#include "splatcap/kinematics.hpp"

namespace splatcap {

namespace o = splatcap::op;

Var axis_angle_to_rotation(Var aa) {
    Tape& t = *aa.tape;
    const std::size_t M = aa.val().rows();
    Var t2 = o::rows_dot3(aa, aa);
    Var ca = o::rot_coef_a(t2);  // sin(t)/t
    Var cb = o::rot_coef_b(t2);  // (1-cos(t))/t^2
    Var k = o::rows_skew3(aa);
    Var k2 = o::rows_mat3_mul(k, k);
    Tensor eye({M, 9});
    for (std::size_t i = 0; i < M; ++i) eye[i * 9] = eye[i * 9 + 4] = eye[i * 9 + 8] = 1.0;
    return o::vsum({t.constant(eye), o::mul_colvec(k, ca), o::mul_colvec(k2, cb)});
}

Var rotation_to_axis_angle(Var rot) {
    Tape& t = *rot.tape;
    const std::size_t M = rot.val().rows();
    // axis*2sin(t) from the skew part, scaled by theta/(2 sin theta)
    Var r01 = o::slice_cols(rot, 1, 2), r02 = o::slice_cols(rot, 2, 3);
    Var r10 = o::slice_cols(rot, 3, 4), r12 = o::slice_cols(rot, 5, 6);
    Var r20 = o::slice_cols(rot, 6, 7), r21 = o::slice_cols(rot, 7, 8);
    Var skewvec = o::concat_cols({o::sub(r21, r12), o::sub(r02, r20), o::sub(r10, r01)});
    Var trace = o::vsum({o::slice_cols(rot, 0, 1), o::slice_cols(rot, 4, 5), o::slice_cols(rot, 8, 9)});
    Var c = o::clamp(o::mul_const(o::add_const(trace, -1.0), 0.5), -1.0, 1.0);
    (void)t;
    (void)M;
    return o::mul_colvec(skewvec, o::rot_log_coef(c));
}

Var clamp_shape(Var beta) { return o::clamp(beta, -5.0, 5.0); }

Var shaped_vertices(Tape& tape, const SkinnedTemplate& tmpl, Var beta) {
    Var b = clamp_shape(beta);
    Var disp = o::const_matmul(tmpl.blendshapes, b);  // [V*3, 1]
    Var dispv = o::reshape(disp, {tmpl.vertex_count(), 3});
    return o::add(tape.constant(tmpl.vertices), dispv);
}

Var regress_joints(Tape& tape, const SkinnedTemplate& tmpl, Var beta) {
    Var v = shaped_vertices(tape, tmpl, beta);
    return o::const_matmul(tmpl.joint_regressor, v);  // [J,3]
}

FkVars forward_kinematics(Tape& tape, const SkinnedTemplate& tmpl, Var rest_joints, Var root_aa,
                          Var trans, Var theta) {
    const std::size_t J = tmpl.joint_count();
    if (theta.val().rows() != J - 1) throw std::runtime_error("forward_kinematics: theta rows != J-1");

    // all local rotations in one Rodrigues batch: row 0 = global orientation
    Var all_aa = o::stack_rows({root_aa, theta});
    Var rots = axis_angle_to_rotation(all_aa);  // [J,9]

    std::vector<Var> grot(J), gtrans(J);
    std::vector<Var> rest(J);
    for (std::size_t j = 0; j < J; ++j) rest[j] = o::gather_rows(rest_joints, {j});

    grot[0] = o::gather_rows(rots, {0});
    gtrans[0] = o::add(rest[0], trans);
    for (std::size_t j = 1; j < J; ++j) {
        const std::size_t p = static_cast<std::size_t>(tmpl.parents[j]);
        grot[j] = o::rows_mat3_mul(grot[p], o::gather_rows(rots, {j}));
        Var offset = o::sub(rest[j], rest[p]);
        gtrans[j] = o::add(o::rows_mat3_vec3(grot[p], offset), gtrans[p]);
    }

    auto pack_affine = [](Var rot, Var tr) {
        return o::concat_cols({o::slice_cols(rot, 0, 3), o::slice_cols(tr, 0, 1),
                               o::slice_cols(rot, 3, 6), o::slice_cols(tr, 1, 2),
                               o::slice_cols(rot, 6, 9), o::slice_cols(tr, 2, 3)});
    };

    std::vector<Var> world_rows(J), skin_rows(J), joint_rows(J);
    for (std::size_t j = 0; j < J; ++j) {
        world_rows[j] = pack_affine(grot[j], gtrans[j]);
        // rest transforms are translation-only, so the skinning transform is
        // (R_j, t_j - R_j r_j)
        Var skint = o::sub(gtrans[j], o::rows_mat3_vec3(grot[j], rest[j]));
        skin_rows[j] = pack_affine(grot[j], skint);
        joint_rows[j] = gtrans[j];
    }

    FkVars out;
    out.world = o::stack_rows(world_rows);
    out.skinning = o::stack_rows(skin_rows);
    out.posed_joints = o::stack_rows(joint_rows);
    (void)tape;
    return out;
}

Var linear_blend_skinning(Tape& tape, const SkinnedTemplate& tmpl, Var vertices, Var skinning) {
    (void)tape;
    Var blended = o::const_matmul(tmpl.skinning_weights, skinning);  // [V,12]
    return o::affine_rows(blended, vertices);
}

Tensor posed_joint_positions(const SkinnedTemplate& tmpl, const Tensor& beta, const PoseState& pose) {
    Tape tape;
    Var b = tape.constant(beta);
    Var rest = regress_joints(tape, tmpl, b);
    Tensor aa({1, 3}), tr({1, 3});
    for (int k = 0; k < 3; ++k) {
        aa[k] = pose.root_orient[static_cast<std::size_t>(k)];
        tr[k] = pose.translation[static_cast<std::size_t>(k)];
    }
    auto fk = forward_kinematics(tape, tmpl, rest, tape.constant(aa), tape.constant(tr),
                                 tape.constant(pose.theta));
    return fk.posed_joints.val();
}

}  // namespace splatcap
