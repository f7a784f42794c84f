#include "splatcap/personalization.hpp"

#include <cmath>

namespace splatcap {

namespace o = splatcap::op;

namespace {

Mlp::Spec mesh_mlp_spec(const SkinnedTemplate& tmpl, const MeshPersonalizer::Config& cfg) {
    Mlp::Spec spec;
    spec.input = cfg.latent_dim + 3 * static_cast<int>(tmpl.joint_count() - 1);
    spec.trunk = {cfg.hidden, cfg.hidden, cfg.hidden, cfg.hidden};
    spec.heads = {{"motion", cfg.head_hidden, 3}, {"shading", cfg.head_hidden, 1}};
    return spec;
}

}  // namespace

MeshPersonalizer::MeshPersonalizer(const SkinnedTemplate& tmpl, Config cfg)
    : tmpl_(tmpl), cfg_(cfg), mlp_("mesh_mlp", mesh_mlp_spec(tmpl, cfg)) {
    const std::size_t V = tmpl.vertex_count();
    const std::size_t K = tmpl.joint_count() - 1;
    gate_ = Tensor({V, K});
    for (std::size_t v = 0; v < V; ++v)
        for (std::size_t j = 0; j < K; ++j) {
            double w = tmpl.skinning_weights.at(v, j + 1);  // joint j+1 has theta row j
            gate_.at(v, j) = w < cfg.gate_threshold ? 0.0 : w;
        }
    pin_mask_ = Tensor({V, 1});
    for (std::size_t v = 0; v < V; ++v)
        pin_mask_[v] = tmpl.labels[v] == Region::Body ? 1.0 : 0.0;
}

void MeshPersonalizer::register_params(ParamStore& store, Rng& rng, double lr_mlp,
                                       double lr_offsets, double lr_features) const {
    const std::size_t V = tmpl_.vertex_count();
    store.add("mesh/offsets", Tensor({V, 3}), lr_offsets);
    Tensor feats({V, static_cast<std::size_t>(cfg_.latent_dim)});
    for (auto& x : feats.v) x = rng.normal(0.0, 0.1);
    store.add("mesh/features", std::move(feats), lr_features);
    mlp_.register_params(store, rng, lr_mlp, /*zero_init_heads=*/true);
}

Var MeshPersonalizer::encode_pose(Var theta) const { return o::pose_gate(theta, gate_); }

MeshPersonalizer::MlpOut MeshPersonalizer::mesh_mlp(Tape& tape, ParamStore& store, Var features,
                                                    Var pose_code) const {
    Var input = o::concat_cols({features, pose_code});
    auto heads = mlp_.forward(tape, store, input);
    const std::size_t V = tmpl_.vertex_count();
    // pin: motion rows masked to zero, shading rows driven to exactly one
    Tensor mask3({V, 3}), one_minus({V, 1});
    for (std::size_t v = 0; v < V; ++v) {
        double m = pin_mask_[v];
        mask3[v * 3] = mask3[v * 3 + 1] = mask3[v * 3 + 2] = m;
        one_minus[v] = 1.0 - m;
    }
    MlpOut out;
    out.motion = o::mul_mask(heads.at("motion"), mask3);
    Var shading = o::mul_const(o::sigmoid(heads.at("shading")), 2.0);
    out.shading = o::add(o::mul_mask(shading, pin_mask_), tape.constant(one_minus));
    return out;
}

Var MeshPersonalizer::pinned_offsets(Var raw_offsets) const {
    const std::size_t V = tmpl_.vertex_count();
    Tensor mask3({V, 3});
    for (std::size_t v = 0; v < V; ++v)
        mask3[v * 3] = mask3[v * 3 + 1] = mask3[v * 3 + 2] = pin_mask_[v];
    return o::mul_mask(raw_offsets, mask3);
}

Var MeshPersonalizer::personalize(Tape& tape, Var shaped, Var offsets, Var motion) const {
    (void)tape;
    return o::vsum({shaped, offsets, motion});
}

FaceNormals face_normals(Tape& tape, const SkinnedTemplate& tmpl, Var vertices,
                         double area_threshold) {
    const std::size_t F = tmpl.face_count();
    std::vector<std::size_t> i0(F), i1(F), i2(F);
    for (std::size_t f = 0; f < F; ++f) {
        i0[f] = tmpl.faces[f][0];
        i1[f] = tmpl.faces[f][1];
        i2[f] = tmpl.faces[f][2];
    }
    Var v0 = o::gather_rows(vertices, i0);
    Var v1 = o::gather_rows(vertices, i1);
    Var v2 = o::gather_rows(vertices, i2);
    Var cross = o::rows_cross3(o::sub(v1, v0), o::sub(v2, v0));

    FaceNormals out;
    out.degenerate.resize(F, false);
    const Tensor& cv = cross.val();
    Tensor keep({F, 3});
    for (std::size_t f = 0; f < F; ++f) {
        double nx = cv[f * 3], ny = cv[f * 3 + 1], nz = cv[f * 3 + 2];
        double area = 0.5 * std::sqrt(nx * nx + ny * ny + nz * nz);
        bool degen = area <= area_threshold;
        out.degenerate[f] = degen;
        double k = degen ? 0.0 : 1.0;
        keep[f * 3] = keep[f * 3 + 1] = keep[f * 3 + 2] = k;
    }
    // degenerate rows zeroed before normalization (normalize keeps them zero)
    out.normals = o::rows_normalize3(o::mul_mask(cross, keep));
    (void)tape;
    return out;
}

}  // namespace splatcap
