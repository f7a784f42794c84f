#pragma once

#include "splatcap/mlp.hpp"
#include "splatcap/ops.hpp"
#include "splatcap/template_model.hpp"

namespace splatcap {

// Personalized canonical mesh: v = v_temp(beta) + dv + m(theta), with
// per-vertex latent features feeding the mesh MLP and the Gaussian layer.
// Hand/face vertices are pinned: dv and m forced to zero, shading to one.
class MeshPersonalizer {
  public:
    struct Config {
        int latent_dim = 32;
        int hidden = 64;        // trunk width, 4 layers
        int head_hidden = 64;
        double gate_threshold = 1e-4;  // skinning weights below this do not gate pose into the code
    };

    MeshPersonalizer(const SkinnedTemplate& tmpl, Config cfg);

    // groups: mesh/offsets [V,3], mesh/features [V,D], mesh_mlp/*
    void register_params(ParamStore& store, Rng& rng, double lr_mlp, double lr_offsets,
                         double lr_features) const;

    // pose code per vertex: skinning-gated joint rotations, [V, 3*(J-1)]
    Var encode_pose(Var theta) const;

    struct MlpOut {
        Var motion;   // [V,3], zero on hand/face rows
        Var shading;  // [V,1] in [0,2], one on hand/face rows
    };
    // features: [V,D]; pose_code: [V, 3*(J-1)]
    MlpOut mesh_mlp(Tape& tape, ParamStore& store, Var features, Var pose_code) const;

    // offsets with hand/face rows pinned to zero
    Var pinned_offsets(Var raw_offsets) const;

    // v_temp(beta) + dv + m
    Var personalize(Tape& tape, Var shaped, Var offsets, Var motion) const;

    const Tensor& pin_mask() const { return pin_mask_; }  // [V,1], 0 on hand/face
    const Tensor& pose_gate_matrix() const { return gate_; }
    const Mlp& mlp() const { return mlp_; }
    int latent_dim() const { return cfg_.latent_dim; }

  private:
    const SkinnedTemplate& tmpl_;
    Config cfg_;
    Mlp mlp_;
    Tensor gate_;      // [V, J-1]
    Tensor pin_mask_;  // [V,1]
};

// unit face normals, zero (and flagged) for degenerate faces
struct FaceNormals {
    Var normals;                   // [F,3]
    std::vector<bool> degenerate;  // area <= threshold
};
FaceNormals face_normals(Tape& tape, const SkinnedTemplate& tmpl, Var vertices,
                         double area_threshold = 1e-12);

}  // namespace splatcap
