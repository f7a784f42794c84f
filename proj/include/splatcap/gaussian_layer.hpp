#pragma once

#include "splatcap/mlp.hpp"
#include "splatcap/steiner.hpp"
#include "splatcap/template_model.hpp"

namespace splatcap {

// Primitives rigidly attached to mesh triangles: a Steiner Gaussian base per
// face, deformed by MLP-decoded residuals (scales, rotation, opacity, color,
// normal offset) and placed by learnable barycentric coordinates.
class GaussianLayer {
  public:
    struct Config {
        int per_face = 3;           // P, 1..8
        bool explicit_params = false;  // ablation: optimize raw params directly
        int hidden = 64;            // MLP trunk width, 4 layers
        int head_hidden = 64;
        double eps_normal = 1e-5;   // constant third axis, meters
    };

    GaussianLayer(const SkinnedTemplate& tmpl, Config cfg, int latent_dim);

    void register_params(ParamStore& store, Rng& rng, double lr_mlp, double lr_bary) const;

    std::size_t primitive_count() const { return tmpl_.face_count() * static_cast<std::size_t>(cfg_.per_face); }
    const Config& config() const { return cfg_; }
    // parent face of each primitive (face-major, P slots per face)
    std::size_t parent_face(std::size_t prim) const { return prim / static_cast<std::size_t>(cfg_.per_face); }

    struct Decoded {
        Var bary;     // [N,3] positive, rows sum to 1
        Var scales;   // [N,3] in (0,1)
        Var euler;    // [N,3] residual (alpha about normal, beta/gamma tilts)
        Var opacity;  // [N,1] in (0,1)
        Var rgb;      // [N,3] in (0,1)
        Var offset;   // [N,1] meters along the posed normal
    };
    // pose-independent: depends only on latent features and raw parameters
    Decoded decode(Tape& tape, ParamStore& store, Var features) const;

    struct Primitives {
        Var centers;  // [N,3]
        Var cov;      // [N,9] SPD
        Var color;    // [N,3] shaded, clamped to [0,1]
        Var opacity;  // [N,1] (degenerate parents suppressed to 0)
        std::vector<bool> suppressed;
    };
    // posed_vertices: [V,3]; shading: [V,1] (interpolated at each primitive)
    Primitives assemble(Tape& tape, const Decoded& dec, Var posed_vertices, Var shading) const;

    // one opaque Steiner Gaussian per face, color-coded by normal direction
    Primitives steiner_preview(Tape& tape, Var vertices) const;

    // vertex index triplets per primitive
    const std::vector<std::size_t>& vert_idx(int corner) const { return vidx_[corner]; }

  private:
    Var interpolate_rows(Var per_vertex, const Decoded& dec) const;  // [V,*] -> [N,*]

    const SkinnedTemplate& tmpl_;
    Config cfg_;
    int latent_dim_;
    Mlp mlp_;
    std::vector<std::size_t> vidx_[3];  // per-primitive corner vertex indices
    std::vector<std::size_t> fidx_;     // per-primitive parent face
};

}  // namespace splatcap
