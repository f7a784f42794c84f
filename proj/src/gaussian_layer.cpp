#include "splatcap/gaussian_layer.hpp"

#include <cmath>

namespace splatcap {

namespace o = splatcap::op;

namespace {

Mlp::Spec gaussian_mlp_spec(int latent_dim, const GaussianLayer::Config& cfg) {
    Mlp::Spec spec;
    spec.input = latent_dim;
    spec.trunk = {cfg.hidden, cfg.hidden, cfg.hidden, cfg.hidden};
    spec.heads = {{"scales", cfg.head_hidden, 3},
                  {"euler", cfg.head_hidden, 3},
                  {"opacity", cfg.head_hidden, 1},
                  {"rgb", cfg.head_hidden, 3},
                  {"offset", cfg.head_hidden, 1}};
    return spec;
}

// column j of each row-major 3x3 row as an [N,3] tensor
Var mat3_col(Var m, std::size_t j) {
    return o::concat_cols({o::slice_cols(m, j, j + 1), o::slice_cols(m, 3 + j, 4 + j),
                           o::slice_cols(m, 6 + j, 7 + j)});
}

Var rot_z(Tape& tape, Var angle, std::size_t n) {
    Var c = o::cos(angle), s = o::sin(angle);
    Tensor zero({n, 1}), one({n, 1});
    one.fill(1.0);
    Var z = tape.constant(zero), e = tape.constant(one);
    return o::mat3_from_cols(o::concat_cols({c, s, z}), o::concat_cols({o::neg(s), c, z}),
                             o::concat_cols({z, z, e}));
}

Var rot_y(Tape& tape, Var angle, std::size_t n) {
    Var c = o::cos(angle), s = o::sin(angle);
    Tensor zero({n, 1}), one({n, 1});
    one.fill(1.0);
    Var z = tape.constant(zero), e = tape.constant(one);
    return o::mat3_from_cols(o::concat_cols({c, z, o::neg(s)}), o::concat_cols({z, e, z}),
                             o::concat_cols({s, z, c}));
}

Var rot_x(Tape& tape, Var angle, std::size_t n) {
    Var c = o::cos(angle), s = o::sin(angle);
    Tensor zero({n, 1}), one({n, 1});
    one.fill(1.0);
    Var z = tape.constant(zero), e = tape.constant(one);
    return o::mat3_from_cols(o::concat_cols({e, z, z}), o::concat_cols({z, c, s}),
                             o::concat_cols({z, o::neg(s), c}));
}

// floor at eps without changing values above it
Var floor_at(Var x, double eps) { return o::add_const(o::relu(o::add_const(x, -eps)), eps); }

}  // namespace

GaussianLayer::GaussianLayer(const SkinnedTemplate& tmpl, Config cfg, int latent_dim)
    : tmpl_(tmpl), cfg_(cfg), latent_dim_(latent_dim),
      mlp_("gauss_mlp", gaussian_mlp_spec(latent_dim, cfg)) {
    if (cfg_.per_face < 1 || cfg_.per_face > 8)
        throw std::runtime_error("GaussianLayer: per_face must be in 1..8");
    const std::size_t N = primitive_count();
    for (std::size_t k = 0; k < N; ++k) {
        std::size_t f = k / static_cast<std::size_t>(cfg_.per_face);
        fidx_.push_back(f);
        for (int c = 0; c < 3; ++c) vidx_[c].push_back(tmpl.faces[f][static_cast<std::size_t>(c)]);
    }
}

void GaussianLayer::register_params(ParamStore& store, Rng& rng, double lr_mlp,
                                    double lr_bary) const {
    const std::size_t N = primitive_count();
    Tensor bary({N, 3});
    bary.fill(1.0);  // decoded start: uniform barycenter
    store.add("gauss/bary_raw", std::move(bary), lr_bary);
    if (cfg_.explicit_params) {
        store.add("gauss/explicit.scales", Tensor({N, 3}), lr_mlp);
        store.add("gauss/explicit.euler", Tensor({N, 3}), lr_mlp);
        store.add("gauss/explicit.opacity", Tensor({N, 1}), lr_mlp);
        store.add("gauss/explicit.rgb", Tensor({N, 3}), lr_mlp);
        store.add("gauss/explicit.offset", Tensor({N, 1}), lr_mlp);
    } else {
        mlp_.register_params(store, rng, lr_mlp, /*zero_init_heads=*/true);
    }
}

Var GaussianLayer::interpolate_rows(Var per_vertex, const Decoded& dec) const {
    Var g0 = o::gather_rows(per_vertex, vidx_[0]);
    Var g1 = o::gather_rows(per_vertex, vidx_[1]);
    Var g2 = o::gather_rows(per_vertex, vidx_[2]);
    return o::vsum({o::mul_colvec(g0, o::slice_cols(dec.bary, 0, 1)),
                    o::mul_colvec(g1, o::slice_cols(dec.bary, 1, 2)),
                    o::mul_colvec(g2, o::slice_cols(dec.bary, 2, 3))});
}

GaussianLayer::Decoded GaussianLayer::decode(Tape& tape, ParamStore& store, Var features) const {
    Decoded dec;
    dec.bary = barycentric_decode(tape.param(store, "gauss/bary_raw"));
    if (cfg_.explicit_params) {
        dec.scales = o::sigmoid(tape.param(store, "gauss/explicit.scales"));
        dec.euler = tape.param(store, "gauss/explicit.euler");
        dec.opacity = o::sigmoid(tape.param(store, "gauss/explicit.opacity"));
        dec.rgb = o::sigmoid(tape.param(store, "gauss/explicit.rgb"));
        dec.offset = tape.param(store, "gauss/explicit.offset");
        return dec;
    }
    Var f = interpolate_rows(features, dec);
    auto heads = mlp_.forward(tape, store, f);
    dec.scales = o::sigmoid(heads.at("scales"));
    dec.euler = heads.at("euler");
    dec.opacity = o::sigmoid(heads.at("opacity"));
    dec.rgb = o::sigmoid(heads.at("rgb"));
    dec.offset = heads.at("offset");
    return dec;
}

GaussianLayer::Primitives GaussianLayer::assemble(Tape& tape, const Decoded& dec,
                                                  Var posed_vertices, Var shading) const {
    const std::size_t N = primitive_count();
    Var p0 = o::gather_rows(posed_vertices, vidx_[0]);
    Var p1 = o::gather_rows(posed_vertices, vidx_[1]);
    Var p2 = o::gather_rows(posed_vertices, vidx_[2]);

    auto steiner = steiner_gaussians(tape, p0, p1, p2);

    // center: barycentric point plus offset along the posed normal
    Var center = o::vsum({o::mul_colvec(p0, o::slice_cols(dec.bary, 0, 1)),
                          o::mul_colvec(p1, o::slice_cols(dec.bary, 1, 2)),
                          o::mul_colvec(p2, o::slice_cols(dec.bary, 2, 3)),
                          o::mul_colvec(steiner.normal, dec.offset)});

    // residual rotation applied after the Steiner frame; alpha spins about
    // the local normal axis (frame column 3), beta/gamma tilt away from it
    Var alpha = o::slice_cols(dec.euler, 0, 1);
    Var beta = o::slice_cols(dec.euler, 1, 2);
    Var gamma = o::slice_cols(dec.euler, 2, 3);
    Var r_local = o::rows_mat3_mul(rot_z(tape, alpha, N),
                                   o::rows_mat3_mul(rot_y(tape, beta, N), rot_x(tape, gamma, N)));
    Var r_total = o::rows_mat3_mul(steiner.frame, r_local);

    // scaled axes, floored at eps so the covariance never loses rank
    const double eps = cfg_.eps_normal;
    Var a1 = floor_at(o::mul(o::slice_cols(dec.scales, 0, 1), o::slice_cols(steiner.semi_axes, 0, 1)), eps);
    Var a2 = floor_at(o::mul(o::slice_cols(dec.scales, 1, 2), o::slice_cols(steiner.semi_axes, 1, 2)), eps);
    Tensor eps_col({N, 1});
    eps_col.fill(eps);
    Var a3 = tape.constant(eps_col);  // third scaled axis stays epsilon

    Var m = o::mat3_from_cols(o::mul_colvec(mat3_col(r_total, 0), a1),
                              o::mul_colvec(mat3_col(r_total, 1), a2),
                              o::mul_colvec(mat3_col(r_total, 2), a3));
    Var cov = o::rows_mat3_mul(m, o::rows_mat3_transpose(m));

    // shading multiplies color, clamped back to the unit cube
    Var s = interpolate_rows(shading, dec);
    Tensor s3mask({N, 3});
    Var color = o::clamp(o::mul_colvec(dec.rgb, s), 0.0, 1.0);

    Primitives prims;
    prims.suppressed.resize(N, false);
    Tensor keep({N, 1});
    for (std::size_t k = 0; k < N; ++k) {
        bool degen = steiner.degenerate[fidx_[k]];
        prims.suppressed[k] = degen;
        keep[k] = degen ? 0.0 : 1.0;
    }
    prims.centers = center;
    prims.cov = cov;
    prims.color = color;
    prims.opacity = o::mul_mask(dec.opacity, keep);
    (void)s3mask;
    return prims;
}

GaussianLayer::Primitives GaussianLayer::steiner_preview(Tape& tape, Var vertices) const {
    const std::size_t F = tmpl_.face_count();
    std::vector<std::size_t> i0(F), i1(F), i2(F);
    for (std::size_t f = 0; f < F; ++f) {
        i0[f] = tmpl_.faces[f][0];
        i1[f] = tmpl_.faces[f][1];
        i2[f] = tmpl_.faces[f][2];
    }
    auto steiner = steiner_gaussians(tape, o::gather_rows(vertices, i0), o::gather_rows(vertices, i1),
                                     o::gather_rows(vertices, i2));
    const double eps = cfg_.eps_normal;
    Var a1 = floor_at(o::slice_cols(steiner.semi_axes, 0, 1), eps);
    Var a2 = floor_at(o::slice_cols(steiner.semi_axes, 1, 2), eps);
    Tensor eps_col({F, 1});
    eps_col.fill(eps);
    Var m = o::mat3_from_cols(o::mul_colvec(mat3_col(steiner.frame, 0), a1),
                              o::mul_colvec(mat3_col(steiner.frame, 1), a2),
                              o::mul_colvec(mat3_col(steiner.frame, 2), tape.constant(eps_col)));

    Primitives prims;
    prims.centers = steiner.center;
    prims.cov = o::rows_mat3_mul(m, o::rows_mat3_transpose(m));
    prims.color = o::mul_const(o::add_const(steiner.normal, 1.0), 0.5);
    Tensor op({F, 1});
    for (std::size_t f = 0; f < F; ++f) op[f] = steiner.degenerate[f] ? 0.0 : 0.95;
    prims.opacity = tape.constant(op);
    prims.suppressed = steiner.degenerate;
    return prims;
}

}  // namespace splatcap
