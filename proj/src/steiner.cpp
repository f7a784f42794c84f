#include "splatcap/steiner.hpp"

#include <cmath>

namespace splatcap {

namespace o = splatcap::op;

SteinerVars steiner_gaussians(Tape& tape, Var v0, Var v1, Var v2, double area_threshold) {
    const std::size_t F = v0.val().rows();

    Var e1 = o::sub(v0, v2);  // v1 - v3 in the reference construction
    Var e2 = o::sub(v1, v2);

    // centroid
    Var center = o::mul_const(o::vsum({v0, v1, v2}), 1.0 / 3.0);

    // columns of the 3x2 linear part A = [e1, e2] P^-1 for the reference
    // triangle p1=(0,1), p2=(-s3/2,-1/2), p3=(s3/2,-1/2):
    //   A.col0 = -e2 / sqrt(3),  A.col1 = (2 e1 - e2) / 3
    const double inv_sqrt3 = 1.0 / std::sqrt(3.0);
    Var a0 = o::mul_const(e2, -inv_sqrt3);
    Var a1 = o::mul_const(o::sub(o::mul_const(e1, 2.0), e2), 1.0 / 3.0);

    // 2x2 Gram matrix of A
    Var m00 = o::rows_dot3(a0, a0);
    Var m01 = o::rows_dot3(a0, a1);
    Var m11 = o::rows_dot3(a1, a1);

    Var tr = o::add(m00, m11);
    Var diff = o::sub(m00, m11);
    Var disc = o::sqrt_eps(o::add(o::square(diff), o::mul_const(o::square(m01), 4.0)), 1e-300);
    Var lam1 = o::mul_const(o::add(tr, disc), 0.5);
    Var lam2 = o::mul_const(o::sub(tr, disc), 0.5);

    // circumellipse semi-axes are sqrt(lambda); the one-sigma shape is half
    Var s1 = o::mul_const(o::sqrt_eps(lam1, 1e-300), 0.5);
    Var s2 = o::mul_const(o::sqrt_eps(o::relu(lam2), 1e-300), 0.5);
    Var semi_axes = o::concat_cols({s1, s2});

    // leading eigenvector of the Gram matrix: pick the better-conditioned of
    // the two closed forms per row, falling back to (1,0) near-isotropy
    Var wa = o::concat_cols({m01, o::sub(lam1, m00)});
    Var wb = o::concat_cols({o::sub(lam1, m11), m01});
    Tensor pick_a({F, 2}), isotropic({F, 2});
    {
        const Tensor& m01v = m01.val();
        const Tensor& m00v = m00.val();
        const Tensor& m11v = m11.val();
        const Tensor& l1v = lam1.val();
        const Tensor& trv = tr.val();
        const Tensor& dv = disc.val();
        for (std::size_t f = 0; f < F; ++f) {
            double na = m01v[f] * m01v[f] + (l1v[f] - m00v[f]) * (l1v[f] - m00v[f]);
            double nb = (l1v[f] - m11v[f]) * (l1v[f] - m11v[f]) + m01v[f] * m01v[f];
            double a = na >= nb ? 1.0 : 0.0;
            pick_a[f * 2] = pick_a[f * 2 + 1] = a;
            double iso = dv[f] <= 1e-12 * std::max(trv[f], 1e-300) ? 1.0 : 0.0;
            isotropic[f * 2] = isotropic[f * 2 + 1] = iso;
        }
    }
    Tensor e_ref({F, 2});
    for (std::size_t f = 0; f < F; ++f) e_ref[f * 2] = 1.0;
    Var w = o::where(pick_a, wa, wb);
    w = o::where(isotropic, tape.constant(e_ref), w);

    // lift to 3D: u1 = normalize(A w), n from the cross product, u2 = n x u1
    Var aw = o::add(o::mul_colvec(a0, o::slice_cols(w, 0, 1)),
                    o::mul_colvec(a1, o::slice_cols(w, 1, 2)));
    Var cross = o::rows_cross3(o::sub(v1, v0), o::sub(v2, v0));

    SteinerVars out;
    out.degenerate.resize(F, false);
    Tensor keep3({F, 3});
    {
        const Tensor& cv = cross.val();
        for (std::size_t f = 0; f < F; ++f) {
            double nx = cv[f * 3], ny = cv[f * 3 + 1], nz = cv[f * 3 + 2];
            double area = 0.5 * std::sqrt(nx * nx + ny * ny + nz * nz);
            bool degen = area <= area_threshold;
            out.degenerate[f] = degen;
            double k = degen ? 0.0 : 1.0;
            keep3[f * 3] = keep3[f * 3 + 1] = keep3[f * 3 + 2] = k;
        }
    }
    Var n = o::rows_normalize3(o::mul_mask(cross, keep3));
    Var u1 = o::rows_normalize3(o::mul_mask(aw, keep3));
    Var u2 = o::rows_cross3(n, u1);

    out.center = center;
    out.frame = o::mat3_from_cols(u1, u2, n);
    out.semi_axes = semi_axes;
    out.normal = n;
    return out;
}

Var barycentric_decode(Var raw) {
    if (raw.val().cols() != 3) throw std::runtime_error("barycentric_decode: cols != 3");
    Var sp = o::softplus(raw);
    const std::size_t N = sp.val().rows();
    Tensor ones({N, 3});
    ones.fill(1.0);
    Var sum = o::rows_dot3(sp, raw.tape->constant(ones));  // row sums
    Tensor one_col({N, 1});
    one_col.fill(1.0);
    Var inv = o::div(raw.tape->constant(one_col), sum);
    return o::mul_colvec(sp, inv);
}

}  // namespace splatcap
