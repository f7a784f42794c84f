#include "splatcap/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "splatcap/threading.hpp"

namespace splatcap {

namespace o = splatcap::op;

namespace {
constexpr int kTile = 16;
constexpr double kAlphaClamp = 0.99;
constexpr double kAlphaSkip = 1.0 / 255.0;
constexpr double kSigmaCut = 9.0;  // q = d^T conic d beyond 3 sigma
constexpr double kStopT = 1e-4;
}  // namespace

ProjectedSplats project_gaussians(Tape& tape, const CameraModel& cam, Var centers, Var cov,
                                  Var color, Var opacity) {
    const std::size_t N = centers.val().rows();

    // camera-space points for all primitives (cheap), cull by near plane
    Eigen::Matrix3d R = cam.rotation();
    Tensor rt({3, 3}), tr({1, 3});
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) rt.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = R(j, i);  // R^T
        tr[static_cast<std::size_t>(i)] = cam.translation()(i);
    }
    Var cam_all = o::add_rowvec(o::matmul_const(centers, rt), tape.constant(tr));

    std::vector<std::size_t> visible;
    for (std::size_t i = 0; i < N; ++i)
        if (cam_all.val().at(i, 2) > cam.near_plane) visible.push_back(i);

    ProjectedSplats out;
    out.width = cam.width;
    out.height = cam.height;
    out.source_index = visible;
    const std::size_t M = visible.size();
    if (M == 0) {
        out.means = tape.constant(Tensor({0, 2}));
        out.conic = tape.constant(Tensor({0, 3}));
        out.opacity = tape.constant(Tensor({0, 1}));
        out.color = tape.constant(Tensor({0, 3}));
        return out;
    }

    Var pc = o::gather_rows(cam_all, visible);
    Var x = o::slice_cols(pc, 0, 1), y = o::slice_cols(pc, 1, 2), z = o::slice_cols(pc, 2, 3);
    Tensor onecol({M, 1});
    onecol.fill(1.0);
    Var invz = o::div(tape.constant(onecol), z);

    Var u = o::add_const(o::mul_const(o::mul(x, invz), cam.fx), cam.cx);
    Var v = o::add_const(o::mul_const(o::mul(y, invz), cam.fy), cam.cy);
    out.means = o::concat_cols({u, v});

    // covariance to camera frame: R Sigma R^T with constant rotation rows
    Tensor r_tile({M, 9}), rt_tile({M, 9});
    for (std::size_t m = 0; m < M; ++m)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                r_tile[m * 9 + static_cast<std::size_t>(i * 3 + j)] = R(i, j);
                rt_tile[m * 9 + static_cast<std::size_t>(i * 3 + j)] = R(j, i);
            }
    Var cov_vis = o::gather_rows(cov, visible);
    Var cov_cam = o::rows_mat3_mul(tape.constant(r_tile), o::rows_mat3_mul(cov_vis, tape.constant(rt_tile)));

    // projection Jacobian rows: [fx/z, 0, -fx x/z^2; 0, fy/z, -fy y/z^2]
    Tensor zero_col({M, 1});
    Var zc = tape.constant(zero_col);
    Var j00 = o::mul_const(invz, cam.fx);
    Var j02 = o::neg(o::mul_const(o::mul(o::mul(x, invz), invz), cam.fx));
    Var j11 = o::mul_const(invz, cam.fy);
    Var j12 = o::neg(o::mul_const(o::mul(o::mul(y, invz), invz), cam.fy));
    Var jac = o::concat_cols({j00, zc, j02, zc, j11, j12});

    Var cov2d = o::quadform23(jac, cov_cam);  // (a, b, c)
    Tensor dilate({M, 3});
    for (std::size_t m = 0; m < M; ++m) {
        dilate[m * 3] = 0.3;
        dilate[m * 3 + 2] = 0.3;
    }
    cov2d = o::add(cov2d, tape.constant(dilate));
    out.cov2d = cov2d.val().v;

    // conic = inverse of the 2x2 (positive definite after dilation)
    Var a = o::slice_cols(cov2d, 0, 1), b = o::slice_cols(cov2d, 1, 2), c = o::slice_cols(cov2d, 2, 3);
    Var det = o::sub(o::mul(a, c), o::square(b));
    Var invdet = o::div(tape.constant(onecol), det);
    out.conic = o::concat_cols({o::mul(c, invdet), o::neg(o::mul(b, invdet)), o::mul(a, invdet)});

    out.opacity = o::gather_rows(opacity, visible);
    out.color = o::gather_rows(color, visible);
    out.depths.resize(M);
    for (std::size_t m = 0; m < M; ++m) out.depths[m] = z.val()[m];
    return out;
}

namespace {

struct RasterAux {
    // depth-ordered splat data (flat copies for cache friendliness)
    std::vector<std::size_t> order;       // ordered index into the splat rows
    std::vector<double> mu, con, op, col; // ordered: [2], [3], [1], [3] per splat
    std::vector<std::vector<std::uint32_t>> tile_lists;
    int tiles_x = 0, tiles_y = 0, width = 0, height = 0;
    std::array<double, 3> bg{};
    // per-pixel forward state for the backward pass
    std::vector<double> final_t;
    std::vector<std::int32_t> n_contrib;  // contributions processed per pixel
};

void build_tiles(RasterAux& aux) {
    const std::size_t M = aux.order.size();
    aux.tiles_x = (aux.width + kTile - 1) / kTile;
    aux.tiles_y = (aux.height + kTile - 1) / kTile;
    aux.tile_lists.assign(static_cast<std::size_t>(aux.tiles_x * aux.tiles_y), {});
    for (std::size_t k = 0; k < M; ++k) {
        if (aux.op[k] < kAlphaSkip) continue;  // can never pass the alpha skip
        double a = aux.con[k * 3], b = aux.con[k * 3 + 1], c = aux.con[k * 3 + 2];
        // bounding radius from the covariance (conic is its inverse)
        double det = a * c - b * b;
        if (det <= 0) continue;
        double ca = c / det, cc = a / det;  // cov2d diagonal back from conic
        double mid = 0.5 * (ca + cc);
        double disc = std::sqrt(std::max(0.0, mid * mid - (ca * cc - (b / det) * (b / det))));
        double r = 3.0 * std::sqrt(std::max(1e-12, mid + disc));
        double ux = aux.mu[k * 2], uy = aux.mu[k * 2 + 1];
        int tx0 = std::max(0, static_cast<int>(std::floor((ux - r) / kTile)));
        int tx1 = std::min(aux.tiles_x - 1, static_cast<int>(std::floor((ux + r) / kTile)));
        int ty0 = std::max(0, static_cast<int>(std::floor((uy - r) / kTile)));
        int ty1 = std::min(aux.tiles_y - 1, static_cast<int>(std::floor((uy + r) / kTile)));
        if (ux + r < 0 || ux - r > aux.width - 1 || uy + r < 0 || uy - r > aux.height - 1) continue;
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                aux.tile_lists[static_cast<std::size_t>(ty * aux.tiles_x + tx)].push_back(
                    static_cast<std::uint32_t>(k));
    }
}

void raster_forward_tile(const RasterAux& aux, std::size_t tile, Tensor& img,
                         std::vector<double>& final_t, std::vector<std::int32_t>& n_contrib) {
    const auto& list = aux.tile_lists[tile];
    int tx = static_cast<int>(tile) % aux.tiles_x;
    int ty = static_cast<int>(tile) / aux.tiles_x;
    int x0 = tx * kTile, y0 = ty * kTile;
    int x1 = std::min(x0 + kTile, aux.width), y1 = std::min(y0 + kTile, aux.height);
    for (int py = y0; py < y1; ++py)
        for (int px = x0; px < x1; ++px) {
            double T = 1.0;
            double rgb[3] = {0, 0, 0};
            std::int32_t contrib = 0;
            for (std::size_t i = 0; i < list.size(); ++i) {
                std::size_t k = list[i];
                double dx = px - aux.mu[k * 2];
                double dy = py - aux.mu[k * 2 + 1];
                double q = aux.con[k * 3] * dx * dx + 2.0 * aux.con[k * 3 + 1] * dx * dy +
                           aux.con[k * 3 + 2] * dy * dy;
                contrib = static_cast<std::int32_t>(i + 1);
                if (q > kSigmaCut || q < 0) continue;
                double alpha = aux.op[k] * std::exp(-0.5 * q);
                if (alpha > kAlphaClamp) alpha = kAlphaClamp;
                if (alpha < kAlphaSkip) continue;
                for (int c = 0; c < 3; ++c) rgb[c] += aux.col[k * 3 + static_cast<std::size_t>(c)] * alpha * T;
                T *= 1.0 - alpha;
                if (T < kStopT) break;
            }
            std::size_t pix = static_cast<std::size_t>(py * aux.width + px);
            for (int c = 0; c < 3; ++c)
                img[pix * 4 + static_cast<std::size_t>(c)] = rgb[c] + aux.bg[static_cast<std::size_t>(c)] * T;
            img[pix * 4 + 3] = 1.0 - T;
            final_t[pix] = T;
            n_contrib[pix] = contrib;
        }
}

struct SplatGrads {
    std::vector<double> mu, con, op, col;  // same layout as RasterAux, ordered indexing
    void init(std::size_t M) {
        mu.assign(M * 2, 0.0);
        con.assign(M * 3, 0.0);
        op.assign(M, 0.0);
        col.assign(M * 3, 0.0);
    }
    void add(const SplatGrads& other) {
        for (std::size_t i = 0; i < mu.size(); ++i) mu[i] += other.mu[i];
        for (std::size_t i = 0; i < con.size(); ++i) con[i] += other.con[i];
        for (std::size_t i = 0; i < op.size(); ++i) op[i] += other.op[i];
        for (std::size_t i = 0; i < col.size(); ++i) col[i] += other.col[i];
    }
};

void raster_backward_tile(const RasterAux& aux, std::size_t tile, const Tensor& gimg,
                          SplatGrads& g) {
    const auto& list = aux.tile_lists[tile];
    if (list.empty()) return;
    int tx = static_cast<int>(tile) % aux.tiles_x;
    int ty = static_cast<int>(tile) / aux.tiles_x;
    int x0 = tx * kTile, y0 = ty * kTile;
    int x1 = std::min(x0 + kTile, aux.width), y1 = std::min(y0 + kTile, aux.height);
    for (int py = y0; py < y1; ++py)
        for (int px = x0; px < x1; ++px) {
            std::size_t pix = static_cast<std::size_t>(py * aux.width + px);
            std::int32_t contrib = aux.n_contrib[pix];
            if (contrib == 0) continue;
            const double* gp = gimg.data() + pix * 4;
            if (gp[0] == 0 && gp[1] == 0 && gp[2] == 0 && gp[3] == 0) continue;
            double t_final = aux.final_t[pix];
            // suffix accumulators: S_c = sum_{j>k} col_j alpha_j T_j + bg_c T_final
            double S[3] = {aux.bg[0] * t_final, aux.bg[1] * t_final, aux.bg[2] * t_final};
            double T_after = t_final;  // T_{k+1} while walking back
            for (std::int32_t i = contrib - 1; i >= 0; --i) {
                std::size_t k = list[static_cast<std::size_t>(i)];
                double dx = px - aux.mu[k * 2];
                double dy = py - aux.mu[k * 2 + 1];
                double ca = aux.con[k * 3], cb = aux.con[k * 3 + 1], cc = aux.con[k * 3 + 2];
                double q = ca * dx * dx + 2.0 * cb * dx * dy + cc * dy * dy;
                if (q > kSigmaCut || q < 0) continue;
                double alpha_raw = aux.op[k] * std::exp(-0.5 * q);
                bool clamped = alpha_raw > kAlphaClamp;
                double alpha = clamped ? kAlphaClamp : alpha_raw;
                if (alpha < kAlphaSkip) continue;
                double T_k = T_after / (1.0 - alpha);

                // color gradient and dL/dalpha
                double dL_dalpha = 0.0;
                for (int c = 0; c < 3; ++c) {
                    double colv = aux.col[k * 3 + static_cast<std::size_t>(c)];
                    g.col[k * 3 + static_cast<std::size_t>(c)] += gp[c] * alpha * T_k;
                    dL_dalpha += gp[c] * (colv * T_k - S[static_cast<std::size_t>(c)] / (1.0 - alpha));
                }
                dL_dalpha += gp[3] * t_final / (1.0 - alpha);  // alpha channel = 1 - T_final

                if (!clamped) {
                    double ea = std::exp(-0.5 * q);
                    g.op[k] += dL_dalpha * ea;
                    double dL_dq = dL_dalpha * alpha * (-0.5);
                    g.con[k * 3] += dL_dq * dx * dx;
                    g.con[k * 3 + 1] += dL_dq * 2.0 * dx * dy;
                    g.con[k * 3 + 2] += dL_dq * dy * dy;
                    double dq_ddx = 2.0 * ca * dx + 2.0 * cb * dy;
                    double dq_ddy = 2.0 * cb * dx + 2.0 * cc * dy;
                    g.mu[k * 2] += dL_dq * (-dq_ddx);
                    g.mu[k * 2 + 1] += dL_dq * (-dq_ddy);
                }

                for (int c = 0; c < 3; ++c)
                    S[static_cast<std::size_t>(c)] += aux.col[k * 3 + static_cast<std::size_t>(c)] * alpha * T_k;
                T_after = T_k;
            }
        }
}

}  // namespace

Var rasterize(Tape& tape, const ProjectedSplats& splats, const std::array<double, 3>& background) {
    const std::size_t M = splats.means.val().rows();
    auto aux = std::make_shared<RasterAux>();
    aux->width = splats.width;
    aux->height = splats.height;
    aux->bg = background;

    // stable front-to-back order by depth, ties by index
    aux->order.resize(M);
    std::iota(aux->order.begin(), aux->order.end(), 0);
    std::stable_sort(aux->order.begin(), aux->order.end(), [&](std::size_t a, std::size_t b) {
        return splats.depths[a] < splats.depths[b];
    });

    const Tensor& mu = splats.means.val();
    const Tensor& con = splats.conic.val();
    const Tensor& op = splats.opacity.val();
    const Tensor& col = splats.color.val();
    aux->mu.resize(M * 2);
    aux->con.resize(M * 3);
    aux->op.resize(M);
    aux->col.resize(M * 3);
    for (std::size_t i = 0; i < M; ++i) {
        std::size_t k = aux->order[i];
        aux->mu[i * 2] = mu[k * 2];
        aux->mu[i * 2 + 1] = mu[k * 2 + 1];
        for (int c = 0; c < 3; ++c) {
            aux->con[i * 3 + static_cast<std::size_t>(c)] = con[k * 3 + static_cast<std::size_t>(c)];
            aux->col[i * 3 + static_cast<std::size_t>(c)] = col[k * 3 + static_cast<std::size_t>(c)];
        }
        aux->op[i] = op[k];
    }
    build_tiles(*aux);

    const std::size_t H = static_cast<std::size_t>(aux->height), W = static_cast<std::size_t>(aux->width);
    Tensor img({H, W, 4});
    aux->final_t.assign(H * W, 1.0);
    aux->n_contrib.assign(H * W, 0);
    const std::size_t ntiles = aux->tile_lists.size();
    ThreadPool::instance().parallel_for(
        0, ntiles,
        [&](std::size_t t0, std::size_t t1) {
            for (std::size_t t = t0; t < t1; ++t)
                raster_forward_tile(*aux, t, img, aux->final_t, aux->n_contrib);
        },
        1);

    int mu_id = splats.means.id, con_id = splats.conic.id, op_id = splats.opacity.id,
        col_id = splats.color.id;
    return tape.record(std::move(img), "rasterize", [aux, mu_id, con_id, op_id, col_id](
                                                        Tape& tp, Tape::Node& self) {
        const std::size_t M = aux->order.size();
        const std::size_t ntiles = aux->tile_lists.size();
        std::vector<SplatGrads> tile_grads;
        // per-thread-chunk buffers merged in fixed order keep this deterministic
        std::vector<std::pair<std::size_t, std::size_t>> ranges;
        const std::size_t nchunks = std::min<std::size_t>(8, ntiles);
        for (std::size_t c = 0; c < nchunks; ++c) {
            std::size_t t0 = c * ntiles / nchunks, t1 = (c + 1) * ntiles / nchunks;
            ranges.emplace_back(t0, t1);
        }
        tile_grads.resize(ranges.size());
        ThreadPool::instance().parallel_for(
            0, ranges.size(),
            [&](std::size_t c0, std::size_t c1) {
                for (std::size_t c = c0; c < c1; ++c) {
                    tile_grads[c].init(M);
                    for (std::size_t t = ranges[c].first; t < ranges[c].second; ++t)
                        raster_backward_tile(*aux, t, self.grad, tile_grads[c]);
                }
            },
            1);
        SplatGrads total;
        total.init(M);
        for (const auto& g : tile_grads) total.add(g);

        Tensor& gmu = tp.grad(mu_id);
        Tensor& gcon = tp.grad(con_id);
        Tensor& gop = tp.grad(op_id);
        Tensor& gcol = tp.grad(col_id);
        for (std::size_t i = 0; i < M; ++i) {
            std::size_t k = aux->order[i];
            gmu[k * 2] += total.mu[i * 2];
            gmu[k * 2 + 1] += total.mu[i * 2 + 1];
            for (int c = 0; c < 3; ++c) {
                gcon[k * 3 + static_cast<std::size_t>(c)] += total.con[i * 3 + static_cast<std::size_t>(c)];
                gcol[k * 3 + static_cast<std::size_t>(c)] += total.col[i * 3 + static_cast<std::size_t>(c)];
            }
            gop[k] += total.op[i];
        }
    });
}

Tensor render_image(const CameraModel& cam, const Tensor& centers, const Tensor& cov,
                    const Tensor& color, const Tensor& opacity,
                    const std::array<double, 3>& background) {
    Tape tape;
    auto proj = project_gaussians(tape, cam, tape.constant(centers), tape.constant(cov),
                                  tape.constant(color), tape.constant(opacity));
    Var img = rasterize(tape, proj, background);
    return img.val();
}

}  // namespace splatcap
