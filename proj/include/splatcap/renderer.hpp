#pragma once

#include <array>

#include "splatcap/camera.hpp"
#include "splatcap/ops.hpp"
#include "splatcap/tape.hpp"

namespace splatcap {

// Splats that survived the near-plane cull, projected to image space.
// Depths are detached: they fix the compositing order but carry no gradient.
struct ProjectedSplats {
    Var means;    // [M,2] pixels
    Var conic;    // [M,3] inverse 2D covariance (a,b,c): q = a dx^2 + 2b dxdy + c dy^2
    Var opacity;  // [M,1]
    Var color;    // [M,3]
    std::vector<double> depths;
    std::vector<double> cov2d;              // detached (a,b,c) for footprint radii
    std::vector<std::size_t> source_index;  // row in the input primitive arrays
    int width = 0, height = 0;
};

// EWA projection: mean by pinhole projection, covariance by J W Sigma W^T J^T
// with +0.3 px^2 diagonal dilation. Gradients flow to centers/cov/color/
// opacity but not to the camera.
ProjectedSplats project_gaussians(Tape& tape, const CameraModel& cam, Var centers, Var cov,
                                  Var color, Var opacity);

// Depth-sorted (stable, index tie-break) front-to-back alpha compositing over
// 16x16 tiles. Per pixel: alpha = min(0.99, opacity * exp(-q/2)), pairs with
// q > 9 (3 sigma) or alpha < 1/255 are skipped, termination at
// transmittance < 1e-4. The 3 sigma cutoff applies per pixel, so the tile
// candidate pruning is exactly equivalent to evaluating every splat.
// Output {H,W,4}: rgb composited over the background, alpha = 1 - T.
Var rasterize(Tape& tape, const ProjectedSplats& splats, const std::array<double, 3>& background);

// convenience: full pipeline to a plain image tensor (no gradient use)
Tensor render_image(const CameraModel& cam, const Tensor& centers, const Tensor& cov,
                    const Tensor& color, const Tensor& opacity,
                    const std::array<double, 3>& background);

}  // namespace splatcap
