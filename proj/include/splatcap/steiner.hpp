#pragma once

#include "splatcap/ops.hpp"
#include "splatcap/tape.hpp"

namespace splatcap {

// Per-triangle Gaussian base shape derived from the Steiner ellipses. The
// affine map taking the reference equilateral triangle (inscribed in the
// unit circle at angles 90/210/330 degrees) to the triangle carries the unit
// circle to the Steiner circumellipse; the one-sigma ellipse is half of it
// (the inellipse, tangent at edge midpoints). The third axis is a constant
// epsilon along the face normal.
struct SteinerVars {
    Var center;     // [F,3] triangle centroids
    Var frame;      // [F,9] rotation with columns (u1, u2, n)
    Var semi_axes;  // [F,2] one-sigma tangential semi-axes, descending
    Var normal;     // [F,3] unit normals (zero for degenerate faces)
    std::vector<bool> degenerate;
};

// v0,v1,v2: [F,3] triangle vertices
SteinerVars steiner_gaussians(Tape& tape, Var v0, Var v1, Var v2, double area_threshold = 1e-12);

// softplus + normalize; all components positive, sum to one
Var barycentric_decode(Var raw);  // [N,3] -> [N,3]

}  // namespace splatcap
