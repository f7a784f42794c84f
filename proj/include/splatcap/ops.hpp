#pragma once

#include <vector>

#include "splatcap/tape.hpp"

// Differentiable tensor operations. Everything here records onto the tape of
// its first Var argument; mixing tapes is a logic error.

namespace splatcap::op {

// elementwise, same shape
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

Var add_const(Var a, double c);
Var mul_const(Var a, double c);
Var neg(Var a);

Var relu(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var sqrt_eps(Var a, double eps);  // sqrt(x + eps), smooth at x = 0
Var sin(Var a);
Var cos(Var a);
Var abs(Var a);
Var square(Var a);
Var clamp(Var a, double lo, double hi);

// Rodrigues coefficients as analytic functions of the squared angle t2:
//   rot_coef_a = sin(t)/t, rot_coef_b = (1-cos(t))/t^2, t = sqrt(t2)
// Series expansions keep both smooth through t2 = 0.
Var rot_coef_a(Var t2);
Var rot_coef_b(Var t2);
// theta/(2 sin(theta)) as a function of c = cos(theta); smooth at c = 1,
// diverges at c = -1 (callers stay away from half-turns).
Var rot_log_coef(Var c);

// select by constant 0/1 mask (same shape as a and b)
Var where(const Tensor& mask, Var a, Var b);
// elementwise product with a constant tensor
Var mul_mask(Var a, const Tensor& mask);

// reductions
Var sum(Var a);
Var mean(Var a);

// linear algebra
Var matmul(Var a, Var b);                  // [M,K]x[K,N]
Var matmul_const(Var a, const Tensor& b);  // constant right operand
Var const_matmul(const Tensor& a, Var b);  // constant left operand
Var add_rowvec(Var a, Var r);              // [M,N] + [1,N]
Var mul_colvec(Var a, Var c);              // rows of [M,N] scaled by [M,1]

// structure
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, std::size_t c0, std::size_t c1);
Var stack_rows(const std::vector<Var>& parts);
Var reshape(Var a, std::vector<std::size_t> dims);
Var gather_rows(Var a, std::vector<std::size_t> idx);
Var vsum(const std::vector<Var>& terms);  // elementwise sum of same-shape vars

// batched 3-vector / 3x3 helpers (rows are independent)
Var rows_dot3(Var a, Var b);        // [M,3],[M,3] -> [M,1]
Var rows_cross3(Var a, Var b);      // [M,3],[M,3] -> [M,3]
Var rows_normalize3(Var a);         // zero rows stay zero
Var rows_skew3(Var v);              // [M,3] -> [M,9]
Var rows_mat3_mul(Var a, Var b);    // [M,9],[M,9] -> [M,9]
Var rows_mat3_transpose(Var a);     // [M,9] -> [M,9]
Var rows_mat3_vec3(Var a, Var v);   // [M,9],[M,3] -> [M,3]
Var mat3_from_cols(Var c0, Var c1, Var c2);  // three [M,3] -> [M,9]

// pose code gating: out[v, 3j+k] = gate[v,j] * theta[j,k]
Var pose_gate(Var theta, const Tensor& gate);

// rows of [M,12] are row-major 3x4 affines applied to [M,3] points
Var affine_rows(Var transforms, Var points);

// J S J^T per row: J rows are 2x3 ([M,6]), S rows 3x3 symmetric ([M,9]),
// output rows (xx, xy, yy)
Var quadform23(Var j, Var s);

// images (rank-3 {H,W,C} and rank-2 {H,W})
Var channel(Var img, std::size_t c);
Var slice_patch(Var img, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w);
// separable valid-mode convolution with a symmetric 1-D kernel
Var conv_separable_valid(Var img, const std::vector<double>& kernel);

}  // namespace splatcap::op
