// tgv.hpp — finite-difference operators, their negative adjoints, joint
// Frobenius semi-norms and the proximal/projection maps of the TGV^2
// saddle-point problem.
//
// Conventions, fixed project-wide:
//  * grad uses forward differences with symmetric extension (difference
//    across the last index in each direction is 0);
//  * sym_grad uses backward differences with symmetric extension
//    (difference across the first index is 0);
//  * gradient components are ordered (di, dj, dk), symmetrized components
//    (ii, jj, kk, ij, ik, jk), each interleaved over the N_u unknowns as
//    comp*N_u + l;
//  * cross components (ij, ik, jk) are stored plain; the factor-2 weight
//    of the ||.||_{1,2,F} chi-norm lives in the norms, the projections and
//    div2's bookkeeping, so <Ev, z>_weighted == <v, -div2 z>_plain.
#pragma once

#include "aslfit/volume.hpp"

namespace asl {

FieldStack grad(const FieldStack &u);     // N_u comps -> 3*N_u
FieldStack sym_grad(const FieldStack &v); // 3*N_u -> 6*N_u
FieldStack div1(const FieldStack &z0);    // 3*N_u -> N_u, -div1 = grad^T
FieldStack div2(const FieldStack &z1);    // 6*N_u -> 3*N_u, -div2 = sym_grad^T (weighted)

// In-place variants writing into pre-sized outputs (hot path of the solver).
void grad_into(const FieldStack &u, FieldStack &out);
void sym_grad_into(const FieldStack &v, FieldStack &out);
void div1_into(const FieldStack &z0, FieldStack &out);
void div2_into(const FieldStack &z1, FieldStack &out);

// Sum over voxels of the pointwise root-sum-square across components and
// unknowns; chi variant weights the cross components by 2.
double frob_seminorm_v(const FieldStack &v, int n_u);
double frob_seminorm_chi(const FieldStack &chi, int n_u);

// Pointwise projection onto the ball of the given radius, one scale factor
// per voxel computed from the joint magnitude (chi_weights selects the
// factor-2 cross weighting). radius must be > 0.
void prox_dual_ball(FieldStack &z, int n_u, double radius, bool chi_weights);

// (xi - sigma*d_tilde)/(1+sigma), pointwise. sigma must be > 0.
void prox_r(Series &xi, double sigma, const Series &d_tilde);

// (1 + tau*delta*M)^-1 (tau*delta*M*anchor + xi), pointwise per unknown.
// weight_m holds the diagonal of M (>= 0), one entry per unknown per voxel.
void prox_g(FieldStack &xi, double tau_delta, const FieldStack &weight_m, const FieldStack &anchor);

} // namespace asl
