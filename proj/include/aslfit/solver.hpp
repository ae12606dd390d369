// solver.hpp — iteratively regularized Gauss-Newton fitting with the joint
// TGV^2 prior: per GN step the model is linearized and the resulting
// saddle-point problem solved by a primal-dual splitting with backtracking
// line search on the primal step.
#pragma once

#include "aslfit/model.hpp"
#include "aslfit/tgv.hpp"
#include "aslfit/volume.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace asl {

struct GnConfig {
    // regularization / damping schedules
    double gamma_init = 1e-4;
    double gamma_final = 2e-6;
    double gamma_decay = 0.5;
    double delta_init = 1e-2;
    double delta_final = 1e-8;
    double delta_decay = 0.1;
    int gn_steps = 10;
    std::vector<int> inner_iters_schedule; // empty: 50*2^k capped at 1000
    double rel_tol = 1e-8;
    double alpha0_over_alpha1 = 0.5;
    enum class Levenberg { kIdentity, kJacobianDiagonal };
    Levenberg levenberg_mode = Levenberg::kJacobianDiagonal;
    // regularization weights scaled by estimated data SNR: gamma * snr_ref/snr
    bool snr_scaling = true;
    double snr_ref = 220.0; // calibrated on the 4-average synthetic preset
    double snr_max = 1e6;
    double data_norm_target = 100.0; // peak |mean PWI| after internal rescale
    // primal-dual line search
    double beta_init = 400.0;
    double mu = 0.5;
    double theta_init = 1.0;
    double linesearch_delta = -1.0; // < 0: use the current delta_k
    int max_shrinks = 50;
    // dimensionless unknowns: u_scaled = (f/map_scales[0], att/map_scales[1])
    std::array<double, 2> map_scales{300.0 / 6000.0, 6.0};
    std::array<double, 2> init{30.0 / 6000.0, 1.0}; // internal units
    int eval_every = 10;
    std::array<double, 2> clamp_cbf{0.0, 300.0 / 6000.0};
    std::array<double, 2> clamp_att{0.0, 6.0};

    double alpha0() const { return alpha0_over_alpha1; }
    double alpha1() const { return 1.0; }
    std::vector<int> schedule() const;
    void validate() const;
};

using ProgressFn =
    std::function<void(int gn_step, int iteration, double objective, double tau, double beta)>;

// Linearization at u_k: scaled Jacobian handle and fused data
// d~ = d - A(u_k) + DA u_k.
struct Linearization {
    JacobianField jac; // partials w.r.t. the scaled unknowns
    Series d_tilde;
    FieldStack u_k; // scaled anchor
};

Linearization linearize(const ParameterMaps &u_k, const Protocol &proto, const Series &d,
                        std::array<double, 2> map_scales);

// Per-voxel diagonal of DA^T DA (or all-ones for the plain Levenberg mode).
FieldStack levenberg_weight(const JacobianField &jac, GnConfig::Levenberg mode);

struct PdState {
    FieldStack u; // scaled primal, 2 comps
    FieldStack v; // 6 comps
    FieldStack z0, z1;
    Series r;
    double tau = 0.0; // 0: initialize from the operator-norm bound
    double beta = 400.0;
    double theta = 1.0;
    double mu = 0.5;
};

PdState make_pd_state(const Linearization &lin);

struct PdResult {
    int iterations = 0;
    int trials = 0;         // line-search evaluations
    double objective = 0.0; // linearized objective at the final iterate
    // per accepted iteration: {sqrt(beta)*tau*||K^H dy||, ||dy||}
    std::vector<std::array<double, 2>> accepted_checks;
};

PdResult pd_solve(const Linearization &lin, double gamma, double delta,
                  const FieldStack &weight_m, PdState &state, int max_iters, double rel_tol,
                  const GnConfig &cfg, int gn_step = 0, const ProgressFn &progress = {});

// Linearized objective of one GN subproblem (the convergence functional).
double objective_linearized(const Linearization &lin, const PdState &state, double gamma,
                            double delta, const FieldStack &weight_m, const GnConfig &cfg);

// Nonlinear TGV^2 objective; v lives in the scaled gradient space.
double objective(const ParameterMaps &u, const FieldStack &v, const Series &d,
                 const Protocol &proto, double gamma, double alpha0, double alpha1,
                 std::array<double, 2> map_scales);

// Ratio of the max magnitude of the central 5% of k-space of the mean PWI
// volume to the std of the outermost 5% shell; capped at max_factor.
double snr_scale(const Series &d, double max_factor = 1e6);

struct FitInfo {
    std::vector<double> objective_trace; // nonlinear objective after each GN step
    std::vector<int> inner_iterations;
    double snr_factor = 1.0;
    double gamma_scale = 1.0;
    double data_scale = 1.0;
    double wall_seconds = 0.0;
};

ParameterMaps irgn_fit(const Series &d, const Protocol &proto, const GnConfig &cfg,
                       const ParameterMaps &init, FitInfo *info = nullptr,
                       const ProgressFn &progress = {});
ParameterMaps irgn_fit(const Series &d, const Protocol &proto, const GnConfig &cfg,
                       FitInfo *info = nullptr, const ProgressFn &progress = {});

} // namespace asl
