// model.hpp — pCASL signal model (standard three-branch kinetic curve),
// analytic derivatives and full-volume evaluation.
#pragma once

#include "aslfit/volume.hpp"

#include <vector>

namespace asl {

// Fixed acquisition parameters. Times in seconds; t[n] is PLD + labeling
// duration, so t[n] >= tau[n] is required. m0 is the proton-density volume.
struct Protocol {
    std::vector<double> t;
    std::vector<double> tau;
    double alpha = 0.85;
    double lambda = 0.9;
    double t1 = 1.33;
    double t1b = 1.65;
    Volume m0;

    int n_frames() const { return static_cast<int>(t.size()); }
    Grid grid() const { return m0.grid; }
    void validate() const; // throws std::invalid_argument
};

// 1/T1app = 1/T1 + f/lambda
double t1_app(double f, double t1, double lambda);

// Signal of one frame for one voxel. Branch selection is right-continuous
// in t: t < att -> 0, att <= t < att+tau -> inflow, att+tau <= t -> decay.
double pcasl_signal(double f, double att, double t, double tau, double alpha, double lambda,
                    double t1, double t1b, double m0);

struct SignalDeriv {
    double d_f = 0.0;
    double d_att = 0.0;
};

// Branch-wise analytic partials, including the chain-rule term through
// T1app(f). Same branch convention as pcasl_signal.
SignalDeriv pcasl_signal_deriv(double f, double att, double t, double tau, double alpha,
                               double lambda, double t1, double t1b, double m0);

// Per-voxel, per-frame forward model. Throws on grid mismatch.
Series signal_series(const ParameterMaps &u, const Protocol &proto);

// Per-voxel, per-frame partials, stored as two series (d/df, d/datt).
struct JacobianField {
    Series d_f;
    Series d_att;
};
JacobianField signal_jacobian(const ParameterMaps &u, const Protocol &proto);

} // namespace asl
