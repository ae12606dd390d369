// phantom.hpp — synthetic ground truth (nested-ellipsoid brain stand-in),
// the C1-C3 pathology cases and the noisy acquisition simulation.
#pragma once

#include "aslfit/model.hpp"
#include "aslfit/volume.hpp"

#include <cstdint>

namespace asl {

enum class PathologyCase { C1, C2, C3 };

struct PhantomSpec {
    Grid grid{72, 60, 60};
    PathologyCase pathology_case = PathologyCase::C1;
    double noise_sigma = -1.0; // < 0: auto (GM temporal SNR of one average ~ 5)
    std::uint64_t seed = 1;
    int averages = 2;      // repetitions of the 16-point schedule (paper: 2 -> N_d=32)
    bool averaged = false; // average repetitions down to 16 frames
    bool real_part = false; // take real parts instead of magnitudes
    // healthy tissue values (external units for CBF)
    double gm_cbf = 65.0, wm_cbf = 20.0;  // ml/100g/min
    double gm_att = 0.8, wm_att = 1.5;    // s
    double gm_m0 = 0.8, wm_m0 = 0.65;
    double t1_tissue = 1.33; // s, tissue-uniform
    // pathology magnitudes
    double pathology_cbf_factor = 2.0; // C2, C3: local CBF multiplier
    double pathology_att = 0.5;        // s, C3 only

    void validate() const;
};

// Tissue labels
enum : int { kLabelBackground = 0, kLabelGm = 1, kLabelWm = 2, kLabelPathology = 3 };

struct GroundTruth {
    ParameterMaps maps; // internal units
    Volume m0;
    Volume t1;
    Volume labels; // majority label per voxel
    PhantomSpec spec;
};

// Deterministic geometry rendered at 3x the target grid, block-averaged down;
// boundary voxels carry mixed-tissue values.
GroundTruth generate_ground_truth(const PhantomSpec &spec);

// Paper's synthetic schedule: tau = (1050, 1300, 1550, 1800, ..., 1800) ms,
// t = 1050:250:4800 ms, alpha = 0.85, lambda = 0.9, T1b = 1650 ms; repeated
// `averages` times. m0 comes from the ground truth.
Protocol protocol_preset(const GroundTruth &gt, int averages);

struct Simulated {
    Series pwi;
    Series control;
    Series label;
};

// Control = (1-lambda)*M0 per frame, Label = Control - PWI; independent
// complex Gaussian noise (std sigma per channel) on each C and L volume,
// magnitudes taken, PWI = |C| - |L|.
Simulated simulate_acquisition(const GroundTruth &gt, const Protocol &proto, double sigma,
                               std::uint64_t seed, bool real_part = false);

// sigma giving GM temporal SNR ~ 5 for a single average.
double auto_noise_sigma(const GroundTruth &gt, const Protocol &proto);

// Average groups of `averages` repetitions down to one 16-frame series.
Series average_repetitions(const Series &s, int averages);
Protocol protocol_first_repetition(const Protocol &p, int averages);

} // namespace asl
