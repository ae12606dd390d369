// nlls.hpp — voxel-wise box-constrained nonlinear least squares, the
// unregularized reference method.
#pragma once

#include "aslfit/model.hpp"
#include "aslfit/volume.hpp"

#include <array>
#include <cstdint>
#include <span>

namespace asl {

struct NllsConfig {
    std::array<double, 2> bounds_cbf{0.0, 300.0 / 6000.0}; // ml/g/s
    std::array<double, 2> bounds_att{0.0, 6.0};            // s
    int max_iters = 200;
    double grad_tol = 1e-12;
    std::array<double, 2> init{30.0 / 6000.0, 1.0}; // (f0, att0), internal units
    int multistart = 4;                             // extra random starts in the box
    std::uint64_t seed = 1;

    void validate() const;
};

// QA flags aggregated per voxel
enum NllsFlag : std::uint32_t {
    kNllsZeroData = 1u << 0,
    kNllsNonIdentifiable = 1u << 1, // f below 1e-3 ml/100g/min
    kNllsBoundCbf = 1u << 2,
    kNllsBoundAtt = 1u << 3,
    kNllsMaxIters = 1u << 4,
};

struct NllsVoxelResult {
    double cbf = 0.0;
    double att = 0.0;
    double residual_norm = 0.0;
    std::uint32_t flags = 0;
};

// Projected Levenberg-Marquardt on one voxel's frame series; deterministic
// given the config (random starts come from the seeded counter RNG keyed by
// voxel). voxel index keys the multistart draws.
NllsVoxelResult nlls_fit_voxel(std::span<const double> series, const Protocol &proto, double m0,
                               const NllsConfig &cfg, std::uint64_t voxel = 0);

struct NllsVolumeResult {
    ParameterMaps maps;   // internal units
    Volume residual;      // per-voxel residual norm
    Volume flags;         // NllsFlag bits, stored as doubles
};

NllsVolumeResult nlls_fit_volume(const Series &d, const Protocol &proto, const NllsConfig &cfg);

} // namespace asl
