// config.hpp — run configuration: JSON document with model/solver/baseline/
// phantom sections, schema-validated (unknown keys rejected), paper defaults
// as the shipped preset.
#pragma once

#include "aslfit/nlls.hpp"
#include "aslfit/phantom.hpp"
#include "aslfit/solver.hpp"

#include <string>

namespace asl {

struct ModelDefaults {
    double alpha = 0.85;
    double lambda = 0.9;
    double t1 = 1.33;  // s
    double t1b = 1.65; // s
};

struct RunConfig {
    ModelDefaults model;
    GnConfig solver;
    NllsConfig baseline;
    PhantomSpec phantom;
    int replica_n = 20;

    void validate() const;
};

// preset "paper": full 72x60x60 grid, replica n=100
// preset "desk":  36x30x30 replica grid, n=20
RunConfig preset_config(const std::string &name);

// Parse JSON text merged over the given base; throws ConfigError on unknown
// keys, wrong types or violated invariants.
RunConfig parse_config(const std::string &json_text, const RunConfig &base);

std::string config_to_json(const RunConfig &cfg);

// FNV-1a of the canonical JSON serialization; recorded in run manifests.
std::string config_hash(const RunConfig &cfg);

} // namespace asl
