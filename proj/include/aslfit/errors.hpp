#pragma once

#include <stdexcept>
#include <string>

namespace asl {

// File-format or filesystem failure; offset is the byte position of the
// problem when known (-1 otherwise).
struct IoError : std::runtime_error {
    long long offset;
    explicit IoError(const std::string &msg, long long off = -1)
        : std::runtime_error(off >= 0 ? msg + " (offset " + std::to_string(off) + ")" : msg), offset(off)
    {
    }
};

// Raised when the primal-dual solve cannot make an accepted step or the
// Gauss-Newton state becomes invalid; carries enough to report where.
struct SolverError : std::runtime_error {
    int gn_step;
    int iteration;
    double tau;
    double beta;
    SolverError(const std::string &msg, int gn = -1, int it = -1, double t = 0.0, double b = 0.0)
        : std::runtime_error(msg + " [gn_step=" + std::to_string(gn) + " iter=" + std::to_string(it) +
                             " tau=" + std::to_string(t) + " beta=" + std::to_string(b) + "]"),
          gn_step(gn), iteration(it), tau(t), beta(b)
    {
    }
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace asl
