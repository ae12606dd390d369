// volume.hpp — dense 3-D volumes, PWI series and multi-component field stacks
#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace asl {

struct Grid {
    int ni = 0, nj = 0, nk = 0;

    bool operator==(const Grid &) const = default;
    bool valid() const { return ni > 0 && nj > 0 && nk > 0; }
    std::size_t nvox() const
    {
        return static_cast<std::size_t>(ni) * nj * nk;
    }
    // i fastest, k slowest (NIfTI order)
    std::size_t index(int i, int j, int k) const
    {
        return static_cast<std::size_t>(i) + static_cast<std::size_t>(ni) * (j + static_cast<std::size_t>(nj) * k);
    }
};

struct Volume {
    Grid grid;
    std::vector<double> data;

    Volume() = default;
    explicit Volume(Grid g, double fill = 0.0) : grid(g), data(g.nvox(), fill) {}

    std::size_t size() const { return data.size(); }
    double &operator[](std::size_t v) { return data[v]; }
    double operator[](std::size_t v) const { return data[v]; }
    double &operator()(int i, int j, int k) { return data[grid.index(i, j, k)]; }
    double operator()(int i, int j, int k) const { return data[grid.index(i, j, k)]; }
};

// N_d frames sharing one grid, stored voxel-major: sample(v, n) = data[v*n_frames + n]
struct Series {
    Grid grid;
    int n_frames = 0;
    std::vector<double> data;

    Series() = default;
    Series(Grid g, int nf, double fill = 0.0)
        : grid(g), n_frames(nf), data(g.nvox() * static_cast<std::size_t>(nf), fill)
    {
    }

    std::size_t nvox() const { return grid.nvox(); }
    double &at(std::size_t v, int n) { return data[v * n_frames + n]; }
    double at(std::size_t v, int n) const { return data[v * n_frames + n]; }
    std::span<double> frames(std::size_t v)
    {
        return {data.data() + v * n_frames, static_cast<std::size_t>(n_frames)};
    }
    std::span<const double> frames(std::size_t v) const
    {
        return {data.data() + v * n_frames, static_cast<std::size_t>(n_frames)};
    }
    Volume frame_volume(int n) const
    {
        Volume out(grid);
        for (std::size_t v = 0; v < out.size(); ++v)
            out[v] = at(v, n);
        return out;
    }
};

// Stack of n_comp scalar volumes on one grid, each component contiguous.
// Used for parameter stacks (n_comp = N_u), gradient fields (3*N_u) and
// symmetrized gradient fields (6*N_u); component c, unknown l live at
// index c*N_u + l.
struct FieldStack {
    Grid grid;
    int n_comp = 0;
    std::vector<double> data;

    FieldStack() = default;
    FieldStack(Grid g, int nc, double fill = 0.0)
        : grid(g), n_comp(nc), data(g.nvox() * static_cast<std::size_t>(nc), fill)
    {
    }

    std::size_t nvox() const { return grid.nvox(); }
    std::span<double> comp(int c)
    {
        return {data.data() + static_cast<std::size_t>(c) * nvox(), nvox()};
    }
    std::span<const double> comp(int c) const
    {
        return {data.data() + static_cast<std::size_t>(c) * nvox(), nvox()};
    }
    double &at(int c, std::size_t v) { return data[static_cast<std::size_t>(c) * nvox() + v]; }
    double at(int c, std::size_t v) const { return data[static_cast<std::size_t>(c) * nvox() + v]; }
};

// The unknowns in internal units: cbf in ml/g/s, att in s.
struct ParameterMaps {
    Volume cbf;
    Volume att;

    ParameterMaps() = default;
    explicit ParameterMaps(Grid g) : cbf(g), att(g) {}
    Grid grid() const { return cbf.grid; }
};

inline void require_same_grid(const Grid &a, const Grid &b, const char *what)
{
    if (!(a == b))
        throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

} // namespace asl
