#include "aslfit/tgv.hpp"

#include "aslfit/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace asl {

namespace {

struct Strides {
    std::size_t s[3];
    int n[3];
    explicit Strides(const Grid &g)
    {
        s[0] = 1;
        s[1] = static_cast<std::size_t>(g.ni);
        s[2] = static_cast<std::size_t>(g.ni) * g.nj;
        n[0] = g.ni;
        n[1] = g.nj;
        n[2] = g.nk;
    }
};

// Row-wise kernels: each call handles one contiguous i-row at base offset.
// coord[axis] of the row start is (j,k) dependent; the i coordinate runs.

// forward difference, symmetric extension (0 across the last index)
inline void fwd_diff_row(const double *in, double *out, int ni, int axis, int coord_axis,
                         int n_axis, std::size_t stride)
{
    if (axis == 0) {
        for (int i = 0; i + 1 < ni; ++i)
            out[i] = in[i + 1] - in[i];
        out[ni - 1] = 0.0;
    } else if (coord_axis + 1 < n_axis) {
        for (int i = 0; i < ni; ++i)
            out[i] = in[i + stride] - in[i];
    } else {
        for (int i = 0; i < ni; ++i)
            out[i] = 0.0;
    }
}

// backward difference, symmetric extension (0 across the first index)
inline void bwd_diff_row(const double *in, double *out, int ni, int axis, int coord_axis,
                         std::size_t stride)
{
    if (axis == 0) {
        out[0] = 0.0;
        for (int i = 1; i < ni; ++i)
            out[i] = in[i] - in[i - 1];
    } else if (coord_axis > 0) {
        for (int i = 0; i < ni; ++i)
            out[i] = in[i] - in[i - stride];
    } else {
        for (int i = 0; i < ni; ++i)
            out[i] = 0.0;
    }
}

// accumulate the negative transpose of the forward difference:
// out += z at coord 0, z[v]-z[v-s] interior, -z[v-s] at the last index
inline void add_div_fwd_row(const double *z, double *out, int ni, int axis, int coord_axis,
                            int n_axis, std::size_t stride)
{
    if (axis == 0) {
        if (ni == 1)
            return;
        out[0] += z[0];
        for (int i = 1; i + 1 < ni; ++i)
            out[i] += z[i] - z[i - 1];
        out[ni - 1] += -z[ni - 2];
    } else {
        if (n_axis == 1)
            return;
        if (coord_axis == 0) {
            for (int i = 0; i < ni; ++i)
                out[i] += z[i];
        } else if (coord_axis + 1 < n_axis) {
            for (int i = 0; i < ni; ++i)
                out[i] += z[i] - z[i - stride];
        } else {
            for (int i = 0; i < ni; ++i)
                out[i] += -z[i - stride];
        }
    }
}

// accumulate the negative transpose of the backward difference:
// out += z[v+s] at coord 0, z[v+s]-z[v] interior, -z[v] at the last index
inline void add_div_bwd_row(const double *z, double *out, int ni, int axis, int coord_axis,
                            int n_axis, std::size_t stride)
{
    if (axis == 0) {
        if (ni == 1)
            return;
        out[0] += z[1];
        for (int i = 1; i + 1 < ni; ++i)
            out[i] += z[i + 1] - z[i];
        out[ni - 1] += -z[ni - 1];
    } else {
        if (n_axis == 1)
            return;
        if (coord_axis == 0) {
            for (int i = 0; i < ni; ++i)
                out[i] += z[i + stride];
        } else if (coord_axis + 1 < n_axis) {
            for (int i = 0; i < ni; ++i)
                out[i] += z[i + stride] - z[i];
        } else {
            for (int i = 0; i < ni; ++i)
                out[i] += -z[i];
        }
    }
}

template <class RowFn>
void for_rows(const Grid &g, RowFn &&fn)
{
    const std::size_t n_rows = static_cast<std::size_t>(g.nj) * g.nk;
    parallel_for(n_rows, [&](std::size_t r) {
        const int j = static_cast<int>(r % g.nj);
        const int k = static_cast<int>(r / g.nj);
        fn(j, k, g.index(0, j, k));
    });
}

void check_comps(const FieldStack &x, int expect, const char *what)
{
    if (x.n_comp != expect || !x.grid.valid())
        throw std::invalid_argument(std::string(what) + ": bad field shape");
}

} // namespace

void grad_into(const FieldStack &u, FieldStack &out)
{
    const Grid g = u.grid;
    const Strides st(g);
    const int nu = u.n_comp;
    for (int l = 0; l < nu; ++l) {
        const double *in = u.comp(l).data();
        for (int axis = 0; axis < 3; ++axis) {
            double *dst = out.comp(axis * nu + l).data();
            for_rows(g, [&](int j, int k, std::size_t base) {
                const int coord = axis == 1 ? j : k;
                fwd_diff_row(in + base, dst + base, g.ni, axis, coord, st.n[axis], st.s[axis]);
            });
        }
    }
}

FieldStack grad(const FieldStack &u)
{
    if (!u.grid.valid() || u.n_comp < 1)
        throw std::invalid_argument("grad: empty input");
    FieldStack out(u.grid, 3 * u.n_comp);
    grad_into(u, out);
    return out;
}

void sym_grad_into(const FieldStack &v, FieldStack &out)
{
    const Grid g = v.grid;
    const Strides st(g);
    const int nu = v.n_comp / 3;
    // diagonal components: chi^d = bwd_d(v^d)
    for (int l = 0; l < nu; ++l) {
        for (int axis = 0; axis < 3; ++axis) {
            const double *in = v.comp(axis * nu + l).data();
            double *dst = out.comp(axis * nu + l).data();
            for_rows(g, [&](int j, int k, std::size_t base) {
                const int coord = axis == 1 ? j : k;
                bwd_diff_row(in + base, dst + base, g.ni, axis, coord, st.s[axis]);
            });
        }
    }
    // cross components: (ij, ik, jk) = (d_j v1 + d_i v2, d_k v1 + d_i v3, d_k v2 + d_j v3)/2
    struct Cross {
        int out_kind, va, axa, vb, axb;
    };
    const Cross cross[3] = {{3, 0, 1, 1, 0}, {4, 0, 2, 2, 0}, {5, 1, 2, 2, 1}};
    for (int l = 0; l < nu; ++l) {
        for (const Cross &c : cross) {
            const double *ina = v.comp(c.va * nu + l).data();
            const double *inb = v.comp(c.vb * nu + l).data();
            double *dst = out.comp(c.out_kind * nu + l).data();
            for_rows(g, [&](int j, int k, std::size_t base) {
                std::vector<double> pa(g.ni), pb(g.ni);
                const int ca = c.axa == 1 ? j : k;
                const int cb = c.axb == 1 ? j : k;
                bwd_diff_row(ina + base, pa.data(), g.ni, c.axa, ca, st.s[c.axa]);
                bwd_diff_row(inb + base, pb.data(), g.ni, c.axb, cb, st.s[c.axb]);
                double *o = dst + base;
                for (int i = 0; i < g.ni; ++i)
                    o[i] = 0.5 * (pa[i] + pb[i]);
            });
        }
    }
}

FieldStack sym_grad(const FieldStack &v)
{
    if (v.n_comp % 3 != 0 || v.n_comp == 0)
        throw std::invalid_argument("sym_grad: input must have 3*N_u components");
    FieldStack out(v.grid, 2 * v.n_comp);
    sym_grad_into(v, out);
    return out;
}

void div1_into(const FieldStack &z0, FieldStack &out)
{
    const Grid g = z0.grid;
    const Strides st(g);
    const int nu = z0.n_comp / 3;
    for (int c = 0; c < out.n_comp; ++c)
        std::fill(out.comp(c).begin(), out.comp(c).end(), 0.0);
    for (int l = 0; l < nu; ++l) {
        double *dst = out.comp(l).data();
        for (int axis = 0; axis < 3; ++axis) {
            const double *z = z0.comp(axis * nu + l).data();
            for_rows(g, [&](int j, int k, std::size_t base) {
                const int coord = axis == 1 ? j : k;
                add_div_fwd_row(z + base, dst + base, g.ni, axis, coord, st.n[axis], st.s[axis]);
            });
        }
    }
}

FieldStack div1(const FieldStack &z0)
{
    if (z0.n_comp % 3 != 0 || z0.n_comp == 0)
        throw std::invalid_argument("div1: input must have 3*N_u components");
    FieldStack out(z0.grid, z0.n_comp / 3);
    div1_into(z0, out);
    return out;
}

void div2_into(const FieldStack &z1, FieldStack &out)
{
    const Grid g = z1.grid;
    const Strides st(g);
    const int nu = z1.n_comp / 6;
    for (int c = 0; c < out.n_comp; ++c)
        std::fill(out.comp(c).begin(), out.comp(c).end(), 0.0);
    // row d of the symmetric matrix: div2(z)^d = sum_axes bwd^T-neg over the
    // matching stored component; cross components enter twice, once per row,
    // which is exactly the factor-2 weighting of the chi inner product.
    const int comp_of[3][3] = {{0, 3, 4}, {3, 1, 5}, {4, 5, 2}};
    for (int l = 0; l < nu; ++l) {
        for (int d = 0; d < 3; ++d) {
            double *dst = out.comp(d * nu + l).data();
            for (int axis = 0; axis < 3; ++axis) {
                const double *z = z1.comp(comp_of[d][axis] * nu + l).data();
                for_rows(g, [&](int j, int k, std::size_t base) {
                    const int coord = axis == 1 ? j : k;
                    add_div_bwd_row(z + base, dst + base, g.ni, axis, coord, st.n[axis], st.s[axis]);
                });
            }
        }
    }
}

FieldStack div2(const FieldStack &z1)
{
    if (z1.n_comp % 6 != 0 || z1.n_comp == 0)
        throw std::invalid_argument("div2: input must have 6*N_u components");
    FieldStack out(z1.grid, z1.n_comp / 2);
    div2_into(z1, out);
    return out;
}

namespace {

double frob_sum(const FieldStack &x, int n_u, const double *kind_weight, int n_kind)
{
    const std::size_t nvox = x.nvox();
    return block_sum(nvox, [&](std::size_t v) {
        double m2 = 0.0;
        for (int kind = 0; kind < n_kind; ++kind)
            for (int l = 0; l < n_u; ++l) {
                const double a = x.at(kind * n_u + l, v);
                m2 += kind_weight[kind] * a * a;
            }
        return std::sqrt(m2);
    });
}

} // namespace

double frob_seminorm_v(const FieldStack &v, int n_u)
{
    check_comps(v, 3 * n_u, "frob_seminorm_v");
    static const double w[3] = {1.0, 1.0, 1.0};
    return frob_sum(v, n_u, w, 3);
}

double frob_seminorm_chi(const FieldStack &chi, int n_u)
{
    check_comps(chi, 6 * n_u, "frob_seminorm_chi");
    static const double w[6] = {1.0, 1.0, 1.0, 2.0, 2.0, 2.0};
    return frob_sum(chi, n_u, w, 6);
}

void prox_dual_ball(FieldStack &z, int n_u, double radius, bool chi_weights)
{
    if (!(radius > 0.0))
        throw std::invalid_argument("prox_dual_ball: radius must be > 0");
    const int n_kind = z.n_comp / n_u;
    static const double wv[3] = {1.0, 1.0, 1.0};
    static const double wchi[6] = {1.0, 1.0, 1.0, 2.0, 2.0, 2.0};
    const double *w = chi_weights ? wchi : wv;
    const std::size_t nvox = z.nvox();
    parallel_for(nvox, [&](std::size_t v) {
        double m2 = 0.0;
        for (int kind = 0; kind < n_kind; ++kind)
            for (int l = 0; l < n_u; ++l) {
                const double a = z.at(kind * n_u + l, v);
                m2 += w[kind] * a * a;
            }
        const double m = std::sqrt(m2);
        if (m > radius) {
            const double s = radius / m;
            for (int c = 0; c < z.n_comp; ++c)
                z.at(c, v) *= s;
        }
    });
}

void prox_r(Series &xi, double sigma, const Series &d_tilde)
{
    if (!(sigma > 0.0))
        throw std::invalid_argument("prox_r: sigma must be > 0");
    if (xi.n_frames != d_tilde.n_frames || !(xi.grid == d_tilde.grid))
        throw std::invalid_argument("prox_r: shape mismatch");
    const double inv = 1.0 / (1.0 + sigma);
    parallel_for(xi.data.size(), [&](std::size_t i) {
        xi.data[i] = (xi.data[i] - sigma * d_tilde.data[i]) * inv;
    });
}

void prox_g(FieldStack &xi, double tau_delta, const FieldStack &weight_m, const FieldStack &anchor)
{
    if (xi.n_comp != weight_m.n_comp || xi.n_comp != anchor.n_comp || !(xi.grid == weight_m.grid))
        throw std::invalid_argument("prox_g: shape mismatch");
    parallel_for(xi.data.size(), [&](std::size_t i) {
        const double td_m = tau_delta * weight_m.data[i];
        xi.data[i] = (td_m * anchor.data[i] + xi.data[i]) / (1.0 + td_m);
    });
}

} // namespace asl
