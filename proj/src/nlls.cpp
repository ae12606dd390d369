#include "aslfit/nlls.hpp"

#include "aslfit/parallel.hpp"
#include "aslfit/rng.hpp"
#include "aslfit/units.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace asl {

void NllsConfig::validate() const
{
    if (bounds_cbf[0] > bounds_cbf[1] || bounds_att[0] > bounds_att[1])
        throw std::invalid_argument("nlls: bounds must be ordered");
    if (max_iters < 1)
        throw std::invalid_argument("nlls: max_iters must be >= 1");
    if (multistart < 0)
        throw std::invalid_argument("nlls: multistart must be >= 0");
}

namespace {

struct Point {
    double f, att;
};

double clamp(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

double residual_sq(std::span<const double> d, const Protocol &p, double m0, Point u)
{
    double s = 0.0;
    for (int n = 0; n < p.n_frames(); ++n) {
        const double r =
            pcasl_signal(u.f, u.att, p.t[n], p.tau[n], p.alpha, p.lambda, p.t1, p.t1b, m0) - d[n];
        s += r * r;
    }
    return s;
}

// one LM run from a given start; returns final point and 0.5*||r||^2
double lm_run(std::span<const double> d, const Protocol &p, double m0, const NllsConfig &cfg,
              Point &u, bool &hit_max)
{
    double lm_lambda = 1e-3;
    double cost = 0.5 * residual_sq(d, p, m0, u);
    hit_max = true;
    for (int it = 0; it < cfg.max_iters; ++it) {
        // J^T J (2x2) and J^T r
        double a00 = 0, a01 = 0, a11 = 0, g0 = 0, g1 = 0;
        for (int n = 0; n < p.n_frames(); ++n) {
            const SignalDeriv jd =
                pcasl_signal_deriv(u.f, u.att, p.t[n], p.tau[n], p.alpha, p.lambda, p.t1, p.t1b, m0);
            const double r =
                pcasl_signal(u.f, u.att, p.t[n], p.tau[n], p.alpha, p.lambda, p.t1, p.t1b, m0) - d[n];
            a00 += jd.d_f * jd.d_f;
            a01 += jd.d_f * jd.d_att;
            a11 += jd.d_att * jd.d_att;
            g0 += jd.d_f * r;
            g1 += jd.d_att * r;
        }
        // projected gradient stationarity: zero gradient, or pushing out of the box
        const double pg0 = (u.f <= cfg.bounds_cbf[0] && g0 > 0) || (u.f >= cfg.bounds_cbf[1] && g0 < 0)
                               ? 0.0
                               : g0;
        const double pg1 =
            (u.att <= cfg.bounds_att[0] && g1 > 0) || (u.att >= cfg.bounds_att[1] && g1 < 0) ? 0.0 : g1;
        if (pg0 * pg0 + pg1 * pg1 <= cfg.grad_tol * cfg.grad_tol) {
            hit_max = false;
            break;
        }
        bool stepped = false;
        for (int trial = 0; trial < 40; ++trial) {
            // damped normal equations; epsilon guards all-zero columns
            const double d00 = a00 + lm_lambda * std::max(a00, 1e-300) + 1e-300;
            const double d11 = a11 + lm_lambda * std::max(a11, 1e-300) + 1e-300;
            const double det = d00 * d11 - a01 * a01;
            if (det <= 0.0) {
                lm_lambda *= 10.0;
                continue;
            }
            Point cand{clamp(u.f - (d11 * g0 - a01 * g1) / det, cfg.bounds_cbf[0], cfg.bounds_cbf[1]),
                       clamp(u.att - (d00 * g1 - a01 * g0) / det, cfg.bounds_att[0], cfg.bounds_att[1])};
            const double cand_cost = 0.5 * residual_sq(d, p, m0, cand);
            if (cand_cost < cost) {
                const double df = std::abs(cand.f - u.f);
                const double datt = std::abs(cand.att - u.att);
                u = cand;
                cost = cand_cost;
                lm_lambda = std::max(lm_lambda * 0.3, 1e-12);
                stepped = true;
                if (df <= 1e-14 && datt <= 1e-14)
                    hit_max = false;
                break;
            }
            lm_lambda *= 10.0;
        }
        if (!stepped) {
            hit_max = false; // damping exhausted: cannot improve further
            break;
        }
        if (!hit_max)
            break;
    }
    return cost;
}

} // namespace

NllsVoxelResult nlls_fit_voxel(std::span<const double> series, const Protocol &proto, double m0,
                               const NllsConfig &cfg, std::uint64_t voxel)
{
    cfg.validate();
    if (static_cast<int>(series.size()) != proto.n_frames())
        throw std::invalid_argument("nlls_fit_voxel: series length must match protocol frames");

    NllsVoxelResult res;
    bool all_zero = true;
    for (double x : series)
        if (x != 0.0)
            all_zero = false;
    if (all_zero || m0 == 0.0) {
        // f = 0 reproduces the data exactly; att is unidentifiable there
        res.cbf = 0.0;
        res.att = cfg.init[1];
        res.residual_norm = all_zero ? 0.0 : std::sqrt(residual_sq(series, proto, m0, {0.0, cfg.init[1]}));
        res.flags = kNllsZeroData | kNllsNonIdentifiable;
        return res;
    }

    const CounterRng rng{cfg.seed};
    Point best{};
    double best_cost = std::numeric_limits<double>::infinity();
    bool best_hit_max = false;
    for (int s = 0; s <= cfg.multistart; ++s) {
        Point u;
        if (s == 0) {
            u = {clamp(cfg.init[0], cfg.bounds_cbf[0], cfg.bounds_cbf[1]),
                 clamp(cfg.init[1], cfg.bounds_att[0], cfg.bounds_att[1])};
        } else {
            const std::uint64_t key = voxel * 64 + static_cast<std::uint64_t>(s);
            u = {cfg.bounds_cbf[0] + (cfg.bounds_cbf[1] - cfg.bounds_cbf[0]) * rng.uniform(2 * key),
                 cfg.bounds_att[0] + (cfg.bounds_att[1] - cfg.bounds_att[0]) * rng.uniform(2 * key + 1)};
        }
        bool hit_max = false;
        const double cost = lm_run(series, proto, m0, cfg, u, hit_max);
        if (cost < best_cost) {
            best_cost = cost;
            best = u;
            best_hit_max = hit_max;
        }
    }

    res.cbf = best.f;
    res.att = best.att;
    res.residual_norm = std::sqrt(2.0 * best_cost);
    const double tol = 1e-12;
    if (best.f <= cfg.bounds_cbf[0] + tol || best.f >= cfg.bounds_cbf[1] - tol)
        res.flags |= kNllsBoundCbf;
    if (best.att <= cfg.bounds_att[0] + tol || best.att >= cfg.bounds_att[1] - tol)
        res.flags |= kNllsBoundAtt;
    if (best.f < units::cbf_to_internal(1e-3))
        res.flags |= kNllsNonIdentifiable;
    if (best_hit_max)
        res.flags |= kNllsMaxIters;
    return res;
}

NllsVolumeResult nlls_fit_volume(const Series &d, const Protocol &proto, const NllsConfig &cfg)
{
    cfg.validate();
    proto.validate();
    require_same_grid(d.grid, proto.grid(), "nlls_fit_volume");
    if (d.n_frames != proto.n_frames())
        throw std::invalid_argument("nlls_fit_volume: frame count mismatch");

    NllsVolumeResult out{ParameterMaps(d.grid), Volume(d.grid), Volume(d.grid)};
    parallel_for(d.nvox(), [&](std::size_t v) {
        const NllsVoxelResult r = nlls_fit_voxel(d.frames(v), proto, proto.m0[v], cfg, v);
        out.maps.cbf[v] = r.cbf;
        out.maps.att[v] = r.att;
        out.residual[v] = r.residual_norm;
        out.flags[v] = static_cast<double>(r.flags);
    });
    return out;
}

} // namespace asl
