#include "aslfit/solver.hpp"

#include "aslfit/errors.hpp"
#include "aslfit/parallel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>

namespace asl {

std::vector<int> GnConfig::schedule() const
{
    if (!inner_iters_schedule.empty())
        return inner_iters_schedule;
    std::vector<int> s(gn_steps);
    int it = 50;
    for (int k = 0; k < gn_steps; ++k) {
        s[k] = std::min(it, 1000);
        it *= 2;
    }
    return s;
}

void GnConfig::validate() const
{
    if (!(gamma_init >= gamma_final) || !(gamma_final > 0))
        throw ConfigError("solver: need gamma_init >= gamma_final > 0");
    if (!(delta_init >= delta_final) || !(delta_final > 0))
        throw ConfigError("solver: need delta_init >= delta_final > 0");
    if (!(gamma_decay > 0) || gamma_decay > 1 || !(delta_decay > 0) || delta_decay > 1)
        throw ConfigError("solver: decays must be in (0,1]");
    if (gn_steps < 1)
        throw ConfigError("solver: gn_steps must be >= 1");
    const std::vector<int> s = schedule();
    if (static_cast<int>(s.size()) != gn_steps)
        throw ConfigError("solver: inner_iters_schedule length must equal gn_steps");
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (s[k] < 1)
            throw ConfigError("solver: inner iteration caps must be >= 1");
        if (k > 0 && s[k] < s[k - 1])
            throw ConfigError("solver: inner iteration caps must be nondecreasing");
    }
    if (!(rel_tol >= 0))
        throw ConfigError("solver: rel_tol must be >= 0");
    if (!(alpha0_over_alpha1 > 0))
        throw ConfigError("solver: alpha0/alpha1 must be > 0");
    if (!(mu > 0) || mu >= 1)
        throw ConfigError("solver: mu must be in (0,1)");
    if (!(beta_init > 0) || !(theta_init >= 0))
        throw ConfigError("solver: beta must be > 0 and theta >= 0");
    if (max_shrinks < 1)
        throw ConfigError("solver: max_shrinks must be >= 1");
    if (!(map_scales[0] > 0) || !(map_scales[1] > 0))
        throw ConfigError("solver: map_scales must be positive");
    if (eval_every < 1)
        throw ConfigError("solver: eval_every must be >= 1");
    if (!(snr_ref > 0) || !(snr_max > 0) || !(data_norm_target > 0))
        throw ConfigError("solver: snr/data-scale parameters must be positive");
}

Linearization linearize(const ParameterMaps &u_k, const Protocol &proto, const Series &d,
                        std::array<double, 2> map_scales)
{
    proto.validate();
    require_same_grid(u_k.cbf.grid, proto.grid(), "linearize");
    require_same_grid(d.grid, proto.grid(), "linearize");
    if (d.n_frames != proto.n_frames())
        throw std::invalid_argument("linearize: frame count mismatch");
    for (std::size_t v = 0; v < u_k.cbf.size(); ++v)
        if (!std::isfinite(u_k.cbf[v]) || !std::isfinite(u_k.att[v]))
            throw SolverError("linearize: non-finite values in u_k");

    Linearization lin;
    lin.jac = signal_jacobian(u_k, proto);
    const Series a = signal_series(u_k, proto);
    lin.d_tilde = Series(d.grid, d.n_frames);
    lin.u_k = FieldStack(d.grid, 2);
    const double sf = map_scales[0], sa = map_scales[1];
    const int nd = d.n_frames;
    parallel_for(d.nvox(), [&](std::size_t v) {
        const double uf = u_k.cbf[v] / sf;
        const double ua = u_k.att[v] / sa;
        lin.u_k.at(0, v) = uf;
        lin.u_k.at(1, v) = ua;
        double *jf = lin.jac.d_f.data.data() + v * nd;
        double *ja = lin.jac.d_att.data.data() + v * nd;
        const double *av = a.data.data() + v * nd;
        const double *dv = d.data.data() + v * nd;
        double *dt = lin.d_tilde.data.data() + v * nd;
        for (int n = 0; n < nd; ++n) {
            jf[n] *= sf;
            ja[n] *= sa;
            dt[n] = dv[n] - av[n] + jf[n] * uf + ja[n] * ua;
        }
    });
    return lin;
}

FieldStack levenberg_weight(const JacobianField &jac, GnConfig::Levenberg mode)
{
    const Grid g = jac.d_f.grid;
    FieldStack m(g, 2, 1.0);
    if (mode == GnConfig::Levenberg::kIdentity)
        return m;
    const int nd = jac.d_f.n_frames;
    parallel_for(g.nvox(), [&](std::size_t v) {
        const double *jf = jac.d_f.data.data() + v * nd;
        const double *ja = jac.d_att.data.data() + v * nd;
        double mf = 0, ma = 0;
        for (int n = 0; n < nd; ++n) {
            mf += jf[n] * jf[n];
            ma += ja[n] * ja[n];
        }
        m.at(0, v) = mf;
        m.at(1, v) = ma;
    });
    return m;
}

PdState make_pd_state(const Linearization &lin)
{
    const Grid g = lin.u_k.grid;
    PdState s;
    s.u = lin.u_k;
    s.v = grad(s.u);
    s.z0 = FieldStack(g, 6, 0.0);
    s.z1 = FieldStack(g, 12, 0.0);
    s.r = Series(g, lin.d_tilde.n_frames, 0.0);
    return s;
}

namespace {

// K x = (J u, grad u - v, E v); blocks cached per iterate so line-search
// trials only form linear combinations.
struct KxBlocks {
    FieldStack grad_minus_v; // 6
    FieldStack sym;          // 12
    Series jac_u;            // nd
};

void compute_kx(const Linearization &lin, const FieldStack &u, const FieldStack &v, KxBlocks &kx,
                FieldStack &scratch6)
{
    grad_into(u, scratch6);
    parallel_for(kx.grad_minus_v.data.size(),
                 [&](std::size_t i) { kx.grad_minus_v.data[i] = scratch6.data[i] - v.data[i]; });
    sym_grad_into(v, kx.sym);
    const int nd = lin.d_tilde.n_frames;
    parallel_for(u.nvox(), [&](std::size_t vx) {
        const double uf = u.at(0, vx), ua = u.at(1, vx);
        const double *jf = lin.jac.d_f.data.data() + vx * nd;
        const double *ja = lin.jac.d_att.data.data() + vx * nd;
        double *out = kx.jac_u.data.data() + vx * nd;
        for (int n = 0; n < nd; ++n)
            out[n] = jf[n] * uf + ja[n] * ua;
    });
}

struct LineSearchNorms {
    double dy2 = 0.0;  // ||y_trial - y||^2 (z1 part chi-weighted)
    double dkh2 = 0.0; // ||K^H y_trial - K^H y||^2
};

} // namespace

PdResult pd_solve(const Linearization &lin, double gamma, double delta,
                  const FieldStack &weight_m, PdState &state, int max_iters, double rel_tol,
                  const GnConfig &cfg, int gn_step, const ProgressFn &progress)
{
    const Grid g = lin.u_k.grid;
    const std::size_t nvox = g.nvox();
    const int nd = lin.d_tilde.n_frames;
    const double radius0 = cfg.alpha0() * gamma;
    const double radius1 = cfg.alpha1() * gamma;
    const double ls_delta = cfg.linesearch_delta < 0 ? delta : cfg.linesearch_delta;

    if (state.tau <= 0.0) {
        // tau0 = 1/(sqrt(beta)*L) with L^2 bounded by max-voxel sum |J|^2
        // plus the finite-difference operator norms of grad and E.
        double jmax = 0.0;
        for (std::size_t v = 0; v < nvox; ++v) {
            double s = 0.0;
            const double *jf = lin.jac.d_f.data.data() + v * nd;
            const double *ja = lin.jac.d_att.data.data() + v * nd;
            for (int n = 0; n < nd; ++n)
                s += jf[n] * jf[n] + ja[n] * ja[n];
            jmax = std::max(jmax, s);
        }
        state.tau = 1.0 / (std::sqrt(state.beta) * std::sqrt(jmax + 20.0));
    }

    KxBlocks kx_new{FieldStack(g, 6), FieldStack(g, 12), Series(g, nd)};
    KxBlocks kx_old{FieldStack(g, 6), FieldStack(g, 12), Series(g, nd)};
    FieldStack scratch6(g, 6), scratch2(g, 2);
    FieldStack z0_t(g, 6), z1_t(g, 12);
    Series r_t(g, nd);
    FieldStack hu(g, 2), hv(g, 6), hu_t(g, 2), hv_t(g, 6);

    compute_kx(lin, state.u, state.v, kx_old, scratch6);

    // K^H y = (J^H r - div1 z0, -z0 - div2 z1) at the current duals
    auto compute_khy = [&](const FieldStack &z0, const FieldStack &z1, const Series &r,
                           FieldStack &out_u, FieldStack &out_v) {
        div1_into(z0, scratch2);
        parallel_for(nvox, [&](std::size_t v) {
            const double *jf = lin.jac.d_f.data.data() + v * nd;
            const double *ja = lin.jac.d_att.data.data() + v * nd;
            const double *rv = r.data.data() + v * nd;
            double su = 0, sa = 0;
            for (int n = 0; n < nd; ++n) {
                su += jf[n] * rv[n];
                sa += ja[n] * rv[n];
            }
            out_u.at(0, v) = su - scratch2.at(0, v);
            out_u.at(1, v) = sa - scratch2.at(1, v);
        });
        div2_into(z1, scratch6);
        parallel_for(out_v.data.size(),
                     [&](std::size_t i) { out_v.data[i] = -z0.data[i] - scratch6.data[i]; });
    };
    compute_khy(state.z0, state.z1, state.r, hu, hv);

    const auto eval_objective = [&](const KxBlocks &kx) {
        const double data = 0.5 * block_sum(lin.d_tilde.data.size(), [&](std::size_t i) {
            const double e = kx.jac_u.data[i] - lin.d_tilde.data[i];
            return e * e;
        });
        const double reg = gamma * (cfg.alpha0() * frob_seminorm_v(kx.grad_minus_v, 2) +
                                    cfg.alpha1() * frob_seminorm_chi(kx.sym, 2));
        const double damp = 0.5 * delta * block_sum(state.u.data.size(), [&](std::size_t i) {
            const double e = state.u.data[i] - lin.u_k.data[i];
            return weight_m.data[i] * e * e;
        });
        return data + reg + damp;
    };

    PdResult res;
    double prev_obj = std::numeric_limits<double>::infinity();
    double obj = prev_obj;

    for (int m = 0; m < max_iters; ++m) {
        // primal update with the accepted K^H y of the previous iteration;
        // the previous iterate survives only through kx_old = K x^m
        const double tau = state.tau;
        const double td = tau * delta;
        parallel_for(nvox, [&](std::size_t v) {
            for (int c = 0; c < 2; ++c) {
                const double xi = state.u.at(c, v) - tau * hu.at(c, v);
                const double m_td = td * weight_m.at(c, v);
                state.u.at(c, v) = (m_td * lin.u_k.at(c, v) + xi) / (1.0 + m_td);
            }
        });
        // v update is a plain gradient step
        parallel_for(state.v.data.size(),
                     [&](std::size_t i) { state.v.data[i] -= tau * hv.data[i]; });
        compute_kx(lin, state.u, state.v, kx_new, scratch6);

        const double beta_new = state.beta * (1.0 + ls_delta * tau);
        double tau_t = tau * std::sqrt(state.beta / beta_new * (1.0 + state.theta));

        bool accepted = false;
        double theta_t = 0.0;
        for (int shrink = 0; shrink <= cfg.max_shrinks; ++shrink) {
            ++res.trials;
            theta_t = tau_t / tau;
            const double sigma = beta_new * tau_t;
            const double c_new = 1.0 + theta_t, c_old = theta_t;
            LineSearchNorms norms;

            // z0 trial: joint-magnitude ball projection
            norms.dy2 += block_sum(nvox, [&](std::size_t v) {
                double a[6];
                double m2 = 0.0;
                for (int c = 0; c < 6; ++c) {
                    const std::size_t i = static_cast<std::size_t>(c) * nvox + v;
                    a[c] = state.z0.data[i] +
                           sigma * (c_new * kx_new.grad_minus_v.data[i] - c_old * kx_old.grad_minus_v.data[i]);
                    m2 += a[c] * a[c];
                }
                const double mn = std::sqrt(m2);
                const double s = mn > radius0 ? radius0 / mn : 1.0;
                double dy = 0.0;
                for (int c = 0; c < 6; ++c) {
                    const std::size_t i = static_cast<std::size_t>(c) * nvox + v;
                    z0_t.data[i] = s * a[c];
                    const double e = z0_t.data[i] - state.z0.data[i];
                    dy += e * e;
                }
                return dy;
            });

            // z1 trial: chi-weighted magnitude and norm
            norms.dy2 += block_sum(nvox, [&](std::size_t v) {
                double a[12];
                double m2 = 0.0;
                for (int c = 0; c < 12; ++c) {
                    const std::size_t i = static_cast<std::size_t>(c) * nvox + v;
                    const double w = c < 6 ? 1.0 : 2.0;
                    a[c] = state.z1.data[i] +
                           sigma * (c_new * kx_new.sym.data[i] - c_old * kx_old.sym.data[i]);
                    m2 += w * a[c] * a[c];
                }
                const double mn = std::sqrt(m2);
                const double s = mn > radius1 ? radius1 / mn : 1.0;
                double dy = 0.0;
                for (int c = 0; c < 12; ++c) {
                    const std::size_t i = static_cast<std::size_t>(c) * nvox + v;
                    z1_t.data[i] = s * a[c];
                    const double e = z1_t.data[i] - state.z1.data[i];
                    dy += (c < 6 ? 1.0 : 2.0) * e * e;
                }
                return dy;
            });

            // r trial fused with the J^H r part of K^H y
            norms.dy2 += block_sum(nvox, [&](std::size_t v) {
                const double *jf = lin.jac.d_f.data.data() + v * nd;
                const double *ja = lin.jac.d_att.data.data() + v * nd;
                const double *dt = lin.d_tilde.data.data() + v * nd;
                const double *rn = kx_new.jac_u.data.data() + v * nd;
                const double *ro = kx_old.jac_u.data.data() + v * nd;
                const double *rv = state.r.data.data() + v * nd;
                double *rt = r_t.data.data() + v * nd;
                const double inv = 1.0 / (1.0 + sigma);
                double su = 0, sa = 0, dy = 0;
                for (int n = 0; n < nd; ++n) {
                    const double arg = rv[n] + sigma * (c_new * rn[n] - c_old * ro[n]);
                    const double x = (arg - sigma * dt[n]) * inv;
                    rt[n] = x;
                    const double e = x - rv[n];
                    dy += e * e;
                    su += jf[n] * x;
                    sa += ja[n] * x;
                }
                hu_t.at(0, v) = su;
                hu_t.at(1, v) = sa;
                return dy;
            });

            // finish K^H y_trial and accumulate ||K^H dy||^2
            div1_into(z0_t, scratch2);
            norms.dkh2 += block_sum(nvox, [&](std::size_t v) {
                double s = 0.0;
                for (int c = 0; c < 2; ++c) {
                    hu_t.at(c, v) -= scratch2.at(c, v);
                    const double e = hu_t.at(c, v) - hu.at(c, v);
                    s += e * e;
                }
                return s;
            });
            div2_into(z1_t, scratch6);
            norms.dkh2 += block_sum(hv_t.data.size(), [&](std::size_t i) {
                hv_t.data[i] = -z0_t.data[i] - scratch6.data[i];
                const double e = hv_t.data[i] - hv.data[i];
                return e * e;
            });

            if (std::sqrt(beta_new) * tau_t * std::sqrt(norms.dkh2) <= std::sqrt(norms.dy2) ||
                norms.dy2 == 0.0) {
                accepted = true;
                res.accepted_checks.push_back(
                    {std::sqrt(beta_new) * tau_t * std::sqrt(norms.dkh2), std::sqrt(norms.dy2)});
                break;
            }
            tau_t *= cfg.mu;
        }
        if (!accepted)
            throw SolverError("line search failed to accept a step", gn_step, m, tau_t, beta_new);

        state.theta = theta_t;
        state.tau = tau_t;
        state.beta = beta_new;
        std::swap(state.z0.data, z0_t.data);
        std::swap(state.z1.data, z1_t.data);
        std::swap(state.r.data, r_t.data);
        std::swap(hu.data, hu_t.data);
        std::swap(hv.data, hv_t.data);
        std::swap(kx_old.grad_minus_v.data, kx_new.grad_minus_v.data);
        std::swap(kx_old.sym.data, kx_new.sym.data);
        std::swap(kx_old.jac_u.data, kx_new.jac_u.data);
        res.iterations = m + 1;

        if ((m + 1) % cfg.eval_every == 0 || m + 1 == max_iters) {
            // kx blocks of the current iterate live in kx_old after the swap
            obj = eval_objective(kx_old);
            if (progress)
                progress(gn_step, m + 1, obj, state.tau, state.beta);
            if (std::isfinite(prev_obj) &&
                std::abs(prev_obj - obj) <= rel_tol * std::max(std::abs(prev_obj), 1e-300)) {
                prev_obj = obj;
                break;
            }
            prev_obj = obj;
        }
    }
    res.objective = obj;
    return res;
}

double objective_linearized(const Linearization &lin, const PdState &state, double gamma,
                            double delta, const FieldStack &weight_m, const GnConfig &cfg)
{
    const int nd = lin.d_tilde.n_frames;
    const std::size_t nvox = lin.u_k.nvox();
    const double data = 0.5 * block_sum(nvox, [&](std::size_t v) {
        const double *jf = lin.jac.d_f.data.data() + v * nd;
        const double *ja = lin.jac.d_att.data.data() + v * nd;
        const double *dt = lin.d_tilde.data.data() + v * nd;
        const double uf = state.u.at(0, v), ua = state.u.at(1, v);
        double s = 0.0;
        for (int n = 0; n < nd; ++n) {
            const double e = jf[n] * uf + ja[n] * ua - dt[n];
            s += e * e;
        }
        return s;
    });
    FieldStack gv = grad(state.u);
    for (std::size_t i = 0; i < gv.data.size(); ++i)
        gv.data[i] -= state.v.data[i];
    const double reg = gamma * (cfg.alpha0() * frob_seminorm_v(gv, 2) +
                                cfg.alpha1() * frob_seminorm_chi(sym_grad(state.v), 2));
    const double damp = 0.5 * delta * block_sum(state.u.data.size(), [&](std::size_t i) {
        const double e = state.u.data[i] - lin.u_k.data[i];
        return weight_m.data[i] * e * e;
    });
    return data + reg + damp;
}

double objective(const ParameterMaps &u, const FieldStack &v, const Series &d,
                 const Protocol &proto, double gamma, double alpha0, double alpha1,
                 std::array<double, 2> map_scales)
{
    const Series a = signal_series(u, proto);
    const double data = 0.5 * block_sum(a.data.size(), [&](std::size_t i) {
        const double e = a.data[i] - d.data[i];
        return e * e;
    });
    if (gamma == 0.0)
        return data;
    FieldStack us(u.grid(), 2);
    for (std::size_t vx = 0; vx < us.nvox(); ++vx) {
        us.at(0, vx) = u.cbf[vx] / map_scales[0];
        us.at(1, vx) = u.att[vx] / map_scales[1];
    }
    FieldStack gv = grad(us);
    for (std::size_t i = 0; i < gv.data.size(); ++i)
        gv.data[i] -= v.data[i];
    return data +
           gamma * (alpha0 * frob_seminorm_v(gv, 2) + alpha1 * frob_seminorm_chi(sym_grad(v), 2));
}

double snr_scale(const Series &d, double max_factor)
{
    const Grid g = d.grid;
    if (g.ni < 4 || g.nj < 4 || g.nk < 4)
        throw std::invalid_argument("snr_scale: grid must be at least 4x4x4");

    Volume mean(g);
    parallel_for(d.nvox(), [&](std::size_t v) {
        double s = 0.0;
        for (int n = 0; n < d.n_frames; ++n)
            s += d.at(v, n);
        mean[v] = s / d.n_frames;
    });

    const std::size_t n = g.nvox();
    std::vector<double> mag(n);
    {
        static std::mutex planner_mutex;
        fftw_complex *in = fftw_alloc_complex(n);
        fftw_complex *out = fftw_alloc_complex(n);
        for (std::size_t i = 0; i < n; ++i) {
            in[i][0] = mean[i];
            in[i][1] = 0.0;
        }
        fftw_plan plan;
        {
            std::lock_guard<std::mutex> lock(planner_mutex);
            plan = fftw_plan_dft_3d(g.nk, g.nj, g.ni, in, out, FFTW_FORWARD, FFTW_ESTIMATE);
        }
        fftw_execute(plan);
        {
            std::lock_guard<std::mutex> lock(planner_mutex);
            fftw_destroy_plan(plan);
        }
        for (std::size_t i = 0; i < n; ++i)
            mag[i] = std::hypot(out[i][0], out[i][1]);
        fftw_free(in);
        fftw_free(out);
    }

    // centered box holding 5% of samples per axis (odd extent, rounded up)
    auto central_half = [](int nn) {
        int e = static_cast<int>(std::ceil(0.05 * nn));
        if (e % 2 == 0)
            ++e;
        return (e - 1) / 2;
    };
    const int hi = central_half(g.ni), hj = central_half(g.nj), hk = central_half(g.nk);
    auto shifted = [](int idx, int nn) { return idx >= (nn + 1) / 2 ? idx - nn : idx; };

    double central_max = 0.0;
    double outer_sum = 0.0, outer_sum2 = 0.0;
    std::size_t outer_n = 0;
    for (int k = 0; k < g.nk; ++k)
        for (int j = 0; j < g.nj; ++j)
            for (int i = 0; i < g.ni; ++i) {
                const int si = shifted(i, g.ni), sj = shifted(j, g.nj), sk = shifted(k, g.nk);
                const double m = mag[g.index(i, j, k)];
                if (std::abs(si) <= hi && std::abs(sj) <= hj && std::abs(sk) <= hk)
                    central_max = std::max(central_max, m);
                const bool outer = std::abs(si) >= 0.95 * (g.ni / 2.0) ||
                                   std::abs(sj) >= 0.95 * (g.nj / 2.0) ||
                                   std::abs(sk) >= 0.95 * (g.nk / 2.0);
                if (outer) {
                    outer_sum += m;
                    outer_sum2 += m * m;
                    ++outer_n;
                }
            }
    if (outer_n == 0)
        return max_factor;
    const double meanv = outer_sum / static_cast<double>(outer_n);
    const double var = std::max(outer_sum2 / static_cast<double>(outer_n) - meanv * meanv, 0.0);
    const double sd = std::sqrt(var);
    if (sd <= 0.0 || !std::isfinite(sd))
        return max_factor;
    return std::min(central_max / sd, max_factor);
}

namespace {

ParameterMaps clamp_maps(const ParameterMaps &u, const GnConfig &cfg)
{
    ParameterMaps out = u;
    for (std::size_t v = 0; v < out.cbf.size(); ++v) {
        out.cbf[v] = std::clamp(out.cbf[v], cfg.clamp_cbf[0], cfg.clamp_cbf[1]);
        out.att[v] = std::clamp(out.att[v], cfg.clamp_att[0], cfg.clamp_att[1]);
    }
    return out;
}

} // namespace

ParameterMaps irgn_fit(const Series &d, const Protocol &proto, const GnConfig &cfg,
                       const ParameterMaps &init, FitInfo *info, const ProgressFn &progress)
{
    const auto t_start = std::chrono::steady_clock::now();
    cfg.validate();
    proto.validate();
    require_same_grid(d.grid, proto.grid(), "irgn_fit");
    if (d.n_frames != proto.n_frames())
        throw std::invalid_argument("irgn_fit: frame count mismatch");
    require_same_grid(init.cbf.grid, d.grid, "irgn_fit");

    // normalize the data scale so the gamma schedule is acquisition-invariant;
    // m0 is scaled along with d, which leaves the maps unchanged
    double peak = 0.0;
    for (std::size_t v = 0; v < d.nvox(); ++v) {
        double s = 0.0;
        for (int n = 0; n < d.n_frames; ++n)
            s += d.at(v, n);
        peak = std::max(peak, std::abs(s / d.n_frames));
    }
    const double dscale = peak > 0.0 ? cfg.data_norm_target / peak : 1.0;
    Series ds = d;
    for (double &x : ds.data)
        x *= dscale;
    Protocol ps = proto;
    for (double &x : ps.m0.data)
        x *= dscale;

    double snr = 1.0, gamma_scale = 1.0;
    if (cfg.snr_scaling) {
        snr = snr_scale(ds, cfg.snr_max);
        gamma_scale = cfg.snr_ref / snr;
    }

    ParameterMaps u = clamp_maps(init, cfg);
    const std::array<double, 2> sc = cfg.map_scales;

    PdState state;
    state.beta = cfg.beta_init;
    state.theta = cfg.theta_init;
    state.mu = cfg.mu;
    const std::vector<int> sched = cfg.schedule();

    if (info) {
        *info = FitInfo{};
        info->snr_factor = snr;
        info->gamma_scale = gamma_scale;
        info->data_scale = dscale;
    }

    for (int k = 0; k < cfg.gn_steps; ++k) {
        const double gamma_k =
            std::max(cfg.gamma_init * std::pow(cfg.gamma_decay, k) * gamma_scale, cfg.gamma_final);
        const double delta_k = std::max(cfg.delta_init * std::pow(cfg.delta_decay, k), cfg.delta_final);
        Linearization lin = linearize(u, ps, ds, sc);
        const FieldStack m = levenberg_weight(lin.jac, cfg.levenberg_mode);
        if (k == 0) {
            state.u = lin.u_k;
            state.v = grad(state.u);
            state.z0 = FieldStack(d.grid, 6, 0.0);
            state.z1 = FieldStack(d.grid, 12, 0.0);
            state.r = Series(d.grid, d.n_frames, 0.0);
        }
        state.beta = cfg.beta_init;
        state.theta = cfg.theta_init;
        PdResult pd;
        try {
            pd = pd_solve(lin, gamma_k, delta_k, m, state, sched[k], cfg.rel_tol, cfg, k, progress);
        } catch (const SolverError &e) {
            throw SolverError(std::string("gn step failed: ") + e.what(), k, e.iteration, e.tau,
                              e.beta);
        }
        // pull the iterate back to physical units, projected onto the box
        for (std::size_t v = 0; v < u.cbf.size(); ++v) {
            u.cbf[v] = std::clamp(state.u.at(0, v) * sc[0], cfg.clamp_cbf[0], cfg.clamp_cbf[1]);
            u.att[v] = std::clamp(state.u.at(1, v) * sc[1], cfg.clamp_att[0], cfg.clamp_att[1]);
            state.u.at(0, v) = u.cbf[v] / sc[0];
            state.u.at(1, v) = u.att[v] / sc[1];
        }
        if (info) {
            info->inner_iterations.push_back(pd.iterations);
            info->objective_trace.push_back(
                objective(u, state.v, ds, ps, gamma_k, cfg.alpha0(), cfg.alpha1(), sc));
        }
    }

    if (info)
        info->wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return u;
}

ParameterMaps irgn_fit(const Series &d, const Protocol &proto, const GnConfig &cfg, FitInfo *info,
                       const ProgressFn &progress)
{
    ParameterMaps init(d.grid);
    for (std::size_t v = 0; v < init.cbf.size(); ++v) {
        init.cbf[v] = cfg.init[0];
        init.att[v] = cfg.init[1];
    }
    return irgn_fit(d, proto, cfg, init, info, progress);
}

} // namespace asl
