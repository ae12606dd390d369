// Gauss-Newton / primal-dual solver against small dense oracles.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "aslfit/nlls.hpp"
#include "aslfit/phantom.hpp"
#include "aslfit/errors.hpp"
#include "aslfit/rng.hpp"
#include "aslfit/solver.hpp"
#include "aslfit/units.hpp"

#include <cmath>

using namespace asl;

namespace {

Protocol small_protocol(Grid g, double m0val = 1.0)
{
    Protocol p;
    for (int n = 0; n < 8; ++n) {
        p.t.push_back(1.0 + 0.5 * n);
        p.tau.push_back(n < 3 ? 1.0 + 0.25 * n : 1.75);
    }
    p.m0 = Volume(g, m0val);
    return p;
}

ParameterMaps constant_maps(Grid g, double cbf_ext, double att)
{
    ParameterMaps u(g);
    for (std::size_t v = 0; v < g.nvox(); ++v) {
        u.cbf[v] = units::cbf_to_internal(cbf_ext);
        u.att[v] = att;
    }
    return u;
}

} // namespace

TEST_CASE("linearize: substitution and direct-formula oracle")
{
    Grid g{3, 3, 2};
    Protocol p = small_protocol(g);
    const std::array<double, 2> sc{0.05, 6.0};

    // noiseless data at ground truth: residual of the linearized problem at
    // u = u_k vanishes because d_tilde = DA u_k
    ParameterMaps gt = constant_maps(g, 48.0, 0.9);
    const Series d = signal_series(gt, p);
    Linearization lin = linearize(gt, p, d, sc);
    for (std::size_t v = 0; v < g.nvox(); ++v)
        for (int n = 0; n < p.n_frames(); ++n) {
            const double ju = lin.jac.d_f.at(v, n) * lin.u_k.at(0, v) +
                              lin.jac.d_att.at(v, n) * lin.u_k.at(1, v);
            CHECK(std::abs(ju - lin.d_tilde.at(v, n)) <= 1e-12);
        }

    // frames with t < att have zero jacobian rows: d_tilde_n = d_n
    ParameterMaps late = constant_maps(g, 48.0, 5.5); // all t < 4.5 < att
    Series d2 = d;
    Linearization lin2 = linearize(late, p, d2, sc);
    for (std::size_t v = 0; v < g.nvox(); ++v)
        for (int n = 0; n < p.n_frames(); ++n) {
            CHECK(lin2.jac.d_f.at(v, n) == 0.0);
            CHECK(lin2.d_tilde.at(v, n) == d2.at(v, n));
        }

    // random case against the formula evaluated independently
    CounterRng rng{5150};
    ParameterMaps uk(g);
    Series dr(g, p.n_frames());
    for (std::size_t v = 0; v < g.nvox(); ++v) {
        uk.cbf[v] = units::cbf_to_internal(200.0 * rng.uniform(3 * v));
        uk.att[v] = 4.0 * rng.uniform(3 * v + 1);
        for (int n = 0; n < p.n_frames(); ++n)
            dr.at(v, n) = rng.uniform(1000 + v * 8 + n);
    }
    Linearization lr = linearize(uk, p, dr, sc);
    for (std::size_t v = 0; v < g.nvox(); ++v)
        for (int n = 0; n < p.n_frames(); ++n) {
            const double a =
                pcasl_signal(uk.cbf[v], uk.att[v], p.t[n], p.tau[n], p.alpha, p.lambda, p.t1, p.t1b, 1.0);
            const SignalDeriv jd = pcasl_signal_deriv(uk.cbf[v], uk.att[v], p.t[n], p.tau[n], p.alpha,
                                                      p.lambda, p.t1, p.t1b, 1.0);
            const double expect = dr.at(v, n) - a + jd.d_f * sc[0] * (uk.cbf[v] / sc[0]) +
                                  jd.d_att * sc[1] * (uk.att[v] / sc[1]);
            CHECK(lr.d_tilde.at(v, n) == doctest::Approx(expect).epsilon(1e-12));
        }

    // non-finite u_k is a solver-state error
    ParameterMaps bad = gt;
    bad.cbf[0] = std::nan("");
    CHECK_THROWS_AS(linearize(bad, p, d, sc), SolverError);
}

TEST_CASE("levenberg_weight oracle")
{
    Grid g{2, 2, 2};
    Protocol p = small_protocol(g);
    ParameterMaps u = constant_maps(g, 70.0, 0.7);
    Linearization lin = linearize(u, p, signal_series(u, p), {0.05, 6.0});

    const FieldStack ident = levenberg_weight(lin.jac, GnConfig::Levenberg::kIdentity);
    for (double x : ident.data)
        CHECK(x == 1.0);

    const FieldStack m = levenberg_weight(lin.jac, GnConfig::Levenberg::kJacobianDiagonal);
    for (std::size_t v = 0; v < g.nvox(); ++v) {
        double mf = 0, ma = 0;
        for (int n = 0; n < p.n_frames(); ++n) {
            mf += lin.jac.d_f.at(v, n) * lin.jac.d_f.at(v, n);
            ma += lin.jac.d_att.at(v, n) * lin.jac.d_att.at(v, n);
        }
        CHECK(m.at(0, v) == doctest::Approx(mf).epsilon(1e-14));
        CHECK(m.at(1, v) == doctest::Approx(ma).epsilon(1e-14));
    }

    // all-zero jacobian (t < att everywhere) gives a zero diagonal
    ParameterMaps late = constant_maps(g, 70.0, 5.9);
    Linearization lz = linearize(late, p, signal_series(late, p), {0.05, 6.0});
    const FieldStack mz = levenberg_weight(lz.jac, GnConfig::Levenberg::kJacobianDiagonal);
    for (double x : mz.data)
        CHECK(x == 0.0);
}

TEST_CASE("pd_solve: single-voxel damped least squares matches dense oracle")
{
    Grid g{1, 1, 1};
    Protocol p = small_protocol(g);
    const std::array<double, 2> sc{0.05, 6.0};
    ParameterMaps truth = constant_maps(g, 80.0, 1.1);
    const Series d = signal_series(truth, p);
    ParameterMaps uk = constant_maps(g, 30.0, 1.0);
    Linearization lin = linearize(uk, p, d, sc);
    const FieldStack m = levenberg_weight(lin.jac, GnConfig::Levenberg::kIdentity);

    GnConfig cfg;
    cfg.eval_every = 10;
    const double gamma = 1e-10; // negligible TGV so the dense oracle applies
    const double delta = 0.5;
    PdState st = make_pd_state(lin);
    pd_solve(lin, gamma, delta, m, st, 20000, 0.0, cfg);

    // dense oracle: (J^T J + delta I) u = J^T dt + delta u_k on scaled unknowns
    double a00 = delta, a01 = 0, a11 = delta;
    double b0 = delta * lin.u_k.at(0, 0), b1 = delta * lin.u_k.at(1, 0);
    for (int n = 0; n < p.n_frames(); ++n) {
        const double jf = lin.jac.d_f.at(0, n), ja = lin.jac.d_att.at(0, n);
        const double dt = lin.d_tilde.at(0, n);
        a00 += jf * jf;
        a01 += jf * ja;
        a11 += ja * ja;
        b0 += jf * dt;
        b1 += ja * dt;
    }
    const double det = a00 * a11 - a01 * a01;
    const double uf = (a11 * b0 - a01 * b1) / det;
    const double ua = (a00 * b1 - a01 * b0) / det;
    CHECK(st.u.at(0, 0) == doctest::Approx(uf).epsilon(1e-6));
    CHECK(st.u.at(1, 0) == doctest::Approx(ua).epsilon(1e-6));
}

TEST_CASE("pd_solve: dominant regularization drives the TGV value to zero")
{
    Grid g{6, 6, 6};
    Protocol p = small_protocol(g);
    CounterRng rng{808};
    ParameterMaps uk = constant_maps(g, 40.0, 1.0);
    Series d(g, p.n_frames());
    for (std::size_t i = 0; i < d.data.size(); ++i)
        d.data[i] = 0.01 * (2.0 * rng.uniform(i) - 1.0) + 0.005;
    const std::array<double, 2> sc{0.05, 6.0};
    Linearization lin = linearize(uk, p, d, sc);
    const FieldStack m = levenberg_weight(lin.jac, GnConfig::Levenberg::kJacobianDiagonal);
    GnConfig cfg;
    PdState st = make_pd_state(lin);

    // initial TGV value of a noisy stack, for scale
    FieldStack noisy(g, 2);
    for (std::size_t i = 0; i < noisy.data.size(); ++i)
        noisy.data[i] = rng.uniform(77777 + i);
    FieldStack gn = grad(noisy);
    const double tgv_scale =
        cfg.alpha0() * frob_seminorm_v(gn, 2) + cfg.alpha1() * frob_seminorm_chi(sym_grad(gn), 2);

    PdResult res = pd_solve(lin, /*gamma=*/1e4, /*delta=*/1e-8, m, st, 3000, 1e-14, cfg);
    FieldStack gu = grad(st.u);
    for (std::size_t i = 0; i < gu.data.size(); ++i)
        gu.data[i] -= st.v.data[i];
    const double tgv_val =
        cfg.alpha0() * frob_seminorm_v(gu, 2) + cfg.alpha1() * frob_seminorm_chi(sym_grad(st.v), 2);
    CHECK(tgv_val <= 1e-6 * tgv_scale);

    // every accepted iteration satisfied the breaking inequality
    for (const auto &chk : res.accepted_checks)
        CHECK(chk[0] <= chk[1] + 1e-15);
}

TEST_CASE("pd_solve: deterministic, and does not worsen the warm start")
{
    Grid g{5, 4, 3};
    Protocol p = small_protocol(g);
    CounterRng rng{11};
    ParameterMaps uk(g);
    Series d(g, p.n_frames());
    for (std::size_t v = 0; v < g.nvox(); ++v) {
        uk.cbf[v] = units::cbf_to_internal(30.0 + 60.0 * rng.uniform(2 * v));
        uk.att[v] = 0.5 + 2.0 * rng.uniform(2 * v + 1);
        for (int n = 0; n < p.n_frames(); ++n)
            d.at(v, n) = 0.02 * rng.uniform(5000 + v * 16 + n);
    }
    const std::array<double, 2> sc{0.05, 6.0};
    Linearization lin = linearize(uk, p, d, sc);
    const FieldStack m = levenberg_weight(lin.jac, GnConfig::Levenberg::kJacobianDiagonal);
    GnConfig cfg;

    PdState warm = make_pd_state(lin);
    const double obj0 = objective_linearized(lin, warm, 1e-4, 1e-2, m, cfg);

    PdState a = warm, b = warm;
    PdResult ra = pd_solve(lin, 1e-4, 1e-2, m, a, 80, 0.0, cfg);
    PdResult rb = pd_solve(lin, 1e-4, 1e-2, m, b, 80, 0.0, cfg);
    CHECK(ra.iterations == rb.iterations);
    for (std::size_t i = 0; i < a.u.data.size(); ++i)
        CHECK(a.u.data[i] == b.u.data[i]);
    for (std::size_t i = 0; i < a.r.data.size(); ++i)
        CHECK(a.r.data[i] == b.r.data[i]);

    const double obj1 = objective_linearized(lin, a, 1e-4, 1e-2, m, cfg);
    CHECK(obj1 <= obj0 * (1.0 + 1e-12));

    for (const auto &chk : ra.accepted_checks)
        CHECK(chk[0] <= chk[1] + 1e-15);
}

TEST_CASE("objective: trivial and random oracles")
{
    Grid g{4, 3, 3};
    Protocol p = small_protocol(g);
    ParameterMaps u = constant_maps(g, 55.0, 0.8);
    const Series d = signal_series(u, p);
    const std::array<double, 2> sc{0.05, 6.0};

    // ground truth, v = grad(u_scaled) = 0 for constant maps: objective 0
    FieldStack v(g, 6, 0.0);
    CHECK(objective(u, v, d, p, 1e-3, 0.5, 1.0, sc) == doctest::Approx(0.0).epsilon(1e-15));

    // gamma = 0 reduces to half squared residual
    CounterRng rng{99};
    Series d2 = d;
    for (std::size_t i = 0; i < d2.data.size(); ++i)
        d2.data[i] += 0.001 * rng.uniform(i);
    double half_res = 0.0;
    for (std::size_t i = 0; i < d2.data.size(); ++i) {
        const double e = d.data[i] - d2.data[i]; // A(u) == d here
        half_res += 0.5 * e * e;
    }
    CHECK(objective(u, v, d2, p, 0.0, 0.5, 1.0, sc) == doctest::Approx(half_res).epsilon(1e-12));

    // random input matches an independent formula evaluation
    ParameterMaps ur(g);
    FieldStack vr(g, 6);
    for (std::size_t vx = 0; vx < g.nvox(); ++vx) {
        ur.cbf[vx] = units::cbf_to_internal(120.0 * rng.uniform(7000 + 2 * vx));
        ur.att[vx] = 3.0 * rng.uniform(7000 + 2 * vx + 1);
    }
    for (std::size_t i = 0; i < vr.data.size(); ++i)
        vr.data[i] = 0.1 * (2.0 * rng.uniform(40000 + i) - 1.0);
    const double gamma = 3e-3, a0 = 0.5, a1 = 1.0;
    const double got = objective(ur, vr, d2, p, gamma, a0, a1, sc);
    // independent evaluation
    double data_term = 0.0;
    const Series ar = signal_series(ur, p);
    for (std::size_t i = 0; i < ar.data.size(); ++i) {
        const double e = ar.data[i] - d2.data[i];
        data_term += 0.5 * e * e;
    }
    FieldStack us(g, 2);
    for (std::size_t vx = 0; vx < g.nvox(); ++vx) {
        us.at(0, vx) = ur.cbf[vx] / sc[0];
        us.at(1, vx) = ur.att[vx] / sc[1];
    }
    FieldStack gs = grad(us);
    for (std::size_t i = 0; i < gs.data.size(); ++i)
        gs.data[i] -= vr.data[i];
    const double expect = data_term + gamma * (a0 * frob_seminorm_v(gs, 2) +
                                               a1 * frob_seminorm_chi(sym_grad(vr), 2));
    CHECK(got == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("snr_scale: direction and guards")
{
    Grid g{16, 16, 16};
    CounterRng rng{3};
    Series noise(g, 2);
    for (std::size_t i = 0; i < noise.data.size(); ++i)
        noise.data[i] = rng.normal(i);
    const double f_noise = snr_scale(noise);

    Series dc = noise;
    for (double &x : dc.data)
        x += 50.0;
    const double f_dc = snr_scale(dc);
    CHECK(f_dc > f_noise);

    // halving the noise (more averages) raises the factor
    Series less = dc;
    for (std::size_t i = 0; i < less.data.size(); ++i)
        less.data[i] = 50.0 + 0.5 * noise.data[i];
    CHECK(snr_scale(less) > f_dc);

    // constant volume, zero noise: capped at the configured maximum
    Series flat(g, 2, 1.0);
    CHECK(snr_scale(flat, 1e6) == 1e6);

    CHECK_THROWS_AS(snr_scale(Series(Grid{2, 2, 2}, 1, 0.0)), std::invalid_argument);
}

TEST_CASE("irgn_fit: noiseless recovery, fixed point, floor-reduction to NLLS")
{
    // desk-scale noiseless phantom keeps this test in seconds
    PhantomSpec spec;
    spec.grid = Grid{18, 15, 15};
    spec.noise_sigma = 0.0;
    GroundTruth gt = generate_ground_truth(spec);
    Protocol proto = protocol_preset(gt, 2);
    const Series d = signal_series(gt.maps, proto);

    GnConfig cfg;
    cfg.gn_steps = 8;

    FitInfo info;
    const ParameterMaps fit = irgn_fit(d, proto, cfg, &info);
    std::vector<double> errs_cbf, errs_att;
    for (std::size_t v = 0; v < d.nvox(); ++v) {
        if (gt.labels[v] == 0.0)
            continue;
        if (gt.maps.cbf[v] > 0)
            errs_cbf.push_back(std::abs(fit.cbf[v] - gt.maps.cbf[v]) / gt.maps.cbf[v]);
        if (gt.maps.att[v] > 0)
            errs_att.push_back(std::abs(fit.att[v] - gt.maps.att[v]) / gt.maps.att[v]);
    }
    std::sort(errs_cbf.begin(), errs_cbf.end());
    std::sort(errs_att.begin(), errs_att.end());
    CHECK(errs_cbf[errs_cbf.size() / 2] <= 0.02);
    CHECK(errs_att[errs_att.size() / 2] <= 0.03);

    // box clamp invariant
    for (std::size_t v = 0; v < d.nvox(); ++v) {
        CHECK(fit.cbf[v] >= 0.0);
        CHECK(fit.cbf[v] <= 300.0 / 6000.0 + 1e-15);
        CHECK(fit.att[v] >= 0.0);
        CHECK(fit.att[v] <= 6.0 + 1e-15);
    }

    // init at ground truth on noiseless data stays within 0.5% of init
    GnConfig cfg_fp = cfg;
    cfg_fp.gn_steps = 4;
    const ParameterMaps fp = irgn_fit(d, proto, cfg_fp, gt.maps);
    for (std::size_t v = 0; v < d.nvox(); ++v) {
        if (gt.maps.cbf[v] > units::cbf_to_internal(5.0))
            CHECK(std::abs(fp.cbf[v] - gt.maps.cbf[v]) / gt.maps.cbf[v] <= 0.005);
        if (gt.maps.att[v] > 0.1)
            CHECK(std::abs(fp.att[v] - gt.maps.att[v]) / gt.maps.att[v] <= 0.005);
    }

    // gamma and delta forced to their floors: agrees with the NLLS baseline
    GnConfig tiny = cfg;
    tiny.snr_scaling = false;
    tiny.gamma_init = tiny.gamma_final = 1e-12;
    tiny.delta_init = tiny.delta_final = 1e-10;
    const ParameterMaps low = irgn_fit(d, proto, tiny);
    NllsConfig ncfg;
    const NllsVolumeResult nl = nlls_fit_volume(d, proto, ncfg);
    std::vector<double> rel;
    for (std::size_t v = 0; v < d.nvox(); ++v) {
        if (gt.labels[v] == 0.0 || nl.maps.cbf[v] <= 0)
            continue;
        rel.push_back(std::abs(low.cbf[v] - nl.maps.cbf[v]) / nl.maps.cbf[v]);
    }
    std::sort(rel.begin(), rel.end());
    CHECK(rel[rel.size() / 2] <= 0.01);
}

TEST_CASE("irgn_fit: monotone outer progress with frozen schedules")
{
    PhantomSpec spec;
    spec.grid = Grid{12, 10, 10};
    GroundTruth gt = generate_ground_truth(spec);
    Protocol proto = protocol_preset(gt, 1);
    Series d = signal_series(gt.maps, proto);

    GnConfig cfg;
    cfg.gn_steps = 6;
    cfg.gamma_decay = 1.0;
    cfg.gamma_init = cfg.gamma_final = 1e-5;
    cfg.delta_decay = 1.0;
    cfg.delta_init = cfg.delta_final = 1e-4;
    cfg.snr_scaling = false;

    FitInfo info;
    irgn_fit(d, proto, cfg, &info);
    REQUIRE(info.objective_trace.size() == 6);
    int nondecreasing_violations = 0;
    for (std::size_t k = 1; k < info.objective_trace.size(); ++k)
        if (info.objective_trace[k] > info.objective_trace[k - 1] * (1.0 + 1e-10))
            ++nondecreasing_violations;
    CHECK(nondecreasing_violations <= 1);
}
