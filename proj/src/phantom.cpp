#include "aslfit/phantom.hpp"

#include "aslfit/parallel.hpp"
#include "aslfit/rng.hpp"
#include "aslfit/units.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace asl {

void PhantomSpec::validate() const
{
    if (!grid.valid())
        throw std::invalid_argument("phantom: invalid grid");
    if (averages < 1)
        throw std::invalid_argument("phantom: averages must be >= 1");
    if (noise_sigma > 0.0 && !std::isfinite(noise_sigma))
        throw std::invalid_argument("phantom: bad noise_sigma");
}

namespace {

struct Ellipsoid {
    double ci, cj, ck; // center, fractional coordinates
    double ri, rj, rk; // semi-axes, fractional
    bool contains(double fi, double fj, double fk) const
    {
        const double a = (fi - ci) / ri, b = (fj - cj) / rj, c = (fk - ck) / rk;
        return a * a + b * b + c * c <= 1.0;
    }
};

// brain-like nested geometry; the two pathology regions stand in for the
// frontal-WM and putamen lesions of the paper's cases
const Ellipsoid kBrain{0.5, 0.5, 0.5, 0.44, 0.42, 0.40};
const Ellipsoid kWmCore{0.5, 0.5, 0.5, 0.32, 0.30, 0.28};
const Ellipsoid kPathFrontalWm{0.5, 0.70, 0.55, 0.10, 0.09, 0.09}; // mostly WM core
const Ellipsoid kPathPutamen{0.13, 0.5, 0.5, 0.05, 0.06, 0.06};   // GM shell

int label_at(double fi, double fj, double fk)
{
    if (!kBrain.contains(fi, fj, fk))
        return kLabelBackground;
    const bool pathology = kPathFrontalWm.contains(fi, fj, fk) || kPathPutamen.contains(fi, fj, fk);
    if (pathology)
        return kLabelPathology;
    return kWmCore.contains(fi, fj, fk) ? kLabelWm : kLabelGm;
}

} // namespace

GroundTruth generate_ground_truth(const PhantomSpec &spec)
{
    spec.validate();
    const Grid g = spec.grid;
    const int up = 3; // hi-res factor; block-averaging mixes boundary voxels
    GroundTruth gt{ParameterMaps(g), Volume(g), Volume(g, spec.t1_tissue), Volume(g), spec};

    const double hi_ni = g.ni * up, hi_nj = g.nj * up, hi_nk = g.nk * up;
    parallel_for(g.nvox(), [&](std::size_t v) {
        const int i = static_cast<int>(v % g.ni);
        const int j = static_cast<int>((v / g.ni) % g.nj);
        const int k = static_cast<int>(v / (static_cast<std::size_t>(g.ni) * g.nj));
        double cbf = 0, att = 0, m0 = 0;
        std::array<int, 4> count{0, 0, 0, 0};
        double first_c = 0, first_a = 0, first_m = 0;
        bool uni_c = true, uni_a = true, uni_m = true;
        int sub = 0;
        for (int dk = 0; dk < up; ++dk)
            for (int dj = 0; dj < up; ++dj)
                for (int di = 0; di < up; ++di) {
                    const double fi = (i * up + di + 0.5) / hi_ni;
                    const double fj = (j * up + dj + 0.5) / hi_nj;
                    const double fk = (k * up + dk + 0.5) / hi_nk;
                    const int lab = label_at(fi, fj, fk);
                    ++count[lab];
                    double c = 0, a = 0, m = 0;
                    switch (lab) {
                    case kLabelGm:
                        c = spec.gm_cbf;
                        a = spec.gm_att;
                        m = spec.gm_m0;
                        break;
                    case kLabelWm:
                        c = spec.wm_cbf;
                        a = spec.wm_att;
                        m = spec.wm_m0;
                        break;
                    case kLabelPathology: {
                        // pathology sits in tissue; base values follow the
                        // surrounding compartment (WM core or GM shell)
                        const bool in_wm = kWmCore.contains(fi, fj, fk);
                        c = in_wm ? spec.wm_cbf : spec.gm_cbf;
                        a = in_wm ? spec.wm_att : spec.gm_att;
                        m = in_wm ? spec.wm_m0 : spec.gm_m0;
                        if (spec.pathology_case != PathologyCase::C1)
                            c *= spec.pathology_cbf_factor;
                        if (spec.pathology_case == PathologyCase::C3)
                            a = spec.pathology_att;
                        break;
                    }
                    default:
                        break;
                    }
                    cbf += c;
                    att += a;
                    m0 += m;
                    if (sub == 0) {
                        first_c = c;
                        first_a = a;
                        first_m = m;
                    } else {
                        uni_c = uni_c && c == first_c;
                        uni_a = uni_a && a == first_a;
                        uni_m = uni_m && m == first_m;
                    }
                    ++sub;
                }
        // single-valued components carry the exact value, no averaging noise
        const double inv = 1.0 / (up * up * up);
        gt.maps.cbf[v] = units::cbf_to_internal(uni_c ? first_c : cbf * inv);
        gt.maps.att[v] = uni_a ? first_a : att * inv;
        gt.m0[v] = uni_m ? first_m : m0 * inv;
        int best = 0;
        for (int lab = 1; lab < 4; ++lab)
            if (count[lab] > count[best])
                best = lab;
        gt.labels[v] = best;
    });
    return gt;
}

Protocol protocol_preset(const GroundTruth &gt, int averages)
{
    if (averages < 1)
        throw std::invalid_argument("protocol_preset: averages must be >= 1");
    Protocol p;
    for (int rep = 0; rep < averages; ++rep)
        for (int n = 0; n < 16; ++n) {
            p.t.push_back(units::ms_to_s(1050.0 + 250.0 * n));
            p.tau.push_back(units::ms_to_s(n < 3 ? 1050.0 + 250.0 * n : 1800.0));
        }
    p.alpha = 0.85;
    p.lambda = 0.9;
    p.t1 = gt.spec.t1_tissue;
    p.t1b = 1.65;
    p.m0 = gt.m0;
    return p;
}

Simulated simulate_acquisition(const GroundTruth &gt, const Protocol &proto, double sigma,
                               std::uint64_t seed, bool real_part)
{
    if (sigma < 0.0)
        throw std::invalid_argument("simulate_acquisition: sigma must be >= 0");
    const Series clean = signal_series(gt.maps, proto);
    const int nd = proto.n_frames();
    Simulated sim{Series(gt.maps.grid(), nd), Series(gt.maps.grid(), nd), Series(gt.maps.grid(), nd)};
    const CounterRng rng{seed};
    parallel_for(clean.nvox(), [&](std::size_t v) {
        const double c0 = (1.0 - proto.lambda) * proto.m0[v]; // background-suppressed control
        for (int n = 0; n < nd; ++n) {
            const double l0 = c0 - clean.at(v, n);
            double c = c0, l = l0;
            if (sigma > 0.0) {
                // one counter per (voxel, frame, image, channel-pair)
                const std::uint64_t base = (v * static_cast<std::uint64_t>(nd) + n) * 2;
                double cr, ci, lr, li;
                rng.normal_pair(base, cr, ci);
                rng.normal_pair(base + 1, lr, li);
                if (real_part) {
                    c = c0 + sigma * cr;
                    l = l0 + sigma * lr;
                } else {
                    c = std::hypot(c0 + sigma * cr, sigma * ci);
                    l = std::hypot(l0 + sigma * lr, sigma * li);
                }
            }
            sim.control.at(v, n) = c;
            sim.label.at(v, n) = l;
            sim.pwi.at(v, n) = c - l;
        }
    });
    return sim;
}

double auto_noise_sigma(const GroundTruth &gt, const Protocol &proto)
{
    // mean clean GM PWI over frames, averaged over pure-GM voxels; tSNR 5 for
    // one average with PWI noise std sqrt(2)*sigma
    const Series clean = signal_series(gt.maps, proto);
    double sum = 0.0;
    std::size_t n_gm = 0;
    for (std::size_t v = 0; v < clean.nvox(); ++v) {
        if (gt.labels[v] != static_cast<double>(kLabelGm))
            continue;
        ++n_gm;
        double m = 0.0;
        for (int n = 0; n < clean.n_frames; ++n)
            m += clean.at(v, n);
        sum += m / clean.n_frames;
    }
    if (n_gm == 0)
        throw std::invalid_argument("auto_noise_sigma: phantom has no GM voxels");
    const double mean_gm = sum / static_cast<double>(n_gm);
    return mean_gm / (5.0 * std::sqrt(2.0));
}

Series average_repetitions(const Series &s, int averages)
{
    if (averages < 1 || s.n_frames % averages != 0)
        throw std::invalid_argument("average_repetitions: frame count not divisible");
    const int per = s.n_frames / averages;
    Series out(s.grid, per);
    parallel_for(s.nvox(), [&](std::size_t v) {
        for (int n = 0; n < per; ++n) {
            double acc = 0.0;
            for (int rep = 0; rep < averages; ++rep)
                acc += s.at(v, rep * per + n);
            out.at(v, n) = acc / averages;
        }
    });
    return out;
}

Protocol protocol_first_repetition(const Protocol &p, int averages)
{
    if (averages < 1 || p.n_frames() % averages != 0)
        throw std::invalid_argument("protocol_first_repetition: frame count not divisible");
    Protocol out = p;
    const int per = p.n_frames() / averages;
    out.t.assign(p.t.begin(), p.t.begin() + per);
    out.tau.assign(p.tau.begin(), p.tau.begin() + per);
    return out;
}

} // namespace asl
