// capi.cpp — extern-C surface; translates exceptions into status codes and a
// thread-local error message.
#include "aslfit.h"

#include "aslfit/config.hpp"
#include "aslfit/errors.hpp"
#include "aslfit/nifti.hpp"
#include "aslfit/nlls.hpp"
#include "aslfit/parallel.hpp"
#include "aslfit/phantom.hpp"
#include "aslfit/solver.hpp"
#include "aslfit/stats.hpp"
#include "aslfit/units.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <string>

using namespace asl;

struct aslfit_volume {
    Volume v;
};
struct aslfit_series {
    Series s;
};
struct aslfit_protocol {
    Protocol p;
};
struct aslfit_maps {
    Volume cbf; // external units
    Volume att;
    Volume flags;
    std::string manifest;
};
struct aslfit_phantom {
    GroundTruth gt;
};

namespace {

thread_local std::string g_error;

int fail(int code, const std::string &msg)
{
    g_error = msg;
    return code;
}

template <class Fn>
int guarded(Fn &&fn)
{
    try {
        return fn();
    } catch (const IoError &e) {
        return fail(ASLFIT_ERR_IO, e.what());
    } catch (const SolverError &e) {
        return fail(ASLFIT_ERR_SOLVER, e.what());
    } catch (const ConfigError &e) {
        return fail(ASLFIT_ERR_INVALID, e.what());
    } catch (const std::invalid_argument &e) {
        return fail(ASLFIT_ERR_INVALID, e.what());
    } catch (const std::exception &e) {
        return fail(ASLFIT_ERR_INTERNAL, e.what());
    }
}

int require(bool cond, const char *msg)
{
    return cond ? ASLFIT_OK : fail(ASLFIT_ERR_INVALID, msg);
}

RunConfig config_from_json_or_default(const char *config_json)
{
    RunConfig base = preset_config("paper");
    if (config_json == nullptr || std::strlen(config_json) == 0)
        return base;
    return parse_config(config_json, base);
}

std::string manifest_json(const RunConfig &cfg, const FitInfo &info, const char *method)
{
    nlohmann::json j;
    j["method"] = method;
    j["config_hash"] = config_hash(cfg);
    j["inner_iterations"] = info.inner_iterations;
    j["objective_trace"] = info.objective_trace;
    j["snr_factor"] = info.snr_factor;
    j["gamma_scale"] = info.gamma_scale;
    j["data_scale"] = info.data_scale;
    j["wall_seconds"] = info.wall_seconds;
    j["units"] = {{"cbf_external", "ml/100g/min"},
                  {"cbf_internal", "ml/g/s"},
                  {"att", "s"},
                  {"cbf_conversion_factor", units::kCbfExtPerInt}};
    return j.dump(2);
}

} // namespace

extern "C" {

const char *aslfit_version(void) { return "aslfit 1.0.0"; }

const char *aslfit_last_error(void) { return g_error.c_str(); }

void aslfit_set_threads(int n) { set_threads(n); }

/* ---- volumes ---------------------------------------------------------- */

int aslfit_volume_create(const int dims[3], const double *data, aslfit_volume **out)
{
    return guarded([&] {
        if (int rc = require(dims && out, "null argument"))
            return rc;
        Grid g{dims[0], dims[1], dims[2]};
        if (int rc = require(g.valid(), "dims must be positive"))
            return rc;
        auto *h = new aslfit_volume{Volume(g)};
        if (data)
            std::copy(data, data + g.nvox(), h->v.data.begin());
        *out = h;
        return ASLFIT_OK;
    });
}

void aslfit_volume_free(aslfit_volume *v) { delete v; }

int aslfit_volume_dims(const aslfit_volume *v, int dims[3])
{
    if (int rc = require(v && dims, "null argument"))
        return rc;
    dims[0] = v->v.grid.ni;
    dims[1] = v->v.grid.nj;
    dims[2] = v->v.grid.nk;
    return ASLFIT_OK;
}

const double *aslfit_volume_data(const aslfit_volume *v) { return v ? v->v.data.data() : nullptr; }

double *aslfit_volume_data_mut(aslfit_volume *v) { return v ? v->v.data.data() : nullptr; }

int aslfit_volume_read_nifti(const char *path, aslfit_volume **out)
{
    return guarded([&] {
        if (int rc = require(path && out, "null argument"))
            return rc;
        *out = new aslfit_volume{read_volume_nifti(path)};
        return ASLFIT_OK;
    });
}

int aslfit_volume_write_nifti(const char *path, const aslfit_volume *v)
{
    return guarded([&] {
        if (int rc = require(path && v, "null argument"))
            return rc;
        write_volume_nifti(path, v->v);
        return ASLFIT_OK;
    });
}

/* ---- series ----------------------------------------------------------- */

int aslfit_series_create(const int dims[3], int n_frames, const double *frame_major,
                         aslfit_series **out)
{
    return guarded([&] {
        if (int rc = require(dims && out && n_frames > 0, "bad series shape"))
            return rc;
        Grid g{dims[0], dims[1], dims[2]};
        if (int rc = require(g.valid(), "dims must be positive"))
            return rc;
        auto *h = new aslfit_series{Series(g, n_frames)};
        if (frame_major) {
            const std::size_t nvox = g.nvox();
            for (std::size_t v = 0; v < nvox; ++v)
                for (int n = 0; n < n_frames; ++n)
                    h->s.at(v, n) = frame_major[static_cast<std::size_t>(n) * nvox + v];
        }
        *out = h;
        return ASLFIT_OK;
    });
}

void aslfit_series_free(aslfit_series *s) { delete s; }

int aslfit_series_dims(const aslfit_series *s, int dims[3], int *n_frames)
{
    if (int rc = require(s && dims && n_frames, "null argument"))
        return rc;
    dims[0] = s->s.grid.ni;
    dims[1] = s->s.grid.nj;
    dims[2] = s->s.grid.nk;
    *n_frames = s->s.n_frames;
    return ASLFIT_OK;
}

int aslfit_series_frame(const aslfit_series *s, int frame, aslfit_volume **out)
{
    return guarded([&] {
        if (int rc = require(s && out && frame >= 0 && frame < s->s.n_frames, "bad frame index"))
            return rc;
        *out = new aslfit_volume{s->s.frame_volume(frame)};
        return ASLFIT_OK;
    });
}

int aslfit_series_read_nifti(const char *path, aslfit_series **out)
{
    return guarded([&] {
        if (int rc = require(path && out, "null argument"))
            return rc;
        *out = new aslfit_series{read_series_nifti(path)};
        return ASLFIT_OK;
    });
}

int aslfit_series_write_nifti(const char *path, const aslfit_series *s)
{
    return guarded([&] {
        if (int rc = require(path && s, "null argument"))
            return rc;
        write_series_nifti(path, s->s);
        return ASLFIT_OK;
    });
}

int aslfit_series_quantize_f32(const aslfit_series *s, aslfit_series **out)
{
    return guarded([&] {
        if (int rc = require(s && out, "null argument"))
            return rc;
        *out = new aslfit_series{quantize_f32(s->s)};
        return ASLFIT_OK;
    });
}

/* ---- protocol --------------------------------------------------------- */

int aslfit_protocol_create(int n_frames, const double *t_s, const double *tau_s, double alpha,
                           double lambda, double t1_s, double t1b_s, const aslfit_volume *m0,
                           aslfit_protocol **out)
{
    return guarded([&] {
        if (int rc = require(t_s && tau_s && m0 && out && n_frames > 0, "bad protocol arguments"))
            return rc;
        Protocol p;
        p.t.assign(t_s, t_s + n_frames);
        p.tau.assign(tau_s, tau_s + n_frames);
        p.alpha = alpha;
        p.lambda = lambda;
        p.t1 = t1_s;
        p.t1b = t1b_s;
        p.m0 = m0->v;
        p.validate();
        *out = new aslfit_protocol{std::move(p)};
        return ASLFIT_OK;
    });
}

void aslfit_protocol_free(aslfit_protocol *p) { delete p; }

int aslfit_protocol_n_frames(const aslfit_protocol *p) { return p ? p->p.n_frames() : -1; }

int aslfit_protocol_from_sidecar(const char *path, const aslfit_volume *m0, aslfit_protocol **out)
{
    return guarded([&] {
        if (int rc = require(path && m0 && out, "null argument"))
            return rc;
        *out = new aslfit_protocol{read_sidecar(path, m0->v)};
        return ASLFIT_OK;
    });
}

int aslfit_protocol_write_sidecar(const char *path, const aslfit_protocol *p)
{
    return guarded([&] {
        if (int rc = require(path && p, "null argument"))
            return rc;
        write_sidecar(path, p->p);
        return ASLFIT_OK;
    });
}

/* ---- fitting ---------------------------------------------------------- */

int aslfit_fit_tgv(const aslfit_series *d, const aslfit_protocol *p, const char *config_json,
                   aslfit_progress_fn progress, void *user, aslfit_maps **out)
{
    return guarded([&] {
        if (int rc = require(d && p && out, "null argument"))
            return rc;
        const RunConfig cfg = config_from_json_or_default(config_json);
        ProgressFn cb;
        if (progress)
            cb = [progress, user](int gn, int it, double obj, double tau, double beta) {
                progress(gn, it, obj, tau, beta, user);
            };
        FitInfo info;
        const ParameterMaps maps = irgn_fit(d->s, p->p, cfg.solver, &info, cb);
        auto *h = new aslfit_maps{Volume(maps.cbf.grid), Volume(maps.att.grid),
                                  Volume(maps.cbf.grid, 0.0), manifest_json(cfg, info, "tgv")};
        for (std::size_t v = 0; v < maps.cbf.size(); ++v) {
            h->cbf[v] = units::cbf_to_external(maps.cbf[v]);
            h->att[v] = maps.att[v];
        }
        *out = h;
        return ASLFIT_OK;
    });
}

int aslfit_fit_nlls(const aslfit_series *d, const aslfit_protocol *p, const char *config_json,
                    aslfit_maps **out)
{
    return guarded([&] {
        if (int rc = require(d && p && out, "null argument"))
            return rc;
        const RunConfig cfg = config_from_json_or_default(config_json);
        const auto t0 = std::chrono::steady_clock::now();
        const NllsVolumeResult r = nlls_fit_volume(d->s, p->p, cfg.baseline);
        FitInfo info;
        info.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        auto *h = new aslfit_maps{Volume(r.maps.cbf.grid), Volume(r.maps.att.grid), r.flags,
                                  manifest_json(cfg, info, "nlls")};
        for (std::size_t v = 0; v < r.maps.cbf.size(); ++v) {
            h->cbf[v] = units::cbf_to_external(r.maps.cbf[v]);
            h->att[v] = r.maps.att[v];
        }
        *out = h;
        return ASLFIT_OK;
    });
}

void aslfit_maps_free(aslfit_maps *m) { delete m; }

int aslfit_maps_cbf(const aslfit_maps *m, aslfit_volume **out)
{
    return guarded([&] {
        if (int rc = require(m && out, "null argument"))
            return rc;
        *out = new aslfit_volume{m->cbf};
        return ASLFIT_OK;
    });
}

int aslfit_maps_att(const aslfit_maps *m, aslfit_volume **out)
{
    return guarded([&] {
        if (int rc = require(m && out, "null argument"))
            return rc;
        *out = new aslfit_volume{m->att};
        return ASLFIT_OK;
    });
}

int aslfit_maps_flags(const aslfit_maps *m, aslfit_volume **out)
{
    return guarded([&] {
        if (int rc = require(m && out, "null argument"))
            return rc;
        *out = new aslfit_volume{m->flags};
        return ASLFIT_OK;
    });
}

const char *aslfit_maps_manifest(const aslfit_maps *m) { return m ? m->manifest.c_str() : nullptr; }

/* ---- phantom ---------------------------------------------------------- */

int aslfit_phantom_generate(const char *spec_json, aslfit_phantom **out)
{
    return guarded([&] {
        if (int rc = require(out != nullptr, "null argument"))
            return rc;
        const RunConfig cfg = config_from_json_or_default(spec_json);
        *out = new aslfit_phantom{generate_ground_truth(cfg.phantom)};
        return ASLFIT_OK;
    });
}

void aslfit_phantom_free(aslfit_phantom *p) { delete p; }

int aslfit_phantom_volume(const aslfit_phantom *p, const char *name, aslfit_volume **out)
{
    return guarded([&] {
        if (int rc = require(p && name && out, "null argument"))
            return rc;
        const std::string n = name;
        Volume v;
        if (n == "cbf") {
            v = p->gt.maps.cbf;
            for (double &x : v.data)
                x = units::cbf_to_external(x);
        } else if (n == "att") {
            v = p->gt.maps.att;
        } else if (n == "m0") {
            v = p->gt.m0;
        } else if (n == "t1") {
            v = p->gt.t1;
        } else if (n == "labels") {
            v = p->gt.labels;
        } else {
            return fail(ASLFIT_ERR_INVALID, "unknown phantom volume '" + n + "'");
        }
        *out = new aslfit_volume{std::move(v)};
        return ASLFIT_OK;
    });
}

int aslfit_phantom_protocol(const aslfit_phantom *p, aslfit_protocol **out)
{
    return guarded([&] {
        if (int rc = require(p && out, "null argument"))
            return rc;
        *out = new aslfit_protocol{protocol_preset(p->gt, p->gt.spec.averages)};
        return ASLFIT_OK;
    });
}

int aslfit_phantom_simulate(const aslfit_phantom *p, double noise_sigma, uint64_t seed,
                            aslfit_series **pwi, aslfit_series **control, aslfit_series **label)
{
    return guarded([&] {
        if (int rc = require(p && pwi, "null argument"))
            return rc;
        const Protocol proto = protocol_preset(p->gt, p->gt.spec.averages);
        const double sigma = noise_sigma < 0.0 ? auto_noise_sigma(p->gt, proto) : noise_sigma;
        Simulated sim = simulate_acquisition(p->gt, proto, sigma, seed, p->gt.spec.real_part);
        if (p->gt.spec.averaged) {
            sim.pwi = average_repetitions(sim.pwi, p->gt.spec.averages);
            sim.control = average_repetitions(sim.control, p->gt.spec.averages);
            sim.label = average_repetitions(sim.label, p->gt.spec.averages);
        }
        *pwi = new aslfit_series{std::move(sim.pwi)};
        if (control)
            *control = new aslfit_series{std::move(sim.control)};
        if (label)
            *label = new aslfit_series{std::move(sim.label)};
        return ASLFIT_OK;
    });
}

int aslfit_phantom_noise_sigma(const aslfit_phantom *p, double *out)
{
    return guarded([&] {
        if (int rc = require(p && out, "null argument"))
            return rc;
        const Protocol proto = protocol_preset(p->gt, p->gt.spec.averages);
        *out = p->gt.spec.noise_sigma < 0.0 ? auto_noise_sigma(p->gt, proto)
                                            : p->gt.spec.noise_sigma;
        return ASLFIT_OK;
    });
}

/* ---- evaluation ------------------------------------------------------- */

int aslfit_snr_scale(const aslfit_series *d, double *out)
{
    return guarded([&] {
        if (int rc = require(d && out, "null argument"))
            return rc;
        *out = snr_scale(d->s);
        return ASLFIT_OK;
    });
}

int aslfit_relative_difference(const aslfit_volume *est, const aslfit_volume *ref,
                               aslfit_volume **out)
{
    return guarded([&] {
        if (int rc = require(est && ref && out, "null argument"))
            return rc;
        *out = new aslfit_volume{relative_difference(est->v, ref->v)};
        return ASLFIT_OK;
    });
}

int aslfit_masks_from_reference(const aslfit_volume *ref_cbf, const aslfit_volume *labels,
                                aslfit_volume **gm, aslfit_volume **wm, aslfit_volume **pathology)
{
    return guarded([&] {
        if (int rc = require(ref_cbf != nullptr, "null argument"))
            return rc;
        const Volume lab = labels ? labels->v : Volume{};
        if (gm)
            *gm = new aslfit_volume{gm_mask(ref_cbf->v, lab)};
        if (wm)
            *wm = new aslfit_volume{wm_mask(ref_cbf->v, lab)};
        if (pathology) {
            if (labels)
                *pathology = new aslfit_volume{pathology_mask(labels->v)};
            else
                *pathology = new aslfit_volume{Volume(ref_cbf->v.grid, 0.0)};
        }
        return ASLFIT_OK;
    });
}

int aslfit_region_stats(const aslfit_volume *est, const aslfit_volume *ref,
                        const aslfit_volume *mask, const char *region, const char *metric,
                        char **json_out)
{
    return guarded([&] {
        if (int rc = require(est && ref && mask && region && metric && json_out, "null argument"))
            return rc;
        const RegionStat rs = region_stat(est->v, ref->v, mask->v, region, metric);
        StatsReport rep;
        rep.rows.push_back(rs);
        const std::string j = rep.to_json();
        *json_out = static_cast<char *>(std::malloc(j.size() + 1));
        if (!*json_out)
            return fail(ASLFIT_ERR_INTERNAL, "out of memory");
        std::memcpy(*json_out, j.c_str(), j.size() + 1);
        return ASLFIT_OK;
    });
}

int aslfit_stack_median_iqr(const aslfit_volume *const *vols, int n, aslfit_volume **median,
                            aslfit_volume **iqr)
{
    return guarded([&] {
        if (int rc = require(vols && n >= 2 && median && iqr, "need >= 2 volumes"))
            return rc;
        std::vector<const Volume *> ptrs;
        for (int i = 0; i < n; ++i) {
            if (int rc = require(vols[i] != nullptr, "null volume in stack"))
                return rc;
            ptrs.push_back(&vols[i]->v);
        }
        auto *med = new aslfit_volume{};
        auto *iq = new aslfit_volume{};
        stack_median_iqr(ptrs, med->v, iq->v);
        *median = med;
        *iqr = iq;
        return ASLFIT_OK;
    });
}

int aslfit_relative_iqr_pct(const aslfit_volume *iqr, const aslfit_volume *ref,
                            const aslfit_volume *mask, double *out)
{
    return guarded([&] {
        if (int rc = require(iqr && ref && mask && out, "null argument"))
            return rc;
        *out = relative_iqr_pct(iqr->v, ref->v, mask->v);
        return ASLFIT_OK;
    });
}

void aslfit_string_free(char *s) { std::free(s); }

} // extern "C"
