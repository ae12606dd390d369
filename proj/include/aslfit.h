/* aslfit.h — C API of the ASL CBF/ATT fitting library.
 *
 * All objects are opaque handles created and destroyed by this library.
 * Functions return ASLFIT_OK (0) on success or an error code; the message
 * for the most recent failure on the calling thread is available through
 * aslfit_last_error(). Volumes and series carry double samples; CBF values
 * cross this boundary in ml/100g/min and times in seconds.
 */
#ifndef ASLFIT_H
#define ASLFIT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ASLFIT_API __declspec(dllexport)
#else
#define ASLFIT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

enum aslfit_status {
    ASLFIT_OK = 0,
    ASLFIT_ERR_INVALID = 1,
    ASLFIT_ERR_IO = 2,
    ASLFIT_ERR_SOLVER = 3,
    ASLFIT_ERR_INTERNAL = 4
};

typedef struct aslfit_volume aslfit_volume;     /* one 3-D scalar volume */
typedef struct aslfit_series aslfit_series;     /* N_d frames on one grid */
typedef struct aslfit_protocol aslfit_protocol; /* timing + constants + M0 */
typedef struct aslfit_maps aslfit_maps;         /* fitted CBF/ATT pair */
typedef struct aslfit_phantom aslfit_phantom;   /* synthetic ground truth */

ASLFIT_API const char *aslfit_version(void);
ASLFIT_API const char *aslfit_last_error(void);
ASLFIT_API void aslfit_set_threads(int n);

/* ---- volumes ---------------------------------------------------------- */
/* data (nullable -> zeros) is x-fastest, length dims[0]*dims[1]*dims[2] */
ASLFIT_API int aslfit_volume_create(const int dims[3], const double *data, aslfit_volume **out);
ASLFIT_API void aslfit_volume_free(aslfit_volume *v);
ASLFIT_API int aslfit_volume_dims(const aslfit_volume *v, int dims[3]);
ASLFIT_API const double *aslfit_volume_data(const aslfit_volume *v);
ASLFIT_API double *aslfit_volume_data_mut(aslfit_volume *v);
ASLFIT_API int aslfit_volume_read_nifti(const char *path, aslfit_volume **out);
ASLFIT_API int aslfit_volume_write_nifti(const char *path, const aslfit_volume *v);

/* ---- series ----------------------------------------------------------- */
/* frame_major (nullable) is frame-slowest: frame f, voxel v at f*nvox + v */
ASLFIT_API int aslfit_series_create(const int dims[3], int n_frames, const double *frame_major,
                                    aslfit_series **out);
ASLFIT_API void aslfit_series_free(aslfit_series *s);
ASLFIT_API int aslfit_series_dims(const aslfit_series *s, int dims[3], int *n_frames);
ASLFIT_API int aslfit_series_frame(const aslfit_series *s, int frame, aslfit_volume **out);
ASLFIT_API int aslfit_series_read_nifti(const char *path, aslfit_series **out);
ASLFIT_API int aslfit_series_write_nifti(const char *path, const aslfit_series *s);
/* round samples through float32 (what one write/read cycle preserves) */
ASLFIT_API int aslfit_series_quantize_f32(const aslfit_series *s, aslfit_series **out);

/* ---- protocol --------------------------------------------------------- */
ASLFIT_API int aslfit_protocol_create(int n_frames, const double *t_s, const double *tau_s,
                                      double alpha, double lambda, double t1_s, double t1b_s,
                                      const aslfit_volume *m0, aslfit_protocol **out);
ASLFIT_API void aslfit_protocol_free(aslfit_protocol *p);
ASLFIT_API int aslfit_protocol_n_frames(const aslfit_protocol *p);
ASLFIT_API int aslfit_protocol_from_sidecar(const char *path, const aslfit_volume *m0,
                                            aslfit_protocol **out);
ASLFIT_API int aslfit_protocol_write_sidecar(const char *path, const aslfit_protocol *p);

/* ---- fitting ---------------------------------------------------------- */
typedef void (*aslfit_progress_fn)(int gn_step, int iteration, double objective, double tau,
                                   double beta, void *user);

/* config_json: a run-config document or NULL for the paper preset */
ASLFIT_API int aslfit_fit_tgv(const aslfit_series *d, const aslfit_protocol *p,
                              const char *config_json, aslfit_progress_fn progress, void *user,
                              aslfit_maps **out);
ASLFIT_API int aslfit_fit_nlls(const aslfit_series *d, const aslfit_protocol *p,
                               const char *config_json, aslfit_maps **out);
ASLFIT_API void aslfit_maps_free(aslfit_maps *m);
/* cbf in ml/100g/min, att in seconds; flags only for nlls (else zeros) */
ASLFIT_API int aslfit_maps_cbf(const aslfit_maps *m, aslfit_volume **out);
ASLFIT_API int aslfit_maps_att(const aslfit_maps *m, aslfit_volume **out);
ASLFIT_API int aslfit_maps_flags(const aslfit_maps *m, aslfit_volume **out);
/* JSON run manifest (iterations, objective trace, timings); owned by maps */
ASLFIT_API const char *aslfit_maps_manifest(const aslfit_maps *m);

/* ---- phantom ---------------------------------------------------------- */
/* spec_json: the "phantom" config section (or a full run config), or NULL */
ASLFIT_API int aslfit_phantom_generate(const char *spec_json, aslfit_phantom **out);
ASLFIT_API void aslfit_phantom_free(aslfit_phantom *p);
/* name: "cbf", "att" (ground truth, external units), "m0", "t1", "labels" */
ASLFIT_API int aslfit_phantom_volume(const aslfit_phantom *p, const char *name,
                                     aslfit_volume **out);
ASLFIT_API int aslfit_phantom_protocol(const aslfit_phantom *p, aslfit_protocol **out);
/* noise_sigma < 0 -> auto; returns the PWI series plus raw control/label */
ASLFIT_API int aslfit_phantom_simulate(const aslfit_phantom *p, double noise_sigma, uint64_t seed,
                                       aslfit_series **pwi, aslfit_series **control,
                                       aslfit_series **label);
ASLFIT_API int aslfit_phantom_noise_sigma(const aslfit_phantom *p, double *out);

/* ---- evaluation ------------------------------------------------------- */
ASLFIT_API int aslfit_snr_scale(const aslfit_series *d, double *out);
/* (est-ref)/ref with NaN where ref == 0 */
ASLFIT_API int aslfit_relative_difference(const aslfit_volume *est, const aslfit_volume *ref,
                                          aslfit_volume **out);
/* masks from the reference CBF map (ml/100g/min); labels nullable */
ASLFIT_API int aslfit_masks_from_reference(const aslfit_volume *ref_cbf,
                                           const aslfit_volume *labels, aslfit_volume **gm,
                                           aslfit_volume **wm, aslfit_volume **pathology);
/* one stats row as JSON; caller frees with aslfit_string_free */
ASLFIT_API int aslfit_region_stats(const aslfit_volume *est, const aslfit_volume *ref,
                                   const aslfit_volume *mask, const char *region,
                                   const char *metric, char **json_out);
ASLFIT_API int aslfit_stack_median_iqr(const aslfit_volume *const *vols, int n,
                                       aslfit_volume **median, aslfit_volume **iqr);
/* median over mask of IQR/ref * 100 */
ASLFIT_API int aslfit_relative_iqr_pct(const aslfit_volume *iqr, const aslfit_volume *ref,
                                       const aslfit_volume *mask, double *out);
ASLFIT_API void aslfit_string_free(char *s);

#ifdef __cplusplus
}
#endif

#endif /* ASLFIT_H */
