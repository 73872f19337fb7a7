/* C interface of the screwiga library. All functions are safe to call from C; every
 * handle is opaque and owned by the caller until passed to its matching free function.
 * Failing calls return a nonzero status and leave a message in sgi_last_error(). */
#ifndef SCREWIGA_H
#define SCREWIGA_H

#include <stddef.h>

#if defined(_WIN32)
#  if defined(SGI_BUILDING_LIBRARY)
#    define SGI_API __declspec(dllexport)
#  else
#    define SGI_API __declspec(dllimport)
#  endif
#else
#  define SGI_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sgi_status {
  SGI_OK = 0,
  SGI_ERR_INTERNAL = 1,
  SGI_ERR_CONFIG = 2,
  SGI_ERR_GEOMETRY = 3,
  SGI_ERR_ASSEMBLY = 4,
  SGI_ERR_SOLVER = 5,
  SGI_ERR_IO = 6,
  SGI_ERR_INVALID_ARGUMENT = 7
} sgi_status;

typedef struct sgi_pipeline sgi_pipeline;
typedef struct sgi_curve sgi_curve;
typedef struct sgi_model sgi_model;

SGI_API const char* sgi_version(void);
/* Message of the last failure on the calling thread; empty when none. */
SGI_API const char* sgi_last_error(void);
/* Worker threads for assembly; 0 restores the hardware default. */
SGI_API sgi_status sgi_set_threads(int threads);

/* Pipeline: the config is read when a stage runs, so config errors surface from run. */
SGI_API sgi_status sgi_pipeline_create(const char* config_path, int strict, sgi_pipeline** out);
/* stage: "fit", "mesh", "solve", "clearance" or "all". Writes manifest.json into out_dir
 * on success and on failure. */
SGI_API sgi_status sgi_pipeline_run(sgi_pipeline* p, const char* stage, const char* out_dir);
/* Manifest JSON of the last run; valid until the next run or destroy. */
SGI_API const char* sgi_pipeline_manifest(const sgi_pipeline* p);
/* Resolved config (defaults applied) as JSON, or NULL on a config error. */
SGI_API const char* sgi_pipeline_config(sgi_pipeline* p);
SGI_API void sgi_pipeline_destroy(sgi_pipeline* p);

/* Writes male.txt and female.txt synthetic profile clouds into dir. */
SGI_API sgi_status sgi_write_synthetic_clouds(const char* dir);

/* Curve fitting on a closed planar cloud given as n interleaved (x, y) pairs in mm. */
SGI_API sgi_status sgi_curve_fit(const double* xy, size_t n, const int* corners, size_t corner_count, int degree,
                                 double tolerance_mm, int max_control_points, sgi_curve** out);
SGI_API sgi_status sgi_curve_info(const sgi_curve* c, int* degree, int* control_points, double* max_deviation_mm);
SGI_API sgi_status sgi_curve_eval(const sgi_curve* c, double t, double xy[2]);
SGI_API void sgi_curve_free(sgi_curve* c);

SGI_API sgi_status sgi_model_load(const char* path, sgi_model** out);
SGI_API sgi_status sgi_model_info(const sgi_model* m, int* patches, int* par_dim, int* geo_dim, int* elements);
/* problems counts findings other than declared singularities. */
SGI_API sgi_status sgi_model_validate(const sgi_model* m, int* problems, int* singularities);
SGI_API void sgi_model_free(sgi_model* m);

#ifdef __cplusplus
}
#endif

#endif /* SCREWIGA_H */
