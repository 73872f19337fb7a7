/* C-language client of the shared library. Exits nonzero on the first failed check. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "screwiga/screwiga.h"

static int failures = 0;

#define CHECK(cond)                                                       \
  do {                                                                    \
    if (!(cond)) {                                                        \
      fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                         \
    }                                                                     \
  } while (0)

int main(void) {
  const double pi = 3.14159265358979323846;
  const size_t n = 360;
  double* xy = malloc(2 * n * sizeof(double));
  for (size_t i = 0; i < n; ++i) {
    xy[2 * i] = 20.0 * cos(2 * pi * i / n);
    xy[2 * i + 1] = 20.0 * sin(2 * pi * i / n);
  }

  CHECK(strlen(sgi_version()) > 0);

  sgi_curve* c = NULL;
  CHECK(sgi_curve_fit(xy, n, NULL, 0, 3, 1e-3, 100, &c) == SGI_OK);
  CHECK(c != NULL);
  int degree = 0, cps = 0;
  double dev = 1.0;
  CHECK(sgi_curve_info(c, &degree, &cps, &dev) == SGI_OK);
  CHECK(degree == 3);
  CHECK(cps > 3 && cps <= 100);
  CHECK(dev <= 1e-3);
  double p[2];
  CHECK(sgi_curve_eval(c, 0.25, p) == SGI_OK);
  CHECK(fabs(hypot(p[0], p[1]) - 20.0) <= 1e-3);
  CHECK(sgi_curve_eval(c, 1.5, p) == SGI_ERR_INVALID_ARGUMENT);
  CHECK(strlen(sgi_last_error()) > 0);
  sgi_curve_free(c);

  int bad_corner = 9999;
  sgi_curve* d = NULL;
  CHECK(sgi_curve_fit(xy, n, &bad_corner, 1, 3, 1e-3, 100, &d) == SGI_ERR_INVALID_ARGUMENT);
  CHECK(d == NULL);
  CHECK(sgi_curve_fit(xy, n, NULL, 0, 3, 1e-12, 6, &d) == SGI_ERR_GEOMETRY);
  CHECK(sgi_curve_fit(NULL, n, NULL, 0, 3, 1e-3, 100, &d) == SGI_ERR_INVALID_ARGUMENT);
  free(xy);

  sgi_model* m = NULL;
  CHECK(sgi_model_load("/nonexistent/model.geo", &m) == SGI_ERR_GEOMETRY);
  CHECK(strstr(sgi_last_error(), "model.geo") != NULL);
  CHECK(sgi_set_threads(-1) == SGI_ERR_INVALID_ARGUMENT);
  CHECK(sgi_set_threads(1) == SGI_OK);

  sgi_pipeline* pl = NULL;
  CHECK(sgi_pipeline_create(SCREWIGA_DATA_DIR "/bar.json", 1, &pl) == SGI_OK);
  CHECK(sgi_pipeline_config(pl) != NULL);
  CHECK(sgi_pipeline_run(pl, "polish", SCREWIGA_OUT_DIR) == SGI_ERR_INVALID_ARGUMENT);
  CHECK(sgi_pipeline_run(pl, "mesh", SCREWIGA_OUT_DIR) == SGI_OK);
  CHECK(strstr(sgi_pipeline_manifest(pl), "\"status\": \"ok\"") != NULL);
  sgi_pipeline_destroy(pl);

  CHECK(sgi_model_load(SCREWIGA_OUT_DIR "/bar.geo", &m) == SGI_OK);
  int patches = 0, pd = 0, gd = 0, elements = 0, problems = -1, sing = -1;
  CHECK(sgi_model_info(m, &patches, &pd, &gd, &elements) == SGI_OK);
  CHECK(patches == 1 && pd == 3 && gd == 3 && elements == 4);
  CHECK(sgi_model_validate(m, &problems, &sing) == SGI_OK);
  CHECK(problems == 0 && sing == 0);
  sgi_model_free(m);

  if (failures == 0)
    printf("c api: all checks passed\n");
  return failures == 0 ? 0 : 1;
}
