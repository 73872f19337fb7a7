#include "screwiga/screwiga.h"

#include <exception>
#include <filesystem>
#include <new>
#include <string>

#include "screwiga/error.hpp"
#include "screwiga/geomgen.hpp"
#include "screwiga/parallel.hpp"
#include "screwiga/pipeline.hpp"
#include "screwiga/serialize.hpp"

struct sgi_pipeline {
  std::string configPath;
  bool strict = false;
  std::string manifest = "{}";
  std::string config;
};

struct sgi_curve {
  screwiga::FitResult fit;
};

struct sgi_model {
  screwiga::MultiPatchModel model;
};

namespace {

thread_local std::string lastError;

sgi_status statusFor(screwiga::ErrorKind k) {
  switch (k) {
  case screwiga::ErrorKind::InvalidArgument:
    return SGI_ERR_INVALID_ARGUMENT;
  case screwiga::ErrorKind::Config:
    return SGI_ERR_CONFIG;
  case screwiga::ErrorKind::Geometry:
    return SGI_ERR_GEOMETRY;
  case screwiga::ErrorKind::Assembly:
    return SGI_ERR_ASSEMBLY;
  case screwiga::ErrorKind::Solver:
    return SGI_ERR_SOLVER;
  case screwiga::ErrorKind::Io:
    return SGI_ERR_IO;
  }
  return SGI_ERR_INTERNAL;
}

sgi_status setError(sgi_status s, const std::string& msg) {
  lastError = msg;
  return s;
}

template <class F>
sgi_status guarded(F&& body) {
  lastError.clear();
  try {
    return body();
  } catch (const screwiga::Error& e) {
    return setError(statusFor(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return setError(SGI_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return setError(SGI_ERR_INTERNAL, e.what());
  } catch (...) {
    return setError(SGI_ERR_INTERNAL, "unknown failure");
  }
}

} // namespace

extern "C" {

const char* sgi_version(void) { return SCREWIGA_VERSION; }

const char* sgi_last_error(void) { return lastError.c_str(); }

sgi_status sgi_set_threads(int threads) {
  if (threads < 0)
    return setError(SGI_ERR_INVALID_ARGUMENT, "thread count must not be negative");
  return guarded([&] {
    screwiga::setThreadCount(threads);
    return SGI_OK;
  });
}

sgi_status sgi_pipeline_create(const char* config_path, int strict, sgi_pipeline** out) {
  if (!config_path || !out)
    return setError(SGI_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto* p = new sgi_pipeline;
    p->configPath = config_path;
    p->strict = strict != 0;
    *out = p;
    return SGI_OK;
  });
}

sgi_status sgi_pipeline_run(sgi_pipeline* p, const char* stage, const char* out_dir) {
  if (!p || !stage)
    return setError(SGI_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    screwiga::RunOptions opts;
    opts.outDir = out_dir ? out_dir : ".";
    opts.threads = screwiga::threadCount();
    opts.strict = p->strict;
    const auto r = screwiga::runPipeline(stage, p->configPath, opts);
    p->manifest = r.manifest.dump(2);
    if (r.exitCode == 0)
      return SGI_OK;
    const auto kind = r.manifest.value("error", nlohmann::json::object()).value("kind", std::string("internal"));
    sgi_status s = SGI_ERR_INTERNAL;
    if (kind == "invalid-argument")
      s = SGI_ERR_INVALID_ARGUMENT;
    else if (r.exitCode >= 2 && r.exitCode <= 6)
      s = static_cast<sgi_status>(r.exitCode);
    return setError(s, r.message);
  });
}

const char* sgi_pipeline_manifest(const sgi_pipeline* p) { return p ? p->manifest.c_str() : nullptr; }

const char* sgi_pipeline_config(sgi_pipeline* p) {
  if (!p) {
    setError(SGI_ERR_INVALID_ARGUMENT, "null argument");
    return nullptr;
  }
  const sgi_status s = guarded([&] {
    p->config = screwiga::parseConfig(p->configPath, p->strict).resolved.dump(2);
    return SGI_OK;
  });
  return s == SGI_OK ? p->config.c_str() : nullptr;
}

void sgi_pipeline_destroy(sgi_pipeline* p) { delete p; }

sgi_status sgi_write_synthetic_clouds(const char* dir) {
  if (!dir)
    return setError(SGI_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    screwiga::writeSyntheticClouds(dir);
    return SGI_OK;
  });
}

sgi_status sgi_curve_fit(const double* xy, size_t n, const int* corners, size_t corner_count, int degree,
                         double tolerance_mm, int max_control_points, sgi_curve** out) {
  if (!xy || !out || (corner_count > 0 && !corners))
    return setError(SGI_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    screwiga::PointCloud2D cloud;
    cloud.closed = true;
    for (size_t i = 0; i < n; ++i)
      cloud.points.emplace_back(xy[2 * i], xy[2 * i + 1]);
    for (size_t k = 0; k < corner_count; ++k) {
      screwiga::require(corners[k] >= 0 && static_cast<size_t>(corners[k]) < n,
                        screwiga::ErrorKind::InvalidArgument, "corner index out of range");
      cloud.corners.push_back(corners[k]);
    }
    screwiga::FitOptions fo;
    fo.degree = degree;
    fo.tolerance = tolerance_mm;
    fo.maxControlPoints = max_control_points;
    auto* c = new sgi_curve{screwiga::fitCurve(cloud, fo)};
    *out = c;
    return SGI_OK;
  });
}

sgi_status sgi_curve_info(const sgi_curve* c, int* degree, int* control_points, double* max_deviation_mm) {
  if (!c)
    return setError(SGI_ERR_INVALID_ARGUMENT, "null curve");
  if (degree)
    *degree = c->fit.report.degree;
  if (control_points)
    *control_points = c->fit.report.controlPointCount;
  if (max_deviation_mm)
    *max_deviation_mm = c->fit.report.maxDeviation;
  return SGI_OK;
}

sgi_status sgi_curve_eval(const sgi_curve* c, double t, double xy[2]) {
  if (!c || !xy)
    return setError(SGI_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const double p[1] = {t};
    const auto x = c->fit.curve.eval(p);
    xy[0] = x[0];
    xy[1] = x[1];
    return SGI_OK;
  });
}

void sgi_curve_free(sgi_curve* c) { delete c; }

sgi_status sgi_model_load(const char* path, sgi_model** out) {
  if (!path || !out)
    return setError(SGI_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new sgi_model{screwiga::loadGeometry(path)};
    return SGI_OK;
  });
}

sgi_status sgi_model_info(const sgi_model* m, int* patches, int* par_dim, int* geo_dim, int* elements) {
  if (!m)
    return setError(SGI_ERR_INVALID_ARGUMENT, "null model");
  if (patches)
    *patches = static_cast<int>(m->model.patches.size());
  if (par_dim)
    *par_dim = m->model.parDim();
  if (geo_dim)
    *geo_dim = m->model.geoDim();
  if (elements)
    *elements = m->model.elementCount();
  return SGI_OK;
}

sgi_status sgi_model_validate(const sgi_model* m, int* problems, int* singularities) {
  if (!m)
    return setError(SGI_ERR_INVALID_ARGUMENT, "null model");
  return guarded([&] {
    const auto r = screwiga::validateModel(m->model);
    const int sing = r.count(screwiga::FindingKind::DeclaredSingularity);
    if (problems)
      *problems = static_cast<int>(r.findings.size()) - sing;
    if (singularities)
      *singularities = sing;
    return SGI_OK;
  });
}

void sgi_model_free(sgi_model* m) { delete m; }

} // extern "C"
