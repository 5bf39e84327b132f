/* Copyright 2026 The GeoBEV Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "geobev.h"

#include <cstring>
#include <string>
#include <vector>

#include "geobev/config.hpp"
#include "geobev/error.hpp"
#include "geobev/geo_mask.hpp"
#include "geobev/gradcheck.hpp"
#include "geobev/pipeline.hpp"
#include "geobev/tensor.hpp"
#include "geobev/world.hpp"

namespace {

thread_local std::string g_last_error;

void copy_report(const std::string& text, char* out, size_t cap) {
  if (!out || cap == 0) return;
  const size_t n = text.size() < cap - 1 ? text.size() : cap - 1;
  std::memcpy(out, text.data(), n);
  out[n] = '\0';
}

geobev_status set_error(const geobev::Error& e) {
  g_last_error = e.what();
  return static_cast<geobev_status>(static_cast<int>(e.kind()));
}

geobev_status set_error(const std::exception& e) {
  g_last_error = e.what();
  return GEOBEV_E_CONFIG;
}

template <typename Fn>
geobev_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const geobev::Error& e) {
    return set_error(e);
  } catch (const std::exception& e) {
    return set_error(e);
  }
}

}  // namespace

struct geobev_tensor {
  geobev::Tensor value;
};

extern "C" {

const char* geobev_version(void) { return "geobev 1.0.0"; }

const char* geobev_last_error(void) { return g_last_error.c_str(); }

geobev_status geobev_tensor_create(const uint32_t* dims, size_t ndim,
                                   const double* data, geobev_tensor** out) {
  return guarded([&]() {
    if (!dims || !out || ndim == 0) {
      geobev::throw_config("geobev_tensor_create: null arguments");
    }
    std::vector<int> shape(ndim);
    for (size_t i = 0; i < ndim; ++i) shape[i] = static_cast<int>(dims[i]);
    auto* t = new geobev_tensor{geobev::Tensor(shape, 0.0)};
    if (data) {
      for (size_t i = 0; i < t->value.size(); ++i) t->value[i] = data[i];
    }
    *out = t;
    return GEOBEV_OK;
  });
}

geobev_status geobev_tensor_load(const char* path, geobev_tensor** out) {
  return guarded([&]() {
    if (!path || !out) geobev::throw_config("geobev_tensor_load: null arguments");
    *out = new geobev_tensor{geobev::load_gtns(path)};
    return GEOBEV_OK;
  });
}

geobev_status geobev_tensor_save(const geobev_tensor* t, const char* path) {
  return guarded([&]() {
    if (!t || !path) geobev::throw_config("geobev_tensor_save: null arguments");
    geobev::save_gtns(t->value, path);
    return GEOBEV_OK;
  });
}

size_t geobev_tensor_ndim(const geobev_tensor* t) {
  return t ? static_cast<size_t>(t->value.ndim()) : 0;
}

uint32_t geobev_tensor_dim(const geobev_tensor* t, size_t axis) {
  if (!t || axis >= static_cast<size_t>(t->value.ndim())) return 0;
  return static_cast<uint32_t>(t->value.dim(static_cast<int>(axis)));
}

size_t geobev_tensor_size(const geobev_tensor* t) {
  return t ? t->value.size() : 0;
}

const double* geobev_tensor_data(const geobev_tensor* t) {
  return t ? t->value.data() : nullptr;
}

void geobev_tensor_free(geobev_tensor* t) { delete t; }

geobev_status geobev_gen_scenes(const char* out_dir, const char* config_path,
                                uint64_t seed, uint32_t count,
                                uint32_t* out_samples) {
  return guarded([&]() {
    if (!out_dir) geobev::throw_config("geobev_gen_scenes: out_dir is null");
    const geobev::GenConfig cfg =
        geobev::GenConfig::from_file(config_path ? config_path : "");
    std::vector<geobev::Scene> scenes;
    scenes.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
      scenes.push_back(
          geobev::generate_scene(geobev::SeededRng::mix(seed, i), cfg));
    }
    const int samples = geobev::export_dataset(scenes, cfg, seed, out_dir);
    if (out_samples) *out_samples = static_cast<uint32_t>(samples);
    return GEOBEV_OK;
  });
}

geobev_status geobev_gradcheck(const char* config_path, int inject_fault,
                               char* report, size_t report_cap) {
  return guarded([&]() {
    geobev::GradcheckOptions options;
    options.inject_fault = inject_fault != 0;
    if (config_path && *config_path) {
      geobev::KeyValueFile kv = geobev::KeyValueFile::parse_file(config_path);
      options.seed = kv.take_u64("seed", options.seed);
      kv.finish();
    }
    const geobev::GradcheckReport r = geobev::run_gradcheck(options);
    copy_report(r.text(), report, report_cap);
    if (!r.ok) {
      g_last_error = "gradient verification failed";
      return GEOBEV_E_VERIFY;
    }
    return GEOBEV_OK;
  });
}

geobev_status geobev_train(const char* config_path, const char* data_dir,
                           const char* out_dir) {
  return guarded([&]() {
    if (!data_dir || !out_dir) {
      geobev::throw_config("geobev_train: data_dir/out_dir are required");
    }
    const geobev::TrainConfig cfg =
        geobev::TrainConfig::from_file(config_path ? config_path : "");
    geobev::train(cfg, data_dir, out_dir);
    return GEOBEV_OK;
  });
}

geobev_status geobev_eval(const char* checkpoint_path, const char* data_dir,
                          const char* config_path, const char* out_csv,
                          char* report, size_t report_cap) {
  return guarded([&]() {
    if (!checkpoint_path || !data_dir) {
      geobev::throw_config("geobev_eval: checkpoint/data_dir are required");
    }
    const geobev::TrainConfig cfg =
        geobev::TrainConfig::from_file(config_path ? config_path : "");
    const geobev::EvalResult r = geobev::evaluate(
        cfg, checkpoint_path, data_dir, out_csv ? out_csv : "");
    copy_report(r.pretty, report, report_cap);
    return GEOBEV_OK;
  });
}

geobev_status geobev_mask(const char* rig_path, double extent_x,
                          double extent_y, double resolution, double epsilon,
                          int img_h, int img_w, int stride, int depth_bins,
                          double depth_min, double depth_max,
                          const char* out_prefix) {
  return guarded([&]() {
    if (!rig_path || !out_prefix) {
      geobev::throw_config("geobev_mask: rig_path/out_prefix are required");
    }
    if (stride < 1 || img_h < stride || img_w < stride) {
      geobev::throw_config("geobev_mask: invalid image dims or stride");
    }
    const auto rig = geobev::load_rig(rig_path);
    const geobev::BevGridSpec grid =
        geobev::BevGridSpec::create(extent_x, extent_y, resolution);
    const auto bins =
        geobev::uniform_depth_bins(depth_min, depth_max, depth_bins);
    const geobev::FrustumCloud cloud = geobev::build_frustum_cloud(
        rig, img_h / stride, img_w / stride, bins, stride);
    const geobev::GeoMask mask = geobev::build_geo_mask(cloud, grid, epsilon);
    geobev::save_mask_pgm(mask, std::string(out_prefix) + ".pgm");
    geobev::save_gtns(mask.weights, std::string(out_prefix) + ".gtns");
    return GEOBEV_OK;
  });
}

geobev_status geobev_ablate(const char* config_path, const char* data_dir,
                            const char* out_csv) {
  return guarded([&]() {
    if (!data_dir || !out_csv) {
      geobev::throw_config("geobev_ablate: data_dir/out_csv are required");
    }
    const geobev::TrainConfig cfg =
        geobev::TrainConfig::from_file(config_path ? config_path : "");
    geobev::ablate(cfg, data_dir, out_csv);
    return GEOBEV_OK;
  });
}

}  // extern "C"
