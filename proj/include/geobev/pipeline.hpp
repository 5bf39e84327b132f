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
#ifndef GEOBEV_PIPELINE_HPP_
#define GEOBEV_PIPELINE_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "geobev/conv_gru.hpp"
#include "geobev/geo_mask.hpp"
#include "geobev/geometry.hpp"
#include "geobev/tensor.hpp"

namespace geobev {

enum class TemporalModule { kStatic, kConv3d, kConvGru, kGeoConvGru };

const char* temporal_module_name(TemporalModule m);
TemporalModule parse_temporal_module(const std::string& name);

// Training/eval configuration, "key = value" text; unknown keys are hard
// errors.
struct TrainConfig {
  TemporalModule module = TemporalModule::kGeoConvGru;
  int temporal_field = 5;
  int epochs = 10;
  int max_steps = 0;  // optimizer steps; 0 means run the epoch budget
  int batch_size = 1;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  int feat_channels = 16;
  int depth_bins = 16;
  double depth_min = 1.0;
  double depth_max = 40.0;
  int hidden_channels = 16;
  int gru_units = 2;
  int kernel_size = 3;
  int enc1_channels = 8;
  int enc2_channels = 16;
  int head_channels = 16;
  int num_classes = 2;
  double epsilon = 0.1;
  double val_split = 0.2;

  static TrainConfig from_file(const std::string& path);  // "" gives defaults
  void validate() const;
};

// --- dataset ----------------------------------------------------------------

struct DatasetMeta {
  int timesteps = 0;
  int window = 0;
  int cameras = 0;
  int img_h = 0;
  int img_w = 0;
  double dt = 0.5;
  BevGridSpec grid;
};

struct SampleRef {
  std::string scene;  // scene directory name
  int present_t = 0;  // last frame of the window
};

struct Dataset {
  std::string dir;
  DatasetMeta meta;
  std::vector<Camera> rig;
  std::vector<SampleRef> samples;       // manifest order
  std::vector<std::string> scene_names; // sorted unique scene directories
};

Dataset load_dataset(const std::string& dir);

// One training sample: T frames of N camera images (oldest first) plus
// present-frame ground truth.
struct Sample {
  std::vector<std::vector<Tensor>> frames;  // frames[t][cam], [3,img_h,img_w]
  Tensor label;       // [H,W] class ids
  Tensor instances;   // [H,W] instance ids
};

Sample load_sample(const Dataset& ds, const SampleRef& ref, int temporal_field);

// Train/validation split by scene: the last round(val_split * scenes) scene
// directories are validation.
struct SampleSplit {
  std::vector<std::size_t> train;  // indices into Dataset::samples
  std::vector<std::size_t> val;
};
SampleSplit split_samples(const Dataset& ds, double val_split);

// --- model ------------------------------------------------------------------

// Every trainable tensor of the pipeline. The tiny encoder stands in for a
// pretrained backbone: two stride-reducing conv+tanh layers (total stride 8)
// and two heads (tanh-bounded features, linear depth logits). The prediction
// head is two convolutions with a tanh between them plus a per-class bias;
// the convolutions themselves carry no bias.
struct ModelParams {
  TemporalModule module = TemporalModule::kGeoConvGru;
  Tensor enc_conv1, enc_conv2, enc_feat, enc_depth;
  ConvGruParams gru;     // convgru / geo-convgru
  Tensor conv3d_kernel;  // conv3d baseline
  Tensor head_conv1, head_conv2;
  Tensor head_bias;  // [num_classes]

  template <typename F>
  void for_each_param(F&& f) {
    f("enc.conv1", enc_conv1);
    f("enc.conv2", enc_conv2);
    f("enc.feat", enc_feat);
    f("enc.depth", enc_depth);
    if (module == TemporalModule::kConv3d) {
      f("temporal.conv3d", conv3d_kernel);
    } else if (module != TemporalModule::kStatic) {
      for (std::size_t u = 0; u < gru.units.size(); ++u) {
        const std::string p = "gru.u" + std::to_string(u) + ".";
        f(p + "w_update", gru.units[u].w_update);
        f(p + "u_update", gru.units[u].u_update);
        f(p + "w_reset", gru.units[u].w_reset);
        f(p + "u_reset", gru.units[u].u_reset);
        f(p + "w_cand", gru.units[u].w_cand);
        f(p + "u_cand", gru.units[u].u_cand);
      }
    }
    f("head.conv1", head_conv1);
    f("head.conv2", head_conv2);
    f("head.bias", head_bias);
  }

  template <typename F>
  void for_each_param(F&& f) const {
    const_cast<ModelParams*>(this)->for_each_param(
        [&](const std::string& name, Tensor& t) {
          f(name, static_cast<const Tensor&>(t));
        });
  }
};

ModelParams init_model(const TrainConfig& cfg, const DatasetMeta& meta);

// Zero-filled gradient holder with the same layout as params.
ModelParams zero_like(const ModelParams& params);

// Geometry fixed per (rig, config): frustum cloud, grid and geo mask.
struct ModelGeometry {
  BevGridSpec grid;
  FrustumCloud cloud;
  GeoMask mask;
  int feat_h = 0, feat_w = 0;
};
ModelGeometry build_geometry(const TrainConfig& cfg, const DatasetMeta& meta,
                             const std::vector<Camera>& rig);

// --- encoder ----------------------------------------------------------------

struct EncoderCache {
  Tensor input;
  Tensor t1, d1;  // conv1+tanh at full res, then decimated by 4
  Tensor t2, d2;  // conv2+tanh, then decimated by 2
  Tensor features, depth_logits;
};

struct EncoderOut {
  Tensor features;      // [C, h/8, w/8]
  Tensor depth_logits;  // [D, h/8, w/8]
};

EncoderOut encode_image(const Tensor& image, const ModelParams& params,
                        EncoderCache* cache = nullptr);

struct EncoderGrads {
  Tensor grad_image;
  Tensor g_conv1, g_conv2, g_feat, g_depth;
};

EncoderGrads encode_image_backward(const EncoderCache& cache,
                                   const ModelParams& params,
                                   const Tensor& grad_features,
                                   const Tensor& grad_depth_logits);

// --- full model -------------------------------------------------------------

struct ModelForwardCache {
  std::vector<std::vector<EncoderCache>> enc;  // [t][cam]
  std::vector<Tensor> bev;                     // per-frame BEV features
  ConvGruForwardCache gru;
  Tensor temporal_out;  // before the mask
  Tensor head_in;       // after the mask (or temporal_out when unmasked)
  Tensor head_t1;
};

Tensor model_forward(const Sample& sample, const ModelParams& params,
                     const ModelGeometry& geom, const TrainConfig& cfg,
                     ModelForwardCache* cache = nullptr);

ModelParams model_backward(const ModelParams& params, const ModelGeometry& geom,
                           const TrainConfig& cfg,
                           const ModelForwardCache& cache,
                           const Tensor& grad_logits);

// --- loss and optimizer -------------------------------------------------------

struct LossResult {
  double value = 0.0;
  Tensor grad_logits;
};

// Per-cell softmax cross entropy, mean over cells;
// grad = (softmax - onehot) / cell count.
LossResult cross_entropy_loss(const Tensor& logits, const Tensor& labels);

// Standard Adam with bias correction on one tensor; step is 1-based.
void adam_update_tensor(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v,
                        long step, double lr, double beta1, double beta2,
                        double eps);

struct AdamState {
  std::vector<Tensor> m, v;  // in for_each_param order
  long step = 0;
};

AdamState init_adam(const ModelParams& params);
void adam_step(ModelParams& params, const ModelParams& grads,
               const TrainConfig& cfg, AdamState& state);

// --- checkpoint (GCGR) --------------------------------------------------------
// magic "GCGR\0", u32 LE version = 1, u32 LE parameter count; per parameter:
// u16 LE name length, UTF-8 name, u8 ndim, ndim x u32 LE dims, f64 LE data.

void save_checkpoint(const ModelParams& params, const std::string& path);
void load_checkpoint(ModelParams& params, const std::string& path);

// --- workflows ----------------------------------------------------------------

struct TrainResult {
  std::vector<double> step_losses;
  // epoch, global step, mean epoch loss, val IoU (nan without a val split)
  std::vector<std::array<double, 4>> epoch_rows;
  std::string checkpoint_path;
  std::string metrics_csv_path;
};

TrainResult train(const TrainConfig& cfg, const std::string& data_dir,
                  const std::string& out_dir);

struct EvalResult {
  std::vector<double> iou_per_class;
  double pq = 0.0, sq = 0.0, rq = 0.0;
  std::string pretty;
};

// Evaluates every manifest sample of data_dir; writes "metric,value" CSV to
// out_csv when non-empty.
EvalResult evaluate(const TrainConfig& cfg, const std::string& checkpoint_path,
                    const std::string& data_dir, const std::string& out_csv);

struct AblateRow {
  std::string module;
  int temporal_field = 0;
  double iou = 0.0;
  double pq = 0.0;
  double train_seconds = 0.0;
};

// Trains {static@T=1} + {conv3d, convgru, geo-convgru} x {1,3,5,7} with
// identical seeds and step budgets, evaluating each cell on the val split.
// Honors GEOBEV_THREADS for cell-level parallelism (per-cell results stay
// bit-deterministic). Writes the CSV to out_csv.
std::vector<AblateRow> ablate(const TrainConfig& base,
                              const std::string& data_dir,
                              const std::string& out_csv);

}  // namespace geobev

#endif  // GEOBEV_PIPELINE_HPP_
