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
#include <cmath>
#include <cstddef>

#include "geobev/config.hpp"
#include "geobev/error.hpp"
#include "geobev/lift_splat.hpp"
#include "geobev/pipeline.hpp"

namespace geobev {

const char* temporal_module_name(TemporalModule m) {
  switch (m) {
    case TemporalModule::kStatic: return "static";
    case TemporalModule::kConv3d: return "conv3d";
    case TemporalModule::kConvGru: return "convgru";
    case TemporalModule::kGeoConvGru: return "geo-convgru";
  }
  return "?";
}

TemporalModule parse_temporal_module(const std::string& name) {
  if (name == "static") return TemporalModule::kStatic;
  if (name == "conv3d") return TemporalModule::kConv3d;
  if (name == "convgru") return TemporalModule::kConvGru;
  if (name == "geo-convgru") return TemporalModule::kGeoConvGru;
  throw_config("unknown temporal module '" + name +
               "' (expected static|conv3d|convgru|geo-convgru)");
}

TrainConfig TrainConfig::from_file(const std::string& path) {
  TrainConfig cfg;
  if (path.empty()) {
    cfg.validate();
    return cfg;
  }
  KeyValueFile kv = KeyValueFile::parse_file(path);
  cfg.module = parse_temporal_module(
      kv.take_string("module", temporal_module_name(cfg.module)));
  cfg.temporal_field = kv.take_int("temporal_field", cfg.temporal_field);
  cfg.epochs = kv.take_int("epochs", cfg.epochs);
  cfg.max_steps = kv.take_int("max_steps", cfg.max_steps);
  cfg.batch_size = kv.take_int("batch_size", cfg.batch_size);
  cfg.lr = kv.take_real("lr", cfg.lr);
  cfg.beta1 = kv.take_real("beta1", cfg.beta1);
  cfg.beta2 = kv.take_real("beta2", cfg.beta2);
  cfg.adam_eps = kv.take_real("adam_eps", cfg.adam_eps);
  cfg.seed = kv.take_u64("seed", cfg.seed);
  cfg.feat_channels = kv.take_int("feat_channels", cfg.feat_channels);
  cfg.depth_bins = kv.take_int("depth_bins", cfg.depth_bins);
  cfg.depth_min = kv.take_real("depth_min", cfg.depth_min);
  cfg.depth_max = kv.take_real("depth_max", cfg.depth_max);
  cfg.hidden_channels = kv.take_int("hidden_channels", cfg.hidden_channels);
  cfg.gru_units = kv.take_int("gru_units", cfg.gru_units);
  cfg.kernel_size = kv.take_int("kernel_size", cfg.kernel_size);
  cfg.enc1_channels = kv.take_int("enc1_channels", cfg.enc1_channels);
  cfg.enc2_channels = kv.take_int("enc2_channels", cfg.enc2_channels);
  cfg.head_channels = kv.take_int("head_channels", cfg.head_channels);
  cfg.num_classes = kv.take_int("num_classes", cfg.num_classes);
  cfg.epsilon = kv.take_real("epsilon", cfg.epsilon);
  cfg.val_split = kv.take_real("val_split", cfg.val_split);
  kv.finish();
  cfg.validate();
  return cfg;
}

void TrainConfig::validate() const {
  if (temporal_field < 1) throw_config("config: temporal_field must be >= 1");
  if (epochs < 0) throw_config("config: epochs must be >= 0");
  if (max_steps < 0) throw_config("config: max_steps must be >= 0");
  if (batch_size < 1) throw_config("config: batch_size must be >= 1");
  if (lr <= 0.0) throw_config("config: lr must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw_config("config: beta1/beta2 must lie in [0, 1)");
  }
  if (adam_eps <= 0.0) throw_config("config: adam_eps must be positive");
  if (feat_channels < 1 || depth_bins < 1 || hidden_channels < 1 ||
      enc1_channels < 1 || enc2_channels < 1 || head_channels < 1) {
    throw_config("config: channel counts must be >= 1");
  }
  if (depth_min <= 0.0 || depth_max <= depth_min) {
    throw_config("config: need 0 < depth_min < depth_max");
  }
  if (gru_units < 1) throw_config("config: gru_units must be >= 1");
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw_config("config: kernel_size must be odd");
  }
  if (num_classes < 2) throw_config("config: num_classes must be >= 2");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) {
    throw_config("config: epsilon must lie in (0, 1]");
  }
  if (val_split < 0.0 || val_split >= 1.0) {
    throw_config("config: val_split must lie in [0, 1)");
  }
}

// --- model init ---------------------------------------------------------------

namespace {

constexpr int kStride = 8;  // encoder stride: conv/4 then conv/2

Tensor uniform_kernel4(int c_out, int c_in, int k, SeededRng& rng,
                       double gain = 1.0) {
  Tensor t({c_out, c_in, k, k});
  const double bound = gain * std::sqrt(1.0 / (c_in * k * k));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

int temporal_out_channels(const TrainConfig& cfg) {
  return cfg.module == TemporalModule::kStatic ? cfg.feat_channels
                                               : cfg.hidden_channels;
}

}  // namespace

ModelParams init_model(const TrainConfig& cfg, const DatasetMeta& meta) {
  cfg.validate();
  if (meta.img_h % kStride != 0 || meta.img_w % kStride != 0) {
    throw_config("model: image dims must be divisible by the stride of 8");
  }
  SeededRng rng(SeededRng::mix(cfg.seed, 0x6d0de1));
  ModelParams p;
  p.module = cfg.module;
  const int k = cfg.kernel_size;
  // The encoder runs on low-contrast synthetic frames; a wider init keeps
  // its activations out of the near-zero regime at the start of training.
  const double enc_gain = 3.0;
  p.enc_conv1 = uniform_kernel4(cfg.enc1_channels, 3, k, rng, enc_gain);
  p.enc_conv2 = uniform_kernel4(cfg.enc2_channels, cfg.enc1_channels, k, rng,
                                enc_gain);
  p.enc_feat = uniform_kernel4(cfg.feat_channels, cfg.enc2_channels, k, rng,
                               enc_gain);
  p.enc_depth = uniform_kernel4(cfg.depth_bins, cfg.enc2_channels, k, rng,
                                enc_gain);
  if (cfg.module == TemporalModule::kConv3d) {
    p.conv3d_kernel = init_conv3d_kernel(cfg.hidden_channels, cfg.feat_channels,
                                         cfg.temporal_field, k, rng);
  } else if (cfg.module != TemporalModule::kStatic) {
    p.gru = init_conv_gru(cfg.feat_channels, cfg.hidden_channels, cfg.gru_units,
                          k, rng);
  }
  p.head_conv1 = uniform_kernel4(cfg.head_channels, temporal_out_channels(cfg),
                                 k, rng);
  p.head_conv2 = uniform_kernel4(cfg.num_classes, cfg.head_channels, k, rng);
  p.head_bias = Tensor({cfg.num_classes}, 0.0);
  return p;
}

ModelParams zero_like(const ModelParams& params) {
  ModelParams z = params;
  z.for_each_param([](const std::string&, Tensor& t) {
    t = Tensor(t.shape(), 0.0);
  });
  return z;
}

ModelGeometry build_geometry(const TrainConfig& cfg, const DatasetMeta& meta,
                             const std::vector<Camera>& rig) {
  ModelGeometry g;
  g.grid = meta.grid;
  g.feat_h = meta.img_h / kStride;
  g.feat_w = meta.img_w / kStride;
  const std::vector<double> bins =
      uniform_depth_bins(cfg.depth_min, cfg.depth_max, cfg.depth_bins);
  g.cloud = build_frustum_cloud(rig, g.feat_h, g.feat_w, bins, kStride);
  g.mask = build_geo_mask(g.cloud, g.grid, cfg.epsilon);
  return g;
}

// --- encoder -------------------------------------------------------------------

namespace {

Tensor decimate(const Tensor& x, int factor) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out({c, h / factor, w / factor});
  for (int ci = 0; ci < c; ++ci) {
    for (int y = 0; y < h / factor; ++y) {
      for (int xx = 0; xx < w / factor; ++xx) {
        out.at(ci, y, xx) = x.at(ci, y * factor, xx * factor);
      }
    }
  }
  return out;
}

Tensor decimate_backward(const Tensor& grad, int factor, int h, int w) {
  const int c = grad.dim(0);
  Tensor out({c, h, w}, 0.0);
  for (int ci = 0; ci < c; ++ci) {
    for (int y = 0; y < grad.dim(1); ++y) {
      for (int xx = 0; xx < grad.dim(2); ++xx) {
        out.at(ci, y * factor, xx * factor) = grad.at(ci, y, xx);
      }
    }
  }
  return out;
}

Tensor tanh_backward(const Tensor& grad, const Tensor& out) {
  Tensor g(grad.shape());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = grad[i] * (1.0 - out[i] * out[i]);
  }
  return g;
}

}  // namespace

EncoderOut encode_image(const Tensor& image, const ModelParams& params,
                        EncoderCache* cache) {
  if (image.ndim() != 3 || image.dim(0) != 3) {
    throw_config("encode_image: expected a [3,h,w] image");
  }
  if (image.dim(1) % kStride != 0 || image.dim(2) % kStride != 0) {
    throw_config("encode_image: image dims must be divisible by 8");
  }
  const Tensor t1 = tanh_map(conv2d(image, params.enc_conv1));
  const Tensor d1 = decimate(t1, 4);
  const Tensor t2 = tanh_map(conv2d(d1, params.enc_conv2));
  const Tensor d2 = decimate(t2, 2);
  EncoderOut out;
  out.features = tanh_map(conv2d(d2, params.enc_feat));
  out.depth_logits = conv2d(d2, params.enc_depth);
  if (cache) {
    cache->input = image;
    cache->t1 = t1;
    cache->d1 = d1;
    cache->t2 = t2;
    cache->d2 = d2;
    cache->features = out.features;
    cache->depth_logits = out.depth_logits;
  }
  return out;
}

EncoderGrads encode_image_backward(const EncoderCache& cache,
                                   const ModelParams& params,
                                   const Tensor& grad_features,
                                   const Tensor& grad_depth_logits) {
  EncoderGrads g;
  const Tensor g_feat_pre = tanh_backward(grad_features, cache.features);
  Conv2dGrads feat = conv2d_backward(cache.d2, params.enc_feat, g_feat_pre);
  Conv2dGrads depth =
      conv2d_backward(cache.d2, params.enc_depth, grad_depth_logits);
  g.g_feat = std::move(feat.grad_kernel);
  g.g_depth = std::move(depth.grad_kernel);
  const Tensor g_d2 = add(feat.grad_input, depth.grad_input);
  const Tensor g_t2 =
      decimate_backward(g_d2, 2, cache.t2.dim(1), cache.t2.dim(2));
  Conv2dGrads c2 =
      conv2d_backward(cache.d1, params.enc_conv2, tanh_backward(g_t2, cache.t2));
  g.g_conv2 = std::move(c2.grad_kernel);
  const Tensor g_t1 =
      decimate_backward(c2.grad_input, 4, cache.t1.dim(1), cache.t1.dim(2));
  Conv2dGrads c1 = conv2d_backward(cache.input, params.enc_conv1,
                                   tanh_backward(g_t1, cache.t1));
  g.g_conv1 = std::move(c1.grad_kernel);
  g.grad_image = std::move(c1.grad_input);
  return g;
}

// --- full model ------------------------------------------------------------------

Tensor model_forward(const Sample& sample, const ModelParams& params,
                     const ModelGeometry& geom, const TrainConfig& cfg,
                     ModelForwardCache* cache) {
  if (sample.frames.empty()) throw_config("model_forward: empty window");
  const int t_len = static_cast<int>(sample.frames.size());
  const std::size_t n_cams = geom.cloud.cameras.size();
  if (cache) {
    cache->enc.assign(static_cast<std::size_t>(t_len), {});
    cache->bev.clear();
  }
  std::vector<Tensor> bev_window;
  bev_window.reserve(static_cast<std::size_t>(t_len));
  for (int t = 0; t < t_len; ++t) {
    const auto& cams = sample.frames[static_cast<std::size_t>(t)];
    if (cams.size() != n_cams) {
      throw_config("model_forward: camera count mismatch with the rig");
    }
    if (cache) cache->enc[static_cast<std::size_t>(t)].resize(n_cams);
    Tensor bev({cfg.feat_channels, geom.grid.rows, geom.grid.cols}, 0.0);
    for (std::size_t ci = 0; ci < n_cams; ++ci) {
      EncoderCache* ec =
          cache ? &cache->enc[static_cast<std::size_t>(t)][ci] : nullptr;
      EncoderCache local;
      EncoderOut eo = encode_image(cams[ci], params, ec ? ec : &local);
      const Tensor lifted = lift(eo.features, eo.depth_logits);
      splat_accumulate(lifted, geom.cloud.cameras[ci], geom.grid, bev);
    }
    if (cache) cache->bev.push_back(bev);
    bev_window.push_back(std::move(bev));
  }

  Tensor temporal_out;
  switch (params.module) {
    case TemporalModule::kStatic:
      temporal_out = bev_window.back();
      break;
    case TemporalModule::kConv3d:
      temporal_out = temporal_conv3d(bev_window, params.conv3d_kernel);
      break;
    case TemporalModule::kConvGru:
    case TemporalModule::kGeoConvGru:
      temporal_out =
          convgru_forward(bev_window, params.gru, cache ? &cache->gru : nullptr);
      break;
  }
  Tensor head_in = params.module == TemporalModule::kGeoConvGru
                       ? apply_geo_mask(temporal_out, geom.mask)
                       : temporal_out;
  const Tensor t1 = tanh_map(conv2d(head_in, params.head_conv1));
  Tensor logits = conv2d(t1, params.head_conv2);
  const std::size_t cells =
      static_cast<std::size_t>(logits.dim(1)) * logits.dim(2);
  for (int c = 0; c < logits.dim(0); ++c) {
    const double b = params.head_bias[static_cast<std::size_t>(c)];
    double* plane = logits.data() + static_cast<std::size_t>(c) * cells;
    for (std::size_t i = 0; i < cells; ++i) plane[i] += b;
  }
  if (cache) {
    cache->temporal_out = std::move(temporal_out);
    cache->head_in = std::move(head_in);
    cache->head_t1 = t1;
  }
  return logits;
}

ModelParams model_backward(const ModelParams& params, const ModelGeometry& geom,
                           const TrainConfig& cfg,
                           const ModelForwardCache& cache,
                           const Tensor& grad_logits) {
  if (cache.bev.empty()) {
    throw_config("model_backward: forward cache is empty");
  }
  ModelParams grads = zero_like(params);
  const int t_len = static_cast<int>(cache.bev.size());

  const std::size_t cells =
      static_cast<std::size_t>(grad_logits.dim(1)) * grad_logits.dim(2);
  for (int c = 0; c < grad_logits.dim(0); ++c) {
    const double* plane =
        grad_logits.data() + static_cast<std::size_t>(c) * cells;
    double acc = 0.0;
    for (std::size_t i = 0; i < cells; ++i) acc += plane[i];
    grads.head_bias[static_cast<std::size_t>(c)] = acc;
  }
  Conv2dGrads h2 = conv2d_backward(cache.head_t1, params.head_conv2, grad_logits);
  grads.head_conv2 = std::move(h2.grad_kernel);
  Conv2dGrads h1 = conv2d_backward(cache.head_in, params.head_conv1,
                                   tanh_backward(h2.grad_input, cache.head_t1));
  grads.head_conv1 = std::move(h1.grad_kernel);
  Tensor g_temporal = params.module == TemporalModule::kGeoConvGru
                          ? apply_geo_mask_backward(h1.grad_input, geom.mask)
                          : std::move(h1.grad_input);

  std::vector<Tensor> grad_bev;
  switch (params.module) {
    case TemporalModule::kStatic: {
      grad_bev.assign(static_cast<std::size_t>(t_len),
                      Tensor(cache.bev[0].shape(), 0.0));
      grad_bev.back() = std::move(g_temporal);
      break;
    }
    case TemporalModule::kConv3d: {
      auto [gw, gk] =
          temporal_conv3d_backward(cache.bev, params.conv3d_kernel, g_temporal);
      grad_bev = std::move(gw);
      grads.conv3d_kernel = std::move(gk);
      break;
    }
    case TemporalModule::kConvGru:
    case TemporalModule::kGeoConvGru: {
      ConvGruBpttGrads bptt =
          convgru_backward_through_time(cache.gru, params.gru, g_temporal);
      grad_bev = std::move(bptt.grad_window);
      grads.gru = std::move(bptt.grad_params);
      break;
    }
  }

  auto acc = [](Tensor& into, const Tensor& g) {
    for (std::size_t i = 0; i < into.size(); ++i) into[i] += g[i];
  };
  for (int t = 0; t < t_len; ++t) {
    const auto& enc_row = cache.enc[static_cast<std::size_t>(t)];
    for (std::size_t ci = 0; ci < enc_row.size(); ++ci) {
      LiftSplatGrads ls = lift_splat_backward(
          grad_bev[static_cast<std::size_t>(t)], geom.cloud.cameras[ci],
          geom.grid, enc_row[ci].features, enc_row[ci].depth_logits);
      EncoderGrads eg = encode_image_backward(
          enc_row[ci], params, ls.grad_features, ls.grad_depth_logits);
      acc(grads.enc_conv1, eg.g_conv1);
      acc(grads.enc_conv2, eg.g_conv2);
      acc(grads.enc_feat, eg.g_feat);
      acc(grads.enc_depth, eg.g_depth);
    }
  }
  return grads;
}

// --- loss ------------------------------------------------------------------------

LossResult cross_entropy_loss(const Tensor& logits, const Tensor& labels) {
  if (logits.ndim() != 3 || labels.ndim() != 2 ||
      logits.dim(1) != labels.dim(0) || logits.dim(2) != labels.dim(1)) {
    throw_config("cross_entropy_loss: logits [K,H,W] / labels [H,W] mismatch");
  }
  const int k = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
  const std::size_t cells = static_cast<std::size_t>(h) * w;
  const Tensor prob = softmax_channel(logits);
  LossResult out;
  out.grad_logits = Tensor(logits.shape(), 0.0);
  double loss = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double lv = labels.at(y, x);
      const long id = static_cast<long>(lv);
      if (static_cast<double>(id) != lv || id < 0 || id >= k) {
        throw_config("cross_entropy_loss: invalid label id " +
                     std::to_string(lv) + " for " + std::to_string(k) +
                     " classes");
      }
      // log softmax recomputed stably from the logits
      double m = logits.at(0, y, x);
      for (int c = 1; c < k; ++c) m = std::max(m, logits.at(c, y, x));
      double denom = 0.0;
      for (int c = 0; c < k; ++c) denom += std::exp(logits.at(c, y, x) - m);
      loss -= (logits.at(static_cast<int>(id), y, x) - m - std::log(denom));
      for (int c = 0; c < k; ++c) {
        const double onehot = (c == id) ? 1.0 : 0.0;
        out.grad_logits.at(c, y, x) =
            (prob.at(c, y, x) - onehot) / static_cast<double>(cells);
      }
    }
  }
  out.value = loss / static_cast<double>(cells);
  return out;
}

// --- Adam ---------------------------------------------------------------------

void adam_update_tensor(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v,
                        long step, double lr, double beta1, double beta2,
                        double eps) {
  if (!param.same_shape(grad)) throw_config("adam: grad shape mismatch");
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

AdamState init_adam(const ModelParams& params) {
  AdamState s;
  params.for_each_param([&](const std::string&, const Tensor& t) {
    s.m.emplace_back(t.shape(), 0.0);
    s.v.emplace_back(t.shape(), 0.0);
  });
  return s;
}

void adam_step(ModelParams& params, const ModelParams& grads,
               const TrainConfig& cfg, AdamState& state) {
  ++state.step;
  std::vector<Tensor*> ps;
  std::vector<const Tensor*> gs;
  params.for_each_param([&](const std::string&, Tensor& t) { ps.push_back(&t); });
  grads.for_each_param(
      [&](const std::string&, const Tensor& t) { gs.push_back(&t); });
  if (ps.size() != gs.size() || ps.size() != state.m.size()) {
    throw_config("adam_step: parameter/state layout mismatch");
  }
  for (std::size_t i = 0; i < ps.size(); ++i) {
    adam_update_tensor(*ps[i], *gs[i], state.m[i], state.v[i], state.step,
                       cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
  }
}

}  // namespace geobev
