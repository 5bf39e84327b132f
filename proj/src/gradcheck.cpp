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
#include "geobev/gradcheck.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "geobev/conv_gru.hpp"
#include "geobev/geo_mask.hpp"
#include "geobev/lift_splat.hpp"
#include "geobev/pipeline.hpp"
#include "geobev/rng.hpp"
#include "geobev/tensor.hpp"

namespace geobev {

namespace {

Tensor rand_tensor(const std::vector<int>& shape, SeededRng& rng,
                   double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Element error relative to the larger gradient magnitude, floored so that
// near-zero entries are compared absolutely.
double rel_err(const Tensor& analytic, const Tensor& numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-2});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

double weighted_sum(const Tensor& w, const Tensor& x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += w[i] * x[i];
  return acc;
}

GradcheckComponent check_conv2d(SeededRng& rng, bool inject_fault) {
  const Tensor input = rand_tensor({2, 4, 5}, rng);
  const Tensor kernel = rand_tensor({3, 2, 3, 3}, rng);
  const Tensor cotangent = rand_tensor({3, 4, 5}, rng);
  Conv2dGrads grads = conv2d_backward(input, kernel, cotangent);
  if (inject_fault) grads.grad_input = scale(grads.grad_input, -1.0);
  const Tensor fd_input = finite_diff_grad(
      [&](const Tensor& x) { return weighted_sum(cotangent, conv2d(x, kernel)); },
      input);
  const Tensor fd_kernel = finite_diff_grad(
      [&](const Tensor& k) { return weighted_sum(cotangent, conv2d(input, k)); },
      kernel);
  GradcheckComponent c{"conv2d", 0.0, 1e-5, false};
  c.max_rel_err = std::max(rel_err(grads.grad_input, fd_input),
                           rel_err(grads.grad_kernel, fd_kernel));
  c.pass = c.max_rel_err <= c.tolerance;
  return c;
}

GradcheckComponent check_convgru_cell(SeededRng& rng) {
  ConvGruUnitParams p;
  p.w_update = rand_tensor({2, 2, 3, 3}, rng);
  p.u_update = rand_tensor({2, 2, 3, 3}, rng);
  p.w_reset = rand_tensor({2, 2, 3, 3}, rng);
  p.u_reset = rand_tensor({2, 2, 3, 3}, rng);
  p.w_cand = rand_tensor({2, 2, 3, 3}, rng);
  p.u_cand = rand_tensor({2, 2, 3, 3}, rng);
  const Tensor f = rand_tensor({2, 4, 4}, rng);
  const Tensor h = rand_tensor({2, 4, 4}, rng);
  const Tensor cotangent = rand_tensor({2, 4, 4}, rng);

  ConvGruCellCache cache;
  convgru_cell(f, h, p, &cache);
  const ConvGruCellGrads grads = convgru_cell_backward(cache, p, cotangent);

  GradcheckComponent c{"convgru_cell", 0.0, 1e-5, false};
  auto fd_vs = [&](const Tensor& analytic, Tensor& slot, const Tensor& at) {
    const Tensor saved = slot;
    const Tensor fd = finite_diff_grad(
        [&](const Tensor& x) {
          slot = x;
          const double v = weighted_sum(cotangent, convgru_cell(f, h, p));
          return v;
        },
        at);
    slot = saved;
    c.max_rel_err = std::max(c.max_rel_err, rel_err(analytic, fd));
  };
  // inputs
  {
    Tensor probe = f;
    const Tensor fd = finite_diff_grad(
        [&](const Tensor& x) { return weighted_sum(cotangent, convgru_cell(x, h, p)); },
        probe);
    c.max_rel_err = std::max(c.max_rel_err, rel_err(grads.grad_input, fd));
  }
  {
    Tensor probe = h;
    const Tensor fd = finite_diff_grad(
        [&](const Tensor& x) { return weighted_sum(cotangent, convgru_cell(f, x, p)); },
        probe);
    c.max_rel_err = std::max(c.max_rel_err, rel_err(grads.grad_h_prev, fd));
  }
  // all six kernels
  fd_vs(grads.grad_params.w_update, p.w_update, p.w_update);
  fd_vs(grads.grad_params.u_update, p.u_update, p.u_update);
  fd_vs(grads.grad_params.w_reset, p.w_reset, p.w_reset);
  fd_vs(grads.grad_params.u_reset, p.u_reset, p.u_reset);
  fd_vs(grads.grad_params.w_cand, p.w_cand, p.w_cand);
  fd_vs(grads.grad_params.u_cand, p.u_cand, p.u_cand);
  c.pass = c.max_rel_err <= c.tolerance;
  return c;
}

GradcheckComponent check_bptt(SeededRng& rng) {
  SeededRng init_rng(rng.next_u64());
  ConvGruParams params = init_conv_gru(2, 2, 2, 3, init_rng);
  std::vector<Tensor> window;
  for (int t = 0; t < 3; ++t) window.push_back(rand_tensor({2, 4, 4}, rng));
  const Tensor cotangent = rand_tensor({2, 4, 4}, rng);

  ConvGruForwardCache cache;
  convgru_forward(window, params, &cache);
  const ConvGruBpttGrads grads =
      convgru_backward_through_time(cache, params, cotangent);

  GradcheckComponent c{"bptt", 0.0, 1e-5, false};
  auto loss = [&]() {
    return weighted_sum(cotangent, convgru_forward(window, params));
  };
  auto fd_slot = [&](const Tensor& analytic, Tensor& slot) {
    const Tensor saved = slot;
    const Tensor fd = finite_diff_grad(
        [&](const Tensor& x) {
          slot = x;
          return loss();
        },
        saved);
    slot = saved;
    c.max_rel_err = std::max(c.max_rel_err, rel_err(analytic, fd));
  };
  for (std::size_t t = 0; t < window.size(); ++t) {
    fd_slot(grads.grad_window[t], window[t]);
  }
  for (std::size_t u = 0; u < params.units.size(); ++u) {
    fd_slot(grads.grad_params.units[u].w_update, params.units[u].w_update);
    fd_slot(grads.grad_params.units[u].u_update, params.units[u].u_update);
    fd_slot(grads.grad_params.units[u].w_reset, params.units[u].w_reset);
    fd_slot(grads.grad_params.units[u].u_reset, params.units[u].u_reset);
    fd_slot(grads.grad_params.units[u].w_cand, params.units[u].w_cand);
    fd_slot(grads.grad_params.units[u].u_cand, params.units[u].u_cand);
  }
  c.pass = c.max_rel_err <= c.tolerance;
  return c;
}

Camera gradcheck_camera() {
  Camera cam;
  cam.name = "gc";
  cam.intrinsics = Mat3::identity();
  cam.intrinsics.at(0, 0) = 10.0;
  cam.intrinsics.at(1, 1) = 10.0;
  cam.intrinsics.at(0, 2) = 12.0;
  cam.intrinsics.at(1, 2) = 12.0;
  // camera frame x right / y down / z forward mapped to ego x fwd / y left
  Mat3 r;
  r.at(0, 2) = 1.0;
  r.at(1, 0) = -1.0;
  r.at(2, 1) = -1.0;
  cam.rotation = r;
  cam.translation = {0.0, 0.0, 1.5};
  cam.validate();
  return cam;
}

GradcheckComponent check_lift_splat(SeededRng& rng) {
  const BevGridSpec grid = BevGridSpec::create(8.0, 8.0, 1.0);
  const Camera cam = gradcheck_camera();
  const CameraFrustum frustum =
      build_frustum(cam, 4, 4, {1.5, 2.5, 3.5}, 8);
  const Tensor features = rand_tensor({2, 4, 4}, rng);
  const Tensor depth_logits = rand_tensor({3, 4, 4}, rng);
  const Tensor cotangent = rand_tensor({2, 8, 8}, rng);

  auto forward = [&](const Tensor& f, const Tensor& d) {
    Tensor bev({2, grid.rows, grid.cols}, 0.0);
    splat_accumulate(lift(f, d), frustum, grid, bev);
    return weighted_sum(cotangent, bev);
  };
  const LiftSplatGrads grads =
      lift_splat_backward(cotangent, frustum, grid, features, depth_logits);
  const Tensor fd_f = finite_diff_grad(
      [&](const Tensor& x) { return forward(x, depth_logits); }, features);
  const Tensor fd_d = finite_diff_grad(
      [&](const Tensor& x) { return forward(features, x); }, depth_logits);

  GradcheckComponent c{"lift_splat", 0.0, 1e-5, false};
  c.max_rel_err = std::max(rel_err(grads.grad_features, fd_f),
                           rel_err(grads.grad_depth_logits, fd_d));
  c.pass = c.max_rel_err <= c.tolerance;
  return c;
}

GradcheckComponent check_encoder(SeededRng& rng) {
  TrainConfig cfg;
  cfg.enc1_channels = 2;
  cfg.enc2_channels = 2;
  cfg.feat_channels = 2;
  cfg.depth_bins = 3;
  cfg.depth_min = 1.5;
  cfg.depth_max = 5.5;
  cfg.hidden_channels = 2;
  cfg.head_channels = 2;
  cfg.seed = rng.next_u64();
  DatasetMeta meta;
  meta.timesteps = 2;
  meta.window = 2;
  meta.cameras = 1;
  meta.img_h = 16;
  meta.img_w = 16;
  meta.grid = BevGridSpec::create(16.0, 16.0, 1.0);
  const ModelParams params = init_model(cfg, meta);

  const Tensor image = rand_tensor({3, 16, 16}, rng, 0.0, 1.0);
  const Tensor w_feat = rand_tensor({2, 2, 2}, rng);
  const Tensor w_depth = rand_tensor({3, 2, 2}, rng);

  EncoderCache cache;
  encode_image(image, params, &cache);
  const EncoderGrads grads =
      encode_image_backward(cache, params, w_feat, w_depth);

  auto loss_of = [&](const ModelParams& p, const Tensor& img) {
    const EncoderOut out = encode_image(img, p);
    return weighted_sum(w_feat, out.features) +
           weighted_sum(w_depth, out.depth_logits);
  };

  GradcheckComponent c{"encoder", 0.0, 1e-5, false};
  const Tensor fd_img = finite_diff_grad(
      [&](const Tensor& x) { return loss_of(params, x); }, image);
  c.max_rel_err = std::max(c.max_rel_err, rel_err(grads.grad_image, fd_img));

  ModelParams work = params;
  struct Slot {
    Tensor* t;
    const Tensor* analytic;
  };
  const Slot slots[4] = {{&work.enc_conv1, &grads.g_conv1},
                         {&work.enc_conv2, &grads.g_conv2},
                         {&work.enc_feat, &grads.g_feat},
                         {&work.enc_depth, &grads.g_depth}};
  for (const Slot& s : slots) {
    const Tensor saved = *s.t;
    const Tensor fd = finite_diff_grad(
        [&](const Tensor& x) {
          *s.t = x;
          return loss_of(work, image);
        },
        saved);
    *s.t = saved;
    c.max_rel_err = std::max(c.max_rel_err, rel_err(*s.analytic, fd));
  }
  c.pass = c.max_rel_err <= c.tolerance;
  return c;
}

GradcheckComponent check_loss(SeededRng& rng) {
  const Tensor logits = rand_tensor({2, 5, 5}, rng);
  Tensor labels({5, 5}, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = static_cast<double>(rng.uniform_index(2));
  }
  const LossResult loss = cross_entropy_loss(logits, labels);
  const Tensor fd = finite_diff_grad(
      [&](const Tensor& x) { return cross_entropy_loss(x, labels).value; },
      logits);
  GradcheckComponent c{"loss", 0.0, 1e-6, false};
  c.max_rel_err = rel_err(loss.grad_logits, fd);
  c.pass = c.max_rel_err <= c.tolerance;
  return c;
}

GradcheckComponent check_geo_mask(SeededRng& rng) {
  GeoMask mask;
  mask.epsilon = 0.1;
  mask.weights = Tensor({6, 6}, 0.1);
  for (std::size_t i = 0; i < mask.weights.size(); i += 3) {
    mask.weights[i] = 1.0;
  }
  const Tensor features = rand_tensor({2, 6, 6}, rng);
  const Tensor cotangent = rand_tensor({2, 6, 6}, rng);
  const Tensor analytic = apply_geo_mask_backward(cotangent, mask);
  const Tensor fd = finite_diff_grad(
      [&](const Tensor& x) {
        return weighted_sum(cotangent, apply_geo_mask(x, mask));
      },
      features);
  GradcheckComponent c{"geo_mask", 0.0, 1e-6, false};
  c.max_rel_err = rel_err(analytic, fd);
  c.pass = c.max_rel_err <= c.tolerance;
  return c;
}

GradcheckComponent check_conv3d(SeededRng& rng) {
  std::vector<Tensor> window;
  for (int t = 0; t < 3; ++t) window.push_back(rand_tensor({2, 4, 4}, rng));
  const Tensor kernel = rand_tensor({2, 2, 3, 3, 3}, rng);
  const Tensor cotangent = rand_tensor({2, 4, 4}, rng);
  auto [grad_window, grad_kernel] =
      temporal_conv3d_backward(window, kernel, cotangent);

  GradcheckComponent c{"conv3d", 0.0, 1e-5, false};
  for (std::size_t t = 0; t < window.size(); ++t) {
    const Tensor saved = window[t];
    const Tensor fd = finite_diff_grad(
        [&](const Tensor& x) {
          window[t] = x;
          const double v = weighted_sum(cotangent, temporal_conv3d(window, kernel));
          return v;
        },
        saved);
    window[t] = saved;
    c.max_rel_err = std::max(c.max_rel_err, rel_err(grad_window[t], fd));
  }
  const Tensor fd_k = finite_diff_grad(
      [&](const Tensor& k) {
        return weighted_sum(cotangent, temporal_conv3d(window, k));
      },
      kernel);
  c.max_rel_err = std::max(c.max_rel_err, rel_err(grad_kernel, fd_k));
  c.pass = c.max_rel_err <= c.tolerance;
  return c;
}

GradcheckComponent check_end_to_end(SeededRng& rng) {
  // Micro model: 16x16 BEV grid, T = 2, N = 2 cameras.
  TrainConfig cfg;
  cfg.module = TemporalModule::kGeoConvGru;
  cfg.temporal_field = 2;
  cfg.feat_channels = 2;
  cfg.depth_bins = 3;
  cfg.depth_min = 1.5;
  cfg.depth_max = 5.5;
  cfg.hidden_channels = 2;
  cfg.gru_units = 2;
  cfg.enc1_channels = 2;
  cfg.enc2_channels = 2;
  cfg.head_channels = 2;
  cfg.num_classes = 2;
  cfg.seed = rng.next_u64();
  DatasetMeta meta;
  meta.timesteps = 2;
  meta.window = 2;
  meta.cameras = 2;
  meta.img_h = 16;
  meta.img_w = 16;
  meta.grid = BevGridSpec::create(16.0, 16.0, 1.0);

  std::vector<Camera> rig;
  for (int i = 0; i < 2; ++i) {
    Camera cam = gradcheck_camera();
    cam.name = "cam" + std::to_string(i);
    cam.intrinsics.at(0, 0) = 8.0;
    cam.intrinsics.at(1, 1) = 8.0;
    cam.intrinsics.at(0, 2) = 8.0;
    cam.intrinsics.at(1, 2) = 8.0;
    if (i == 1) {
      cam.rotation = Mat3::rot_z(3.14159265358979323846).matmul(cam.rotation);
    }
    cam.validate();
    rig.push_back(cam);
  }

  ModelParams params = init_model(cfg, meta);
  const ModelGeometry geom = build_geometry(cfg, meta, rig);

  Sample sample;
  sample.frames.resize(2);
  for (auto& row : sample.frames) {
    for (int cam = 0; cam < 2; ++cam) {
      row.push_back(rand_tensor({3, 16, 16}, rng, 0.0, 1.0));
    }
  }
  sample.label = Tensor({16, 16}, 0.0);
  for (std::size_t i = 0; i < sample.label.size(); ++i) {
    sample.label[i] = static_cast<double>(rng.uniform_index(2));
  }

  ModelForwardCache cache;
  const Tensor logits = model_forward(sample, params, geom, cfg, &cache);
  const LossResult loss = cross_entropy_loss(logits, sample.label);
  ModelParams analytic = model_backward(params, geom, cfg, cache, loss.grad_logits);

  auto loss_of = [&]() {
    return cross_entropy_loss(model_forward(sample, params, geom, cfg),
                              sample.label)
        .value;
  };

  GradcheckComponent c{"end_to_end", 0.0, 1e-5, false};
  std::vector<Tensor*> slots;
  params.for_each_param([&](const std::string&, Tensor& t) { slots.push_back(&t); });
  std::vector<const Tensor*> grads;
  analytic.for_each_param(
      [&](const std::string&, const Tensor& t) { grads.push_back(&t); });
  const double step = 1e-4;  // wider step: the loss is a long float chain
  bool all_alive = true;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    Tensor fd(slots[s]->shape(), 0.0);
    for (std::size_t i = 0; i < slots[s]->size(); ++i) {
      const double orig = (*slots[s])[i];
      (*slots[s])[i] = orig + step;
      const double lp = loss_of();
      (*slots[s])[i] = orig - step;
      const double lm = loss_of();
      (*slots[s])[i] = orig;
      fd[i] = (lp - lm) / (2.0 * step);
    }
    c.max_rel_err = std::max(c.max_rel_err, rel_err(*grads[s], fd));
    // every trainable tensor has to take part in the loss (no dead params)
    double mag = 0.0;
    for (std::size_t i = 0; i < grads[s]->size(); ++i) {
      mag = std::max(mag, std::abs((*grads[s])[i]));
    }
    all_alive = all_alive && mag > 0.0;
  }
  c.pass = c.max_rel_err <= c.tolerance && all_alive;
  return c;
}

}  // namespace

std::string GradcheckReport::text() const {
  std::ostringstream os;
  for (const GradcheckComponent& c : components) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-14s max_rel_err=%.3e  tol=%.0e  %s\n",
                  c.name.c_str(), c.max_rel_err, c.tolerance,
                  c.pass ? "ok" : "FAIL");
    os << buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "gradcheck %s (%.2fs)\n", ok ? "ok" : "FAILED",
                seconds);
  os << buf;
  return os.str();
}

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  SeededRng rng(options.seed);
  GradcheckReport report;
  report.components.push_back(check_conv2d(rng, options.inject_fault));
  report.components.push_back(check_convgru_cell(rng));
  report.components.push_back(check_bptt(rng));
  report.components.push_back(check_lift_splat(rng));
  report.components.push_back(check_encoder(rng));
  report.components.push_back(check_loss(rng));
  report.components.push_back(check_geo_mask(rng));
  report.components.push_back(check_conv3d(rng));
  report.components.push_back(check_end_to_end(rng));
  report.ok = true;
  for (const GradcheckComponent& c : report.components) {
    report.ok = report.ok && c.pass;
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return report;
}

}  // namespace geobev
