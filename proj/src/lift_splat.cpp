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
#include "geobev/lift_splat.hpp"

#include "geobev/error.hpp"

namespace geobev {

namespace {

void check_lift_shapes(const Tensor& features, const Tensor& depth_logits) {
  if (features.ndim() != 3 || depth_logits.ndim() != 3 ||
      features.dim(1) != depth_logits.dim(1) ||
      features.dim(2) != depth_logits.dim(2)) {
    throw_config("lift: features [C,h,w] and depth_logits [D,h,w] must share "
                 "spatial dims");
  }
}

void check_alignment(const Tensor& lifted, const CameraFrustum& frustum) {
  if (lifted.ndim() != 4 || lifted.dim(0) != frustum.num_bins ||
      lifted.dim(1) != frustum.feat_h || lifted.dim(2) != frustum.feat_w) {
    throw_config("splat: lifted tensor is not aligned with the frustum");
  }
  if (frustum.points.size() != static_cast<std::size_t>(frustum.feat_h) *
                                   frustum.feat_w * frustum.num_bins) {
    throw_config("splat: frustum point count mismatch");
  }
}

}  // namespace

Tensor lift(const Tensor& features, const Tensor& depth_logits) {
  check_lift_shapes(features, depth_logits);
  const int c = features.dim(0), h = features.dim(1), w = features.dim(2);
  const int d = depth_logits.dim(0);
  const Tensor prob = softmax_channel(depth_logits);
  Tensor lifted({d, h, w, c}, 0.0);
  for (int di = 0; di < d; ++di) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double p = prob.at(di, y, x);
        for (int ci = 0; ci < c; ++ci) {
          lifted.at(di, y, x, ci) = p * features.at(ci, y, x);
        }
      }
    }
  }
  return lifted;
}

void splat_accumulate(const Tensor& lifted, const CameraFrustum& frustum,
                      const BevGridSpec& grid, Tensor& bev) {
  check_alignment(lifted, frustum);
  const int c = lifted.dim(3);
  if (bev.ndim() != 3 || bev.dim(0) != c || bev.dim(1) != grid.rows ||
      bev.dim(2) != grid.cols) {
    throw_config("splat: bev tensor shape mismatch");
  }
  const int d = frustum.num_bins, h = frustum.feat_h, w = frustum.feat_w;
  const std::size_t cell_count = static_cast<std::size_t>(grid.rows) * grid.cols;
  // Point list is stored in (y, x, d) order; iterating it sequentially is the
  // fixed accumulation order of the contract.
  std::size_t pi = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int di = 0; di < d; ++di, ++pi) {
        const FrustumPoint& pt = frustum.points[pi];
        const auto cell = ego_to_bev_index(pt.ego, grid);
        if (!cell) continue;
        const std::size_t base =
            static_cast<std::size_t>(cell->first) * grid.cols + cell->second;
        const double* src =
            lifted.data() +
            ((static_cast<std::size_t>(di) * h + y) * w + x) * c;
        for (int ci = 0; ci < c; ++ci) {
          bev[static_cast<std::size_t>(ci) * cell_count + base] += src[ci];
        }
      }
    }
  }
}

Tensor splat(const std::vector<Tensor>& lifted_per_camera,
             const FrustumCloud& cloud, const BevGridSpec& grid) {
  if (lifted_per_camera.size() != cloud.cameras.size()) {
    throw_config("splat: one lifted tensor per camera required");
  }
  if (lifted_per_camera.empty()) throw_config("splat: empty camera list");
  const int c = lifted_per_camera[0].dim(3);
  Tensor bev({c, grid.rows, grid.cols}, 0.0);
  for (std::size_t i = 0; i < cloud.cameras.size(); ++i) {
    splat_accumulate(lifted_per_camera[i], cloud.cameras[i], grid, bev);
  }
  return bev;
}

LiftSplatGrads lift_splat_backward(const Tensor& grad_bev,
                                   const CameraFrustum& frustum,
                                   const BevGridSpec& grid,
                                   const Tensor& features,
                                   const Tensor& depth_logits) {
  check_lift_shapes(features, depth_logits);
  const int c = features.dim(0), h = features.dim(1), w = features.dim(2);
  const int d = depth_logits.dim(0);
  if (grad_bev.ndim() != 3 || grad_bev.dim(0) != c ||
      grad_bev.dim(1) != grid.rows || grad_bev.dim(2) != grid.cols) {
    throw_config("lift_splat_backward: grad_bev shape mismatch");
  }
  if (frustum.feat_h != h || frustum.feat_w != w || frustum.num_bins != d) {
    throw_config("lift_splat_backward: frustum not aligned with features");
  }
  const Tensor prob = softmax_channel(depth_logits);
  const std::size_t cell_count = static_cast<std::size_t>(grid.rows) * grid.cols;

  Tensor grad_features({c, h, w}, 0.0);
  // grad_prob[d,y,x] = sum_c features[c,y,x] * grad_bev[c, cell(d,y,x)]
  Tensor grad_prob({d, h, w}, 0.0);
  std::size_t pi = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int di = 0; di < d; ++di, ++pi) {
        const FrustumPoint& pt = frustum.points[pi];
        const auto cell = ego_to_bev_index(pt.ego, grid);
        if (!cell) continue;
        const std::size_t base =
            static_cast<std::size_t>(cell->first) * grid.cols + cell->second;
        const double p = prob.at(di, y, x);
        double s = 0.0;
        for (int ci = 0; ci < c; ++ci) {
          const double g = grad_bev[static_cast<std::size_t>(ci) * cell_count + base];
          grad_features.at(ci, y, x) += p * g;
          s += features.at(ci, y, x) * g;
        }
        grad_prob.at(di, y, x) += s;
      }
    }
  }
  // Softmax backward per pixel: grad_logits = prob .* (grad_prob - <prob, grad_prob>).
  Tensor grad_logits({d, h, w}, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double dot = 0.0;
      for (int di = 0; di < d; ++di) dot += prob.at(di, y, x) * grad_prob.at(di, y, x);
      for (int di = 0; di < d; ++di) {
        grad_logits.at(di, y, x) =
            prob.at(di, y, x) * (grad_prob.at(di, y, x) - dot);
      }
    }
  }
  return {std::move(grad_features), std::move(grad_logits)};
}

}  // namespace geobev
