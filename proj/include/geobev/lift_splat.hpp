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
#ifndef GEOBEV_LIFT_SPLAT_HPP_
#define GEOBEV_LIFT_SPLAT_HPP_

#include <vector>

#include "geobev/geometry.hpp"
#include "geobev/tensor.hpp"

namespace geobev {

// lifted[d,y,x,c] = softmax_channel(depth_logits)[d,y,x] * features[c,y,x].
// features [C,h,w], depth_logits [D,h,w] -> [D,h,w,C].
Tensor lift(const Tensor& features, const Tensor& depth_logits);

// Sum-pools lifted features into BEV cells through the frustum points of one
// camera; accumulates into bev [C,rows,cols] in the fixed (y, x, d) point
// order. Out-of-grid points are discarded.
void splat_accumulate(const Tensor& lifted, const CameraFrustum& frustum,
                      const BevGridSpec& grid, Tensor& bev);

// Multi-camera splat in camera order. lifted_per_camera[i] pairs with
// cloud.cameras[i].
Tensor splat(const std::vector<Tensor>& lifted_per_camera,
             const FrustumCloud& cloud, const BevGridSpec& grid);

struct LiftSplatGrads {
  Tensor grad_features;
  Tensor grad_depth_logits;
};

// Exact gradients of the splat(lift(features, depth_logits)) composite for
// one camera, including the softmax backward.
LiftSplatGrads lift_splat_backward(const Tensor& grad_bev,
                                   const CameraFrustum& frustum,
                                   const BevGridSpec& grid,
                                   const Tensor& features,
                                   const Tensor& depth_logits);

}  // namespace geobev

#endif  // GEOBEV_LIFT_SPLAT_HPP_
