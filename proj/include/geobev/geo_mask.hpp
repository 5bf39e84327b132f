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
#ifndef GEOBEV_GEO_MASK_HPP_
#define GEOBEV_GEO_MASK_HPP_

#include <string>

#include "geobev/geometry.hpp"
#include "geobev/tensor.hpp"

namespace geobev {

// Per-BEV-cell visibility weight: 1 where at least one frustum point lands,
// epsilon everywhere else. Cells at 1 are "valid".
struct GeoMask {
  Tensor weights;  // [rows, cols], every element exactly epsilon or 1
  double epsilon = 0.1;
};

// Marks every cell hit by an in-range frustum point of any camera as 1.
// epsilon must lie in (0, 1]; 1 is admitted so the identity case is
// reachable through the same path.
GeoMask build_geo_mask(const FrustumCloud& cloud, const BevGridSpec& grid,
                       double epsilon);

// out[c,r,col] = mask[r,col] * features[c,r,col].
Tensor apply_geo_mask(const Tensor& features, const GeoMask& mask);

// The mask is geometry, not parameters: the backward pass is just the
// mask-scaled cotangent.
Tensor apply_geo_mask_backward(const Tensor& grad_out, const GeoMask& mask);

// 8-bit PGM (P5) with value round(255 * weight): 255 for valid cells,
// 26 at the default epsilon of 0.1.
void save_mask_pgm(const GeoMask& mask, const std::string& path);

}  // namespace geobev

#endif  // GEOBEV_GEO_MASK_HPP_
