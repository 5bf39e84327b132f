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
#include "geobev/geo_mask.hpp"

#include <cmath>
#include <fstream>

#include "geobev/error.hpp"

namespace geobev {

GeoMask build_geo_mask(const FrustumCloud& cloud, const BevGridSpec& grid,
                       double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) {
    throw_config("geo mask epsilon must lie in (0, 1]");
  }
  GeoMask mask;
  mask.epsilon = epsilon;
  mask.weights = Tensor({grid.rows, grid.cols}, epsilon);
  for (const CameraFrustum& cam : cloud.cameras) {
    for (const FrustumPoint& pt : cam.points) {
      if (auto cell = ego_to_bev_index(pt.ego, grid)) {
        mask.weights.at(cell->first, cell->second) = 1.0;
      }
    }
  }
  return mask;
}

Tensor apply_geo_mask(const Tensor& features, const GeoMask& mask) {
  if (features.ndim() != 3 || features.dim(1) != mask.weights.dim(0) ||
      features.dim(2) != mask.weights.dim(1)) {
    throw_config("apply_geo_mask: spatial dims must match the mask");
  }
  return mul(features, mask.weights);
}

Tensor apply_geo_mask_backward(const Tensor& grad_out, const GeoMask& mask) {
  return apply_geo_mask(grad_out, mask);
}

void save_mask_pgm(const GeoMask& mask, const std::string& path) {
  const int rows = mask.weights.dim(0), cols = mask.weights.dim(1);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_io("cannot open for writing: " + path);
  out << "P5\n" << cols << " " << rows << "\n255\n";
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const long v = std::lround(255.0 * mask.weights.at(r, c));
      out.put(static_cast<char>(v < 0 ? 0 : (v > 255 ? 255 : v)));
    }
  }
  if (!out) throw_io("write failed: " + path);
}

}  // namespace geobev
