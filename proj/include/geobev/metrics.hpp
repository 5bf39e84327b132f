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
#ifndef GEOBEV_METRICS_HPP_
#define GEOBEV_METRICS_HPP_

#include "geobev/tensor.hpp"

namespace geobev {

// |pred n gt| / |pred u gt| over binary [H,W] masks (values exactly 0 or 1);
// defined as 1 when both masks are empty.
double iou(const Tensor& pred, const Tensor& gt);

// 4-connected components of a binary mask; ids assigned in raster-scan
// discovery order starting at 1, background 0.
Tensor connected_components(const Tensor& mask);

struct PanopticCounts {
  long tp = 0, fp = 0, fn = 0;
  double sum_matched_iou = 0.0;
};

struct PanopticResult {
  double pq = 0.0, sq = 0.0, rq = 0.0;
  PanopticCounts counts;
};

// Matches pred/gt instance segments at IoU > 0.5 (which makes the matching
// unique). RQ = TP/(TP + FP/2 + FN/2), SQ = mean matched IoU (0 without
// matches), PQ = SQ * RQ. With no instances on either side all three are 1.
PanopticResult panoptic_quality(const Tensor& pred_instances,
                                const Tensor& gt_instances);

// Per-image counts for dataset-level aggregation.
PanopticCounts panoptic_match(const Tensor& pred_instances,
                              const Tensor& gt_instances);

PanopticResult panoptic_from_counts(const PanopticCounts& counts);

}  // namespace geobev

#endif  // GEOBEV_METRICS_HPP_
