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
#include "geobev/metrics.hpp"

#include <map>
#include <vector>

#include "geobev/error.hpp"

namespace geobev {

namespace {

void check_binary_mask(const Tensor& m, const char* what) {
  if (m.ndim() != 2) {
    throw_config(std::string(what) + " must be a [H,W] mask");
  }
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] != 0.0 && m[i] != 1.0) {
      throw_config(std::string(what) + " must contain only 0 and 1 values");
    }
  }
}

}  // namespace

double iou(const Tensor& pred, const Tensor& gt) {
  check_binary_mask(pred, "iou: pred");
  check_binary_mask(gt, "iou: gt");
  if (!pred.same_shape(gt)) throw_config("iou: shape mismatch");
  long inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0.0, g = gt[i] != 0.0;
    inter += (p && g) ? 1 : 0;
    uni += (p || g) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

Tensor connected_components(const Tensor& mask) {
  check_binary_mask(mask, "connected_components: mask");
  const int h = mask.dim(0), w = mask.dim(1);
  Tensor labels({h, w}, 0.0);
  int next_id = 1;
  std::vector<std::pair<int, int>> stack;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (mask.at(r, c) == 0.0 || labels.at(r, c) != 0.0) continue;
      const double id = static_cast<double>(next_id++);
      labels.at(r, c) = id;
      stack.push_back({r, c});
      while (!stack.empty()) {
        auto [y, x] = stack.back();
        stack.pop_back();
        const int ny[4] = {y - 1, y + 1, y, y};
        const int nx[4] = {x, x, x - 1, x + 1};
        for (int k = 0; k < 4; ++k) {
          if (ny[k] < 0 || ny[k] >= h || nx[k] < 0 || nx[k] >= w) continue;
          if (mask.at(ny[k], nx[k]) == 1.0 && labels.at(ny[k], nx[k]) == 0.0) {
            labels.at(ny[k], nx[k]) = id;
            stack.push_back({ny[k], nx[k]});
          }
        }
      }
    }
  }
  return labels;
}

PanopticCounts panoptic_match(const Tensor& pred_instances,
                              const Tensor& gt_instances) {
  if (pred_instances.ndim() != 2 || !pred_instances.same_shape(gt_instances)) {
    throw_config("panoptic_quality: instance grids must share a [H,W] shape");
  }
  std::map<long, long> pred_area, gt_area;
  std::map<std::pair<long, long>, long> inter;
  for (std::size_t i = 0; i < pred_instances.size(); ++i) {
    const long p = static_cast<long>(pred_instances[i]);
    const long g = static_cast<long>(gt_instances[i]);
    if (p != 0) ++pred_area[p];
    if (g != 0) ++gt_area[g];
    if (p != 0 && g != 0) ++inter[{p, g}];
  }
  PanopticCounts out;
  long matched_pred = 0, matched_gt = 0;
  for (const auto& [pair, overlap] : inter) {
    const long uni = pred_area[pair.first] + gt_area[pair.second] - overlap;
    const double pair_iou = static_cast<double>(overlap) / static_cast<double>(uni);
    if (pair_iou > 0.5) {  // unique by the IoU > 0.5 theorem
      ++out.tp;
      out.sum_matched_iou += pair_iou;
      ++matched_pred;
      ++matched_gt;
    }
  }
  out.fp = static_cast<long>(pred_area.size()) - matched_pred;
  out.fn = static_cast<long>(gt_area.size()) - matched_gt;
  return out;
}

PanopticResult panoptic_from_counts(const PanopticCounts& counts) {
  PanopticResult r;
  r.counts = counts;
  const double denom = static_cast<double>(counts.tp) +
                       0.5 * static_cast<double>(counts.fp) +
                       0.5 * static_cast<double>(counts.fn);
  if (counts.tp == 0 && counts.fp == 0 && counts.fn == 0) {
    r.pq = r.sq = r.rq = 1.0;  // nothing to detect, nothing predicted
    return r;
  }
  r.rq = denom > 0.0 ? static_cast<double>(counts.tp) / denom : 0.0;
  r.sq = counts.tp > 0 ? counts.sum_matched_iou / static_cast<double>(counts.tp)
                       : 0.0;
  r.pq = r.sq * r.rq;
  return r;
}

PanopticResult panoptic_quality(const Tensor& pred_instances,
                                const Tensor& gt_instances) {
  return panoptic_from_counts(panoptic_match(pred_instances, gt_instances));
}

}  // namespace geobev
