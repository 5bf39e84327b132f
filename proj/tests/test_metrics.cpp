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
#include <map>
#include <set>

#include "doctest.h"
#include "geobev/error.hpp"
#include "geobev/metrics.hpp"
#include "geobev/rng.hpp"

using namespace geobev;

namespace {

// Brute-force all-pairs matcher, independent of panoptic_match: enumerates
// every (pred, gt) segment pair per grid, computes IoU by direct cell
// counting and applies the IoU > 0.5 rule.
PanopticResult brute_force_pq(const Tensor& pred, const Tensor& gt) {
  std::set<long> pred_ids, gt_ids;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] != 0.0) pred_ids.insert(static_cast<long>(pred[i]));
    if (gt[i] != 0.0) gt_ids.insert(static_cast<long>(gt[i]));
  }
  long tp = 0;
  double sum_iou = 0.0;
  std::set<long> matched_pred, matched_gt;
  for (long p : pred_ids) {
    for (long g : gt_ids) {
      long inter = 0, uni = 0;
      for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool in_p = static_cast<long>(pred[i]) == p;
        const bool in_g = static_cast<long>(gt[i]) == g;
        inter += (in_p && in_g) ? 1 : 0;
        uni += (in_p || in_g) ? 1 : 0;
      }
      const double pair_iou =
          uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
      if (pair_iou > 0.5) {
        ++tp;
        sum_iou += pair_iou;
        matched_pred.insert(p);
        matched_gt.insert(g);
      }
    }
  }
  PanopticCounts counts;
  counts.tp = tp;
  counts.fp = static_cast<long>(pred_ids.size() - matched_pred.size());
  counts.fn = static_cast<long>(gt_ids.size() - matched_gt.size());
  counts.sum_matched_iou = sum_iou;
  return panoptic_from_counts(counts);
}

Tensor random_instance_grid(SeededRng& rng, int h, int w, int max_instances) {
  // grow up to max_instances rectangular blobs; later blobs may overwrite
  Tensor grid({h, w}, 0.0);
  const int n = static_cast<int>(rng.uniform_index(
      static_cast<std::uint64_t>(max_instances + 1)));
  for (int id = 1; id <= n; ++id) {
    const int r0 = static_cast<int>(rng.uniform_index(h));
    const int c0 = static_cast<int>(rng.uniform_index(w));
    const int rh = 1 + static_cast<int>(rng.uniform_index(3));
    const int cw = 1 + static_cast<int>(rng.uniform_index(3));
    for (int r = r0; r < std::min(h, r0 + rh); ++r) {
      for (int c = c0; c < std::min(w, c0 + cw); ++c) {
        grid.at(r, c) = static_cast<double>(id);
      }
    }
  }
  return grid;
}

}  // namespace

TEST_CASE("iou") {
  Tensor a({3, 3}, 0.0), b({3, 3}, 0.0);
  SUBCASE("identical nonempty masks give 1") {
    a.at(0, 0) = a.at(1, 2) = 1.0;
    CHECK(iou(a, a) == 1.0);
  }
  SUBCASE("disjoint nonempty masks give 0") {
    a.at(0, 0) = 1.0;
    b.at(2, 2) = 1.0;
    CHECK(iou(a, b) == 0.0);
  }
  SUBCASE("2-cell subset of a 4-cell mask gives 0.5") {
    a.at(0, 0) = a.at(0, 1) = 1.0;
    b = a;
    b.at(1, 0) = b.at(1, 1) = 1.0;
    CHECK(iou(a, b) == 0.5);
  }
  SUBCASE("both empty gives 1 by convention") { CHECK(iou(a, b) == 1.0); }
  SUBCASE("symmetry") {
    SeededRng rng(61);
    for (int trial = 0; trial < 20; ++trial) {
      Tensor x({4, 4}, 0.0), y({4, 4}, 0.0);
      for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
        y[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
      }
      CHECK(iou(x, y) == iou(y, x));
    }
  }
  SUBCASE("non-binary values are rejected") {
    a.at(1, 1) = 0.5;
    CHECK_THROWS_AS(iou(a, b), Error);
  }
}

TEST_CASE("connected_components") {
  SUBCASE("empty mask stays all zero") {
    const Tensor labels = connected_components(Tensor({4, 4}, 0.0));
    for (std::size_t i = 0; i < labels.size(); ++i) CHECK(labels[i] == 0.0);
  }
  SUBCASE("two blobs get raster-scan ids 1 and 2") {
    Tensor m({3, 5}, 0.0);
    m.at(0, 0) = m.at(1, 0) = 1.0;  // left blob
    m.at(0, 3) = m.at(0, 4) = 1.0;  // right blob (same row, later column)
    const Tensor labels = connected_components(m);
    CHECK(labels.at(0, 0) == 1.0);
    CHECK(labels.at(1, 0) == 1.0);
    CHECK(labels.at(0, 3) == 2.0);
    CHECK(labels.at(0, 4) == 2.0);
  }
  SUBCASE("diagonal neighbors stay distinct under 4-connectivity") {
    Tensor m({2, 2}, 0.0);
    m.at(0, 0) = 1.0;
    m.at(1, 1) = 1.0;
    const Tensor labels = connected_components(m);
    CHECK(labels.at(0, 0) == 1.0);
    CHECK(labels.at(1, 1) == 2.0);
  }
}

TEST_CASE("panoptic_quality basics") {
  SUBCASE("perfect single instance") {
    Tensor g({4, 4}, 0.0);
    g.at(1, 1) = g.at(1, 2) = 1.0;
    const PanopticResult r = panoptic_quality(g, g);
    CHECK(r.pq == 1.0);
    CHECK(r.sq == 1.0);
    CHECK(r.rq == 1.0);
  }
  SUBCASE("missed instance gives zeros") {
    Tensor gt({4, 4}, 0.0);
    gt.at(0, 0) = 1.0;
    const PanopticResult r = panoptic_quality(Tensor({4, 4}, 0.0), gt);
    CHECK(r.pq == 0.0);
    CHECK(r.sq == 0.0);
    CHECK(r.rq == 0.0);
  }
  SUBCASE("single pair with IoU 0.6") {
    // pred covers 3 of gt's 5 cells... choose overlap 3, union 5: iou = 0.6
    Tensor pred({1, 5}, 0.0), gt({1, 5}, 0.0);
    for (int c = 0; c < 4; ++c) gt.at(0, c) = 1.0;
    for (int c = 1; c < 4; ++c) pred.at(0, c) = 1.0;  // inter 3, union 4
    const PanopticResult r = panoptic_quality(pred, gt);
    CHECK(r.rq == 1.0);
    CHECK(r.sq == doctest::Approx(0.75));
    CHECK(r.pq == doctest::Approx(0.75));
  }
  SUBCASE("empty vs empty counts as perfect") {
    const PanopticResult r =
        panoptic_quality(Tensor({3, 3}, 0.0), Tensor({3, 3}, 0.0));
    CHECK(r.pq == 1.0);
    CHECK(r.rq == 1.0);
    CHECK(r.sq == 1.0);
  }
}

TEST_CASE("panoptic_quality matches the brute-force matcher on random grids") {
  SeededRng rng(62);
  for (int trial = 0; trial < 300; ++trial) {
    const int h = 2 + static_cast<int>(rng.uniform_index(7));
    const int w = 2 + static_cast<int>(rng.uniform_index(7));
    const Tensor pred = random_instance_grid(rng, h, w, 4);
    const Tensor gt = random_instance_grid(rng, h, w, 4);
    const PanopticResult fast = panoptic_quality(pred, gt);
    const PanopticResult slow = brute_force_pq(pred, gt);
    CHECK(fast.counts.tp == slow.counts.tp);
    CHECK(fast.counts.fp == slow.counts.fp);
    CHECK(fast.counts.fn == slow.counts.fn);
    CHECK(fast.pq == doctest::Approx(slow.pq).epsilon(1e-12));
    CHECK(fast.sq == doctest::Approx(slow.sq).epsilon(1e-12));
    CHECK(fast.rq == doctest::Approx(slow.rq).epsilon(1e-12));
    CHECK(fast.pq == fast.sq * fast.rq);  // exact identity
  }
}

TEST_CASE("panoptic metrics are invariant under instance relabeling") {
  SeededRng rng(63);
  for (int trial = 0; trial < 30; ++trial) {
    const Tensor pred = random_instance_grid(rng, 6, 6, 3);
    const Tensor gt = random_instance_grid(rng, 6, 6, 3);
    // permute ids: id -> 17 - id keeps distinctness for ids 1..4
    Tensor pred2 = pred;
    for (std::size_t i = 0; i < pred2.size(); ++i) {
      if (pred2[i] != 0.0) pred2[i] = 17.0 - pred2[i];
    }
    const PanopticResult a = panoptic_quality(pred, gt);
    const PanopticResult b = panoptic_quality(pred2, gt);
    CHECK(a.pq == doctest::Approx(b.pq).epsilon(1e-12));
    CHECK(a.sq == doctest::Approx(b.sq).epsilon(1e-12));
    CHECK(a.rq == doctest::Approx(b.rq).epsilon(1e-12));
  }
}
