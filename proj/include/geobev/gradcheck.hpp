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
#ifndef GEOBEV_GRADCHECK_HPP_
#define GEOBEV_GRADCHECK_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace geobev {

struct GradcheckOptions {
  std::uint64_t seed = 1234;
  // Flips the sign of one analytic gradient so the checker can prove it
  // detects mismatches.
  bool inject_fault = false;
};

struct GradcheckComponent {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 1e-5;
  bool pass = false;
};

struct GradcheckReport {
  std::vector<GradcheckComponent> components;
  bool ok = false;
  double seconds = 0.0;

  std::string text() const;
};

// Runs every analytic-vs-central-difference suite on micro shapes: conv2d,
// convgru_cell, bptt, lift_splat, encoder, loss, geo_mask, conv3d and the
// end-to-end micro model.
GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace geobev

#endif  // GEOBEV_GRADCHECK_HPP_
