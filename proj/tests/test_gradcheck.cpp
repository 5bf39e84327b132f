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
#include <set>
#include <string>

#include "doctest.h"
#include "geobev/gradcheck.hpp"

using namespace geobev;

TEST_CASE("gradcheck passes and covers the required components") {
  GradcheckOptions opt;
  const GradcheckReport report = run_gradcheck(opt);
  CHECK(report.ok);
  std::set<std::string> names;
  for (const GradcheckComponent& c : report.components) {
    names.insert(c.name);
    CHECK(c.pass);
    CHECK(c.max_rel_err <= c.tolerance);
  }
  for (const char* required : {"conv2d", "convgru_cell", "bptt", "lift_splat",
                               "encoder", "loss", "end_to_end"}) {
    CHECK(names.count(required) == 1);
  }
  const std::string text = report.text();
  CHECK(text.find("conv2d") != std::string::npos);
  CHECK(text.find("gradcheck ok") != std::string::npos);
}

TEST_CASE("an injected sign flip is detected") {
  GradcheckOptions opt;
  opt.inject_fault = true;
  const GradcheckReport report = run_gradcheck(opt);
  CHECK_FALSE(report.ok);
  bool conv2d_failed = false;
  for (const GradcheckComponent& c : report.components) {
    if (c.name == "conv2d") conv2d_failed = !c.pass;
  }
  CHECK(conv2d_failed);
}
