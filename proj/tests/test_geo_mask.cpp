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
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "geobev/error.hpp"
#include "geobev/geo_mask.hpp"
#include "geobev/rng.hpp"
#include "geobev/world.hpp"

using namespace geobev;

namespace {

constexpr double kPi = 3.14159265358979323846;

Tensor rand_tensor(const std::vector<int>& shape, SeededRng& rng) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

Camera forward_camera(double fov_deg, double f_px) {
  Camera cam;
  cam.name = "fwd";
  cam.intrinsics = Mat3::identity();
  cam.intrinsics.at(0, 0) = f_px;
  cam.intrinsics.at(1, 1) = f_px;
  const double half_w = f_px * std::tan(fov_deg * kPi / 180.0 / 2.0);
  cam.intrinsics.at(0, 2) = half_w;
  cam.intrinsics.at(1, 2) = half_w;
  Mat3 r;
  r.at(0, 2) = 1.0;
  r.at(1, 0) = -1.0;
  r.at(2, 1) = -1.0;
  cam.rotation = r;
  cam.translation = {0.0, 0.0, 0.0};
  cam.validate();
  return cam;
}

}  // namespace

TEST_CASE("build_geo_mask basics") {
  const BevGridSpec grid = BevGridSpec::create(10.0, 10.0, 1.0);
  SUBCASE("empty cloud marks everything epsilon") {
    const GeoMask m = build_geo_mask(FrustumCloud{}, grid, 0.1);
    for (std::size_t i = 0; i < m.weights.size(); ++i) {
      CHECK(m.weights[i] == 0.1);
    }
  }
  SUBCASE("values are exactly epsilon or one") {
    GenConfig cfg;
    cfg.grid_extent_x = cfg.grid_extent_y = 10.0;
    cfg.grid_resolution = 1.0;
    const auto rig = default_rig(cfg);
    const FrustumCloud cloud =
        build_frustum_cloud(rig, 4, 10, {1.0, 2.0, 3.0, 4.0}, 8);
    const GeoMask m = build_geo_mask(cloud, grid, 0.1);
    bool any_valid = false, any_invalid = false;
    for (std::size_t i = 0; i < m.weights.size(); ++i) {
      CHECK((m.weights[i] == 0.1 || m.weights[i] == 1.0));
      any_valid = any_valid || m.weights[i] == 1.0;
      any_invalid = any_invalid || m.weights[i] == 0.1;
    }
    CHECK(any_valid);
    CHECK(any_invalid);
  }
  SUBCASE("epsilon outside (0,1] is rejected") {
    CHECK_THROWS_AS(build_geo_mask(FrustumCloud{}, grid, 0.0), Error);
    CHECK_THROWS_AS(build_geo_mask(FrustumCloud{}, grid, 1.5), Error);
  }
}

TEST_CASE("single forward camera marks only the forward wedge") {
  // 90-degree FOV camera at the origin looking along +x: valid cells must
  // satisfy x > 0 and |y| <= x (wedge membership oracle), and nothing behind
  // the ego may be valid.
  const BevGridSpec grid = BevGridSpec::create(16.0, 16.0, 1.0);
  const Camera cam = forward_camera(90.0, 50.0);
  // dense sampling so the wedge interior is covered
  std::vector<double> bins;
  for (double d = 0.8; d <= 7.8; d += 0.35) bins.push_back(d);
  const CameraFrustum f = build_frustum(cam, 3, 101, bins, 1);
  const GeoMask m = build_geo_mask(FrustumCloud{{f}}, grid, 0.1);

  int valid_cells = 0;
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const double x = -8.0 + (r + 0.5);
      const double y = -8.0 + (c + 0.5);
      if (m.weights.at(r, c) == 1.0) {
        ++valid_cells;
        CHECK(x > 0.0);
        CHECK(std::abs(y) <= x * 1.05 + 0.75);  // wedge plus half-cell slack
      }
      if (x < -0.5) CHECK(m.weights.at(r, c) == 0.1);  // nothing behind
    }
  }
  CHECK(valid_cells > 10);
}

TEST_CASE("mask rebuild is bit-identical and monotone under added points") {
  GenConfig cfg;
  cfg.grid_extent_x = cfg.grid_extent_y = 20.0;
  cfg.grid_resolution = 0.5;
  const BevGridSpec grid = cfg.grid();
  const auto rig = default_rig(cfg);
  const FrustumCloud cloud = build_frustum_cloud(rig, 4, 10, {1, 3, 5, 7, 9}, 8);
  const GeoMask a = build_geo_mask(cloud, grid, 0.1);
  const GeoMask b = build_geo_mask(cloud, grid, 0.1);
  for (std::size_t i = 0; i < a.weights.size(); ++i) {
    CHECK(a.weights[i] == b.weights[i]);
  }
  // subset of cameras -> superset cloud never flips 1 to epsilon
  FrustumCloud partial;
  partial.cameras.assign(cloud.cameras.begin(), cloud.cameras.begin() + 3);
  const GeoMask sub = build_geo_mask(partial, grid, 0.1);
  for (std::size_t i = 0; i < sub.weights.size(); ++i) {
    if (sub.weights[i] == 1.0) CHECK(a.weights[i] == 1.0);
  }
}

TEST_CASE("apply_geo_mask") {
  SeededRng rng(41);
  const Tensor features = rand_tensor({3, 5, 5}, rng);
  SUBCASE("all-ones mask is the identity bit-exactly") {
    GeoMask m{Tensor({5, 5}, 1.0), 1.0};
    const Tensor out = apply_geo_mask(features, m);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == features[i]);
  }
  SUBCASE("all-epsilon mask scales uniformly") {
    GeoMask m{Tensor({5, 5}, 0.1), 0.1};
    const Tensor out = apply_geo_mask(features, m);
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out[i] == doctest::Approx(0.1 * features[i]));
    }
  }
  SUBCASE("mixed mask scales only invalid cells") {
    GeoMask m{Tensor({5, 5}, 0.1), 0.1};
    m.weights.at(2, 3) = 1.0;
    const Tensor out = apply_geo_mask(features, m);
    for (int c = 0; c < 3; ++c) {
      CHECK(out.at(c, 2, 3) == features.at(c, 2, 3));
      CHECK(out.at(c, 0, 0) == doctest::Approx(0.1 * features.at(c, 0, 0)));
    }
  }
  SUBCASE("backward is the mask-scaled cotangent, matching FD at 1e-6") {
    GeoMask m{Tensor({5, 5}, 0.1), 0.1};
    for (std::size_t i = 0; i < m.weights.size(); i += 2) m.weights[i] = 1.0;
    const Tensor cotangent = rand_tensor({3, 5, 5}, rng);
    const Tensor analytic = apply_geo_mask_backward(cotangent, m);
    const Tensor fd = finite_diff_grad(
        [&](const Tensor& x) {
          const Tensor out = apply_geo_mask(x, m);
          double acc = 0.0;
          for (std::size_t i = 0; i < out.size(); ++i) acc += cotangent[i] * out[i];
          return acc;
        },
        features);
    for (std::size_t i = 0; i < fd.size(); ++i) {
      CHECK(analytic[i] == doctest::Approx(fd[i]).epsilon(1e-6));
    }
  }
  SUBCASE("shape mismatch is an error") {
    GeoMask m{Tensor({4, 5}, 1.0), 1.0};
    CHECK_THROWS_AS(apply_geo_mask(features, m), Error);
  }
}

TEST_CASE("mask PGM uses 255 for valid and 26 for epsilon 0.1") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "geobev_mask_test";
  fs::create_directories(dir);
  GeoMask m{Tensor({2, 3}, 0.1), 0.1};
  m.weights.at(0, 1) = 1.0;
  const std::string path = (dir / "m.pgm").string();
  save_mask_pgm(m, path);
  std::ifstream in(path, std::ios::binary);
  std::string header;
  std::getline(in, header);
  CHECK(header == "P5");
  std::string dims, maxval;
  std::getline(in, dims);
  std::getline(in, maxval);
  CHECK(dims == "3 2");
  CHECK(maxval == "255");
  std::string payload((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  REQUIRE(payload.size() == 6);
  CHECK(static_cast<unsigned char>(payload[0]) == 26);
  CHECK(static_cast<unsigned char>(payload[1]) == 255);
  CHECK(static_cast<unsigned char>(payload[2]) == 26);
}
