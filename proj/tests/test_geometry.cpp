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
#include "geobev/geometry.hpp"
#include "geobev/rng.hpp"
#include "geobev/world.hpp"

using namespace geobev;

namespace {

constexpr double kPi = 3.14159265358979323846;

Camera identity_camera() {
  Camera c;
  c.name = "ident";
  c.intrinsics = Mat3::identity();
  c.rotation = Mat3::identity();
  c.translation = {0.0, 0.0, 0.0};
  return c;
}

}  // namespace

TEST_CASE("unproject_pixel") {
  SUBCASE("identity intrinsics keep the ray on the axis") {
    const Vec3 p = unproject_pixel(0, 0, 2.0, Mat3::identity());
    CHECK(p.x == 0.0);
    CHECK(p.y == 0.0);
    CHECK(p.z == 2.0);
  }
  SUBCASE("pinhole scaling x = (u - cx) d / f") {
    Mat3 k = Mat3::identity();
    k.at(0, 0) = 2.0;
    k.at(1, 1) = 2.0;
    const Vec3 p = unproject_pixel(1, 1, 4.0, k);
    CHECK(p.x == doctest::Approx(2.0));
    CHECK(p.y == doctest::Approx(2.0));
    CHECK(p.z == doctest::Approx(4.0));
  }
  SUBCASE("principal point maps to the optical axis") {
    Mat3 k = Mat3::identity();
    k.at(0, 0) = 50.0;
    k.at(1, 1) = 60.0;
    k.at(0, 2) = 11.0;
    k.at(1, 2) = 7.0;
    const Vec3 p = unproject_pixel(11.0, 7.0, 3.5, k);
    CHECK(p.x == doctest::Approx(0.0));
    CHECK(p.y == doctest::Approx(0.0));
    CHECK(p.z == doctest::Approx(3.5));
  }
  SUBCASE("non-positive depth is rejected") {
    CHECK_THROWS_AS(unproject_pixel(0, 0, 0.0, Mat3::identity()), Error);
    CHECK_THROWS_AS(unproject_pixel(0, 0, -1.0, Mat3::identity()), Error);
  }
}

TEST_CASE("unproject/project round trip recovers pixels within 1e-9") {
  SeededRng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    Mat3 k = Mat3::identity();
    k.at(0, 0) = rng.uniform(20.0, 200.0);
    k.at(1, 1) = rng.uniform(20.0, 200.0);
    k.at(0, 1) = rng.uniform(-0.5, 0.5);  // small skew
    k.at(0, 2) = rng.uniform(-50.0, 50.0);
    k.at(1, 2) = rng.uniform(-50.0, 50.0);
    const double u = rng.uniform(-100.0, 100.0);
    const double v = rng.uniform(-100.0, 100.0);
    const double d = rng.uniform(0.1, 80.0);
    const Vec3 p = unproject_pixel(u, v, d, k);
    CHECK(p.z == d);
    const auto [pu, pv] = project_to_pixel(p, k);
    CHECK(std::abs(pu - u) < 1e-9);
    CHECK(std::abs(pv - v) < 1e-9);
  }
}

TEST_CASE("cam_to_ego") {
  SUBCASE("identity transform") {
    const Vec3 p = cam_to_ego({1, 2, 3}, Mat3::identity(), {0, 0, 0});
    CHECK(p.x == 1.0);
    CHECK(p.y == 2.0);
    CHECK(p.z == 3.0);
  }
  SUBCASE("pure translation") {
    const Vec3 p = cam_to_ego({0, 0, 2}, Mat3::identity(), {1, 0, 0});
    CHECK(p.x == 1.0);
    CHECK(p.y == 0.0);
    CHECK(p.z == 2.0);
  }
  SUBCASE("rot_z(90 deg) turns x into y") {
    const Vec3 p = cam_to_ego({1, 0, 0}, Mat3::rot_z(kPi / 2.0), {0, 0, 0});
    CHECK(std::abs(p.x - 0.0) < 1e-12);
    CHECK(std::abs(p.y - 1.0) < 1e-12);
    CHECK(std::abs(p.z - 0.0) < 1e-12);
  }
  SUBCASE("rigid transforms preserve pairwise distance") {
    SeededRng rng(22);
    for (int trial = 0; trial < 30; ++trial) {
      const Mat3 r = Mat3::rot_z(rng.uniform(0.0, 2.0 * kPi));
      const Vec3 t{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
      const Vec3 a{rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10)};
      const Vec3 b{rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10)};
      const double before = norm(a - b);
      const double after = norm(cam_to_ego(a, r, t) - cam_to_ego(b, r, t));
      CHECK(std::abs(before - after) < 1e-9);
    }
  }
}

TEST_CASE("camera validation") {
  Camera c = identity_camera();
  CHECK_NOTHROW(c.validate());
  SUBCASE("lower-triangular K is rejected") {
    c.intrinsics.at(1, 0) = 0.5;
    CHECK_THROWS_AS(c.validate(), Error);
  }
  SUBCASE("non-orthonormal R is rejected") {
    c.rotation.at(0, 0) = 1.5;
    CHECK_THROWS_AS(c.validate(), Error);
  }
  SUBCASE("reflection (det -1) is rejected") {
    c.rotation = Mat3::identity();
    c.rotation.at(0, 0) = -1.0;
    CHECK_THROWS_AS(c.validate(), Error);
  }
}

TEST_CASE("BevGridSpec enforces exact division") {
  const BevGridSpec g = BevGridSpec::create(100.0, 100.0, 0.5);
  CHECK(g.rows == 200);
  CHECK(g.cols == 200);
  CHECK_THROWS_AS(BevGridSpec::create(100.0, 100.0, 0.3), Error);
  CHECK_THROWS_AS(BevGridSpec::create(0.0, 100.0, 0.5), Error);
}

TEST_CASE("ego_to_bev_index conventions") {
  const BevGridSpec g = BevGridSpec::create(100.0, 100.0, 0.5);
  SUBCASE("center lands at (100, 100)") {
    const auto cell = ego_to_bev_index({0, 0, 3.0}, g);
    REQUIRE(cell.has_value());
    CHECK(cell->first == 100);
    CHECK(cell->second == 100);
  }
  SUBCASE("half-open boundaries") {
    const auto lo = ego_to_bev_index({-50, -50, 0}, g);
    REQUIRE(lo.has_value());
    CHECK(lo->first == 0);
    CHECK(lo->second == 0);
    CHECK_FALSE(ego_to_bev_index({50, 50, 0}, g).has_value());
  }
  SUBCASE("floor arithmetic example") {
    const auto cell = ego_to_bev_index({24.9, -10.2, 0}, g);
    REQUIRE(cell.has_value());
    CHECK(cell->first == 149);
    CHECK(cell->second == 79);
  }
  SUBCASE("translation by k cells shifts the row by k") {
    SeededRng rng(23);
    for (int trial = 0; trial < 40; ++trial) {
      const Vec3 p{rng.uniform(-45, 45), rng.uniform(-45, 45), 0.0};
      const int k = rng.uniform_int(-5, 5);
      const auto base = ego_to_bev_index(p, g);
      const auto moved =
          ego_to_bev_index({p.x + k * g.resolution, p.y, 0.0}, g);
      REQUIRE(base.has_value());
      REQUIRE(moved.has_value());
      CHECK(moved->first == base->first + k);
      CHECK(moved->second == base->second);
    }
  }
}

TEST_CASE("build_frustum") {
  Camera cam = identity_camera();
  SUBCASE("point count is h * w * D") {
    const CameraFrustum f = build_frustum(cam, 2, 2, {1.0, 2.0, 3.0});
    CHECK(f.points.size() == 12);
  }
  SUBCASE("identity camera preserves depths as z") {
    const CameraFrustum f = build_frustum(cam, 2, 2, {1.0, 2.0});
    for (const FrustumPoint& p : f.points) {
      CHECK((p.ego.z == 1.0 || p.ego.z == 2.0));
    }
  }
  SUBCASE("every point sits at least min-depth from the camera") {
    GenConfig cfg;
    const auto rig = default_rig(cfg);
    for (const Camera& c : rig) {
      const CameraFrustum f = build_frustum(c, 4, 4, {1.0, 5.0, 9.0}, 8);
      for (const FrustumPoint& p : f.points) {
        CHECK(norm(p.ego - c.translation) >= 1.0 - 1e-9);
      }
    }
  }
  SUBCASE("bad depth bins are rejected") {
    CHECK_THROWS_AS(build_frustum(cam, 2, 2, {}), Error);
    CHECK_THROWS_AS(build_frustum(cam, 2, 2, {2.0, 1.0}), Error);
    CHECK_THROWS_AS(build_frustum(cam, 2, 2, {-1.0, 1.0}), Error);
  }
}

TEST_CASE("rig file round trip and validation") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "geobev_rig_test";
  fs::create_directories(dir);
  const std::string path = (dir / "rig.txt").string();

  GenConfig cfg;
  const auto rig = default_rig(cfg);
  save_rig(rig, path);
  const auto back = load_rig(path);
  REQUIRE(back.size() == rig.size());
  for (std::size_t i = 0; i < rig.size(); ++i) {
    CHECK(back[i].name == rig[i].name);
    for (int j = 0; j < 9; ++j) {
      CHECK(back[i].intrinsics.m[j] == rig[i].intrinsics.m[j]);
      CHECK(back[i].rotation.m[j] == rig[i].rotation.m[j]);
    }
    CHECK(back[i].translation.z == rig[i].translation.z);
  }

  SUBCASE("unknown tags are config errors") {
    std::ofstream out(dir / "bad.txt");
    out << "camera a\nK 1 0 0 0 1 0 0 0 1\nR 1 0 0 0 1 0 0 0 1\nt 0 0 0\n"
        << "banana 1 2 3\n";
    out.close();
    CHECK_THROWS_AS(load_rig((dir / "bad.txt").string()), Error);
  }
  SUBCASE("comments and blank lines are ignored") {
    std::ofstream out(dir / "ok.txt");
    out << "# a rig\n\ncamera a  # front\nK 1 0 0 0 1 0 0 0 1\n"
        << "R 1 0 0 0 1 0 0 0 1\nt 0 0 1.5\n";
    out.close();
    const auto r = load_rig((dir / "ok.txt").string());
    CHECK(r.size() == 1);
    CHECK(r[0].translation.z == 1.5);
  }
  SUBCASE("missing K/R/t is a config error") {
    std::ofstream out(dir / "missing.txt");
    out << "camera a\nK 1 0 0 0 1 0 0 0 1\nt 0 0 0\n";
    out.close();
    CHECK_THROWS_AS(load_rig((dir / "missing.txt").string()), Error);
  }
}
