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
#ifndef GEOBEV_WORLD_HPP_
#define GEOBEV_WORLD_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "geobev/geometry.hpp"
#include "geobev/tensor.hpp"

namespace geobev {

// Deterministic generator of multi-camera scene sequences with BEV ground
// truth; the desk-scale stand-in for a real driving dataset.

struct GenConfig {
  int timesteps = 10;       // frames per scene
  int window = 5;           // temporal window length of exported samples
  double dt = 0.5;          // seconds between frames
  int img_h = 96;           // camera image height (stride-8 divisible)
  int img_w = 160;
  int cameras = 6;          // evenly spaced yaw ring
  double hfov_deg = 90.0;
  double cam_height = 1.5;  // meters above ground
  int vehicles_min = 2;
  int vehicles_max = 4;
  double vehicle_len_min = 3.6;   // footprint bounds, meters
  double vehicle_len_max = 4.6;
  double vehicle_wid_min = 1.7;
  double vehicle_wid_max = 2.1;
  double speed_max = 4.0;         // m/s; 0 makes every vehicle static
  double moving_fraction = 0.5;   // chance that vehicles beyond the first
                                  // two move (one mover, one parker always)
  double spawn_r_min = 4.0;       // spawn annulus, meters
  double spawn_r_max = 18.0;
  double grid_extent_x = 100.0;   // BEV ground-truth raster
  double grid_extent_y = 100.0;
  double grid_resolution = 0.5;
  double pixel_noise = 0.0;       // stddev of per-pixel noise at export
  double camera_dropout = 0.0;    // per-(frame,camera) blackout probability

  static GenConfig from_file(const std::string& path);  // "" gives defaults
  void validate() const;
  BevGridSpec grid() const;
};

// Box-shaped vehicle on the ground plane with a constant-velocity track.
struct Vehicle {
  double length = 4.0, width = 2.0, height = 1.6;
  double x0 = 0.0, y0 = 0.0;  // pose at t = 0
  double heading = 0.0;        // radians, direction of travel
  double speed = 0.0;          // m/s

  // Exact constant-velocity pose: p(t) = p0 + speed * t * dt * dir.
  void pose_at(int t, double dt, double& x, double& y) const;
};

struct Scene {
  std::vector<Vehicle> vehicles;
  std::vector<Camera> rig;
  int timesteps = 0;
  double dt = 0.5;
};

// The NuScenes-like ring: `cameras` pinhole cameras at 360/N degree spacing,
// identical intrinsics, mounted at the ego origin at cam_height.
std::vector<Camera> default_rig(const GenConfig& cfg);

// Deterministic per seed. Contains at least one moving and one static
// vehicle when speed_max > 0 and two or more vehicles fit.
Scene generate_scene(std::uint64_t seed, const GenConfig& cfg);

// Flat-shaded box rasterization with painter's-algorithm depth ordering over
// a constant ground/sky background. Returns [3, img_h, img_w] with
// zero-centered values in roughly [-0.75, 0.75].
Tensor render_camera_view(const Scene& scene, int timestep,
                          const Camera& camera, int img_h, int img_w);

// Cell gets the vehicle class iff its center lies inside a footprint.
Tensor rasterize_bev_gt(const Scene& scene, int timestep,
                        const BevGridSpec& grid);

// Same rasterization but with per-vehicle instance ids (index + 1).
Tensor rasterize_bev_instances(const Scene& scene, int timestep,
                               const BevGridSpec& grid);

// Writes manifest.txt, rig.txt, meta.txt and per-scene directories of
// img_<t>_<cam>.gtns / label_<t>.gtns / inst_<t>.gtns files. Pixel noise and
// camera dropout are applied here, seeded per (scene, frame, camera).
// Returns the number of manifest samples.
int export_dataset(const std::vector<Scene>& scenes, const GenConfig& cfg,
                   std::uint64_t seed, const std::string& out_dir);

}  // namespace geobev

#endif  // GEOBEV_WORLD_HPP_
