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
#include "geobev/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "geobev/config.hpp"
#include "geobev/error.hpp"
#include "geobev/rng.hpp"

namespace geobev {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Ego frame: x forward, y left, z up. Camera frame: x right, y down,
// z forward. A yaw-0 camera looks along +x ego.
Mat3 camera_rotation(double yaw) {
  Mat3 base;  // columns are the camera axes expressed in the ego frame
  base.at(0, 0) = 0.0;  base.at(0, 1) = 0.0;  base.at(0, 2) = 1.0;
  base.at(1, 0) = -1.0; base.at(1, 1) = 0.0;  base.at(1, 2) = 0.0;
  base.at(2, 0) = 0.0;  base.at(2, 1) = -1.0; base.at(2, 2) = 0.0;
  return Mat3::rot_z(yaw).matmul(base);
}

// Zero-centered colors: near-constant background stays close to 0 so first
// conv layers see object contrast rather than a DC offset.
struct Rgb {
  double r, g, b;
};

constexpr Rgb kGround{-0.18, -0.20, -0.22};
constexpr Rgb kSky{0.10, 0.18, 0.30};

const Rgb kPalette[8] = {
    {0.70, -0.45, -0.50}, {-0.50, -0.30, 0.70}, {0.75, 0.55, -0.50},
    {-0.45, 0.65, -0.35}, {0.60, -0.50, 0.60},  {0.70, 0.25, -0.45},
    {-0.50, 0.55, 0.55},  {0.45, 0.45, 0.40}};

double half_diag(const Vehicle& v) {
  return 0.5 * std::sqrt(v.length * v.length + v.width * v.width);
}

}  // namespace

GenConfig GenConfig::from_file(const std::string& path) {
  GenConfig cfg;
  if (path.empty()) {
    cfg.validate();
    return cfg;
  }
  KeyValueFile kv = KeyValueFile::parse_file(path);
  cfg.timesteps = kv.take_int("timesteps", cfg.timesteps);
  cfg.window = kv.take_int("window", cfg.window);
  cfg.dt = kv.take_real("dt", cfg.dt);
  cfg.img_h = kv.take_int("img_h", cfg.img_h);
  cfg.img_w = kv.take_int("img_w", cfg.img_w);
  cfg.cameras = kv.take_int("cameras", cfg.cameras);
  cfg.hfov_deg = kv.take_real("hfov_deg", cfg.hfov_deg);
  cfg.cam_height = kv.take_real("cam_height", cfg.cam_height);
  cfg.vehicles_min = kv.take_int("vehicles_min", cfg.vehicles_min);
  cfg.vehicles_max = kv.take_int("vehicles_max", cfg.vehicles_max);
  cfg.vehicle_len_min = kv.take_real("vehicle_len_min", cfg.vehicle_len_min);
  cfg.vehicle_len_max = kv.take_real("vehicle_len_max", cfg.vehicle_len_max);
  cfg.vehicle_wid_min = kv.take_real("vehicle_wid_min", cfg.vehicle_wid_min);
  cfg.vehicle_wid_max = kv.take_real("vehicle_wid_max", cfg.vehicle_wid_max);
  cfg.speed_max = kv.take_real("speed_max", cfg.speed_max);
  cfg.moving_fraction = kv.take_real("moving_fraction", cfg.moving_fraction);
  cfg.spawn_r_min = kv.take_real("spawn_r_min", cfg.spawn_r_min);
  cfg.spawn_r_max = kv.take_real("spawn_r_max", cfg.spawn_r_max);
  cfg.grid_extent_x = kv.take_real("grid_extent_x", cfg.grid_extent_x);
  cfg.grid_extent_y = kv.take_real("grid_extent_y", cfg.grid_extent_y);
  cfg.grid_resolution = kv.take_real("grid_resolution", cfg.grid_resolution);
  cfg.pixel_noise = kv.take_real("pixel_noise", cfg.pixel_noise);
  cfg.camera_dropout = kv.take_real("camera_dropout", cfg.camera_dropout);
  kv.finish();
  cfg.validate();
  return cfg;
}

void GenConfig::validate() const {
  if (timesteps < 1) throw_config("gen config: timesteps must be >= 1");
  if (window < 1 || window > timesteps) {
    throw_config("gen config: window must lie in [1, timesteps]");
  }
  if (dt <= 0.0) throw_config("gen config: dt must be positive");
  if (img_h < 8 || img_w < 8 || img_h % 8 != 0 || img_w % 8 != 0) {
    throw_config("gen config: img dims must be positive multiples of 8");
  }
  if (cameras < 1) throw_config("gen config: cameras must be >= 1");
  if (hfov_deg <= 10.0 || hfov_deg >= 170.0) {
    throw_config("gen config: hfov_deg must lie in (10, 170)");
  }
  if (vehicles_min < 0 || vehicles_max < vehicles_min) {
    throw_config("gen config: invalid vehicle count bounds");
  }
  if (vehicle_len_min <= 0.0 || vehicle_len_max < vehicle_len_min ||
      vehicle_wid_min <= 0.0 || vehicle_wid_max < vehicle_wid_min) {
    throw_config("gen config: invalid vehicle footprint bounds");
  }
  if (speed_max < 0.0) throw_config("gen config: speed_max must be >= 0");
  if (moving_fraction < 0.0 || moving_fraction > 1.0) {
    throw_config("gen config: moving_fraction must lie in [0, 1]");
  }
  if (spawn_r_min <= 0.0 || spawn_r_max <= spawn_r_min) {
    throw_config("gen config: spawn annulus must satisfy 0 < r_min < r_max");
  }
  if (camera_dropout < 0.0 || camera_dropout >= 1.0) {
    throw_config("gen config: camera_dropout must lie in [0, 1)");
  }
  if (pixel_noise < 0.0) throw_config("gen config: pixel_noise must be >= 0");
  grid();  // validates divisibility
}

BevGridSpec GenConfig::grid() const {
  return BevGridSpec::create(grid_extent_x, grid_extent_y, grid_resolution);
}

void Vehicle::pose_at(int t, double dt, double& x, double& y) const {
  const double travelled = speed * dt * static_cast<double>(t);
  x = x0 + travelled * std::cos(heading);
  y = y0 + travelled * std::sin(heading);
}

std::vector<Camera> default_rig(const GenConfig& cfg) {
  const double f =
      (cfg.img_w / 2.0) / std::tan(cfg.hfov_deg * kPi / 180.0 / 2.0);
  std::vector<Camera> rig;
  rig.reserve(static_cast<std::size_t>(cfg.cameras));
  for (int i = 0; i < cfg.cameras; ++i) {
    Camera cam;
    cam.name = "cam" + std::to_string(i);
    cam.intrinsics = Mat3::identity();
    cam.intrinsics.at(0, 0) = f;
    cam.intrinsics.at(1, 1) = f;
    cam.intrinsics.at(0, 2) = cfg.img_w / 2.0;
    cam.intrinsics.at(1, 2) = cfg.img_h / 2.0;
    cam.rotation = camera_rotation(2.0 * kPi * i / cfg.cameras);
    cam.translation = {0.0, 0.0, cfg.cam_height};
    cam.validate();
    rig.push_back(cam);
  }
  return rig;
}

Scene generate_scene(std::uint64_t seed, const GenConfig& cfg) {
  cfg.validate();
  SeededRng rng(SeededRng::mix(seed, 0x5ce8e));
  Scene scene;
  scene.rig = default_rig(cfg);
  scene.timesteps = cfg.timesteps;
  scene.dt = cfg.dt;
  const int count = cfg.vehicles_max == cfg.vehicles_min
                        ? cfg.vehicles_min
                        : rng.uniform_int(cfg.vehicles_min, cfg.vehicles_max);
  for (int i = 0; i < count; ++i) {
    Vehicle v;
    v.length = rng.uniform(cfg.vehicle_len_min, cfg.vehicle_len_max);
    v.width = rng.uniform(cfg.vehicle_wid_min, cfg.vehicle_wid_max);
    v.height = rng.uniform(1.4, 1.9);
    const bool moving =
        cfg.speed_max > 0.0 &&
        (i == 0 || (i != 1 && rng.uniform() < cfg.moving_fraction));
    bool placed = false;
    for (int attempt = 0; attempt < 500 && !placed; ++attempt) {
      const double margin = half_diag(v);
      const double lo = cfg.spawn_r_min + margin;
      const double hi = cfg.spawn_r_max - margin;
      if (lo >= hi) break;
      const double radius = rng.uniform(lo, hi);
      const double azimuth = rng.uniform(0.0, 2.0 * kPi);
      v.x0 = radius * std::cos(azimuth);
      v.y0 = radius * std::sin(azimuth);
      v.heading = rng.uniform(0.0, 2.0 * kPi);
      v.speed = moving ? rng.uniform(0.5 * cfg.speed_max, cfg.speed_max) : 0.0;
      // The whole track has to stay inside the annulus and clear of the
      // vehicles already placed.
      bool ok = true;
      for (int t = 0; t < cfg.timesteps && ok; ++t) {
        double x, y;
        v.pose_at(t, cfg.dt, x, y);
        const double r = std::sqrt(x * x + y * y);
        if (r < lo || r > hi) ok = false;
        for (const Vehicle& other : scene.vehicles) {
          double ox, oy;
          other.pose_at(t, cfg.dt, ox, oy);
          const double d = std::hypot(x - ox, y - oy);
          if (d < half_diag(v) + half_diag(other) + 0.5) {
            ok = false;
            break;
          }
        }
      }
      placed = ok;
    }
    if (!placed) {
      throw_config("generate_scene: infeasible spawn config (vehicle " +
                   std::to_string(i) + " of " + std::to_string(count) +
                   " cannot be placed)");
    }
    scene.vehicles.push_back(v);
  }
  return scene;
}

namespace {

struct Tri {
  double u[3], v[3];
  Rgb color;
  double depth;  // mean camera-frame z, for painter ordering
};

void corners_of(const Vehicle& veh, int t, double dt, Vec3 out[8]) {
  double x, y;
  veh.pose_at(t, dt, x, y);
  const double c = std::cos(veh.heading), s = std::sin(veh.heading);
  const double hl = veh.length / 2.0, hw = veh.width / 2.0;
  const double lx[4] = {hl, hl, -hl, -hl};
  const double ly[4] = {hw, -hw, -hw, hw};
  for (int i = 0; i < 4; ++i) {
    const double wx = x + c * lx[i] - s * ly[i];
    const double wy = y + s * lx[i] + c * ly[i];
    out[i] = {wx, wy, 0.0};
    out[i + 4] = {wx, wy, veh.height};
  }
}

// Quad faces as corner indices into the 8-corner box (bottom 0..3, top 4..7).
constexpr int kFaces[6][4] = {
    {4, 5, 6, 7},  // top
    {0, 1, 5, 4}, {1, 2, 6, 5}, {2, 3, 7, 6}, {3, 0, 4, 7},  // sides
    {0, 3, 2, 1},  // bottom
};
constexpr double kFaceShade[6] = {1.0, 0.78, 0.66, 0.72, 0.60, 0.4};

void rasterize_triangle(Tensor& img, const Tri& tri) {
  const int h = img.dim(1), w = img.dim(2);
  const double minu = std::min({tri.u[0], tri.u[1], tri.u[2]});
  const double maxu = std::max({tri.u[0], tri.u[1], tri.u[2]});
  const double minv = std::min({tri.v[0], tri.v[1], tri.v[2]});
  const double maxv = std::max({tri.v[0], tri.v[1], tri.v[2]});
  const int x0 = std::max(0, static_cast<int>(std::floor(minu)));
  const int x1 = std::min(w - 1, static_cast<int>(std::ceil(maxu)));
  const int y0 = std::max(0, static_cast<int>(std::floor(minv)));
  const int y1 = std::min(h - 1, static_cast<int>(std::ceil(maxv)));
  const double ax = tri.u[0], ay = tri.v[0];
  const double bx = tri.u[1], by = tri.v[1];
  const double cx = tri.u[2], cy = tri.v[2];
  const double area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
  if (area == 0.0) return;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double px = x, py = y;
      const double w0 = (bx - px) * (cy - py) - (by - py) * (cx - px);
      const double w1 = (cx - px) * (ay - py) - (cy - py) * (ax - px);
      const double w2 = (ax - px) * (by - py) - (ay - py) * (bx - px);
      const bool inside = area > 0.0 ? (w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0)
                                     : (w0 <= 0.0 && w1 <= 0.0 && w2 <= 0.0);
      if (!inside) continue;
      const std::size_t at = static_cast<std::size_t>(y) * w + x;
      img[at] = tri.color.r;
      img[plane + at] = tri.color.g;
      img[2 * plane + at] = tri.color.b;
    }
  }
}

}  // namespace

Tensor render_camera_view(const Scene& scene, int timestep,
                          const Camera& camera, int img_h, int img_w) {
  if (timestep < 0 || timestep >= scene.timesteps) {
    throw_config("render_camera_view: timestep out of range");
  }
  Tensor img({3, img_h, img_w}, 0.0);
  const Mat3 rot_t = camera.rotation.transposed();
  const std::size_t plane = static_cast<std::size_t>(img_h) * img_w;
  // Background: a pixel whose ray leaves the camera pointing below the
  // horizon sees ground, otherwise sky.
  for (int y = 0; y < img_h; ++y) {
    for (int x = 0; x < img_w; ++x) {
      const Vec3 dir_cam = unproject_pixel(x, y, 1.0, camera.intrinsics);
      const Vec3 dir_ego = camera.rotation.apply(dir_cam);
      const Rgb& c = dir_ego.z < -1e-12 ? kGround : kSky;
      const std::size_t at = static_cast<std::size_t>(y) * img_w + x;
      img[at] = c.r;
      img[plane + at] = c.g;
      img[2 * plane + at] = c.b;
    }
  }
  // Painter's algorithm: far vehicles first, then per-vehicle far faces
  // first. A vehicle is drawn only where corners are in front of the camera.
  constexpr double kNear = 0.05;
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < scene.vehicles.size(); ++i) {
    double x, y;
    scene.vehicles[i].pose_at(timestep, scene.dt, x, y);
    const Vec3 center_cam =
        rot_t.apply(Vec3{x, y, scene.vehicles[i].height / 2.0} -
                    camera.translation);
    order.push_back({center_cam.z, i});
  }
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    return a.first > b.first;  // descending depth
  });
  for (const auto& [depth, vi] : order) {
    (void)depth;
    const Vehicle& veh = scene.vehicles[vi];
    Vec3 corners_ego[8];
    corners_of(veh, timestep, scene.dt, corners_ego);
    Vec3 corners_cam[8];
    for (int i = 0; i < 8; ++i) {
      corners_cam[i] = rot_t.apply(corners_ego[i] - camera.translation);
    }
    const Rgb base = kPalette[vi % 8];
    std::vector<std::pair<double, int>> face_order;
    for (int f = 0; f < 6; ++f) {
      double zsum = 0.0;
      for (int j = 0; j < 4; ++j) zsum += corners_cam[kFaces[f][j]].z;
      face_order.push_back({zsum / 4.0, f});
    }
    std::sort(face_order.begin(), face_order.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [fz, f] : face_order) {
      (void)fz;
      bool in_front = true;
      for (int j = 0; j < 4; ++j) {
        if (corners_cam[kFaces[f][j]].z <= kNear) in_front = false;
      }
      if (!in_front) continue;
      double u[4], v[4];
      for (int j = 0; j < 4; ++j) {
        auto uv = project_to_pixel(corners_cam[kFaces[f][j]], camera.intrinsics);
        u[j] = uv.first;
        v[j] = uv.second;
      }
      const Rgb shaded{base.r * kFaceShade[f], base.g * kFaceShade[f],
                       base.b * kFaceShade[f]};
      Tri t1{{u[0], u[1], u[2]}, {v[0], v[1], v[2]}, shaded, 0.0};
      Tri t2{{u[0], u[2], u[3]}, {v[0], v[2], v[3]}, shaded, 0.0};
      rasterize_triangle(img, t1);
      rasterize_triangle(img, t2);
    }
  }
  return img;
}

namespace {

Tensor rasterize_impl(const Scene& scene, int timestep, const BevGridSpec& grid,
                      bool instances) {
  if (timestep < 0 || timestep >= scene.timesteps) {
    throw_config("rasterize_bev_gt: timestep out of range");
  }
  Tensor out({grid.rows, grid.cols}, 0.0);
  struct Pose {
    double x, y, c, s, hl, hw;
  };
  std::vector<Pose> poses;
  poses.reserve(scene.vehicles.size());
  for (const Vehicle& v : scene.vehicles) {
    double x, y;
    v.pose_at(timestep, scene.dt, x, y);
    poses.push_back({x, y, std::cos(v.heading), std::sin(v.heading),
                     v.length / 2.0, v.width / 2.0});
  }
  for (int r = 0; r < grid.rows; ++r) {
    const double cx = -grid.extent_x / 2.0 + (r + 0.5) * grid.resolution;
    for (int c = 0; c < grid.cols; ++c) {
      const double cy = -grid.extent_y / 2.0 + (c + 0.5) * grid.resolution;
      for (std::size_t i = 0; i < poses.size(); ++i) {
        const Pose& p = poses[i];
        const double dx = cx - p.x, dy = cy - p.y;
        const double lx = p.c * dx + p.s * dy;
        const double ly = -p.s * dx + p.c * dy;
        if (std::abs(lx) <= p.hl && std::abs(ly) <= p.hw) {
          out.at(r, c) = instances ? static_cast<double>(i + 1) : 1.0;
          break;  // first vehicle in order wins
        }
      }
    }
  }
  return out;
}

}  // namespace

Tensor rasterize_bev_gt(const Scene& scene, int timestep,
                        const BevGridSpec& grid) {
  return rasterize_impl(scene, timestep, grid, false);
}

Tensor rasterize_bev_instances(const Scene& scene, int timestep,
                               const BevGridSpec& grid) {
  return rasterize_impl(scene, timestep, grid, true);
}

int export_dataset(const std::vector<Scene>& scenes, const GenConfig& cfg,
                   std::uint64_t seed, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw_io("cannot create dataset directory: " + out_dir);
  }
  {
    std::ofstream probe(fs::path(out_dir) / ".write_probe",
                        std::ios::trunc);
    if (!probe) throw_io("dataset directory is not writable: " + out_dir);
  }
  fs::remove(fs::path(out_dir) / ".write_probe", ec);

  const BevGridSpec grid = cfg.grid();
  std::ofstream manifest(fs::path(out_dir) / "manifest.txt", std::ios::trunc);
  if (!manifest) throw_io("cannot write manifest in " + out_dir);
  int samples = 0;
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const Scene& scene = scenes[si];
    char scene_name[32];
    std::snprintf(scene_name, sizeof(scene_name), "scene_%03zu", si);
    const fs::path scene_dir = fs::path(out_dir) / scene_name;
    fs::create_directories(scene_dir, ec);
    if (ec) throw_io("cannot create scene directory: " + scene_dir.string());
    for (int t = 0; t < scene.timesteps; ++t) {
      for (std::size_t ci = 0; ci < scene.rig.size(); ++ci) {
        Tensor img = render_camera_view(scene, t, scene.rig[ci], cfg.img_h,
                                        cfg.img_w);
        SeededRng rng(SeededRng::mix(
            SeededRng::mix(SeededRng::mix(seed, si), static_cast<std::uint64_t>(t)),
            ci));
        if (cfg.camera_dropout > 0.0 && rng.uniform() < cfg.camera_dropout) {
          img = Tensor(img.shape(), 0.0);
        } else if (cfg.pixel_noise > 0.0) {
          for (std::size_t i = 0; i < img.size(); ++i) {
            img[i] += cfg.pixel_noise * rng.normal();
          }
        }
        save_gtns(img, (scene_dir / ("img_" + std::to_string(t) + "_" +
                                     std::to_string(ci) + ".gtns"))
                           .string());
      }
      save_gtns(rasterize_bev_gt(scene, t, grid),
                (scene_dir / ("label_" + std::to_string(t) + ".gtns")).string());
      save_gtns(rasterize_bev_instances(scene, t, grid),
                (scene_dir / ("inst_" + std::to_string(t) + ".gtns")).string());
    }
    for (int t = cfg.window - 1; t < scene.timesteps; ++t) {
      manifest << scene_name << ":" << t << "\n";
      ++samples;
    }
  }
  manifest.close();
  // The rig is fixed by the config, so it is written even for zero scenes.
  save_rig(scenes.empty() ? default_rig(cfg) : scenes[0].rig,
           (fs::path(out_dir) / "rig.txt").string());
  std::map<std::string, std::string> meta;
  auto real_str = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  meta["timesteps"] = std::to_string(cfg.timesteps);
  meta["window"] = std::to_string(cfg.window);
  meta["dt"] = real_str(cfg.dt);
  meta["cameras"] = std::to_string(cfg.cameras);
  meta["img_h"] = std::to_string(cfg.img_h);
  meta["img_w"] = std::to_string(cfg.img_w);
  meta["grid_extent_x"] = real_str(cfg.grid_extent_x);
  meta["grid_extent_y"] = real_str(cfg.grid_extent_y);
  meta["grid_resolution"] = real_str(cfg.grid_resolution);
  write_key_value_file((fs::path(out_dir) / "meta.txt").string(), meta);
  return samples;
}

}  // namespace geobev
