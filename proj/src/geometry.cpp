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
#include "geobev/geometry.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "geobev/error.hpp"

namespace geobev {

double norm(Vec3 a) { return std::sqrt(a.x * a.x + a.y * a.y + a.z * a.z); }

Mat3 Mat3::identity() {
  Mat3 r;
  r.m[0] = r.m[4] = r.m[8] = 1.0;
  return r;
}

Mat3 Mat3::rot_z(double radians) {
  const double c = std::cos(radians), s = std::sin(radians);
  Mat3 r;
  r.m[0] = c;
  r.m[1] = -s;
  r.m[3] = s;
  r.m[4] = c;
  r.m[8] = 1.0;
  return r;
}

Vec3 Mat3::apply(Vec3 v) const {
  return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
          m[3] * v.x + m[4] * v.y + m[5] * v.z,
          m[6] * v.x + m[7] * v.y + m[8] * v.z};
}

Mat3 Mat3::matmul(const Mat3& other) const {
  Mat3 r;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += at(i, k) * other.at(k, j);
      r.at(i, j) = acc;
    }
  }
  return r;
}

Mat3 Mat3::transposed() const {
  Mat3 r;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r.at(i, j) = at(j, i);
  }
  return r;
}

double Mat3::det() const {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) -
         m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

void Camera::validate() const {
  const Mat3& k = intrinsics;
  if (k.at(1, 0) != 0.0 || k.at(2, 0) != 0.0 || k.at(2, 1) != 0.0) {
    throw_config("camera '" + name + "': K must be upper-triangular");
  }
  if (k.at(0, 0) <= 0.0 || k.at(1, 1) <= 0.0 || k.at(2, 2) != 1.0) {
    throw_config("camera '" + name +
                 "': K needs positive focal lengths and K[2][2] = 1");
  }
  const Mat3 rtr = rotation.transposed().matmul(rotation);
  const Mat3 eye = Mat3::identity();
  for (int i = 0; i < 9; ++i) {
    if (std::abs(rtr.m[i] - eye.m[i]) > 1e-9) {
      throw_config("camera '" + name + "': R is not orthonormal");
    }
  }
  if (std::abs(rotation.det() - 1.0) > 1e-9) {
    throw_config("camera '" + name + "': det(R) != 1");
  }
}

BevGridSpec BevGridSpec::create(double extent_x, double extent_y,
                                double resolution) {
  if (extent_x <= 0.0 || extent_y <= 0.0 || resolution <= 0.0) {
    throw_config("BEV grid extents and resolution must be positive");
  }
  BevGridSpec g;
  g.extent_x = extent_x;
  g.extent_y = extent_y;
  g.resolution = resolution;
  const double rx = extent_x / resolution;
  const double ry = extent_y / resolution;
  if (std::abs(rx - std::round(rx)) > 1e-9 ||
      std::abs(ry - std::round(ry)) > 1e-9) {
    throw_config("BEV extent must be an exact multiple of the resolution");
  }
  g.rows = static_cast<int>(std::llround(rx));
  g.cols = static_cast<int>(std::llround(ry));
  if (g.rows < 1 || g.cols < 1) throw_config("BEV grid dims must be >= 1");
  return g;
}

std::optional<std::pair<int, int>> ego_to_bev_index(Vec3 p,
                                                    const BevGridSpec& grid) {
  const double r = std::floor((p.x + grid.extent_x / 2.0) / grid.resolution);
  const double c = std::floor((p.y + grid.extent_y / 2.0) / grid.resolution);
  if (r < 0.0 || r >= grid.rows || c < 0.0 || c >= grid.cols) {
    return std::nullopt;
  }
  return std::make_pair(static_cast<int>(r), static_cast<int>(c));
}

Vec3 unproject_pixel(double u, double v, double depth,
                     const Mat3& intrinsics) {
  if (depth <= 0.0) {
    throw_config("unproject_pixel: depth must be positive, got " +
                 std::to_string(depth));
  }
  const double fx = intrinsics.at(0, 0), skew = intrinsics.at(0, 1);
  const double cx = intrinsics.at(0, 2);
  const double fy = intrinsics.at(1, 1), cy = intrinsics.at(1, 2);
  // Closed-form K^-1 for upper-triangular K with K[2][2] = 1.
  const double yn = (v - cy) / fy;
  const double xn = (u - cx - skew * yn) / fx;
  return {depth * xn, depth * yn, depth};
}

Vec3 cam_to_ego(Vec3 p, const Mat3& rotation, Vec3 translation) {
  return rotation.apply(p) + translation;
}

std::pair<double, double> project_to_pixel(Vec3 p_cam, const Mat3& intrinsics) {
  if (p_cam.z <= 0.0) {
    throw_config("project_to_pixel: point must be in front of the camera");
  }
  const Vec3 h = intrinsics.apply(p_cam);
  return {h.x / h.z, h.y / h.z};
}

CameraFrustum build_frustum(const Camera& camera, int feat_h, int feat_w,
                            const std::vector<double>& depth_bins,
                            int stride) {
  if (depth_bins.empty()) throw_config("depth_bins must not be empty");
  double prev = 0.0;
  for (double d : depth_bins) {
    if (d <= prev) {
      throw_config("depth_bins must be strictly increasing and positive");
    }
    prev = d;
  }
  if (feat_h < 1 || feat_w < 1 || stride < 1) {
    throw_config("build_frustum: feature dims and stride must be >= 1");
  }
  CameraFrustum out;
  out.feat_h = feat_h;
  out.feat_w = feat_w;
  out.num_bins = static_cast<int>(depth_bins.size());
  out.points.reserve(static_cast<std::size_t>(feat_h) * feat_w *
                     depth_bins.size());
  for (int y = 0; y < feat_h; ++y) {
    for (int x = 0; x < feat_w; ++x) {
      const double u = static_cast<double>(stride * x);
      const double v = static_cast<double>(stride * y);
      for (int d = 0; d < out.num_bins; ++d) {
        const Vec3 p_cam = unproject_pixel(
            u, v, depth_bins[static_cast<std::size_t>(d)], camera.intrinsics);
        out.points.push_back(
            {u, v, d, cam_to_ego(p_cam, camera.rotation, camera.translation)});
      }
    }
  }
  return out;
}

FrustumCloud build_frustum_cloud(const std::vector<Camera>& rig, int feat_h,
                                 int feat_w,
                                 const std::vector<double>& depth_bins,
                                 int stride) {
  FrustumCloud cloud;
  cloud.cameras.reserve(rig.size());
  for (const Camera& cam : rig) {
    cloud.cameras.push_back(
        build_frustum(cam, feat_h, feat_w, depth_bins, stride));
  }
  return cloud;
}

std::vector<double> uniform_depth_bins(double depth_min, double depth_max,
                                       int count) {
  if (count < 1 || depth_min <= 0.0 || depth_max <= depth_min) {
    throw_config("invalid depth bin layout");
  }
  std::vector<double> bins(static_cast<std::size_t>(count));
  if (count == 1) {
    bins[0] = depth_min;
    return bins;
  }
  const double step = (depth_max - depth_min) / (count - 1);
  for (int i = 0; i < count; ++i) {
    bins[static_cast<std::size_t>(i)] = depth_min + step * i;
  }
  return bins;
}

namespace {

std::vector<double> parse_reals(std::istringstream& line, std::size_t n,
                                const std::string& what, int line_no) {
  std::vector<double> vals;
  double v;
  while (line >> v) vals.push_back(v);
  if (vals.size() != n) {
    throw_config("rig file line " + std::to_string(line_no) + ": '" + what +
                 "' expects " + std::to_string(n) + " reals");
  }
  return vals;
}

}  // namespace

std::vector<Camera> load_rig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open rig file: " + path);
  std::vector<Camera> rig;
  Camera cur;
  bool open = false, have_k = false, have_r = false, have_t = false;
  auto finish = [&]() {
    if (!open) return;
    if (!have_k || !have_r || !have_t) {
      throw_config("rig file: camera '" + cur.name +
                   "' is missing a K, R or t line");
    }
    cur.validate();
    rig.push_back(cur);
  };
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "camera") {
      finish();
      cur = Camera{};
      open = true;
      have_k = have_r = have_t = false;
      if (!(ls >> cur.name)) {
        throw_config("rig file line " + std::to_string(line_no) +
                     ": 'camera' expects a name");
      }
    } else if (tag == "K" || tag == "R" || tag == "t") {
      if (!open) {
        throw_config("rig file line " + std::to_string(line_no) +
                     ": '" + tag + "' before any 'camera' line");
      }
      if (tag == "t") {
        auto v = parse_reals(ls, 3, tag, line_no);
        cur.translation = {v[0], v[1], v[2]};
        have_t = true;
      } else {
        auto v = parse_reals(ls, 9, tag, line_no);
        Mat3 m;
        for (int i = 0; i < 9; ++i) m.m[i] = v[static_cast<std::size_t>(i)];
        if (tag == "K") {
          cur.intrinsics = m;
          have_k = true;
        } else {
          cur.rotation = m;
          have_r = true;
        }
      }
    } else {
      throw_config("rig file line " + std::to_string(line_no) +
                   ": unknown tag '" + tag + "'");
    }
  }
  finish();
  if (rig.empty()) throw_config("rig file contains no cameras: " + path);
  return rig;
}

void save_rig(const std::vector<Camera>& rig, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw_io("cannot open for writing: " + path);
  out.precision(17);
  for (const Camera& cam : rig) {
    out << "camera " << cam.name << "\n";
    out << "K";
    for (double v : cam.intrinsics.m) out << " " << v;
    out << "\nR";
    for (double v : cam.rotation.m) out << " " << v;
    out << "\nt " << cam.translation.x << " " << cam.translation.y << " "
        << cam.translation.z << "\n";
  }
  if (!out) throw_io("write failed: " + path);
}

}  // namespace geobev
