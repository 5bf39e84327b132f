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
#ifndef GEOBEV_GEOMETRY_HPP_
#define GEOBEV_GEOMETRY_HPP_

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace geobev {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
double norm(Vec3 a);

// 3x3 real matrix, row-major.
struct Mat3 {
  double m[9] = {0, 0, 0, 0, 0, 0, 0, 0, 0};

  static Mat3 identity();
  static Mat3 rot_z(double radians);

  double at(int r, int c) const { return m[3 * r + c]; }
  double& at(int r, int c) { return m[3 * r + c]; }

  Vec3 apply(Vec3 v) const;
  Mat3 matmul(const Mat3& other) const;
  Mat3 transposed() const;
  double det() const;
};

// Pinhole camera: intrinsics K, rotation R (camera -> ego) and translation t
// (camera origin in the ego frame). Camera frame is x right, y down,
// z forward.
struct Camera {
  std::string name;
  Mat3 intrinsics;
  Mat3 rotation;
  Vec3 translation;

  // Checks K upper-triangular with positive diagonal and K[2][2] = 1, and
  // R orthonormal with det 1 (1e-9 tolerances).
  void validate() const;
};

// Ego-centered metric BEV raster. extent_* are full side lengths in meters;
// rows span x (forward), cols span y.
struct BevGridSpec {
  double extent_x = 100.0;
  double extent_y = 100.0;
  double resolution = 0.5;
  int rows = 200;
  int cols = 200;

  // Validates that extent / resolution divides exactly.
  static BevGridSpec create(double extent_x, double extent_y,
                            double resolution);
};

// Half-open cells with floor rounding; z is ignored (full-height column
// collapse). Returns nothing outside [0,rows) x [0,cols).
std::optional<std::pair<int, int>> ego_to_bev_index(Vec3 p,
                                                    const BevGridSpec& grid);

// point = depth * K^-1 * (u, v, 1)^T; the returned z equals depth.
Vec3 unproject_pixel(double u, double v, double depth, const Mat3& intrinsics);

// R * p + t.
Vec3 cam_to_ego(Vec3 p, const Mat3& rotation, Vec3 translation);

// Perspective projection of a camera-frame point (z > 0) back to pixels.
std::pair<double, double> project_to_pixel(Vec3 p_cam, const Mat3& intrinsics);

// One unprojected sample: feature pixel (u,v in image coordinates), depth bin
// index and the resulting ego-frame point.
struct FrustumPoint {
  double u = 0.0, v = 0.0;
  int depth_bin = 0;
  Vec3 ego;
};

// Points of one camera in fixed (y, x, d) order; count = feat_h*feat_w*bins.
struct CameraFrustum {
  int feat_h = 0;
  int feat_w = 0;
  int num_bins = 0;
  std::vector<FrustumPoint> points;
};

struct FrustumCloud {
  std::vector<CameraFrustum> cameras;
};

// Feature pixel (x, y) maps to image pixel (stride*x, stride*y); one ego
// point per (feature pixel, depth bin). depth_bins must be strictly
// increasing and positive.
CameraFrustum build_frustum(const Camera& camera, int feat_h, int feat_w,
                            const std::vector<double>& depth_bins,
                            int stride = 1);

FrustumCloud build_frustum_cloud(const std::vector<Camera>& rig, int feat_h,
                                 int feat_w,
                                 const std::vector<double>& depth_bins,
                                 int stride = 1);

// Uniformly spaced depth bins over [depth_min, depth_max].
std::vector<double> uniform_depth_bins(double depth_min, double depth_max,
                                       int count);

// Rig file: line-based text, one camera per block ("camera <name>", "K <9>",
// "R <9>", "t <3>"); '#' starts a comment.
std::vector<Camera> load_rig(const std::string& path);
void save_rig(const std::vector<Camera>& rig, const std::string& path);

}  // namespace geobev

#endif  // GEOBEV_GEOMETRY_HPP_
