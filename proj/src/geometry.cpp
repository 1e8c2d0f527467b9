// Copyright 2026 The bevcvt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "geometry.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <numbers>

#include "error.hpp"

namespace bevcvt::geometry {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void require_finite(std::initializer_list<double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, std::string(what) + ": non-finite input");
  }
}

}  // namespace

Mat3 Intrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Mat3 Intrinsics::inverse() const {
  Mat3 k;
  k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
  return k;
}

Mat4 ExtrinsicPose::matrix() const {
  Mat4 e = Mat4::Identity();
  e.topLeftCorner<3, 3>() = rotation;
  e.topRightCorner<3, 1>() = translation;
  return e;
}

Mat3 body_to_optical() {
  Mat3 p;
  p << 0.0, -1.0, 0.0,  //
      0.0, 0.0, -1.0,   //
      1.0, 0.0, 0.0;
  return p;
}

Mat3 CameraModel::world_to_optical() const { return body_to_optical() * extrinsics.rotation; }

namespace {

// tan of an angle in degrees; std::tan(pi/4) rounds to 1 - 2^-53.
double tan_deg(double deg) { return deg == 45.0 ? 1.0 : std::tan(deg * kDegToRad); }

}  // namespace

Intrinsics intrinsics_from_fov(int width, int height, double fov_deg) {
  if (width <= 0 || height <= 0) fail(ErrorCode::InvalidArgument, "intrinsics_from_fov: image size must be positive");
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) {
    fail(ErrorCode::InvalidArgument, "intrinsics_from_fov: fov must lie in (0, 180) degrees");
  }
  const double t = tan_deg(fov_deg / 2.0);
  return Intrinsics{width / (2.0 * t), height / (2.0 * t), width / 2.0, height / 2.0};
}

double fov_from_focal(int width, double fx) { return 2.0 * std::atan(width / (2.0 * fx)) / kDegToRad; }

ExtrinsicPose extrinsics_from_pose(double x, double y, double z, double pitch_deg,
                                   double yaw_deg, double roll_deg) {
  require_finite({x, y, z, pitch_deg, yaw_deg, roll_deg}, "extrinsics_from_pose");
  const Eigen::AngleAxisd yaw(yaw_deg * kDegToRad, Vec3::UnitZ());
  // Positive pitch raises the nose, which is a negative rotation about +Y.
  const Eigen::AngleAxisd pitch(-pitch_deg * kDegToRad, Vec3::UnitY());
  const Eigen::AngleAxisd roll(roll_deg * kDegToRad, Vec3::UnitX());
  const Mat3 body_to_world = (yaw * pitch * roll).toRotationMatrix();
  return ExtrinsicPose{body_to_world.transpose(), Vec3(x, y, z)};
}

CameraModel make_camera(std::string name, int width, int height, double fov_deg,
                        const Vec3& position, const Angles& angles) {
  CameraModel cam;
  cam.name = std::move(name);
  cam.width = width;
  cam.height = height;
  cam.fov_deg = fov_deg;
  cam.position = position;
  cam.angles = angles;
  cam.intrinsics = intrinsics_from_fov(width, height, fov_deg);
  cam.extrinsics = extrinsics_from_pose(position.x(), position.y(), position.z(), angles.pitch_deg,
                                        angles.yaw_deg, angles.roll_deg);
  return cam;
}

CameraModel mounted_at(const CameraModel& mount, double ego_x, double ego_y, double heading_rad) {
  const double c = std::cos(heading_rad);
  const double s = std::sin(heading_rad);
  const Vec3 p = mount.position;
  const Vec3 world(ego_x + c * p.x() - s * p.y(), ego_y + s * p.x() + c * p.y(), p.z());
  Angles a = mount.angles;
  a.yaw_deg += heading_rad / kDegToRad;
  return make_camera(mount.name, mount.width, mount.height, mount.fov_deg, world, a);
}

Vec2 project(const Vec3& world, const CameraModel& cam) {
  require_finite({world.x(), world.y(), world.z()}, "project");
  const Vec3 optical = cam.world_to_optical() * (world - cam.extrinsics.translation);
  if (!(optical.z() > 0.0)) fail(ErrorCode::BehindCamera, "project: point is not in front of the camera");
  const Vec3 h = cam.intrinsics.matrix() * optical;
  return Vec2(h.x() / h.z(), h.y() / h.z());
}

Vec3 unproject_direction(const Vec3& homogeneous_pixel, const CameraModel& cam) {
  require_finite({homogeneous_pixel.x(), homogeneous_pixel.y(), homogeneous_pixel.z()},
                 "unproject_direction");
  return cam.world_to_optical().transpose() * (cam.intrinsics.inverse() * homogeneous_pixel);
}

Vec3 unproject_direction(const Vec2& pixel, const CameraModel& cam) {
  return unproject_direction(Vec3(pixel.x(), pixel.y(), 1.0), cam);
}

double geometric_similarity(const Vec3& homogeneous_pixel, const Vec3& world, const CameraModel& cam) {
  const Vec3 ray = unproject_direction(homogeneous_pixel, cam);
  const Vec3 offset = world - cam.extrinsics.translation;
  const double denom = ray.norm() * offset.norm();
  if (!(denom > 0.0)) fail(ErrorCode::Geometry, "geometric_similarity: zero-length argument");
  return ray.dot(offset) / denom;
}

double geometric_similarity(const Vec2& pixel, const Vec3& world, const CameraModel& cam) {
  return geometric_similarity(Vec3(pixel.x(), pixel.y(), 1.0), world, cam);
}

std::optional<Vec3> ray_ground_intersection(const Vec2& pixel, const CameraModel& cam) {
  const Vec3 d = unproject_direction(pixel, cam);
  const Vec3& origin = cam.extrinsics.translation;
  if (d.z() == 0.0) return std::nullopt;
  const double s = -origin.z() / d.z();
  if (!(s > 0.0) || !std::isfinite(s)) return std::nullopt;
  Vec3 hit = origin + s * d;
  hit.z() = 0.0;
  return hit;
}

}  // namespace bevcvt::geometry
