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

#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>

namespace bevcvt::geometry {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Pinhole intrinsics with zero skew.
struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  Mat3 matrix() const;
  Mat3 inverse() const;
};

/// Rigid pose. `rotation` maps world axes onto the camera body axes
/// (X forward, Y left, Z up); `translation` is the camera centre in world
/// coordinates.
struct ExtrinsicPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  /// [R t; 0 1], written out for calibration records.
  Mat4 matrix() const;
};

struct Angles {
  double pitch_deg = 0.0;
  double yaw_deg = 0.0;
  double roll_deg = 0.0;
};

struct CameraModel {
  std::string name;
  int width = 0;
  int height = 0;
  double fov_deg = 0.0;
  Vec3 position = Vec3::Zero();
  Angles angles;
  Intrinsics intrinsics;
  ExtrinsicPose extrinsics;

  /// Full world-to-optical rotation: body axes permuted into the optical
  /// frame (+Z forward, +X right, +Y down).
  Mat3 world_to_optical() const;
};

/// Body (X fwd, Y left, Z up) to optical (X right, Y down, Z fwd).
Mat3 body_to_optical();

Intrinsics intrinsics_from_fov(int width, int height, double fov_deg);

/// Yaw about +Z, then pitch (positive tilts the optical axis up), then roll
/// about +X. Angles in degrees.
ExtrinsicPose extrinsics_from_pose(double x, double y, double z, double pitch_deg,
                                   double yaw_deg, double roll_deg);

CameraModel make_camera(std::string name, int width, int height, double fov_deg,
                        const Vec3& position, const Angles& angles);

/// The same mount expressed in world coordinates for an ego at (x, y) with
/// the given heading (radians, counter-clockwise from world +X).
CameraModel mounted_at(const CameraModel& mount, double ego_x, double ego_y,
                       double heading_rad);

/// x_I ~ K R (x_W - t), dehomogenised. Throws BehindCamera on depth <= 0.
Vec2 project(const Vec3& world, const CameraModel& cam);

/// R^-1 K^-1 (u, v, 1), unnormalised.
Vec3 unproject_direction(const Vec2& pixel, const CameraModel& cam);
Vec3 unproject_direction(const Vec3& homogeneous_pixel, const CameraModel& cam);

/// Cosine between the pixel ray and (world - t).
double geometric_similarity(const Vec2& pixel, const Vec3& world, const CameraModel& cam);
double geometric_similarity(const Vec3& homogeneous_pixel, const Vec3& world,
                            const CameraModel& cam);

/// Hit point of the pixel ray with the ground plane z = 0, if it lies in
/// front of the camera.
std::optional<Vec3> ray_ground_intersection(const Vec2& pixel, const CameraModel& cam);

/// Recovers the horizontal field of view from a focal length.
double fov_from_focal(int width, double fx);

}  // namespace bevcvt::geometry
