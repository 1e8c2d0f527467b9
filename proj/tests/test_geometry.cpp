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

#include <doctest.h>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include <cmath>
#include <numbers>
#include <random>

#include "error.hpp"
#include "geometry.hpp"
#include "test_support.hpp"

using namespace bevcvt;
using namespace bevcvt::geometry;

namespace {

// Elementary rotations written out independently of the library.
Mat3 rot_x(double a) {
  Mat3 m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}
Mat3 rot_y(double a) {
  Mat3 m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}
Mat3 rot_z(double a) {
  Mat3 m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}
double rad(double deg) { return deg * std::numbers::pi / 180.0; }

CameraModel axis_camera(int w = 400, int h = 400, double fov = 90.0) {
  return make_camera("c", w, h, fov, Vec3::Zero(), Angles{});
}

}  // namespace

TEST_CASE("intrinsics from field of view") {
  const auto k = intrinsics_from_fov(400, 400, 90.0);
  CHECK(k.fx == 200.0);
  CHECK(k.fy == 200.0);
  CHECK(k.cx == 200.0);
  CHECK(k.cy == 200.0);

  const auto k2 = intrinsics_from_fov(800, 600, 90.0);
  CHECK(k2.fx == doctest::Approx(400.0).epsilon(1e-12));
  CHECK(k2.fy == doctest::Approx(300.0).epsilon(1e-12));
  CHECK(k2.cx == 400.0);
  CHECK(k2.cy == 300.0);

  const Mat3 m = k2.matrix();
  CHECK(m(2, 2) == 1.0);
  CHECK(m(1, 0) == 0.0);
  CHECK(m(2, 0) == 0.0);
  CHECK(m(2, 1) == 0.0);
  CHECK(m(0, 1) == 0.0);
  CHECK((m * k2.inverse() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("intrinsics reject degenerate input") {
  for (double fov : {0.0, 180.0, -10.0, 200.0, std::nan("")}) {
    CHECK_THROWS_AS(intrinsics_from_fov(400, 400, fov), Error);
  }
  CHECK_THROWS_AS(intrinsics_from_fov(0, 400, 90.0), Error);
  try {
    intrinsics_from_fov(400, 400, 0.0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("field of view reads back from the focal length") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> fov(1.0, 179.0);
  std::uniform_int_distribution<int> size(1, 4000);
  for (int i = 0; i < 1000; ++i) {
    const double f = fov(rng);
    const int w = size(rng);
    const auto k = intrinsics_from_fov(w, size(rng), f);
    const double back = 2.0 * std::atan(w / (2.0 * k.fx)) * 180.0 / std::numbers::pi;
    CHECK(std::abs(back - f) / f < 1e-9);
    CHECK(std::abs(fov_from_focal(w, k.fx) - f) / f < 1e-9);
  }
}

TEST_CASE("extrinsics from pose") {
  const auto id = extrinsics_from_pose(0, 0, 0, 0, 0, 0);
  CHECK(id.rotation.isApprox(Mat3::Identity(), 0.0));
  CHECK(id.translation == Vec3::Zero());

  const auto tr = extrinsics_from_pose(1, 2, 3, 0, 0, 0);
  CHECK(tr.rotation == Mat3::Identity());
  CHECK(tr.translation == Vec3(1, 2, 3));

  const auto back = extrinsics_from_pose(0, 0, 0, 0, 180, 0);
  CHECK((back.rotation * Vec3::UnitX() + Vec3::UnitX()).norm() < 1e-12);

  CHECK_THROWS_AS(extrinsics_from_pose(0, 0, std::nan(""), 0, 0, 0), Error);
  CHECK_THROWS_AS(extrinsics_from_pose(0, 0, 0, INFINITY, 0, 0), Error);

  const Mat4 e = tr.matrix();
  CHECK(e.block<3, 3>(0, 0) == tr.rotation);
  CHECK(e.block<3, 1>(0, 3) == tr.translation);
  CHECK(e.row(3) == Eigen::RowVector4d(0, 0, 0, 1));
}

TEST_CASE("extrinsic rotation matches composed elementary rotations") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ang(-360.0, 360.0);
  for (int i = 0; i < 1000; ++i) {
    const double p = ang(rng), y = ang(rng), r = ang(rng);
    const auto pose = extrinsics_from_pose(0, 0, 0, p, y, r);
    // Body-to-world is yaw about Z, then pitch (nose up positive), then roll.
    const Mat3 body_to_world = rot_z(rad(y)) * rot_y(-rad(p)) * rot_x(rad(r));
    CHECK((pose.rotation - body_to_world.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((pose.rotation.transpose() * pose.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(std::abs(pose.rotation.determinant() - 1.0) < 1e-6);
  }
}

TEST_CASE("positive pitch raises the optical axis") {
  const auto cam = make_camera("c", 64, 64, 90, Vec3::Zero(), Angles{30, 0, 0});
  const Vec3 d = unproject_direction(Vec2(32, 32), cam);
  CHECK(d.z() > 0.0);
  CHECK(std::atan2(d.z(), d.x()) == doctest::Approx(rad(30)).epsilon(1e-12));
}

TEST_CASE("projection examples") {
  const auto cam = axis_camera();
  const Vec2 c = project(Vec3(5, 0, 0), cam);
  CHECK(c.x() == doctest::Approx(200.0));
  CHECK(c.y() == doctest::Approx(200.0));

  // Optical (1, 0, 5): 5 m ahead, 1 m to the right (negative Y in the world).
  const Vec2 q = project(Vec3(5, -1, 0), cam);
  CHECK(q.x() == doctest::Approx(240.0).epsilon(1e-12));
  CHECK(q.y() == doctest::Approx(200.0).epsilon(1e-12));

  CHECK_THROWS_AS(project(Vec3(0, 1, 0), cam), Error);
  try {
    project(Vec3(-1, 0, 0), cam);
    FAIL("expected behind-camera error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BehindCamera);
  }
}

TEST_CASE("unprojection examples") {
  const auto cam = axis_camera();
  const Vec3 d = unproject_direction(Vec2(200, 200), cam);
  CHECK(testing::cosine(d, Vec3::UnitX()) == doctest::Approx(1.0).epsilon(1e-15));
  const Vec3 h = unproject_direction(Vec3(200, 200, 1), cam);
  CHECK((h - d).norm() == 0.0);

  const Vec3 r = unproject_direction(Vec2(240, 200), cam);
  // Optical (0.2, 0, 1) is world (1, -0.2, 0).
  CHECK((r - Vec3(1.0, -0.2, 0.0)).norm() < 1e-12);
}

TEST_CASE("project and unproject are consistent over random poses") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const auto cam = testing::random_camera(rng);
    const Vec3 p = testing::random_point_in_front(cam, rng);
    const Vec2 q = project(p, cam);
    const Vec3 d = unproject_direction(q, cam);
    CHECK(std::abs(testing::cosine(d, p - cam.extrinsics.translation) - 1.0) < 1e-9);
    CHECK(std::abs(geometric_similarity(q, p, cam) - 1.0) < 1e-9);
    for (double lambda : {1e-3, 0.5, 7.0, 1e4}) {
      const Vec3 x = lambda * Vec3(q.x(), q.y(), 1.0);
      CHECK(std::abs(geometric_similarity(x, p, cam) - geometric_similarity(q, p, cam)) < 1e-12);
    }
  }
}

TEST_CASE("geometric similarity extremes") {
  const auto cam = make_camera("c", 128, 96, 70, Vec3(1, 2, 1.5), Angles{-10, 40, 5});
  const Vec2 q(30, 70);
  const Vec3 d = unproject_direction(q, cam);
  const Vec3 t = cam.extrinsics.translation;
  CHECK(geometric_similarity(q, t - 3.0 * d, cam) == doctest::Approx(-1.0).epsilon(1e-12));
  const Vec3 ortho = d.cross(Vec3(0.3, -0.2, 1.0));
  CHECK(std::abs(geometric_similarity(q, t + ortho, cam)) < 1e-9);
  CHECK_THROWS_AS(geometric_similarity(q, t, cam), Error);
  CHECK_THROWS_AS(geometric_similarity(Vec3(Vec3::Zero()), Vec3(t + d), cam), Error);
}

TEST_CASE("ray and ground plane") {
  const auto down = make_camera("c", 101, 101, 90, Vec3(0, 0, 2), Angles{-45, 0, 0});
  const auto hit = ray_ground_intersection(Vec2(50.5, 50.5), down);
  REQUIRE(hit.has_value());
  CHECK((*hit - Vec3(2, 0, 0)).norm() < 1e-12);

  const auto level = make_camera("c", 100, 100, 90, Vec3(0, 0, 2), Angles{});
  CHECK_FALSE(ray_ground_intersection(Vec2(50, 50), level).has_value());
  CHECK_FALSE(ray_ground_intersection(Vec2(50, 10), level).has_value());

  std::mt19937_64 rng(5);
  int hits = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto cam = testing::random_camera(rng);
    std::uniform_real_distribution<double> u(0, cam.width), v(0, cam.height);
    const Vec2 q(u(rng), v(rng));
    const auto g = ray_ground_intersection(q, cam);
    if (!g) continue;
    ++hits;
    CHECK(g->z() == 0.0);
    CHECK((project(*g, cam) - q).norm() < 1e-6);
  }
  CHECK(hits > 100);
}

TEST_CASE("mounting a camera on the ego") {
  const auto mount = make_camera("front", 64, 64, 90, Vec3(1, 0.5, 1.8), Angles{-5, 10, 0});
  const auto world = mounted_at(mount, 10, -4, std::numbers::pi / 2);
  CHECK((world.extrinsics.translation - Vec3(10 - 0.5, -4 + 1, 1.8)).norm() < 1e-12);
  CHECK(world.angles.yaw_deg == doctest::Approx(100.0));
  const Vec3 fwd = unproject_direction(Vec2(32, 32), world);
  const Vec3 fwd_mount = unproject_direction(Vec2(32, 32), mount);
  CHECK(testing::cosine(fwd, rot_z(std::numbers::pi / 2) * fwd_mount) == doctest::Approx(1.0).epsilon(1e-12));
}
