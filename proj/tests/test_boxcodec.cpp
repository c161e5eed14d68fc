#include "support.hpp"

#include "lidarfcn/boxcodec.hpp"

#include <doctest.h>

using namespace lfcn;
using testing::Rng;

namespace {

Box3D example_box() {
  Box3D b;
  b.center = Point3(10.5, 0.0, 0.0);
  b.length = 4.0;
  b.width = 2.0;
  b.height = 1.5;
  b.yaw = 0.0;
  return b;
}

}  // namespace

TEST_SUITE("boxcodec") {
  TEST_CASE("canonical corner order") {
    const CornerSet c = corners_from_params(example_box());
    CHECK(c[0] == Point3(12.5, 1.0, -0.75));
    CHECK(c[1] == Point3(8.5, 1.0, -0.75));
    CHECK(c[2] == Point3(8.5, -1.0, -0.75));
    CHECK(c[3] == Point3(12.5, -1.0, -0.75));
    CHECK(c[4] == Point3(12.5, 1.0, 0.75));
    CHECK(c[6] == Point3(8.5, -1.0, 0.75));
  }

  TEST_CASE("corners match the local-axis oracle") {
    Rng rng(10);
    for (int i = 0; i < 1000; ++i) {
      const Box3D b = testing::random_box(rng);
      REQUIRE(testing::max_corner_error(corners_from_params(b), testing::oracle_corners(b)) < 1e-12);
    }
  }

  TEST_CASE("observation basis examples") {
    CHECK(observation_basis({10.0, 0.0, 0.0}).rotation.isApprox(Mat3::Identity(), 1e-15));
    Mat3 rz;
    rz << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    CHECK((observation_basis({0.0, 10.0, 0.0}).rotation - rz).norm() < 1e-15);
    CHECK_THROWS_AS(observation_basis(Point3::Zero()), ConfigError);
  }

  TEST_CASE("observation basis properties on 1000 anchors") {
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
      const Point3 p = testing::random_anchor(rng);
      const ObservationBasis b = observation_basis(p);
      REQUIRE((b.rotation * Point3(p.norm(), 0.0, 0.0) - p).norm() < 1e-9);
      REQUIRE((b.rotation.transpose() * b.rotation - Mat3::Identity()).norm() < 1e-9);
      REQUIRE(b.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));
      REQUIRE(std::abs(b.r_y().z()) < 1e-9);
      REQUIRE((b.rotation - testing::oracle_basis(p)).norm() < 1e-12);
    }
  }

  TEST_CASE("straight-up anchor still gets a basis") {
    const ObservationBasis b = observation_basis({0.0, 0.0, 5.0});
    CHECK((b.rotation * Point3(5.0, 0.0, 0.0) - Point3(0.0, 0.0, 5.0)).norm() < 1e-12);
    CHECK(std::abs(b.r_y().z()) < 1e-15);
  }

  TEST_CASE("encode with identity basis subtracts the anchor") {
    const EncodedBox24 e = encode_box(example_box(), {10.0, 0.0, 0.0});
    CHECK(e[0] == doctest::Approx(2.5));
    CHECK(e[1] == doctest::Approx(1.0));
    CHECK(e[2] == doctest::Approx(-0.75));
    const CornerSet c = corners_from_params(example_box());
    for (std::size_t i = 0; i < 8; ++i) {
      for (int k = 0; k < 3; ++k) CHECK(e[3 * i + std::size_t(k)] == doctest::Approx(c[i][k] - (k == 0 ? 10.0 : 0.0)));
    }
  }

  TEST_CASE("scene turned a quarter encodes the same") {
    Box3D turned = example_box();
    turned.center = Point3(0.0, 10.5, 0.0);
    turned.yaw = kPi / 2;
    CHECK(testing::max_abs_diff(encode_box(turned, {0.0, 10.0, 0.0}), encode_box(example_box(), {10.0, 0.0, 0.0})) <
          1e-12);
  }

  TEST_CASE("encode matches the angle-axis oracle") {
    Rng rng(12);
    for (int i = 0; i < 2000; ++i) {
      const Box3D b = testing::random_box(rng);
      const Point3 p = testing::random_anchor(rng);
      REQUIRE(testing::max_abs_diff(encode_box(b, p), testing::oracle_encode(b, p)) < 1e-10);
    }
  }

  TEST_CASE("decode inverts encode") {
    const Point3 p(10.0, 0.0, 0.0);
    CHECK(testing::max_corner_error(decode_box(encode_box(example_box(), p), p), corners_from_params(example_box())) <
          1e-12);

    EncodedBox24 zero{};
    for (const auto& c : decode_box(zero, {3.0, -4.0, 1.0})) CHECK((c - Point3(3.0, -4.0, 1.0)).norm() < 1e-15);

    Rng rng(13);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const Box3D b = testing::random_box(rng);
      const Point3 p = testing::random_anchor(rng);
      worst = std::max(worst, testing::max_corner_error(decode_box(encode_box(b, p), p), corners_from_params(b)));
      EncodedBox24 e;
      for (auto& v : e) v = rng.uniform(-5.0, 5.0);
      REQUIRE(testing::max_abs_diff(encode_corners(decode_box(e, p), p), e) < 1e-9);
    }
    CHECK(worst < 1e-9);
  }

  TEST_CASE("z-rotation invariance") {
    Rng rng(14);
    for (int i = 0; i < 1000; ++i) {
      const Box3D b = testing::random_box(rng);
      const Point3 p = testing::random_anchor(rng);
      const double alpha = rng.uniform(-kPi, kPi);
      const RigidTransform t = RigidTransform::rot_z(alpha);
      Box3D rb = b;
      rb.center = t.apply(b.center);
      rb.yaw = normalize_angle(b.yaw + alpha);
      REQUIRE(testing::max_abs_diff(encode_box(rb, t.apply(p)), encode_box(b, p)) < 1e-9);
    }
  }

  TEST_CASE("moving the box alone changes the encoding") {
    Rng rng(15);
    for (int i = 0; i < 1000; ++i) {
      const Box3D b = testing::random_box(rng);
      const Point3 p = testing::random_anchor(rng);
      Box3D moved = b;
      const Point3 delta = rng.point(-1.0, 1.0);
      moved.center += delta;
      const EncodedBox24 a = encode_box(b, p);
      const EncodedBox24 c = encode_box(moved, p);
      const double cos_phi = std::hypot(p.x(), p.y()) / p.norm();
      const Point3 shift(c[0] - a[0], c[1] - a[1], c[2] - a[2]);
      REQUIRE(shift.norm() >= delta.norm() * cos_phi - 1e-9);
    }
  }

  TEST_CASE("params_from_corners examples") {
    const Box3D fit = params_from_corners(corners_from_params(example_box()));
    CHECK(fit.yaw == doctest::Approx(0.0));
    CHECK(fit.length == doctest::Approx(4.0));
    CHECK(fit.width == doctest::Approx(2.0));
    CHECK(fit.height == doctest::Approx(1.5));
    CHECK((fit.center - Point3(10.5, 0.0, 0.0)).norm() < 1e-12);

    CornerSet turned = corners_from_params(example_box());
    const RigidTransform t = RigidTransform::rot_z(deg2rad(30.0));
    for (auto& c : turned) c = t.apply(c);
    CHECK(rad2deg(params_from_corners(turned).yaw) == doctest::Approx(30.0));
  }

  TEST_CASE("params_from_corners round trip on 1000 boxes") {
    Rng rng(16);
    for (int i = 0; i < 1000; ++i) {
      Box3D b = testing::random_box(rng);
      b.yaw = normalize_angle(b.yaw);
      const Box3D f = params_from_corners(corners_from_params(b));
      REQUIRE((f.center - b.center).norm() < 1e-9);
      REQUIRE(f.length == doctest::Approx(b.length).epsilon(1e-9));
      REQUIRE(f.width == doctest::Approx(b.width).epsilon(1e-9));
      REQUIRE(f.height == doctest::Approx(b.height).epsilon(1e-9));
      REQUIRE(std::abs(normalize_angle(f.yaw - b.yaw)) < 1e-9);
    }
  }

  TEST_CASE("params_from_corners tolerates small noise and rejects non-boxes") {
    Rng rng(17);
    CornerSet c = corners_from_params(example_box());
    for (auto& p : c) p += rng.point(-0.05, 0.05);
    CHECK_NOTHROW(params_from_corners(c));

    CornerSet bent = corners_from_params(example_box());
    bent[4].z() += 2.0;
    CHECK_THROWS_AS(params_from_corners(bent), NumericError);
    CornerSet flat;
    flat.fill(Point3(1.0, 2.0, 3.0));
    CHECK_THROWS_AS(params_from_corners(flat), NumericError);
    CornerSet bad = corners_from_params(example_box());
    bad[0].x() = std::nan("");
    CHECK_THROWS_AS(params_from_corners(bad), NumericError);
  }

  TEST_CASE("box validation and containment") {
    Box3D b = example_box();
    CHECK_NOTHROW(b.validate());
    CHECK(b.contains({10.5, 0.0, 0.0}));
    CHECK(b.contains({12.5, 1.0, 0.75}));
    CHECK_FALSE(b.contains({12.55, 0.0, 0.0}));
    CHECK(b.contains({12.55, 0.0, 0.0}, 0.1));
    b.width = 0.0;
    CHECK_THROWS_AS(b.validate(), ConfigError);
  }

  TEST_CASE("flatten and unflatten are inverse") {
    const CornerSet c = corners_from_params(example_box());
    CHECK(unflatten(flatten(c)) == c);
  }
}
