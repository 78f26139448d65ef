#include "doctest.h"

#include "grad_check.hpp"
#include "hoimotion/motion.hpp"
#include "hoimotion/rng.hpp"

#include <cmath>
#include <filesystem>

using namespace hoimo;
using namespace hoimo::motion;

namespace {

// Stick figure posed from a pelvis position and yaw; joint offsets live in
// the body frame (x = left, y = up, z = forward).
MatX3 pose_figure(const Vec3& pelvis, double yaw, double arm_raise = 0.0) {
  MatX3 local(skel::kJoints, 3);
  local.row(0) << 0, 0, 0;            // pelvis
  local.row(1) << 0.10, -0.05, 0;     // left hip
  local.row(2) << -0.10, -0.05, 0;    // right hip
  local.row(3) << 0, 0.12, 0;         // spine1
  local.row(4) << 0.11, -0.45, 0.02;  // left knee
  local.row(5) << -0.11, -0.45, 0.02; // right knee
  local.row(6) << 0, 0.25, 0;         // spine2
  local.row(7) << 0.11, -0.87, 0;     // left ankle
  local.row(8) << -0.11, -0.87, 0;    // right ankle
  local.row(9) << 0, 0.38, 0;         // spine3
  local.row(10) << 0.11, -0.88, 0.14; // left toe
  local.row(11) << -0.11, -0.88, 0.14;// right toe
  local.row(12) << 0, 0.50, 0;        // neck
  local.row(13) << 0.06, 0.44, 0;     // left collar
  local.row(14) << -0.06, 0.44, 0;    // right collar
  local.row(15) << 0, 0.60, 0.03;     // head
  local.row(16) << 0.18, 0.42, 0;     // left shoulder
  local.row(17) << -0.18, 0.42, 0;    // right shoulder
  local.row(18) << 0.22, 0.18, 0.10;  // left elbow
  local.row(19) << -0.22, 0.18, 0.10; // right elbow
  local.row(20) << 0.24, 0.02 + arm_raise, 0.28;   // left hand
  local.row(21) << -0.24, 0.02 + arm_raise, 0.28;  // right hand

  const double c = std::cos(yaw), s = std::sin(yaw);
  MatX3 world(skel::kJoints, 3);
  for (int j = 0; j < skel::kJoints; ++j) {
    const double x = local(j, 0), y = local(j, 1), z = local(j, 2);
    world(j, 0) = c * x + s * z + pelvis.x();
    world(j, 1) = y + pelvis.y();
    world(j, 2) = -s * x + c * z + pelvis.z();
  }
  return world;
}

JointSeq walking_clip(int L) {
  JointSeq joints;
  for (int l = 0; l < L; ++l) {
    const double t = static_cast<double>(l) / 30.0;
    const Vec3 pelvis(0.3 * t, 0.92 + 0.01 * std::sin(4 * t), 0.8 * t);
    const double yaw = 0.2 * std::sin(t);
    joints.push_back(pose_figure(pelvis, yaw, 0.05 * std::sin(2 * t)));
  }
  return joints;
}

}  // namespace

TEST_CASE("encode and recover round trip") {
  JointSeq joints = walking_clip(40);
  MotionSequence m = encode_motion(joints, MaskMat(), 30.0);
  CHECK(m.features.rows() == 40);
  CHECK(m.features.cols() == 263);

  JointSeq back = recover_joints(m);
  MotionSequence m2 = encode_motion(back, MaskMat(), 30.0);
  CHECK((m.features - m2.features).cwiseAbs().maxCoeff() < 1e-9);

  JointSeq back2 = recover_joints(m2);
  for (std::size_t l = 0; l < back.size(); ++l)
    CHECK((back[l] - back2[l]).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("encoding is invariant to horizontal placement and heading") {
  JointSeq joints = walking_clip(20);
  const double theta = 1.1;
  const double c = std::cos(theta), s = std::sin(theta);
  JointSeq moved(joints.size());
  for (std::size_t l = 0; l < joints.size(); ++l) {
    MatX3 f(skel::kJoints, 3);
    for (int j = 0; j < skel::kJoints; ++j) {
      const double x = joints[l](j, 0), z = joints[l](j, 2);
      f(j, 0) = c * x + s * z + 4.2;
      f(j, 1) = joints[l](j, 1);
      f(j, 2) = -s * x + c * z - 1.7;
    }
    moved[l] = f;
  }
  MotionSequence a = encode_motion(joints, MaskMat(), 30.0);
  MotionSequence b = encode_motion(moved, MaskMat(), 30.0);
  CHECK((a.features - b.features).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("zero root velocity keeps the pelvis fixed") {
  JointSeq still(5, pose_figure(Vec3(0, 0.9, 0), 0.0));
  MotionSequence m = encode_motion(still, MaskMat(), 30.0);
  JointSeq back = recover_joints(m);
  for (const auto& f : back) {
    CHECK(std::abs(f(skel::kPelvis, 0)) < 1e-12);
    CHECK(std::abs(f(skel::kPelvis, 2)) < 1e-12);
  }
}

TEST_CASE("constant velocity integrates to (L-1) steps") {
  const int L = 12;
  JointSeq joints;
  for (int l = 0; l < L; ++l)
    joints.push_back(pose_figure(Vec3(0.0, 0.9, 0.02 * l), 0.0));
  MotionSequence m = encode_motion(joints, MaskMat(), 30.0);
  JointSeq back = recover_joints(m);
  CHECK(back.back()(skel::kPelvis, 2) ==
        doctest::Approx(0.02 * (L - 1)).epsilon(1e-9));
}

TEST_CASE("differentiable recovery matches the direct recovery") {
  JointSeq joints = walking_clip(15);
  MotionSequence m = encode_motion(joints, MaskMat(), 30.0);
  Mat direct = joints_to_mat(recover_joints(m));
  Mat viaVar = recover_joints_var(nn::Var::constant(m.features)).value();
  CHECK(direct.rows() == viaVar.rows());
  CHECK((direct - viaVar).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("differentiable recovery gradient check") {
  JointSeq joints = walking_clip(4);
  MotionSequence m = encode_motion(joints, MaskMat(), 30.0);
  nn::Var features(m.features, true);
  hoimo::testing::check_grads({features}, [&] {
    return nn::mean_all(nn::square(recover_joints_var(features)));
  }, 1e-5, 7);
}

TEST_CASE("foot contact detection") {
  JointSeq joints = walking_clip(10);
  // Plant both feet: zero velocity, ankles low.
  JointSeq planted(10, joints[0]);
  MaskMat contacts = detect_foot_contacts(planted, 30.0);
  for (Eigen::Index l = 0; l < 10; ++l)
    for (int c = 0; c < 4; ++c) CHECK(contacts(l, c));

  // Raise the figure far off the ground: no contact.
  JointSeq airborne = planted;
  for (auto& f : airborne) f.col(1).array() += 1.0;
  MaskMat none = detect_foot_contacts(airborne, 30.0);
  for (Eigen::Index l = 0; l < 10; ++l)
    for (int c = 0; c < 4; ++c) CHECK_FALSE(none(l, c));
}

TEST_CASE("hand trajectory extracts the wrist rows") {
  JointSeq joints = walking_clip(6);
  Mat h = hand_trajectory(joints);
  REQUIRE(h.rows() == 6);
  REQUIRE(h.cols() == 6);
  CHECK((h.block<1, 3>(2, 0) - joints[2].row(skel::kLeftHand)).norm() == 0.0);
  CHECK((h.block<1, 3>(2, 3) - joints[2].row(skel::kRightHand)).norm() == 0.0);
}

TEST_CASE("validation rejects fractional contact channels") {
  JointSeq joints = walking_clip(3);
  MotionSequence m = encode_motion(joints, MaskMat(), 30.0);
  m.features(1, feat::kContact + 2) = 0.5;
  CHECK_THROWS_AS(m.validate(), InvalidInput);
}

TEST_CASE("motion persistence is bitwise for f64") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "hoimo_motion_io";
  fs::create_directories(dir);
  JointSeq joints = walking_clip(8);
  MaskMat contacts = detect_foot_contacts(joints, 30.0);
  MotionSequence m = encode_motion(joints, contacts, 30.0);
  save_motion(dir / "clip", m, "12ab");
  MotionSequence back = load_motion(dir / "clip");
  CHECK(back.fps == 30.0);
  CHECK((back.features - m.features).cwiseAbs().maxCoeff() == 0.0);
  fs::remove_all(dir);
}
