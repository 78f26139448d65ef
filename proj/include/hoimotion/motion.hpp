#pragma once

#include "hoimotion/common.hpp"
#include "hoimotion/nn/autograd.hpp"

#include <array>
#include <filesystem>
#include <vector>

namespace hoimo::motion {

// 22-joint skeleton, SMPL-style ordering. Motion lives on the XOZ plane,
// y is up.
namespace skel {
inline constexpr int kJoints = 22;
inline constexpr int kPelvis = 0;
inline constexpr int kLeftHip = 1;
inline constexpr int kRightHip = 2;
inline constexpr int kLeftAnkle = 7;
inline constexpr int kRightAnkle = 8;
inline constexpr int kLeftToe = 10;
inline constexpr int kRightToe = 11;
inline constexpr int kLeftHand = 20;
inline constexpr int kRightHand = 21;
extern const std::array<int, kJoints> kParent;
extern const std::array<const char*, kJoints> kNames;
// Contact channel order: left ankle, left toe, right ankle, right toe.
inline constexpr std::array<int, 4> kContactJoints = {kLeftAnkle, kLeftToe, kRightAnkle, kRightToe};
}  // namespace skel

// Per-frame feature layout, total 263:
//   [0]        yaw angular velocity (rad/frame)
//   [1..2]     root linear velocity on xz, root frame (m/frame)
//   [3]        root height y (m)
//   [4..66]    21 non-root local joint positions, yaw-canonicalized
//   [67..192]  21 bone features: unit bone direction + raw bone vector
//   [193..258] 22 joint velocities in the canonical frame (m/frame)
//   [259..262] foot-contact labels in {0,1}
namespace feat {
inline constexpr int kDim = 263;
inline constexpr int kYawVel = 0;
inline constexpr int kRootVel = 1;
inline constexpr int kRootHeight = 3;
inline constexpr int kLocalPos = 4;
inline constexpr int kBone = 67;
inline constexpr int kVel = 193;
inline constexpr int kContact = 259;
}  // namespace feat

struct MotionSequence {
  Mat features;  // L x 263
  double fps = 30.0;

  Eigen::Index length() const { return features.rows(); }
  void validate() const;  // dim 263, finite, contact channels in {0,1}
};

using JointSeq = std::vector<MatX3>;  // L frames of 22 x 3 world positions

// Canonicalizes the clip (frame-0 pelvis above the origin, facing +z) and
// writes the feature representation; contacts may be empty (all zeros).
MotionSequence encode_motion(const JointSeq& joints, const MaskMat& contacts, double fps);

// Integrates root velocities and re-poses local joints; inverse of
// encode_motion on canonicalized clips.
JointSeq recover_joints(const MotionSequence& motion);

// Differentiable recovery: features (L x 263) -> global joints (L x 66,
// joint-major x,y,z). Used by guidance losses.
nn::Var recover_joints_var(const nn::Var& features);

// Heuristic labels for data without ground-truth contacts: foot is in
// contact when below height_thresh and moving slower than vel_thresh (m/s).
MaskMat detect_foot_contacts(const JointSeq& joints, double fps, double height_thresh = 0.06,
                             double vel_thresh = 0.30);

// L x 6 world positions of [left hand, right hand].
Mat hand_trajectory(const JointSeq& joints);

Mat joints_to_mat(const JointSeq& joints);  // L x 66
JointSeq mat_to_joints(const Mat& m);

void save_motion(const std::filesystem::path& prefix, const MotionSequence& m,
                 const std::string& config_hash = "");
MotionSequence load_motion(const std::filesystem::path& prefix);

}  // namespace hoimo::motion
