#include "hoimotion/motion.hpp"

#include "hoimotion/tensor_io.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <map>
#include <string>

namespace hoimo::motion {

namespace skel {
const std::array<int, kJoints> kParent = {
    -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19};
const std::array<const char*, kJoints> kNames = {
    "pelvis",        "left_hip",      "right_hip",  "spine1",        "left_knee",
    "right_knee",    "spine2",        "left_ankle", "right_ankle",   "spine3",
    "left_toe",      "right_toe",     "neck",       "left_collar",   "right_collar",
    "head",          "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_hand",     "right_hand"};
}  // namespace skel

namespace {

double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

// Yaw of the body from the hip axis; forward = cross(across, up) so a
// figure with its left hip at +x faces +z at yaw 0.
double yaw_from_frame(const MatX3& pose) {
  const Vec3 across = (pose.row(skel::kLeftHip) - pose.row(skel::kRightHip)).transpose();
  Vec3 fwd = Vec3(across.x(), 0.0, across.z()).cross(Vec3(0, 1, 0));
  const double n = fwd.norm();
  if (n < 1e-12) return 0.0;
  fwd /= n;
  return std::atan2(fwd.x(), fwd.z());
}

// R(yaw) maps the canonical frame to world: x' = c x + s z, z' = -s x + c z.
inline void rot_y(double yaw, double x, double z, double& ox, double& oz) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  ox = c * x + s * z;
  oz = -s * x + c * z;
}

inline void rot_y_inv(double yaw, double x, double z, double& ox, double& oz) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  ox = c * x - s * z;
  oz = s * x + c * z;
}

}  // namespace

void MotionSequence::validate() const {
  if (features.cols() != feat::kDim) throw InvalidInput("motion feature dim must be 263");
  if (features.rows() < 1) throw InvalidInput("motion sequence is empty");
  if (!features.allFinite()) throw InvalidInput("non-finite motion feature");
  if (!(fps > 0.0)) throw InvalidInput("fps must be positive");
  for (Eigen::Index l = 0; l < features.rows(); ++l)
    for (int c = 0; c < 4; ++c) {
      const double v = features(l, feat::kContact + c);
      if (v != 0.0 && v != 1.0) throw InvalidInput("contact channel not in {0,1}");
    }
}

MotionSequence encode_motion(const JointSeq& joints, const MaskMat& contacts, double fps) {
  const Eigen::Index L = static_cast<Eigen::Index>(joints.size());
  if (L < 1) throw InvalidInput("motion sequence is empty");
  for (const auto& f : joints)
    if (f.rows() != skel::kJoints || !f.allFinite())
      throw InvalidInput("each frame must be 22 finite joints");
  if (contacts.size() != 0 && (contacts.rows() != L || contacts.cols() != 4))
    throw InvalidInput("contacts must be L x 4");

  // Canonicalize: frame-0 pelvis above the origin, facing +z.
  const double yaw0 = yaw_from_frame(joints[0]);
  const double px0 = joints[0](skel::kPelvis, 0);
  const double pz0 = joints[0](skel::kPelvis, 2);
  JointSeq canon(static_cast<std::size_t>(L));
  for (Eigen::Index l = 0; l < L; ++l) {
    MatX3 f(skel::kJoints, 3);
    for (int j = 0; j < skel::kJoints; ++j) {
      double x, z;
      rot_y_inv(yaw0, joints[static_cast<std::size_t>(l)](j, 0) - px0,
                joints[static_cast<std::size_t>(l)](j, 2) - pz0, x, z);
      f(j, 0) = x;
      f(j, 1) = joints[static_cast<std::size_t>(l)](j, 1);
      f(j, 2) = z;
    }
    canon[static_cast<std::size_t>(l)] = std::move(f);
  }

  std::vector<double> yaw(static_cast<std::size_t>(L));
  for (Eigen::Index l = 0; l < L; ++l) yaw[static_cast<std::size_t>(l)] = yaw_from_frame(canon[static_cast<std::size_t>(l)]);

  MotionSequence out;
  out.fps = fps;
  out.features = Mat::Zero(L, feat::kDim);
  for (Eigen::Index l = 0; l < L; ++l) {
    const MatX3& cur = canon[static_cast<std::size_t>(l)];
    const double yl = yaw[static_cast<std::size_t>(l)];
    Mat& F = out.features;

    if (l + 1 < L) {
      const MatX3& nxt = canon[static_cast<std::size_t>(l + 1)];
      F(l, feat::kYawVel) = wrap_angle(yaw[static_cast<std::size_t>(l + 1)] - yl);
      double vx, vz;
      rot_y_inv(yl, nxt(skel::kPelvis, 0) - cur(skel::kPelvis, 0),
                nxt(skel::kPelvis, 2) - cur(skel::kPelvis, 2), vx, vz);
      F(l, feat::kRootVel) = vx;
      F(l, feat::kRootVel + 1) = vz;
      for (int j = 0; j < skel::kJoints; ++j) {
        double wx, wz;
        rot_y_inv(yl, nxt(j, 0) - cur(j, 0), nxt(j, 2) - cur(j, 2), wx, wz);
        F(l, feat::kVel + 3 * j) = wx;
        F(l, feat::kVel + 3 * j + 1) = nxt(j, 1) - cur(j, 1);
        F(l, feat::kVel + 3 * j + 2) = wz;
      }
    }
    F(l, feat::kRootHeight) = cur(skel::kPelvis, 1);

    for (int j = 1; j < skel::kJoints; ++j) {
      double qx, qz;
      rot_y_inv(yl, cur(j, 0) - cur(skel::kPelvis, 0), cur(j, 2) - cur(skel::kPelvis, 2), qx, qz);
      const double qy = cur(j, 1) - cur(skel::kPelvis, 1);
      F(l, feat::kLocalPos + 3 * (j - 1)) = qx;
      F(l, feat::kLocalPos + 3 * (j - 1) + 1) = qy;
      F(l, feat::kLocalPos + 3 * (j - 1) + 2) = qz;
    }
    // Bone features from the local pose: unit direction plus raw bone.
    for (int j = 1; j < skel::kJoints; ++j) {
      const int p = skel::kParent[static_cast<std::size_t>(j)];
      Vec3 qj(F(l, feat::kLocalPos + 3 * (j - 1)), F(l, feat::kLocalPos + 3 * (j - 1) + 1),
              F(l, feat::kLocalPos + 3 * (j - 1) + 2));
      Vec3 qp = Vec3::Zero();
      if (p != skel::kPelvis)
        qp = Vec3(F(l, feat::kLocalPos + 3 * (p - 1)), F(l, feat::kLocalPos + 3 * (p - 1) + 1),
                  F(l, feat::kLocalPos + 3 * (p - 1) + 2));
      const Vec3 bone = qj - qp;
      const double n = bone.norm();
      const Vec3 unit = n > 1e-12 ? Vec3(bone / n) : Vec3::Zero();
      for (int k = 0; k < 3; ++k) {
        F(l, feat::kBone + 6 * (j - 1) + k) = unit[k];
        F(l, feat::kBone + 6 * (j - 1) + 3 + k) = bone[k];
      }
    }
    if (contacts.size() != 0)
      for (int c = 0; c < 4; ++c) F(l, feat::kContact + c) = contacts(l, c) ? 1.0 : 0.0;
  }
  return out;
}

JointSeq recover_joints(const MotionSequence& motion) {
  motion.validate();
  const Mat& F = motion.features;
  const Eigen::Index L = F.rows();
  JointSeq out(static_cast<std::size_t>(L));
  double yaw = 0.0, px = 0.0, pz = 0.0;
  for (Eigen::Index l = 0; l < L; ++l) {
    MatX3 f(skel::kJoints, 3);
    const double py = F(l, feat::kRootHeight);
    f(skel::kPelvis, 0) = px;
    f(skel::kPelvis, 1) = py;
    f(skel::kPelvis, 2) = pz;
    for (int j = 1; j < skel::kJoints; ++j) {
      const double qx = F(l, feat::kLocalPos + 3 * (j - 1));
      const double qy = F(l, feat::kLocalPos + 3 * (j - 1) + 1);
      const double qz = F(l, feat::kLocalPos + 3 * (j - 1) + 2);
      double wx, wz;
      rot_y(yaw, qx, qz, wx, wz);
      f(j, 0) = wx + px;
      f(j, 1) = qy + py;
      f(j, 2) = wz + pz;
    }
    out[static_cast<std::size_t>(l)] = std::move(f);
    double dx, dz;
    rot_y(yaw, F(l, feat::kRootVel), F(l, feat::kRootVel + 1), dx, dz);
    px += dx;
    pz += dz;
    yaw += F(l, feat::kYawVel);
  }
  return out;
}

nn::Var recover_joints_var(const nn::Var& features) {
  using namespace nn;
  const Eigen::Index L = features.rows();
  if (features.cols() != feat::kDim) throw InvalidInput("motion feature dim must be 263");

  // Strictly lower-triangular ones: (S x)_l = sum_{k < l} x_k.
  Mat S = Mat::Zero(L, L);
  for (Eigen::Index i = 1; i < L; ++i)
    for (Eigen::Index k = 0; k < i; ++k) S(i, k) = 1.0;
  const Var cum = Var::constant(S);

  const Var yaw = matmul(cum, slice_cols(features, feat::kYawVel, 1));  // L x 1
  const Var c = cos_op(yaw);
  const Var s = sin_op(yaw);

  const Var vx = slice_cols(features, feat::kRootVel, 1);
  const Var vz = slice_cols(features, feat::kRootVel + 1, 1);
  const Var dx = add(mul(c, vx), mul(s, vz));
  const Var dz = add(neg(mul(s, vx)), mul(c, vz));
  const Var px = matmul(cum, dx);
  const Var pz = matmul(cum, dz);
  const Var py = slice_cols(features, feat::kRootHeight, 1);

  std::vector<Var> cols;
  cols.reserve(3 * skel::kJoints);
  cols.push_back(px);
  cols.push_back(py);
  cols.push_back(pz);
  for (int j = 1; j < skel::kJoints; ++j) {
    const Var qx = slice_cols(features, feat::kLocalPos + 3 * (j - 1), 1);
    const Var qy = slice_cols(features, feat::kLocalPos + 3 * (j - 1) + 1, 1);
    const Var qz = slice_cols(features, feat::kLocalPos + 3 * (j - 1) + 2, 1);
    cols.push_back(add(add(mul(c, qx), mul(s, qz)), px));
    cols.push_back(add(qy, py));
    cols.push_back(add(add(neg(mul(s, qx)), mul(c, qz)), pz));
  }
  return concat_cols(cols);
}

MaskMat detect_foot_contacts(const JointSeq& joints, double fps, double height_thresh,
                             double vel_thresh) {
  const Eigen::Index L = static_cast<Eigen::Index>(joints.size());
  MaskMat out(L, 4);
  for (Eigen::Index l = 0; l < L; ++l) {
    for (int c = 0; c < 4; ++c) {
      const int j = skel::kContactJoints[static_cast<std::size_t>(c)];
      const double h = joints[static_cast<std::size_t>(l)](j, 1);
      double v = 0.0;
      if (l + 1 < L)
        v = (joints[static_cast<std::size_t>(l + 1)].row(j) - joints[static_cast<std::size_t>(l)].row(j)).norm() * fps;
      else if (l > 0)
        v = (joints[static_cast<std::size_t>(l)].row(j) - joints[static_cast<std::size_t>(l - 1)].row(j)).norm() * fps;
      out(l, c) = h < height_thresh && v < vel_thresh;
    }
  }
  return out;
}

Mat hand_trajectory(const JointSeq& joints) {
  const Eigen::Index L = static_cast<Eigen::Index>(joints.size());
  Mat out(L, 6);
  for (Eigen::Index l = 0; l < L; ++l) {
    out.block<1, 3>(l, 0) = joints[static_cast<std::size_t>(l)].row(skel::kLeftHand);
    out.block<1, 3>(l, 3) = joints[static_cast<std::size_t>(l)].row(skel::kRightHand);
  }
  return out;
}

Mat joints_to_mat(const JointSeq& joints) {
  const Eigen::Index L = static_cast<Eigen::Index>(joints.size());
  Mat out(L, 3 * skel::kJoints);
  for (Eigen::Index l = 0; l < L; ++l)
    for (int j = 0; j < skel::kJoints; ++j)
      out.block<1, 3>(l, 3 * j) = joints[static_cast<std::size_t>(l)].row(j);
  return out;
}

JointSeq mat_to_joints(const Mat& m) {
  if (m.cols() != 3 * skel::kJoints) throw InvalidInput("joint matrix must be L x 66");
  JointSeq out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index l = 0; l < m.rows(); ++l) {
    MatX3 f(skel::kJoints, 3);
    for (int j = 0; j < skel::kJoints; ++j) f.row(j) = m.block<1, 3>(l, 3 * j);
    out[static_cast<std::size_t>(l)] = std::move(f);
  }
  return out;
}

void save_motion(const std::filesystem::path& prefix, const MotionSequence& m,
                 const std::string& config_hash) {
  m.validate();
  std::vector<double> data(static_cast<std::size_t>(m.length() * feat::kDim));
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < m.features.rows(); ++i)
    for (Eigen::Index j = 0; j < m.features.cols(); ++j) data[k++] = m.features(i, j);
  std::map<std::string, std::string> extras{{"kind", "motion_sequence"},
                                            {"fps", format_double(m.fps)}};
  if (!config_hash.empty()) extras["config_hash"] = config_hash;
  // f64 on disk so contacts stay binary and recovered joints match saved
  // fixtures bitwise.
  io::save_tensor(prefix, {m.length(), feat::kDim}, data, "f64", extras);
}

MotionSequence load_motion(const std::filesystem::path& prefix) {
  const io::TensorFile tf = io::load_tensor(prefix);
  if (tf.shape.size() != 2 || tf.shape[1] != feat::kDim)
    throw InvalidInput("motion tensor must have shape [L, 263]");
  MotionSequence m;
  if (auto it = tf.extras.find("fps"); it != tf.extras.end()) m.fps = std::stod(it->second);
  m.features.resize(tf.shape[0], feat::kDim);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < m.features.rows(); ++i)
    for (Eigen::Index j = 0; j < m.features.cols(); ++j) m.features(i, j) = tf.data[k++];
  m.validate();
  return m;
}

}  // namespace hoimo::motion
