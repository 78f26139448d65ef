#include "hoimotion/affordance.hpp"

#include "hoimotion/tensor_io.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <string>

namespace hoimo::affordance {

DistanceMap distance_map(const geometry::PointCloudSequence& cloud, const JointSequence& joints) {
  cloud.validate();
  if (static_cast<Eigen::Index>(joints.size()) != cloud.length())
    throw InvalidInput("cloud and joints disagree on sequence length");

  DistanceMap out;
  out.values.resize(joints.size());
  for (std::size_t l = 0; l < joints.size(); ++l) {
    const MatX3& pts = cloud.frames[l];
    const MatX3& jnt = joints[l];
    Mat d(pts.rows(), jnt.rows());
    for (Eigen::Index n = 0; n < pts.rows(); ++n)
      for (Eigen::Index j = 0; j < jnt.rows(); ++j)
        d(n, j) = (pts.row(n) - jnt.row(j)).norm();
    out.values[l] = std::move(d);
  }
  return out;
}

AffordanceMap affordance_from_distance(const DistanceMap& d, double sigma) {
  if (!(sigma > 0.0)) throw InvalidInput("sigma must be positive");
  AffordanceMap out;
  out.sigma = sigma;
  out.values.resize(d.values.size());
  const double inv = 0.5 / (sigma * sigma);
  for (std::size_t l = 0; l < d.values.size(); ++l)
    out.values[l] = (-inv * d.values[l].array()).exp().matrix();
  return out;
}

ContactMask contact_mask(const JointSequence& joints, const geometry::PointCloudSequence& cloud,
                         double tau) {
  if (!(tau > 0.0)) throw InvalidInput("tau must be positive");
  cloud.validate();
  if (static_cast<Eigen::Index>(joints.size()) != cloud.length())
    throw InvalidInput("cloud and joints disagree on sequence length");

  const Eigen::Index L = cloud.length();
  const Eigen::Index J = joints.empty() ? 0 : joints[0].rows();
  ContactMask mask;
  mask.tau = tau;
  mask.values.resize(L, J);
  for (Eigen::Index l = 0; l < L; ++l) {
    const MatX3& pts = cloud.frames[static_cast<std::size_t>(l)];
    const MatX3& jnt = joints[static_cast<std::size_t>(l)];
    if (jnt.rows() != J) throw InvalidInput("joint count changes across frames");
    for (Eigen::Index j = 0; j < J; ++j) {
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index n = 0; n < pts.rows(); ++n)
        best = std::min(best, (pts.row(n) - jnt.row(j)).norm());
      mask.values(l, j) = best <= tau;
    }
  }
  return mask;
}

Mat reduce_affordance(const AffordanceMap& a) {
  if (a.values.empty()) throw InvalidInput("empty affordance map");
  const Eigen::Index L = a.length();
  const Eigen::Index n = a.values[0].rows();
  Mat out(L, n);
  for (Eigen::Index l = 0; l < L; ++l)
    out.row(l) = a.values[static_cast<std::size_t>(l)].rowwise().maxCoeff().transpose();
  return out;
}

void save_affordance(const std::filesystem::path& prefix, const AffordanceMap& a,
                     const std::string& config_hash) {
  if (a.values.empty()) throw InvalidInput("empty affordance map");
  const Eigen::Index L = a.length();
  const Eigen::Index n = a.values[0].rows();
  const Eigen::Index J = a.values[0].cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(L * n * J));
  for (const auto& m : a.values)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  std::map<std::string, std::string> extras{{"kind", "affordance_map"},
                                            {"sigma", format_double(a.sigma)}};
  if (!config_hash.empty()) extras["config_hash"] = config_hash;
  io::save_tensor(prefix, {L, n, J}, data, "f32", extras);
}

AffordanceMap load_affordance(const std::filesystem::path& prefix) {
  const io::TensorFile tf = io::load_tensor(prefix);
  if (tf.shape.size() != 3) throw InvalidInput("affordance tensor must have shape [L, N, J]");
  AffordanceMap a;
  if (auto it = tf.extras.find("sigma"); it != tf.extras.end()) a.sigma = std::stod(it->second);
  const Eigen::Index L = tf.shape[0], n = tf.shape[1], J = tf.shape[2];
  a.values.resize(static_cast<std::size_t>(L));
  std::size_t k = 0;
  for (Eigen::Index l = 0; l < L; ++l) {
    Mat m(n, J);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < J; ++j) m(i, j) = tf.data[k++];
    a.values[static_cast<std::size_t>(l)] = std::move(m);
  }
  return a;
}

}  // namespace hoimo::affordance
