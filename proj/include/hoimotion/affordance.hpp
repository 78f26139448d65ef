#pragma once

#include "hoimotion/common.hpp"
#include "hoimotion/geometry.hpp"

#include <filesystem>
#include <vector>

namespace hoimo::affordance {

// Per frame, per cloud point, per joint Euclidean distance in meters.
struct DistanceMap {
  std::vector<Mat> values;  // L entries, each N x J

  Eigen::Index length() const { return static_cast<Eigen::Index>(values.size()); }
};

// exp(-0.5 * d / sigma^2) applied to the raw distance; 1 exactly at d = 0,
// strictly decreasing in d.
struct AffordanceMap {
  std::vector<Mat> values;  // L entries, each N x J, entries in (0, 1]
  double sigma = 0.2;

  Eigen::Index length() const { return static_cast<Eigen::Index>(values.size()); }
};

// Per (frame, joint) contact flag: nearest cloud point within tau (inclusive).
struct ContactMask {
  MaskMat values;  // L x J
  double tau = 0.10;
};

// joints: L entries of J x 3 world positions.
using JointSequence = std::vector<MatX3>;

DistanceMap distance_map(const geometry::PointCloudSequence& cloud, const JointSequence& joints);
AffordanceMap affordance_from_distance(const DistanceMap& d, double sigma);
ContactMask contact_mask(const JointSequence& joints, const geometry::PointCloudSequence& cloud,
                         double tau);

// Per-point max over joints, the compact L x N signal the diffusion stages use.
Mat reduce_affordance(const AffordanceMap& a);

void save_affordance(const std::filesystem::path& prefix, const AffordanceMap& a,
                     const std::string& config_hash = "");
AffordanceMap load_affordance(const std::filesystem::path& prefix);

}  // namespace hoimo::affordance
