#pragma once

#include "hoimotion/common.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace hoimo::geometry {

// Sequential point cloud of the interactive target, world frame, y-up,
// motion on the XOZ plane. Every frame has the same point count.
struct PointCloudSequence {
  std::vector<MatX3> frames;  // each N x 3

  Eigen::Index length() const { return static_cast<Eigen::Index>(frames.size()); }
  Eigen::Index points_per_frame() const { return frames.empty() ? 0 : frames[0].rows(); }
  void validate() const;  // finite coords, N identical, L >= 1
};

// Fixed random points inside a ball; a cloud is encoded by each basis
// point's offset to its nearest cloud point.
struct BasisPointSet {
  MatX3 basis;  // N x 3, norms <= radius
  std::uint64_t seed = 0;
  double radius = 1.0;
};

// Per-frame BPS features: for each basis point the offset to its nearest
// cloud point, concatenated with that frame's cloud centroid (N x 6).
struct BpsFrame {
  Mat features;  // N x 6
};

// Max-min downsampling: exact subset enumeration on tiny instances, seeded
// greedy farthest-point sampling otherwise; resample with replacement when
// M < target_n.
MatX3 downsample_cloud(const MatX3& raw, Eigen::Index target_n, std::uint64_t seed);

// Uniform samples in the solid ball via radius inverse-CDF (u^(1/3)) and a
// uniform sphere direction; deterministic per seed.
BasisPointSet sample_basis(std::uint64_t seed, Eigen::Index n, double radius);

BpsFrame bps_encode(const MatX3& frame, const BasisPointSet& basis);

// Per-frame bps_encode over a sequence; row l of the result is frame l's
// N x 6 feature block flattened row-major.
Mat encode_sequence(const PointCloudSequence& seq, const BasisPointSet& basis);

void save_cloud(const std::filesystem::path& prefix, const PointCloudSequence& seq,
                const std::string& config_hash = "");
PointCloudSequence load_cloud(const std::filesystem::path& prefix);

}  // namespace hoimo::geometry
