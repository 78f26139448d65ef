#include "hoimotion/geometry.hpp"

#include "hoimotion/rng.hpp"
#include "hoimotion/tensor_io.hpp"

#include <cmath>
#include <limits>
#include <map>

namespace hoimo::geometry {

void PointCloudSequence::validate() const {
  if (frames.empty()) throw InvalidInput("point cloud sequence is empty");
  const Eigen::Index n = frames[0].rows();
  if (n == 0) throw InvalidInput("point cloud frame has zero points");
  for (std::size_t l = 0; l < frames.size(); ++l) {
    const auto& f = frames[l];
    if (f.rows() != n)
      throw InvalidInput("point count changes at frame " + std::to_string(l));
    if (!f.allFinite())
      throw InvalidInput("non-finite coordinate at frame " + std::to_string(l));
  }
}

namespace {

double min_pairwise_sq(const MatX3& pts, const std::vector<Eigen::Index>& sel) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < sel.size(); ++a)
    for (std::size_t b = a + 1; b < sel.size(); ++b)
      best = std::min(best, (pts.row(sel[a]) - pts.row(sel[b])).squaredNorm());
  return best;
}

// Binomial coefficient with saturation, for the exact-solver size guard.
std::uint64_t choose_capped(Eigen::Index m, Eigen::Index k, std::uint64_t cap) {
  if (k > m - k) k = m - k;
  std::uint64_t c = 1;
  for (Eigen::Index i = 1; i <= k; ++i) {
    c = c * static_cast<std::uint64_t>(m - k + i) / static_cast<std::uint64_t>(i);
    if (c > cap) return cap + 1;
  }
  return c;
}

// Exhaustive max-min subset; greedy farthest-point sampling is not optimal
// (on a cube it grabs the main diagonal and caps the min pairwise distance
// at an edge length), so tiny instances are solved exactly.
std::vector<Eigen::Index> exact_max_min(const MatX3& raw, Eigen::Index target_n) {
  const Eigen::Index m = raw.rows();
  std::vector<bool> pick(static_cast<std::size_t>(m), false);
  std::fill(pick.begin(), pick.begin() + target_n, true);
  std::vector<Eigen::Index> best_sel, sel;
  double best = -1.0;
  do {
    sel.clear();
    for (Eigen::Index i = 0; i < m; ++i)
      if (pick[static_cast<std::size_t>(i)]) sel.push_back(i);
    const double score = min_pairwise_sq(raw, sel);
    if (score > best) {
      best = score;
      best_sel = sel;
    }
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best_sel;
}

}  // namespace

MatX3 downsample_cloud(const MatX3& raw, Eigen::Index target_n, std::uint64_t seed) {
  if (target_n <= 0) throw InvalidInput("target_n must be positive");
  if (raw.rows() == 0) throw InvalidInput("cannot downsample an empty cloud");
  if (!raw.allFinite()) throw InvalidInput("non-finite coordinate in cloud");

  const Eigen::Index m = raw.rows();
  Rng rng(seed);
  MatX3 out(target_n, 3);

  if (m < target_n) {
    // Too few points: resample with replacement, keeping all originals first.
    for (Eigen::Index i = 0; i < target_n; ++i) {
      const Eigen::Index src = i < m ? i : static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m)));
      out.row(i) = raw.row(src);
    }
    return out;
  }

  std::vector<Eigen::Index> sel;
  if (m > target_n && choose_capped(m, target_n, 20000) <= 20000) {
    sel = exact_max_min(raw, target_n);
  } else {
    // Farthest-point sampling: greedy max-min distance from a seeded start.
    std::vector<double> best(static_cast<std::size_t>(m), std::numeric_limits<double>::infinity());
    sel.resize(static_cast<std::size_t>(target_n));
    Eigen::Index current = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m)));
    sel[0] = current;
    for (Eigen::Index k = 1; k < target_n; ++k) {
      Eigen::Index next = 0;
      double far = -1.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        const double d = (raw.row(i) - raw.row(current)).squaredNorm();
        if (d < best[static_cast<std::size_t>(i)]) best[static_cast<std::size_t>(i)] = d;
        if (best[static_cast<std::size_t>(i)] > far) {
          far = best[static_cast<std::size_t>(i)];
          next = i;
        }
      }
      current = next;
      sel[static_cast<std::size_t>(k)] = current;
    }
  }

  for (Eigen::Index k = 0; k < target_n; ++k) out.row(k) = raw.row(sel[static_cast<std::size_t>(k)]);
  return out;
}

BasisPointSet sample_basis(std::uint64_t seed, Eigen::Index n, double radius) {
  if (n <= 0) throw InvalidInput("basis size must be positive");
  if (!(radius > 0.0)) throw InvalidInput("basis radius must be positive");
  Rng rng(seed);
  BasisPointSet bps;
  bps.seed = seed;
  bps.radius = radius;
  bps.basis.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    // Direction via normalized Gaussian, radius via inverse CDF of r^2 dr.
    Vec3 dir;
    double norm = 0.0;
    do {
      dir = Vec3(rng.normal(), rng.normal(), rng.normal());
      norm = dir.norm();
    } while (norm < 1e-12);
    const double r = radius * std::cbrt(rng.uniform());
    bps.basis.row(i) = (dir / norm * r).transpose();
  }
  return bps;
}

BpsFrame bps_encode(const MatX3& frame, const BasisPointSet& basis) {
  if (frame.rows() == 0) throw InvalidInput("cannot encode an empty frame");
  if (!frame.allFinite()) throw InvalidInput("non-finite coordinate in frame");
  const Eigen::Index n = basis.basis.rows();
  const Eigen::Index m = frame.rows();
  const Vec3 centroid = frame.colwise().mean().transpose();

  BpsFrame out;
  out.features.resize(n, 6);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 b = basis.basis.row(i).transpose();
    Eigen::Index arg = 0;
    double bestd = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < m; ++j) {
      const double d = (frame.row(j).transpose() - b).squaredNorm();
      if (d < bestd) {
        bestd = d;
        arg = j;
      }
    }
    const Vec3 offset = frame.row(arg).transpose() - b;
    out.features.block<1, 3>(i, 0) = offset.transpose();
    out.features.block<1, 3>(i, 3) = centroid.transpose();
  }
  return out;
}

Mat encode_sequence(const PointCloudSequence& seq, const BasisPointSet& basis) {
  seq.validate();
  const Eigen::Index L = seq.length();
  const Eigen::Index n = basis.basis.rows();
  Mat out(L, n * 6);
  for (Eigen::Index l = 0; l < L; ++l) {
    const BpsFrame f = bps_encode(seq.frames[static_cast<std::size_t>(l)], basis);
    for (Eigen::Index i = 0; i < n; ++i)
      out.block(l, i * 6, 1, 6) = f.features.row(i);
  }
  return out;
}

void save_cloud(const std::filesystem::path& prefix, const PointCloudSequence& seq,
                const std::string& config_hash) {
  seq.validate();
  std::vector<double> data;
  data.resize(static_cast<std::size_t>(seq.length() * seq.points_per_frame() * 3));
  std::size_t k = 0;
  for (const auto& f : seq.frames)
    for (Eigen::Index i = 0; i < f.rows(); ++i)
      for (Eigen::Index j = 0; j < 3; ++j) data[k++] = f(i, j);
  std::map<std::string, std::string> extras{{"kind", "point_cloud_sequence"}};
  if (!config_hash.empty()) extras["config_hash"] = config_hash;
  io::save_tensor(prefix, {seq.length(), seq.points_per_frame(), 3}, data, "f32", extras);
}

PointCloudSequence load_cloud(const std::filesystem::path& prefix) {
  const io::TensorFile tf = io::load_tensor(prefix);
  if (tf.shape.size() != 3 || tf.shape[2] != 3)
    throw InvalidInput("point cloud tensor must have shape [L, N, 3]");
  PointCloudSequence seq;
  const Eigen::Index L = tf.shape[0];
  const Eigen::Index n = tf.shape[1];
  seq.frames.resize(static_cast<std::size_t>(L));
  std::size_t k = 0;
  for (Eigen::Index l = 0; l < L; ++l) {
    MatX3 f(n, 3);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < 3; ++j) f(i, j) = tf.data[k++];
    seq.frames[static_cast<std::size_t>(l)] = std::move(f);
  }
  seq.validate();
  return seq;
}

}  // namespace hoimo::geometry
