#include "doctest.h"

#include "hoimotion/geometry.hpp"
#include "hoimotion/rng.hpp"

#include <algorithm>
#include <filesystem>
#include <limits>
#include <vector>

using namespace hoimo;
using namespace hoimo::geometry;

namespace {

double min_pairwise(const MatX3& pts, const std::vector<int>& idx) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b)
      best = std::min(best, (pts.row(idx[a]) - pts.row(idx[b])).norm());
  return best;
}

std::vector<Eigen::Vector3d> sorted_rows(const MatX3& m) {
  std::vector<Eigen::Vector3d> rows;
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(m.row(i).transpose());
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.x() != b.x()) return a.x() < b.x();
    if (a.y() != b.y()) return a.y() < b.y();
    return a.z() < b.z();
  });
  return rows;
}

}  // namespace

TEST_CASE("downsample with matching size returns a permutation") {
  Rng rng(100);
  MatX3 cloud = rng.normal_mat(1024, 3);
  MatX3 out = downsample_cloud(cloud, 1024, 7);
  auto a = sorted_rows(cloud);
  auto b = sorted_rows(out);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i] - b[i]).norm() == 0.0);
}

TEST_CASE("degenerate cloud is repeated to target size") {
  MatX3 cloud(1, 3);
  cloud << 0.5, -1.0, 2.0;
  MatX3 out = downsample_cloud(cloud, 4, 0);
  REQUIRE(out.rows() == 4);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK((out.row(i) - cloud.row(0)).norm() == 0.0);
}

TEST_CASE("cube corners downsample to a maximally spread 4-subset") {
  MatX3 cube(8, 3);
  int r = 0;
  for (int x : {0, 1})
    for (int y : {0, 1})
      for (int z : {0, 1}) cube.row(r++) << x, y, z;

  MatX3 out = downsample_cloud(cube, 4, 3);

  // Exhaustive oracle over all C(8,4) subsets.
  double best = 0.0;
  std::vector<int> idx{0, 1, 2, 3};
  std::vector<int> all{0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<bool> pick(8, false);
  std::fill(pick.begin(), pick.begin() + 4, true);
  do {
    std::vector<int> subset;
    for (int i = 0; i < 8; ++i)
      if (pick[i]) subset.push_back(i);
    best = std::max(best, min_pairwise(cube, subset));
  } while (std::prev_permutation(pick.begin(), pick.end()));

  std::vector<int> chosen;
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 8; ++j)
      if ((out.row(i) - cube.row(j)).norm() == 0.0) {
        chosen.push_back(static_cast<int>(j));
        break;
      }
  REQUIRE(chosen.size() == 4);
  CHECK(min_pairwise(cube, chosen) == doctest::Approx(best));
}

TEST_CASE("downsampling is deterministic per seed") {
  Rng rng(101);
  MatX3 cloud = rng.normal_mat(200, 3);
  MatX3 a = downsample_cloud(cloud, 32, 5);
  MatX3 b = downsample_cloud(cloud, 32, 5);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("empty cloud is rejected") {
  MatX3 raw(0, 3);
  CHECK_THROWS_WITH_AS(downsample_cloud(raw, 4, 0), "cannot downsample an empty cloud",
                       InvalidInput);
}

TEST_CASE("basis sampling is uniform in the ball") {
  BasisPointSet bps = sample_basis(2024, 1000, 1.0);
  REQUIRE(bps.basis.rows() == 1000);
  double mean_norm = 0.0;
  for (Eigen::Index i = 0; i < 1000; ++i) mean_norm += bps.basis.row(i).norm();
  mean_norm /= 1000.0;
  CHECK(std::abs(mean_norm - 0.75) < 0.03);  // E(norm) = 3r/4

  BasisPointSet again = sample_basis(2024, 1000, 1.0);
  CHECK((bps.basis - again.basis).cwiseAbs().maxCoeff() == 0.0);

  BasisPointSet wide = sample_basis(7, 500, 2.0);
  for (Eigen::Index i = 0; i < wide.basis.rows(); ++i)
    CHECK(wide.basis.row(i).norm() <= 2.0);
}

TEST_CASE("inner half-radius ball holds an eighth of the points") {
  const Eigen::Index n = 100000;
  BasisPointSet bps = sample_basis(99, n, 1.0);
  Eigen::Index inside = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (bps.basis.row(i).norm() <= 0.5) ++inside;
  const double frac = static_cast<double>(inside) / static_cast<double>(n);
  const double se = std::sqrt(0.125 * 0.875 / static_cast<double>(n));
  CHECK(std::abs(frac - 0.125) < 3.0 * se);
}

TEST_CASE("self-encoding yields zero offsets") {
  BasisPointSet bps = sample_basis(1, 16, 1.0);
  BpsFrame f = bps_encode(bps.basis, bps);
  CHECK(f.features.leftCols(3).cwiseAbs().maxCoeff() == 0.0);
  Vec3 centroid = bps.basis.colwise().mean().transpose();
  for (Eigen::Index i = 0; i < 16; ++i)
    CHECK((f.features.block<1, 3>(i, 3).transpose() - centroid).norm() == 0.0);
}

TEST_CASE("singleton cloud encodes offsets to that point") {
  BasisPointSet bps = sample_basis(2, 8, 1.0);
  MatX3 q(1, 3);
  q << 0.3, -0.2, 0.9;
  BpsFrame f = bps_encode(q, bps);
  for (Eigen::Index i = 0; i < 8; ++i) {
    Vec3 expect = q.row(0).transpose() - bps.basis.row(i).transpose();
    CHECK((f.features.block<1, 3>(i, 0).transpose() - expect).norm() == 0.0);
    CHECK((f.features.block<1, 3>(i, 3) - q.row(0)).norm() == 0.0);
  }
}

TEST_CASE("encoding matches the all-pairs oracle on random instances") {
  Rng rng(102);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n_c = 2 + static_cast<Eigen::Index>(rng.below(63));
    const Eigen::Index n_b = 2 + static_cast<Eigen::Index>(rng.below(63));
    MatX3 cloud = rng.normal_mat(n_c, 3);
    BasisPointSet bps = sample_basis(trial, n_b, 1.0);
    BpsFrame f = bps_encode(cloud, bps);
    for (Eigen::Index i = 0; i < n_b; ++i) {
      double best = std::numeric_limits<double>::infinity();
      Eigen::Index arg = 0;
      for (Eigen::Index j = 0; j < n_c; ++j) {
        const double d = (cloud.row(j) - bps.basis.row(i)).norm();
        if (d < best) {
          best = d;
          arg = j;
        }
      }
      Vec3 expect = cloud.row(arg).transpose() - bps.basis.row(i).transpose();
      CHECK((f.features.block<1, 3>(i, 0).transpose() - expect).norm() == 0.0);
    }
  }
}

TEST_CASE("translating the cloud shifts every centroid entry") {
  Rng rng(103);
  MatX3 cloud = rng.normal_mat(12, 3);
  BasisPointSet bps = sample_basis(5, 6, 1.0);
  Vec3 t(0.4, -1.1, 2.5);
  MatX3 moved = cloud;
  moved.rowwise() += t.transpose();
  BpsFrame a = bps_encode(cloud, bps);
  BpsFrame b = bps_encode(moved, bps);
  for (Eigen::Index i = 0; i < 6; ++i)
    CHECK((b.features.block<1, 3>(i, 3) - a.features.block<1, 3>(i, 3) - t.transpose()).norm() <
          1e-12);
}

TEST_CASE("sequence encoding is per-frame") {
  Rng rng(104);
  MatX3 frame = rng.normal_mat(10, 3);
  BasisPointSet bps = sample_basis(6, 4, 1.0);

  PointCloudSequence single;
  single.frames = {frame};
  Mat seq1 = encode_sequence(single, bps);
  BpsFrame direct = bps_encode(frame, bps);
  for (Eigen::Index i = 0; i < 4; ++i)
    CHECK((seq1.block(0, i * 6, 1, 6) - direct.features.row(i)).norm() == 0.0);

  PointCloudSequence fives;
  fives.frames = std::vector<MatX3>(5, frame);
  Mat seq5 = encode_sequence(fives, bps);
  REQUIRE(seq5.rows() == 5);
  for (Eigen::Index l = 1; l < 5; ++l) CHECK((seq5.row(l) - seq5.row(0)).norm() == 0.0);
}

TEST_CASE("translating cloud moves per-frame centroids by the translation") {
  Rng rng(105);
  MatX3 base = rng.normal_mat(9, 3);
  PointCloudSequence seq;
  Vec3 step(0.1, 0.0, 0.05);
  for (int l = 0; l < 4; ++l) {
    MatX3 f = base;
    f.rowwise() += (l * step).transpose();
    seq.frames.push_back(f);
  }
  BasisPointSet bps = sample_basis(8, 5, 1.0);
  Mat enc = encode_sequence(seq, bps);
  for (int l = 0; l < 4; ++l) {
    Vec3 centroid = seq.frames[static_cast<std::size_t>(l)].colwise().mean().transpose();
    CHECK((enc.block(l, 3, 1, 3).transpose() - centroid).norm() < 1e-12);
  }
}

TEST_CASE("cloud sequence validation") {
  PointCloudSequence seq;
  CHECK_THROWS_AS(seq.validate(), InvalidInput);
  seq.frames.push_back(MatX3::Zero(4, 3));
  seq.frames.push_back(MatX3::Zero(5, 3));
  CHECK_THROWS_AS(seq.validate(), InvalidInput);
}

TEST_CASE("cloud persistence round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "hoimo_geo_io";
  fs::create_directories(dir);
  Rng rng(106);
  PointCloudSequence seq;
  seq.frames = {rng.normal_mat(6, 3), rng.normal_mat(6, 3)};
  save_cloud(dir / "cloud", seq, "deadbeef");
  PointCloudSequence back = load_cloud(dir / "cloud");
  REQUIRE(back.length() == 2);
  CHECK((back.frames[1] - seq.frames[1]).cwiseAbs().maxCoeff() < 1e-6);
  fs::remove_all(dir);
}
