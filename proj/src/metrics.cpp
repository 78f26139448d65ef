#include "hoimotion/metrics.hpp"

#include "hoimotion/rng.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace hoimo::metrics {

namespace {

using nlohmann::json;

void check_unit(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
    throw InvalidInput(std::string(name) + " must lie in [0,1]");
  }
}

void check_nonneg(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0) {
    throw InvalidInput(std::string(name) + " must be finite and non-negative");
  }
}

}  // namespace

void EvalReport::validate() const {
  check_nonneg(hand_jpe_cm, "hand_jpe_cm");
  check_nonneg(mpjpe_cm, "mpjpe_cm");
  check_unit(c_prec, "c_prec");
  check_unit(c_rec, "c_rec");
  check_unit(c_acc, "c_acc");
  check_unit(c_pct, "c_pct");
  check_unit(f1, "f1");
  check_nonneg(fid, "fid");
  check_unit(r_score, "r_score");
  check_nonneg(diversity, "diversity");
  check_nonneg(fs, "fs");
  if (has_stage1) {
    check_nonneg(stage1.left_jpe_cm, "left_jpe_cm");
    check_nonneg(stage1.right_jpe_cm, "right_jpe_cm");
    check_nonneg(stage1.hand_jpe_cm, "stage1 hand_jpe_cm");
    if (!std::isfinite(stage1.affordance_cos_sim) || stage1.affordance_cos_sim < -1.0 ||
        stage1.affordance_cos_sim > 1.0) {
      throw InvalidInput("affordance_cos_sim must lie in [-1,1]");
    }
  }
}

std::string EvalReport::to_json() const {
  json j;
  j["hand_jpe_cm"] = hand_jpe_cm;
  j["mpjpe_cm"] = mpjpe_cm;
  j["c_prec"] = c_prec;
  j["c_rec"] = c_rec;
  j["c_acc"] = c_acc;
  j["c_pct"] = c_pct;
  j["f1"] = f1;
  j["fid"] = fid;
  j["r_score"] = r_score;
  j["diversity"] = diversity;
  j["fs"] = fs;
  if (has_stage1) {
    j["stage1"] = {{"left_jpe_cm", stage1.left_jpe_cm},
                   {"right_jpe_cm", stage1.right_jpe_cm},
                   {"hand_jpe_cm", stage1.hand_jpe_cm},
                   {"affordance_cos_sim", stage1.affordance_cos_sim}};
  }
  return j.dump();
}

EvalReport EvalReport::from_json(const std::string& text) {
  json j = json::parse(text);
  EvalReport r;
  r.hand_jpe_cm = j.at("hand_jpe_cm").get<double>();
  r.mpjpe_cm = j.at("mpjpe_cm").get<double>();
  r.c_prec = j.at("c_prec").get<double>();
  r.c_rec = j.at("c_rec").get<double>();
  r.c_acc = j.at("c_acc").get<double>();
  r.c_pct = j.at("c_pct").get<double>();
  r.f1 = j.at("f1").get<double>();
  r.fid = j.at("fid").get<double>();
  r.r_score = j.at("r_score").get<double>();
  r.diversity = j.at("diversity").get<double>();
  r.fs = j.at("fs").get<double>();
  if (j.contains("stage1")) {
    r.has_stage1 = true;
    const json& s = j.at("stage1");
    r.stage1.left_jpe_cm = s.at("left_jpe_cm").get<double>();
    r.stage1.right_jpe_cm = s.at("right_jpe_cm").get<double>();
    r.stage1.hand_jpe_cm = s.at("hand_jpe_cm").get<double>();
    r.stage1.affordance_cos_sim = s.at("affordance_cos_sim").get<double>();
  }
  return r;
}

std::string EvalReport::csv_header() {
  return "hand_jpe_cm,mpjpe_cm,c_prec,c_rec,c_acc,c_pct,f1,fid,r_score,diversity,fs,"
         "s1_left_jpe_cm,s1_right_jpe_cm,s1_hand_jpe_cm,s1_affordance_cos_sim";
}

std::string EvalReport::to_csv_row() const {
  std::ostringstream out;
  out << format_double(hand_jpe_cm) << ',' << format_double(mpjpe_cm) << ','
      << format_double(c_prec) << ',' << format_double(c_rec) << ',' << format_double(c_acc)
      << ',' << format_double(c_pct) << ',' << format_double(f1) << ',' << format_double(fid)
      << ',' << format_double(r_score) << ',' << format_double(diversity) << ','
      << format_double(fs) << ',';
  if (has_stage1) {
    out << format_double(stage1.left_jpe_cm) << ',' << format_double(stage1.right_jpe_cm) << ','
        << format_double(stage1.hand_jpe_cm) << ',' << format_double(stage1.affordance_cos_sim);
  } else {
    out << ",,,";
  }
  return out.str();
}

double joint_error_cm(const motion::JointSeq& pred, const motion::JointSeq& gt,
                      const std::vector<int>& joints) {
  if (pred.empty() || pred.size() != gt.size()) {
    throw InvalidInput("joint error needs equal-length non-empty sequences");
  }
  if (joints.empty()) throw InvalidInput("joint error needs at least one joint");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].rows() != motion::skel::kJoints || gt[i].rows() != motion::skel::kJoints) {
      throw InvalidInput("joint error frames must carry the full skeleton");
    }
    for (int j : joints) {
      if (j < 0 || j >= motion::skel::kJoints) throw InvalidInput("joint index out of range");
      sum += (pred[i].row(j) - gt[i].row(j)).norm();
    }
  }
  return 100.0 * sum / (static_cast<double>(pred.size()) * static_cast<double>(joints.size()));
}

double mpjpe_cm(const motion::JointSeq& pred, const motion::JointSeq& gt) {
  std::vector<int> all(motion::skel::kJoints);
  for (int j = 0; j < motion::skel::kJoints; ++j) all[static_cast<std::size_t>(j)] = j;
  return joint_error_cm(pred, gt, all);
}

double hand_jpe_cm(const motion::JointSeq& pred, const motion::JointSeq& gt) {
  return joint_error_cm(pred, gt, {motion::skel::kLeftHand, motion::skel::kRightHand});
}

double left_jpe_cm(const motion::JointSeq& pred, const motion::JointSeq& gt) {
  return joint_error_cm(pred, gt, {motion::skel::kLeftHand});
}

double right_jpe_cm(const motion::JointSeq& pred, const motion::JointSeq& gt) {
  return joint_error_cm(pred, gt, {motion::skel::kRightHand});
}

ContactScores contact_scores(const MaskMat& pred, const MaskMat& gt) {
  if (pred.rows() == 0 || pred.cols() == 0 || pred.rows() != gt.rows() ||
      pred.cols() != gt.cols()) {
    throw InvalidInput("contact scores need matching non-empty masks");
  }
  double tp = 0, fp = 0, fn = 0, tn = 0;
  Eigen::Index frames_with_pred = 0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    bool any = false;
    for (Eigen::Index j = 0; j < pred.cols(); ++j) {
      const bool p = pred(i, j), g = gt(i, j);
      any = any || p;
      tp += (p && g) ? 1 : 0;
      fp += (p && !g) ? 1 : 0;
      fn += (!p && g) ? 1 : 0;
      tn += (!p && !g) ? 1 : 0;
    }
    frames_with_pred += any ? 1 : 0;
  }
  ContactScores s;
  s.prec = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
  s.rec = (tp + fn) > 0 ? tp / (tp + fn) : 0.0;
  s.acc = (tp + tn) / (tp + fp + fn + tn);
  s.f1 = (s.prec + s.rec) > 0 ? 2.0 * s.prec * s.rec / (s.prec + s.rec) : 0.0;
  s.c_pct = static_cast<double>(frames_with_pred) / static_cast<double>(pred.rows());
  return s;
}

Mat sqrt_psd(const Mat& m) {
  if (m.rows() != m.cols()) throw InvalidInput("matrix square root needs a square matrix");
  const Mat sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(sym);
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  Vec vals = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

namespace {

Mat covariance(const Mat& centered) {
  const Eigen::Index n = centered.rows();
  if (n <= 1) return Mat::Zero(centered.cols(), centered.cols());
  return centered.transpose() * centered / static_cast<double>(n - 1);
}

}  // namespace

double fid(const Mat& gen_feats, const Mat& gt_feats) {
  if (gen_feats.rows() == 0 || gt_feats.rows() == 0 || gen_feats.cols() != gt_feats.cols()) {
    throw InvalidInput("distribution distance needs non-empty feature sets of equal width");
  }
  const Mat mu1 = gen_feats.colwise().mean();
  const Mat mu2 = gt_feats.colwise().mean();
  const Mat c1 = covariance(gen_feats.rowwise() - mu1.row(0));
  const Mat c2 = covariance(gt_feats.rowwise() - mu2.row(0));
  const Mat s2h = sqrt_psd(c2);
  const double cross = sqrt_psd(s2h * c1 * s2h).trace();
  const double value = (mu1 - mu2).squaredNorm() + c1.trace() + c2.trace() - 2.0 * cross;
  return std::max(0.0, value);
}

double r_score(const Mat& motion_feats, const Mat& text_feats, int batch_size,
               std::uint64_t seed) {
  if (motion_feats.rows() == 0 || motion_feats.rows() != text_feats.rows() ||
      motion_feats.cols() != text_feats.cols()) {
    throw InvalidInput("retrieval needs paired feature sets of equal shape");
  }
  if (batch_size <= 0) throw InvalidInput("retrieval batch size must be positive");
  const int n = static_cast<int>(motion_feats.rows());
  Rng rng(seed);
  const std::vector<int> perm = rng.permutation(n);
  int hits = 0;
  for (int start = 0; start < n; start += batch_size) {
    const int count = std::min(batch_size, n - start);
    for (int qi = 0; qi < count; ++qi) {
      const int q = perm[static_cast<std::size_t>(start + qi)];
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int ci = 0; ci < count; ++ci) {
        const int c = perm[static_cast<std::size_t>(start + ci)];
        const double d = (motion_feats.row(q) - text_feats.row(c)).norm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      hits += (best == q) ? 1 : 0;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

double diversity(const Mat& feats, int pairs, std::uint64_t seed) {
  if (pairs <= 0) throw InvalidInput("diversity needs at least one pair");
  if (feats.rows() < 2 * static_cast<Eigen::Index>(pairs)) {
    throw InvalidInput("diversity needs at least 2*pairs feature rows");
  }
  Rng rng(seed);
  const std::vector<int> perm = rng.permutation(static_cast<int>(feats.rows()));
  double sum = 0.0;
  for (int p = 0; p < pairs; ++p) {
    const int a = perm[static_cast<std::size_t>(2 * p)];
    const int b = perm[static_cast<std::size_t>(2 * p + 1)];
    sum += (feats.row(a) - feats.row(b)).norm();
  }
  return sum / static_cast<double>(pairs);
}

double foot_sliding(const motion::MotionSequence& m, double h_fs) {
  if (!(h_fs > 0.0) || !std::isfinite(h_fs)) {
    throw InvalidInput("foot sliding height threshold must be positive");
  }
  m.validate();
  const motion::JointSeq joints = motion::recover_joints(m);
  const std::array<int, 2> feet = {motion::skel::kLeftToe, motion::skel::kRightToe};
  double sum = 0.0;
  long count = 0;
  for (std::size_t i = 0; i + 1 < joints.size(); ++i) {
    for (int f : feet) {
      const double h = joints[i](f, 1);
      if (h >= h_fs) continue;
      const double dx = joints[i + 1](f, 0) - joints[i](f, 0);
      const double dz = joints[i + 1](f, 2) - joints[i](f, 2);
      sum += std::hypot(dx, dz) * (2.0 - std::pow(2.0, h / h_fs));
      ++count;
    }
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

double affordance_similarity(const Mat& pred, const Mat& gt) {
  if (pred.rows() == 0 || pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
    throw InvalidInput("similarity needs matching non-empty maps");
  }
  const double dot = (pred.array() * gt.array()).sum();
  const double na = pred.norm();
  const double nb = gt.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

}  // namespace hoimo::metrics
