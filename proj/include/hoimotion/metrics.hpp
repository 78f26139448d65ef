#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hoimotion/common.hpp"
#include "hoimotion/motion.hpp"

namespace hoimo::metrics {

struct ContactScores {
  double prec = 0.0;
  double rec = 0.0;
  double acc = 0.0;
  double c_pct = 0.0;
  double f1 = 0.0;
};

struct Stage1Scores {
  double left_jpe_cm = 0.0;
  double right_jpe_cm = 0.0;
  double hand_jpe_cm = 0.0;
  double affordance_cos_sim = 0.0;
};

struct EvalReport {
  double hand_jpe_cm = 0.0;
  double mpjpe_cm = 0.0;
  double c_prec = 0.0;
  double c_rec = 0.0;
  double c_acc = 0.0;
  double c_pct = 0.0;
  double f1 = 0.0;
  double fid = 0.0;
  double r_score = 0.0;
  double diversity = 0.0;
  double fs = 0.0;
  bool has_stage1 = false;
  Stage1Scores stage1;

  void validate() const;  // ranges: rates in [0,1], errors >= 0, cosine in [-1,1]
  std::string to_json() const;
  static EvalReport from_json(const std::string& text);
  // Fixed column order so reports diff cleanly; stage-1 columns are blank
  // when absent.
  static std::string csv_header();
  std::string to_csv_row() const;
};

// Mean Euclidean distance over frames and the listed joints, in centimeters.
double joint_error_cm(const motion::JointSeq& pred, const motion::JointSeq& gt,
                      const std::vector<int>& joints);
double mpjpe_cm(const motion::JointSeq& pred, const motion::JointSeq& gt);
double hand_jpe_cm(const motion::JointSeq& pred, const motion::JointSeq& gt);
double left_jpe_cm(const motion::JointSeq& pred, const motion::JointSeq& gt);
double right_jpe_cm(const motion::JointSeq& pred, const motion::JointSeq& gt);

// Confusion-matrix statistics over (frame, joint) entries; empty-denominator
// precision/recall are 0 by convention. c_pct is the fraction of frames with
// any predicted contact.
ContactScores contact_scores(const MaskMat& pred, const MaskMat& gt);

// Symmetric PSD square root via eigendecomposition; negative eigenvalues
// from roundoff are clamped to zero.
Mat sqrt_psd(const Mat& m);

// Fréchet distance between Gaussian fits of the two feature sets (rows =
// samples). Uses unbiased covariance; single-sample sets get a zero matrix.
double fid(const Mat& gen_feats, const Mat& gt_feats);

// Retrieval precision@1: rows are paired (motion_i, text_i); candidates are
// grouped into seeded batches and a query scores when its own text is the
// nearest of the batch.
double r_score(const Mat& motion_feats, const Mat& text_feats, int batch_size = 32,
               std::uint64_t seed = 0);

// Mean Euclidean distance over `pairs` disjoint random pairs of rows.
double diversity(const Mat& feats, int pairs, std::uint64_t seed);

// Mean weighted horizontal toe displacement over (frame, foot) transitions
// that start below h_fs; the weight 2 - 2^(h/h_fs) fades out at the
// threshold. No qualifying transitions gives 0.
double foot_sliding(const motion::MotionSequence& m, double h_fs = 0.05);

// Cosine similarity of the flattened maps; zero-norm inputs give 0.
double affordance_similarity(const Mat& pred, const Mat& gt);

}  // namespace hoimo::metrics
