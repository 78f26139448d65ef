#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "hoimotion/common.hpp"
#include "hoimotion/diffusion.hpp"
#include "hoimotion/lbfgs.hpp"
#include "hoimotion/motion.hpp"
#include "hoimotion/nn/modules.hpp"
#include "hoimotion/nn/optim.hpp"
#include "hoimotion/rng.hpp"
#include "hoimotion/text_encoder.hpp"

namespace hoimo::stage2 {

struct Stage2Config {
  int timesteps = 300;
  Eigen::Index motion_dim = 263;
  Eigen::Index raw_bps_dim = 64 * 6;
  Eigen::Index pc_dim = 256;
  Eigen::Index n_points = 64;
  Eigen::Index text_dim = 512;
  Eigen::Index d_model = 64;
  int n_heads = 4;
  Eigen::Index d_ff = 256;
  int blocks = 2;
  Eigen::Index fusion_dim = 64;  // latent width of the fused condition
  double lr = 2e-4;
  int batch_size = 16;
  double fps = 30.0;
};

struct MotionExample {
  Mat features;  // clean motion, L x motion_dim
  std::string text;
};

// Text-conditioned motion denoiser that stands in for a pretrained base
// model: trained on the synthetic corpus, then frozen inside Stage2Model.
class BaseDenoiser {
 public:
  BaseDenoiser() = default;
  BaseDenoiser(const Stage2Config& cfg, Rng& rng);

  nn::Var encode_text(const std::string& sentence) const;  // 1 x text_dim

  // x0 estimate. `injections`, when given, holds one (L+1) x d_model term
  // per block, added to the running sequence after that block runs — the
  // hook the control branch uses.
  nn::Var denoise(const nn::Var& x_t, int t, const nn::Var& f_text,
                  const std::vector<nn::Var>* injections = nullptr) const;

  double train_step(const std::vector<MotionExample>& batch, Rng& rng);

  const Stage2Config& config() const { return cfg_; }
  const diffusion::DiffusionSchedule& schedule() const { return schedule_; }
  nn::ParamMap& params() { return params_; }
  nn::AdamW& optimizer() { return *optimizer_; }
  long trained_steps() const { return trained_steps_; }
  void set_trained_steps(long steps) { trained_steps_ = steps; }

 private:
  friend class Stage2Model;
  Stage2Config cfg_;
  diffusion::DiffusionSchedule schedule_;
  text::TextEncoder text_encoder_;
  nn::Linear in_, text_proj_, time_proj_, head_;
  std::vector<nn::TransformerBlock> blocks_;
  nn::ParamMap params_;
  std::unique_ptr<nn::AdamW> optimizer_;
  long trained_steps_ = 0;
};

// Conditioning assembled from both stages; c = (f_text, f_text_fine, f_fusion).
struct FusedCondition {
  nn::Var f_text;       // 1 x text_dim, coarse sentence
  nn::Var f_text_fine;  // 1 x text_dim, three-phase fine text
  nn::Var f_fusion;     // L x fusion_dim
};

struct GuidanceWeights {
  bool joint_guidance = true;
  bool foot_guidance = true;
  double alpha = 1.0;  // contact-masked squared-velocity weight
  double beta = 1.0;   // contact-masked squared-acceleration weight
  double h_g = 0.02;   // ground height in meters
  int lbfgs_iters = 5;

  void validate() const;
};

// What guided sampling steers toward: stage-1 hand positions plus the
// per-hand contact mask saying when the alignment applies.
struct GuidanceTargets {
  Mat hand_targets;   // L x 6: left xyz, right xyz (canonical frame)
  MaskMat hand_mask;  // L x 2
};

struct ControlExample {
  Mat features;  // clean motion, L x motion_dim
  std::string coarse;
  std::array<std::string, 3> fine;
  Mat raw_bps;      // L x raw_bps_dim
  Mat hand_targets; // L x 6
  Mat affordance;   // L x n_points
};

class Stage2Model {
 public:
  // Takes ownership of a trained base denoiser and freezes it.
  Stage2Model(const Stage2Config& cfg, std::shared_ptr<BaseDenoiser> base, Rng& rng);

  nn::Var encode_fine_text(const std::array<std::string, 3>& sentences) const;
  nn::Var project_bps(const nn::Var& raw) const;
  // Concatenate per-frame geometry and affordance, map through a three-layer
  // MLP, then temporal self-attention.
  nn::Var fuse_affordance(const nn::Var& f_pc, const nn::Var& affordance) const;
  // Hand-joint features as the query over the fused stream.
  nn::Var fuse_joints(const nn::Var& hand_joints, const nn::Var& fused) const;

  FusedCondition make_condition(const std::string& coarse,
                                const std::array<std::string, 3>& fine, const Mat& raw_bps,
                                const Mat& hand_targets, const Mat& affordance) const;

  // Frozen-base forward plus the trainable copy injected through
  // zero-initialized per-block links.
  nn::Var controlnet_denoise(const nn::Var& x_t, int t, const FusedCondition& cond) const;

  double train_controlnet(const std::vector<ControlExample>& batch, Rng& rng);

  // Plain ancestral sampling, no guidance.
  motion::MotionSequence sample(const FusedCondition& cond, Eigen::Index frames,
                                std::uint64_t seed) const;

  // Ancestral sampling with the posterior mean refined each step by L-BFGS
  // on the guidance losses; a non-finite loss skips that step's refinement
  // and records a warning.
  motion::MotionSequence guided_sample(const FusedCondition& cond,
                                       const GuidanceTargets& targets,
                                       const GuidanceWeights& weights, Eigen::Index frames,
                                       std::uint64_t seed,
                                       std::vector<std::string>* warnings = nullptr) const;

  const Stage2Config& config() const { return cfg_; }
  const diffusion::DiffusionSchedule& schedule() const { return schedule_; }
  BaseDenoiser& base() { return *base_; }
  const BaseDenoiser& base() const { return *base_; }
  nn::ParamMap& params() { return params_; }  // trainable side only
  nn::AdamW& optimizer() { return *optimizer_; }
  long trained_steps() const { return trained_steps_; }
  void set_trained_steps(long steps) { trained_steps_ = steps; }

 private:
  Stage2Config cfg_;
  diffusion::DiffusionSchedule schedule_;
  std::shared_ptr<BaseDenoiser> base_;
  text::TextEncoder fine_encoder_;
  nn::Mlp bps_proj_, afford_mlp_, joint_mlp_;
  nn::TransformerBlock fusion_temporal_;
  nn::MultiheadAttention fusion_cross_;
  nn::Linear copy_in_, ctrl_text_proj_, ctrl_time_proj_, fine_proj_, fusion_proj_;
  std::vector<nn::TransformerBlock> copy_blocks_;
  std::vector<nn::Linear> links_;
  nn::ParamMap params_;
  std::unique_ptr<nn::AdamW> optimizer_;
  long trained_steps_ = 0;
};

// Masked mean distance between predicted and target hand joints over the
// frames where the mask marks contact; zero when nothing is masked.
double joint_guidance_loss(const motion::JointSeq& pred, const Mat& hand_targets,
                           const MaskMat& hand_mask);
nn::Var joint_guidance_loss_var(const nn::Var& joints66, const Mat& hand_targets,
                                const MaskMat& hand_mask);

// Ground-height deviation of the lower foot plus contact-masked squared
// velocity and acceleration, averaged over frames.
double foot_guidance_loss(const motion::MotionSequence& m, const GuidanceWeights& w);
nn::Var foot_guidance_loss_var(const nn::Var& joints66, const MaskMat& foot_contact,
                               const GuidanceWeights& w);

// Per-side foot contact (left, right) from the four contact channels,
// thresholded at 0.5; a side is down when its ankle or toe channel is set.
MaskMat foot_contact_mask(const Mat& features);

}  // namespace hoimo::stage2
