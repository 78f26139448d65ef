#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "hoimotion/common.hpp"
#include "hoimotion/diffusion.hpp"
#include "hoimotion/nn/modules.hpp"
#include "hoimotion/nn/optim.hpp"
#include "hoimotion/rng.hpp"
#include "hoimotion/text_encoder.hpp"

namespace hoimo::stage1 {

struct Stage1Config {
  int timesteps = 300;
  Eigen::Index n_points = 64;   // affordance columns, also the basis size
  Eigen::Index raw_bps_dim = 64 * 6;
  Eigen::Index pc_dim = 256;    // projected point-cloud feature width
  Eigen::Index text_dim = 512;
  Eigen::Index d_model = 64;
  int n_heads = 4;
  Eigen::Index d_ff = 256;
  int blocks = 2;               // self-attention depth per branch
  double lr = 2e-4;
  int batch_size = 16;
};

// The pair of noisy signals the model denoises jointly.
struct GuidanceState {
  nn::Var x_joints;      // L x 6: left+right hand positions, canonicalized
  nn::Var x_affordance;  // L x N: per-point hand affordance
  int t = 0;
};

// Conditioning shared by both branches for one clip.
struct ConditionBundle {
  nn::Var f_text;  // 1 x text_dim
  nn::Var f_pc;    // L x pc_dim
  Mat t_embed;     // 1 x d_model sinusoidal step row, refreshed per step
};

// Clean sample outputs.
struct GuidancePair {
  Mat joints;      // L x 6
  Mat affordance;  // L x N, clamped to (0, 1] after sampling
};

struct TrainExample {
  Mat joints;       // clean L x 6
  Mat affordance;   // clean L x N
  Mat raw_bps;      // L x (n_basis * 6)
  std::string text; // coarse sentence
};

struct TrainStats {
  double loss = 0.0;
  double joint_loss = 0.0;
  double affordance_loss = 0.0;
};

class Stage1Model {
 public:
  Stage1Model(const Stage1Config& cfg, Rng& rng);

  // Per-frame learned projection of raw basis-point features.
  nn::Var project_bps(const nn::Var& raw) const;
  nn::Var encode_text(const std::string& sentence) const;  // 1 x text_dim

  ConditionBundle make_bundle(const std::string& sentence, const Mat& raw_bps) const;

  // Branch internals, exposed for invariant tests.
  nn::Var joint_branch(const nn::Var& x_joints, const ConditionBundle& bundle) const;
  nn::Var affordance_branch(const nn::Var& x_affordance, const ConditionBundle& bundle) const;
  nn::Var mutual_cross_attention(const nn::Var& joint_feat, const nn::Var& afford_feat) const;

  // Full dual-branch forward; estimates the clean signals directly.
  std::pair<nn::Var, nn::Var> predict_clean(const GuidanceState& state,
                                            const ConditionBundle& bundle, int t) const;

  // One optimizer update on the summed per-head L1 reconstruction loss.
  TrainStats train_step(const std::vector<TrainExample>& batch, Rng& rng);

  // Ancestral sampling; deterministic per seed. Aborts with the step index
  // if any state goes non-finite.
  GuidancePair sample(const ConditionBundle& bundle, Eigen::Index frames,
                      std::uint64_t seed, std::vector<int>* visited = nullptr) const;

  const Stage1Config& config() const { return cfg_; }
  const diffusion::DiffusionSchedule& schedule() const { return schedule_; }
  nn::ParamMap& params() { return params_; }
  const nn::ParamMap& params() const { return params_; }
  nn::AdamW& optimizer() { return *optimizer_; }
  long trained_steps() const { return trained_steps_; }
  void set_trained_steps(long steps) { trained_steps_ = steps; }

 private:
  Stage1Config cfg_;
  diffusion::DiffusionSchedule schedule_;
  text::TextEncoder text_encoder_;
  nn::Mlp bps_proj_;
  nn::Linear text_proj_, time_proj_, pc_in_, joint_in_, afford_in_;
  nn::MultiheadAttention afford_cross_, mutual_;
  std::vector<nn::TransformerBlock> joint_blocks_, afford_blocks_;
  nn::Linear joint_head_, afford_head_;
  nn::ParamMap params_;
  std::unique_ptr<nn::AdamW> optimizer_;
  long trained_steps_ = 0;
};

// Reverse-diffusion recursion shared by the model and its tests: the
// predictor maps (x_joints, x_affordance, t) to clean estimates.
using CleanPredictor =
    std::function<std::pair<Mat, Mat>(const Mat&, const Mat&, int)>;

GuidancePair sample_loop(const CleanPredictor& predict,
                         const diffusion::DiffusionSchedule& schedule,
                         Eigen::Index frames, Eigen::Index n_points,
                         std::uint64_t seed, std::vector<int>* visited = nullptr);

}  // namespace hoimo::stage1
