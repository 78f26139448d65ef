#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "hoimotion/common.hpp"
#include "hoimotion/nn/modules.hpp"
#include "hoimotion/nn/optim.hpp"
#include "hoimotion/rng.hpp"
#include "hoimotion/text_encoder.hpp"

namespace hoimo::eval {

// The distribution and retrieval metrics need motion/text embeddings; these
// small models are trained on the synthetic corpus and checkpointed so the
// reported numbers stay stable across runs.
struct EvaluatorConfig {
  Eigen::Index motion_dim = 263;
  Eigen::Index hidden = 64;
  Eigen::Index latent = 32;
  Eigen::Index text_dim = 128;
  int steps = 400;
  int batch_size = 8;
  double lr = 1e-3;
  std::uint64_t seed = 12345;

  void validate() const;
};

struct EvalExample {
  Mat features;  // L x motion_dim
  std::string text;
};

// Per-frame autoencoder; the clip embedding mean-pools the frame latents.
class MotionAutoencoder {
 public:
  MotionAutoencoder(const EvaluatorConfig& cfg, Rng& rng);

  Vec embed(const Mat& features) const;        // latent vector
  Mat reconstruct(const Mat& features) const;  // L x motion_dim
  double train_step(const std::vector<Mat>& batch);

  nn::ParamMap& params() { return params_; }
  long trained_steps() const { return trained_steps_; }
  void set_trained_steps(long s) { trained_steps_ = s; }

 private:
  EvaluatorConfig cfg_;
  nn::Mlp enc_, dec_;
  nn::ParamMap params_;
  std::unique_ptr<nn::AdamW> optimizer_;
  long trained_steps_ = 0;
};

// Contrastive motion/text embedder: matched pairs pull together under a
// symmetric cross-entropy over the batch; embeddings are unit length.
class TextMotionMatcher {
 public:
  TextMotionMatcher(const EvaluatorConfig& cfg, Rng& rng);

  Vec embed_motion(const Mat& features) const;
  Vec embed_text(const std::string& text) const;
  double train_step(const std::vector<EvalExample>& batch);

  nn::ParamMap& params() { return params_; }
  long trained_steps() const { return trained_steps_; }
  void set_trained_steps(long s) { trained_steps_ = s; }

 private:
  nn::Var motion_embedding(const Mat& features) const;  // 1 x latent, unit norm
  nn::Var text_embedding(const std::string& text) const;

  EvaluatorConfig cfg_;
  nn::Mlp motion_enc_;
  text::TextEncoder text_base_;
  nn::Linear text_head_;
  nn::ParamMap params_;
  std::unique_ptr<nn::AdamW> optimizer_;
  long trained_steps_ = 0;
};

struct Evaluators {
  EvaluatorConfig cfg;
  std::shared_ptr<MotionAutoencoder> ae;
  std::shared_ptr<TextMotionMatcher> matcher;

  // Rows = clips; latent features for the distribution metric.
  Mat motion_features(const std::vector<Mat>& clips) const;
  // Paired (motion, text) embedding rows for retrieval.
  std::pair<Mat, Mat> retrieval_features(const std::vector<EvalExample>& examples) const;
};

Evaluators train_evaluators(const std::vector<EvalExample>& data, const EvaluatorConfig& cfg);

void save_evaluators(const std::filesystem::path& path, const Evaluators& ev,
                     const std::string& config_hash = "");
Evaluators load_evaluators(const std::filesystem::path& path, const EvaluatorConfig& cfg);

// Loads when the checkpoint exists, otherwise trains and saves it. `trained`
// reports which branch ran.
Evaluators load_or_train(const std::filesystem::path& path,
                         const std::vector<EvalExample>& data, const EvaluatorConfig& cfg,
                         bool* trained = nullptr);

}  // namespace hoimo::eval
