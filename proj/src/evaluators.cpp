#include "hoimotion/evaluators.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <utility>

#include "hoimotion/tensor_io.hpp"

namespace hoimo::eval {

namespace {

// Matched-pair logits are cosine similarities; a fixed scale sharpens the
// softmax enough for small batches without a learned temperature.
constexpr double kLogitScale = 10.0;

void check_features(const Mat& features, Eigen::Index motion_dim, const char* who) {
  if (features.rows() < 1 || features.cols() != motion_dim) {
    throw InvalidInput(std::string(who) + ": expected L x " + std::to_string(motion_dim) +
                       " features, got " + std::to_string(features.rows()) + " x " +
                       std::to_string(features.cols()));
  }
  if (!all_finite(features)) {
    throw InvalidInput(std::string(who) + ": non-finite motion features");
  }
}

nn::Var unit_rows(const nn::Var& rows_mat) {
  nn::Var sq = nn::sum_cols(nn::square(rows_mat));         // B x 1
  nn::Var norm = nn::sqrt_op(nn::add_scalar(sq, 1e-12));   // B x 1
  nn::Var inv = nn::div(nn::Var::constant(Mat::Ones(norm.rows(), 1)), norm);
  return nn::mul_colvec(rows_mat, inv);
}

// Row-wise log-softmax, shift-stabilized; the shift is a constant so the
// gradient matches the unshifted form exactly.
nn::Var log_softmax_rows(const nn::Var& logits) {
  Mat shift = -logits.value().rowwise().maxCoeff();
  nn::Var shifted = nn::add_colvec(logits, nn::Var::constant(shift));
  nn::Var lse = nn::log_op(nn::sum_cols(nn::exp_op(shifted)));  // B x 1
  return nn::add_colvec(shifted, nn::neg(lse));
}

nn::Var diagonal_mean(const nn::Var& m) {
  const Eigen::Index b = m.rows();
  nn::Var mask = nn::Var::constant(Mat::Identity(b, b));
  return nn::mul_scalar(nn::sum_all(nn::mul(m, mask)), 1.0 / static_cast<double>(b));
}

}  // namespace

void EvaluatorConfig::validate() const {
  if (motion_dim < 1 || hidden < 1 || latent < 1 || text_dim < 1) {
    throw InvalidInput("evaluator config: model widths must be positive");
  }
  if (steps < 0) throw InvalidInput("evaluator config: steps must be >= 0");
  if (batch_size < 1) throw InvalidInput("evaluator config: batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) {
    throw InvalidInput("evaluator config: lr must be positive and finite");
  }
}

MotionAutoencoder::MotionAutoencoder(const EvaluatorConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  enc_ = nn::Mlp(rng, {cfg_.motion_dim, cfg_.hidden, cfg_.latent});
  dec_ = nn::Mlp(rng, {cfg_.latent, cfg_.hidden, cfg_.motion_dim});
  enc_.collect("enc", params_);
  dec_.collect("dec", params_);
  nn::AdamWOptions opts;
  opts.lr = cfg_.lr;
  optimizer_ = std::make_unique<nn::AdamW>(params_, opts);
}

Vec MotionAutoencoder::embed(const Mat& features) const {
  check_features(features, cfg_.motion_dim, "autoencoder embed");
  nn::Var z = enc_.forward(nn::Var::constant(features));
  Mat pooled = nn::mean_rows(z).value();  // 1 x latent
  return pooled.row(0).transpose();
}

Mat MotionAutoencoder::reconstruct(const Mat& features) const {
  check_features(features, cfg_.motion_dim, "autoencoder reconstruct");
  return dec_.forward(enc_.forward(nn::Var::constant(features))).value();
}

double MotionAutoencoder::train_step(const std::vector<Mat>& batch) {
  if (batch.empty()) throw InvalidInput("autoencoder train_step: empty batch");
  nn::Var loss = nn::Var::scalar(0.0);
  for (const Mat& features : batch) {
    check_features(features, cfg_.motion_dim, "autoencoder train_step");
    nn::Var x = nn::Var::constant(features);
    nn::Var recon = dec_.forward(enc_.forward(x));
    loss = nn::add(loss, nn::mean_all(nn::square(nn::sub(recon, x))));
  }
  loss = nn::mul_scalar(loss, 1.0 / static_cast<double>(batch.size()));
  const double value = loss.item();
  if (!std::isfinite(value)) throw NumericError("autoencoder training loss is non-finite");
  optimizer_->zero_grad();
  nn::backward(loss);
  optimizer_->step();
  ++trained_steps_;
  return value;
}

TextMotionMatcher::TextMotionMatcher(const EvaluatorConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  motion_enc_ = nn::Mlp(rng, {cfg_.motion_dim, cfg_.hidden, cfg_.latent});
  text::TextEncoderConfig tcfg;
  tcfg.dim = cfg_.text_dim;
  text_base_ = text::TextEncoder(tcfg, rng);
  text_head_ = nn::Linear(rng, cfg_.text_dim, cfg_.latent);
  motion_enc_.collect("motion_enc", params_);
  text_base_.collect("text_base", params_);
  text_head_.collect("text_head", params_);
  nn::AdamWOptions opts;
  opts.lr = cfg_.lr;
  optimizer_ = std::make_unique<nn::AdamW>(params_, opts);
}

nn::Var TextMotionMatcher::motion_embedding(const Mat& features) const {
  check_features(features, cfg_.motion_dim, "matcher motion embedding");
  nn::Var pooled = nn::mean_rows(motion_enc_.forward(nn::Var::constant(features)));
  return unit_rows(pooled);
}

nn::Var TextMotionMatcher::text_embedding(const std::string& text) const {
  if (text.empty()) throw InvalidInput("matcher text embedding: empty text");
  return unit_rows(text_head_.forward(text_base_.encode(text)));
}

Vec TextMotionMatcher::embed_motion(const Mat& features) const {
  return motion_embedding(features).value().row(0).transpose();
}

Vec TextMotionMatcher::embed_text(const std::string& text) const {
  return text_embedding(text).value().row(0).transpose();
}

double TextMotionMatcher::train_step(const std::vector<EvalExample>& batch) {
  if (batch.empty()) throw InvalidInput("matcher train_step: empty batch");
  std::vector<nn::Var> motion_rows, text_rows;
  motion_rows.reserve(batch.size());
  text_rows.reserve(batch.size());
  for (const EvalExample& ex : batch) {
    motion_rows.push_back(motion_embedding(ex.features));
    text_rows.push_back(text_embedding(ex.text));
  }
  nn::Var m = nn::concat_rows(motion_rows);  // B x latent
  nn::Var t = nn::concat_rows(text_rows);
  nn::Var logits = nn::mul_scalar(nn::matmul(m, nn::transpose(t)), kLogitScale);
  nn::Var m2t = nn::neg(diagonal_mean(log_softmax_rows(logits)));
  nn::Var t2m = nn::neg(diagonal_mean(log_softmax_rows(nn::transpose(logits))));
  nn::Var loss = nn::mul_scalar(nn::add(m2t, t2m), 0.5);
  const double value = loss.item();
  if (!std::isfinite(value)) throw NumericError("matcher training loss is non-finite");
  optimizer_->zero_grad();
  nn::backward(loss);
  optimizer_->step();
  ++trained_steps_;
  return value;
}

Mat Evaluators::motion_features(const std::vector<Mat>& clips) const {
  if (!ae) throw InvalidInput("evaluators: autoencoder missing");
  if (clips.empty()) throw InvalidInput("motion_features: no clips");
  Mat out(static_cast<Eigen::Index>(clips.size()), cfg.latent);
  for (size_t i = 0; i < clips.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = ae->embed(clips[i]).transpose();
  }
  return out;
}

std::pair<Mat, Mat> Evaluators::retrieval_features(
    const std::vector<EvalExample>& examples) const {
  if (!matcher) throw InvalidInput("evaluators: matcher missing");
  if (examples.empty()) throw InvalidInput("retrieval_features: no examples");
  Mat motion(static_cast<Eigen::Index>(examples.size()), cfg.latent);
  Mat text(static_cast<Eigen::Index>(examples.size()), cfg.latent);
  for (size_t i = 0; i < examples.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    motion.row(r) = matcher->embed_motion(examples[i].features).transpose();
    text.row(r) = matcher->embed_text(examples[i].text).transpose();
  }
  return {motion, text};
}

Evaluators train_evaluators(const std::vector<EvalExample>& data, const EvaluatorConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw InvalidInput("train_evaluators: no training examples");
  Rng rng(cfg.seed);
  Evaluators ev;
  ev.cfg = cfg;
  ev.ae = std::make_shared<MotionAutoencoder>(cfg, rng);
  ev.matcher = std::make_shared<TextMotionMatcher>(cfg, rng);

  const int n = static_cast<int>(data.size());
  const int bs = std::min(cfg.batch_size, n);
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<int> perm = rng.permutation(n);
    std::vector<Mat> clips;
    std::vector<EvalExample> pairs;
    clips.reserve(bs);
    pairs.reserve(bs);
    for (int i = 0; i < bs; ++i) {
      clips.push_back(data[static_cast<size_t>(perm[i])].features);
      pairs.push_back(data[static_cast<size_t>(perm[i])]);
    }
    ev.ae->train_step(clips);
    ev.matcher->train_step(pairs);
  }
  return ev;
}

void save_evaluators(const std::filesystem::path& path, const Evaluators& ev,
                     const std::string& config_hash) {
  if (!ev.ae || !ev.matcher) throw InvalidInput("save_evaluators: models missing");
  nn::ParamMap combined;
  for (const auto& [name, var] : ev.ae->params().entries()) combined.add("ae." + name, var);
  for (const auto& [name, var] : ev.matcher->params().entries()) {
    combined.add("matcher." + name, var);
  }
  io::CheckpointMeta meta;
  meta.config_hash = config_hash;
  meta.step = std::max(ev.ae->trained_steps(), ev.matcher->trained_steps());
  io::save_checkpoint(path, combined, meta);
}

Evaluators load_evaluators(const std::filesystem::path& path, const EvaluatorConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Evaluators ev;
  ev.cfg = cfg;
  ev.ae = std::make_shared<MotionAutoencoder>(cfg, rng);
  ev.matcher = std::make_shared<TextMotionMatcher>(cfg, rng);
  nn::ParamMap combined;
  for (const auto& [name, var] : ev.ae->params().entries()) combined.add("ae." + name, var);
  for (const auto& [name, var] : ev.matcher->params().entries()) {
    combined.add("matcher." + name, var);
  }
  io::CheckpointMeta meta = io::load_checkpoint(path, combined);
  ev.ae->set_trained_steps(meta.step);
  ev.matcher->set_trained_steps(meta.step);
  return ev;
}

Evaluators load_or_train(const std::filesystem::path& path,
                         const std::vector<EvalExample>& data, const EvaluatorConfig& cfg,
                         bool* trained) {
  if (std::filesystem::exists(path)) {
    if (trained) *trained = false;
    return load_evaluators(path, cfg);
  }
  Evaluators ev = train_evaluators(data, cfg);
  save_evaluators(path, ev, "");
  if (trained) *trained = true;
  return ev;
}

}  // namespace hoimo::eval
