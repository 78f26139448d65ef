#include "hoimotion/stage2.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <utility>

namespace hoimo::stage2 {

namespace {

// Smoothing for Euclidean norms: sqrt(s + eps^2) - eps is exactly zero at
// s = 0, has a finite gradient there, and is within eps of the true norm.
constexpr double kNormEps = 1e-8;

nn::Linear clone_linear(const nn::Linear& src) {
  Rng unused(0);
  nn::Linear dst(unused, src.weight.rows(), src.weight.cols(), /*zero_init=*/true);
  dst.weight.set_value(src.weight.value());
  dst.bias.set_value(src.bias.value());
  return dst;
}

void copy_block_values(nn::TransformerBlock& src, nn::TransformerBlock& dst) {
  nn::ParamMap s, d;
  src.collect("b", s);
  dst.collect("b", d);
  for (auto& [name, var] : d.entries()) var.set_value(s.at(name).value());
}

Mat mask_col(const MaskMat& mask, Eigen::Index col, Eigen::Index rows) {
  Mat m(rows, 1);
  for (Eigen::Index i = 0; i < rows; ++i) m(i, 0) = mask(i, col) ? 1.0 : 0.0;
  return m;
}

}  // namespace

// ---------------------------------------------------------------- BaseDenoiser

BaseDenoiser::BaseDenoiser(const Stage2Config& cfg, Rng& rng)
    : cfg_(cfg), schedule_(diffusion::make_cosine_schedule(cfg.timesteps)) {
  text::TextEncoderConfig tc;
  tc.dim = cfg.text_dim;
  tc.vocab_buckets = 512;
  tc.max_tokens = 77;
  text_encoder_ = text::TextEncoder(tc, rng);

  in_ = nn::Linear(rng, cfg.motion_dim, cfg.d_model);
  text_proj_ = nn::Linear(rng, cfg.text_dim, cfg.d_model);
  time_proj_ = nn::Linear(rng, cfg.d_model, cfg.d_model);
  for (int b = 0; b < cfg.blocks; ++b) blocks_.emplace_back(rng, cfg.d_model, cfg.n_heads, cfg.d_ff);
  head_ = nn::Linear(rng, cfg.d_model, cfg.motion_dim);

  text_encoder_.collect("text_encoder", params_);
  in_.collect("in", params_);
  text_proj_.collect("text_proj", params_);
  time_proj_.collect("time_proj", params_);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    blocks_[b].collect("block" + std::to_string(b), params_);
  }
  head_.collect("head", params_);

  nn::AdamWOptions opts;
  opts.lr = cfg.lr;
  optimizer_ = std::make_unique<nn::AdamW>(params_, opts);
}

nn::Var BaseDenoiser::encode_text(const std::string& sentence) const {
  return text_encoder_.encode(sentence);
}

nn::Var BaseDenoiser::denoise(const nn::Var& x_t, int t, const nn::Var& f_text,
                              const std::vector<nn::Var>* injections) const {
  if (x_t.cols() != cfg_.motion_dim) {
    throw InvalidInput("denoiser input has width " + std::to_string(x_t.cols()) + ", expected " +
                       std::to_string(cfg_.motion_dim));
  }
  if (t < 0 || t >= cfg_.timesteps) {
    throw InvalidInput("diffusion step " + std::to_string(t) + " outside schedule");
  }
  if (injections != nullptr && injections->size() != blocks_.size()) {
    throw InvalidInput("injection count does not match block count");
  }
  const Eigen::Index L = x_t.rows();
  nn::Var cond = nn::add(
      text_proj_.forward(f_text),
      time_proj_.forward(nn::Var::constant(nn::timestep_embedding(t, cfg_.d_model))));
  nn::Var tokens = nn::add(in_.forward(x_t),
                           nn::Var::constant(nn::positional_encoding(L, cfg_.d_model)));
  nn::Var seq = nn::concat_rows({cond, tokens});
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    seq = blocks_[l].forward(seq);
    if (injections != nullptr) seq = nn::add(seq, (*injections)[l]);
  }
  return head_.forward(nn::slice_rows(seq, 1, L));
}

double BaseDenoiser::train_step(const std::vector<MotionExample>& batch, Rng& rng) {
  if (batch.empty()) throw InvalidInput("training batch is empty");
  std::vector<nn::Var> losses;
  for (const MotionExample& ex : batch) {
    if (ex.features.cols() != cfg_.motion_dim) {
      throw InvalidInput("training example has feature width " + std::to_string(ex.features.cols()));
    }
    const int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg_.timesteps)));
    nn::Var f_text = encode_text(ex.text);
    nn::Var x_t = nn::Var::constant(forward_diffuse(
        ex.features, t, rng.normal_mat(ex.features.rows(), ex.features.cols()), schedule_));
    nn::Var x0 = denoise(x_t, t, f_text);
    losses.push_back(nn::mean_all(nn::abs_op(nn::sub(x0, nn::Var::constant(ex.features)))));
  }
  nn::Var loss = losses[0];
  for (std::size_t i = 1; i < losses.size(); ++i) loss = nn::add(loss, losses[i]);
  loss = nn::mul_scalar(loss, 1.0 / static_cast<double>(batch.size()));
  if (!std::isfinite(loss.item())) throw NumericError("base denoiser training loss is non-finite");

  optimizer_->zero_grad();
  nn::backward(loss);
  optimizer_->step();
  ++trained_steps_;
  return loss.item();
}

// ---------------------------------------------------------------- Stage2Model

void GuidanceWeights::validate() const {
  if (!std::isfinite(alpha) || alpha < 0.0 || !std::isfinite(beta) || beta < 0.0) {
    throw InvalidInput("guidance velocity/acceleration weights must be finite and non-negative");
  }
  if (!std::isfinite(h_g)) throw InvalidInput("ground height must be finite");
  if (lbfgs_iters < 0) throw InvalidInput("refinement iteration count must be non-negative");
}

Stage2Model::Stage2Model(const Stage2Config& cfg, std::shared_ptr<BaseDenoiser> base, Rng& rng)
    : cfg_(cfg),
      schedule_(diffusion::make_cosine_schedule(cfg.timesteps)),
      base_(std::move(base)) {
  if (!base_) throw InvalidInput("stage-2 model needs a base denoiser");
  const Stage2Config& bc = base_->config();
  if (bc.motion_dim != cfg.motion_dim || bc.d_model != cfg.d_model ||
      bc.timesteps != cfg.timesteps || bc.blocks != cfg.blocks || bc.text_dim != cfg.text_dim ||
      bc.n_heads != cfg.n_heads || bc.d_ff != cfg.d_ff) {
    throw InvalidInput("base denoiser configuration does not match stage-2 configuration");
  }
  base_->params().freeze();

  text::TextEncoderConfig tc;
  tc.dim = cfg.text_dim;
  tc.vocab_buckets = 512;
  tc.max_tokens = 256;  // three-phase text needs the long budget
  fine_encoder_ = text::TextEncoder(tc, rng);

  bps_proj_ = nn::Mlp(rng, {cfg.raw_bps_dim, cfg.pc_dim, cfg.pc_dim});
  afford_mlp_ = nn::Mlp(rng, {cfg.pc_dim + cfg.n_points, cfg.d_ff, cfg.d_ff, cfg.fusion_dim});
  joint_mlp_ = nn::Mlp(rng, {6, cfg.fusion_dim, cfg.fusion_dim});
  fusion_temporal_ = nn::TransformerBlock(rng, cfg.fusion_dim, cfg.n_heads, cfg.d_ff);
  fusion_cross_ = nn::MultiheadAttention(rng, cfg.fusion_dim, cfg.n_heads, /*zero_init_out=*/true);

  // The trainable branch starts as an exact value copy of the frozen base;
  // its per-block links start at zero so the combined model reproduces the
  // base bit for bit until training moves the links.
  copy_in_ = clone_linear(base_->in_);
  ctrl_text_proj_ = clone_linear(base_->text_proj_);
  ctrl_time_proj_ = clone_linear(base_->time_proj_);
  fine_proj_ = nn::Linear(rng, cfg.text_dim, cfg.d_model);
  fusion_proj_ = nn::Linear(rng, cfg.fusion_dim, cfg.d_model);
  for (int b = 0; b < cfg.blocks; ++b) {
    copy_blocks_.emplace_back(rng, cfg.d_model, cfg.n_heads, cfg.d_ff);
    copy_block_values(base_->blocks_[static_cast<std::size_t>(b)], copy_blocks_.back());
    links_.emplace_back(rng, cfg.d_model, cfg.d_model, /*zero_init=*/true);
  }

  fine_encoder_.collect("fine_encoder", params_);
  bps_proj_.collect("bps_proj", params_);
  afford_mlp_.collect("afford_mlp", params_);
  joint_mlp_.collect("joint_mlp", params_);
  fusion_temporal_.collect("fusion_temporal", params_);
  fusion_cross_.collect("fusion_cross", params_);
  copy_in_.collect("copy_in", params_);
  ctrl_text_proj_.collect("ctrl_text_proj", params_);
  ctrl_time_proj_.collect("ctrl_time_proj", params_);
  fine_proj_.collect("fine_proj", params_);
  fusion_proj_.collect("fusion_proj", params_);
  for (std::size_t b = 0; b < copy_blocks_.size(); ++b) {
    copy_blocks_[b].collect("copy_block" + std::to_string(b), params_);
    links_[b].collect("link" + std::to_string(b), params_);
  }

  nn::AdamWOptions opts;
  opts.lr = cfg.lr;
  optimizer_ = std::make_unique<nn::AdamW>(params_, opts);
}

nn::Var Stage2Model::encode_fine_text(const std::array<std::string, 3>& sentences) const {
  return fine_encoder_.encode_fine({sentences.begin(), sentences.end()});
}

nn::Var Stage2Model::project_bps(const nn::Var& raw) const {
  if (raw.cols() != cfg_.raw_bps_dim) {
    throw InvalidInput("raw basis-point features have width " + std::to_string(raw.cols()) +
                       ", expected " + std::to_string(cfg_.raw_bps_dim));
  }
  return bps_proj_.forward(raw);
}

nn::Var Stage2Model::fuse_affordance(const nn::Var& f_pc, const nn::Var& affordance) const {
  if (f_pc.rows() != affordance.rows()) {
    throw InvalidInput("geometry and affordance streams disagree on frame count");
  }
  if (f_pc.cols() != cfg_.pc_dim || affordance.cols() != cfg_.n_points) {
    throw InvalidInput("fusion inputs have unexpected widths");
  }
  nn::Var h = afford_mlp_.forward(nn::concat_cols({f_pc, affordance}));
  return fusion_temporal_.forward(h);
}

nn::Var Stage2Model::fuse_joints(const nn::Var& hand_joints, const nn::Var& fused) const {
  if (hand_joints.cols() != 6) throw InvalidInput("hand trajectory must have six columns");
  if (hand_joints.rows() != fused.rows()) {
    throw InvalidInput("hand trajectory and fused stream disagree on frame count");
  }
  nn::Var q = joint_mlp_.forward(hand_joints);
  return nn::add(q, fusion_cross_.forward(q, fused, fused));
}

FusedCondition Stage2Model::make_condition(const std::string& coarse,
                                           const std::array<std::string, 3>& fine,
                                           const Mat& raw_bps, const Mat& hand_targets,
                                           const Mat& affordance) const {
  const Eigen::Index L = raw_bps.rows();
  if (L == 0) throw InvalidInput("conditioning needs at least one frame");
  if (hand_targets.rows() != L || affordance.rows() != L) {
    throw InvalidInput("conditioning streams disagree on frame count");
  }
  FusedCondition cond;
  cond.f_text = base_->encode_text(coarse);
  cond.f_text_fine = encode_fine_text(fine);
  nn::Var f_pc = project_bps(nn::Var::constant(raw_bps));
  nn::Var fused = fuse_affordance(f_pc, nn::Var::constant(affordance));
  cond.f_fusion = fuse_joints(nn::Var::constant(hand_targets), fused);
  return cond;
}

nn::Var Stage2Model::controlnet_denoise(const nn::Var& x_t, int t,
                                        const FusedCondition& cond) const {
  if (cond.f_fusion.rows() != x_t.rows()) {
    throw InvalidInput("fused condition and noisy motion disagree on frame count");
  }
  const Eigen::Index L = x_t.rows();
  nn::Var t_emb = nn::Var::constant(nn::timestep_embedding(t, cfg_.d_model));
  nn::Var c_cond = nn::add(nn::add(ctrl_text_proj_.forward(cond.f_text),
                                   ctrl_time_proj_.forward(t_emb)),
                           fine_proj_.forward(cond.f_text_fine));
  nn::Var c_tokens = nn::add(nn::add(copy_in_.forward(x_t),
                                     nn::Var::constant(nn::positional_encoding(L, cfg_.d_model))),
                             fusion_proj_.forward(cond.f_fusion));
  nn::Var c_seq = nn::concat_rows({c_cond, c_tokens});
  std::vector<nn::Var> injections;
  injections.reserve(copy_blocks_.size());
  for (const nn::TransformerBlock& block : copy_blocks_) {
    c_seq = block.forward(c_seq);
    injections.push_back(links_[injections.size()].forward(c_seq));
  }
  return base_->denoise(x_t, t, cond.f_text, &injections);
}

double Stage2Model::train_controlnet(const std::vector<ControlExample>& batch, Rng& rng) {
  if (batch.empty()) throw InvalidInput("training batch is empty");
  std::vector<nn::Var> losses;
  for (const ControlExample& ex : batch) {
    const Eigen::Index L = ex.features.rows();
    if (ex.features.cols() != cfg_.motion_dim || ex.raw_bps.rows() != L ||
        ex.hand_targets.rows() != L || ex.affordance.rows() != L) {
      throw InvalidInput("training example has inconsistent shapes");
    }
    FusedCondition cond = make_condition(ex.coarse, ex.fine, ex.raw_bps, ex.hand_targets,
                                         ex.affordance);
    const int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg_.timesteps)));
    nn::Var x_t = nn::Var::constant(
        forward_diffuse(ex.features, t, rng.normal_mat(L, cfg_.motion_dim), schedule_));
    nn::Var x0 = controlnet_denoise(x_t, t, cond);
    losses.push_back(nn::mean_all(nn::abs_op(nn::sub(x0, nn::Var::constant(ex.features)))));
  }
  nn::Var loss = losses[0];
  for (std::size_t i = 1; i < losses.size(); ++i) loss = nn::add(loss, losses[i]);
  loss = nn::mul_scalar(loss, 1.0 / static_cast<double>(batch.size()));
  if (!std::isfinite(loss.item())) throw NumericError("stage-2 training loss is non-finite");

  optimizer_->zero_grad();
  nn::backward(loss);
  optimizer_->step();
  ++trained_steps_;
  return loss.item();
}

namespace {

void binarize_contacts(Mat& features) {
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (int c = 0; c < 4; ++c) {
      double& v = features(i, motion::feat::kContact + c);
      v = v >= 0.5 ? 1.0 : 0.0;
    }
  }
}

}  // namespace

motion::MotionSequence Stage2Model::sample(const FusedCondition& cond, Eigen::Index frames,
                                           std::uint64_t seed) const {
  if (frames <= 0) throw InvalidInput("sampling needs at least one frame");
  Rng rng(seed);
  Mat x = rng.normal_mat(frames, cfg_.motion_dim);
  for (int t = cfg_.timesteps - 1; t >= 0; --t) {
    Mat x0 = controlnet_denoise(nn::Var::constant(x), t, cond).value();
    Mat mu = diffusion::posterior_mean(x0, x, t, schedule_);
    if (t > 0) {
      x = mu + std::sqrt(schedule_.posterior_var(t)) * rng.normal_mat(frames, cfg_.motion_dim);
    } else {
      x = mu;
    }
    if (!x.allFinite()) {
      throw NumericError("sampling produced non-finite values at step " + std::to_string(t));
    }
  }
  binarize_contacts(x);
  motion::MotionSequence m;
  m.features = std::move(x);
  m.fps = cfg_.fps;
  m.validate();
  return m;
}

motion::MotionSequence Stage2Model::guided_sample(const FusedCondition& cond,
                                                  const GuidanceTargets& targets,
                                                  const GuidanceWeights& weights,
                                                  Eigen::Index frames, std::uint64_t seed,
                                                  std::vector<std::string>* warnings) const {
  if (frames <= 0) throw InvalidInput("sampling needs at least one frame");
  weights.validate();
  const bool refine = (weights.joint_guidance || weights.foot_guidance) && weights.lbfgs_iters > 0;
  if (refine && weights.joint_guidance) {
    if (targets.hand_targets.rows() != frames || targets.hand_targets.cols() != 6) {
      throw InvalidInput("hand guidance targets must be frames x 6");
    }
    if (targets.hand_mask.rows() != frames || targets.hand_mask.cols() != 2) {
      throw InvalidInput("hand guidance mask must be frames x 2");
    }
    if (!targets.hand_targets.allFinite()) {
      throw InvalidInput("hand guidance targets contain non-finite values");
    }
  }

  Rng rng(seed);
  Mat x = rng.normal_mat(frames, cfg_.motion_dim);
  opt::LbfgsOptions opts;
  opts.max_iters = weights.lbfgs_iters;

  for (int t = cfg_.timesteps - 1; t >= 0; --t) {
    Mat x0 = controlnet_denoise(nn::Var::constant(x), t, cond).value();
    Mat mu = diffusion::posterior_mean(x0, x, t, schedule_);

    if (refine) {
      // The contact pattern the foot loss gates on is read off the current
      // clean estimate and held fixed while the mean moves.
      const MaskMat foot_mask = foot_contact_mask(x0);
      const double c1 = schedule_.c1(t);
      const Mat c2_xt = schedule_.c2(t) * x;
      opt::Objective objective = [&](const Mat& mu_cand, Mat& grad) -> double {
        nn::Var mu_v(mu_cand, /*requires_grad=*/true);
        nn::Var x0_v = nn::mul_scalar(nn::sub(mu_v, nn::Var::constant(c2_xt)), 1.0 / c1);
        nn::Var joints = motion::recover_joints_var(x0_v);
        nn::Var loss = nn::Var::scalar(0.0);
        if (weights.joint_guidance) {
          loss = nn::add(loss,
                         joint_guidance_loss_var(joints, targets.hand_targets, targets.hand_mask));
        }
        if (weights.foot_guidance) {
          loss = nn::add(loss, foot_guidance_loss_var(joints, foot_mask, weights));
        }
        const double value = loss.item();
        grad = Mat::Zero(mu_cand.rows(), mu_cand.cols());
        if (!std::isfinite(value)) return value;
        nn::backward(loss);
        grad = mu_v.grad();
        if (!grad.allFinite()) {
          grad.setZero();
          return std::numeric_limits<double>::infinity();
        }
        return value;
      };
      opt::LbfgsResult result = opt::minimize(objective, mu, opts);
      if (std::isfinite(result.loss)) {
        mu = result.x;
      } else if (warnings != nullptr) {
        warnings->push_back("guidance loss non-finite at step " + std::to_string(t) +
                            "; refinement skipped");
      }
    }

    if (t > 0) {
      x = mu + std::sqrt(schedule_.posterior_var(t)) * rng.normal_mat(frames, cfg_.motion_dim);
    } else {
      x = mu;
    }
    if (!x.allFinite()) {
      throw NumericError("sampling produced non-finite values at step " + std::to_string(t));
    }
  }
  binarize_contacts(x);
  motion::MotionSequence m;
  m.features = std::move(x);
  m.fps = cfg_.fps;
  m.validate();
  return m;
}

// -------------------------------------------------------------- guidance losses

nn::Var joint_guidance_loss_var(const nn::Var& joints66, const Mat& hand_targets,
                                const MaskMat& hand_mask) {
  const Eigen::Index L = joints66.rows();
  if (joints66.cols() != 3 * motion::skel::kJoints) {
    throw InvalidInput("joint matrix must have 66 columns");
  }
  if (hand_targets.rows() != L || hand_targets.cols() != 6) {
    throw InvalidInput("hand targets must be frames x 6");
  }
  if (hand_mask.rows() != L || hand_mask.cols() != 2) {
    throw InvalidInput("hand mask must be frames x 2");
  }
  Eigen::Index masked_frames = 0;
  for (Eigen::Index i = 0; i < L; ++i) {
    if (hand_mask(i, 0) || hand_mask(i, 1)) ++masked_frames;
  }
  if (masked_frames == 0) return nn::Var::scalar(0.0);

  const std::array<int, 2> hands = {motion::skel::kLeftHand, motion::skel::kRightHand};
  nn::Var total = nn::Var::scalar(0.0);
  for (int h = 0; h < 2; ++h) {
    nn::Var pred = nn::slice_cols(joints66, 3 * hands[static_cast<std::size_t>(h)], 3);
    nn::Var diff = nn::sub(pred, nn::Var::constant(hand_targets.middleCols(3 * h, 3)));
    nn::Var sq = nn::sum_cols(nn::square(diff));  // L x 1
    nn::Var dist = nn::add_scalar(nn::sqrt_op(nn::add_scalar(sq, kNormEps * kNormEps)), -kNormEps);
    total = nn::add(total, nn::sum_all(nn::mul(dist, nn::Var::constant(mask_col(hand_mask, h, L)))));
  }
  const double denom = 2.0 * static_cast<double>(masked_frames);
  return nn::mul_scalar(total, 1.0 / denom);
}

double joint_guidance_loss(const motion::JointSeq& pred, const Mat& hand_targets,
                           const MaskMat& hand_mask) {
  return joint_guidance_loss_var(nn::Var::constant(motion::joints_to_mat(pred)), hand_targets,
                                 hand_mask)
      .item();
}

nn::Var foot_guidance_loss_var(const nn::Var& joints66, const MaskMat& foot_contact,
                               const GuidanceWeights& w) {
  w.validate();
  const Eigen::Index L = joints66.rows();
  if (joints66.cols() != 3 * motion::skel::kJoints) {
    throw InvalidInput("joint matrix must have 66 columns");
  }
  if (foot_contact.rows() != L || foot_contact.cols() != 2) {
    throw InvalidInput("foot contact mask must be frames x 2");
  }
  const std::array<int, 2> feet = {motion::skel::kLeftToe, motion::skel::kRightToe};
  nn::Var left_y = nn::slice_cols(joints66, 3 * feet[0] + 1, 1);
  nn::Var right_y = nn::slice_cols(joints66, 3 * feet[1] + 1, 1);
  nn::Var lower = nn::minimum(left_y, right_y);
  nn::Var total = nn::sum_all(nn::square(nn::add_scalar(lower, -w.h_g)));

  for (int f = 0; f < 2; ++f) {
    if (L < 2) break;
    nn::Var p = nn::slice_cols(joints66, 3 * feet[static_cast<std::size_t>(f)], 3);
    nn::Var vel = nn::sub(nn::slice_rows(p, 1, L - 1), nn::slice_rows(p, 0, L - 1));
    nn::Var vel_sq = nn::sum_cols(nn::square(vel));  // (L-1) x 1
    // Contact at frame i gates the displacement from i to i+1.
    Mat vel_mask = mask_col(foot_contact, f, L).topRows(L - 1);
    total = nn::add(total, nn::mul_scalar(
                               nn::sum_all(nn::mul(vel_sq, nn::Var::constant(vel_mask))), w.alpha));
    if (L >= 3) {
      nn::Var acc = nn::sub(nn::slice_rows(vel, 1, L - 2), nn::slice_rows(vel, 0, L - 2));
      nn::Var acc_sq = nn::sum_cols(nn::square(acc));  // (L-2) x 1
      Mat acc_mask = mask_col(foot_contact, f, L).topRows(L - 2);
      total = nn::add(total, nn::mul_scalar(
                                 nn::sum_all(nn::mul(acc_sq, nn::Var::constant(acc_mask))), w.beta));
    }
  }
  return nn::mul_scalar(total, 1.0 / static_cast<double>(L));
}

double foot_guidance_loss(const motion::MotionSequence& m, const GuidanceWeights& w) {
  m.validate();
  const Mat joints = motion::joints_to_mat(motion::recover_joints(m));
  return foot_guidance_loss_var(nn::Var::constant(joints), foot_contact_mask(m.features), w).item();
}

MaskMat foot_contact_mask(const Mat& features) {
  if (features.cols() != motion::feat::kDim) {
    throw InvalidInput("feature matrix must have " + std::to_string(motion::feat::kDim) +
                       " columns");
  }
  const Eigen::Index L = features.rows();
  MaskMat mask(L, 2);
  for (Eigen::Index i = 0; i < L; ++i) {
    mask(i, 0) = features(i, motion::feat::kContact + 0) >= 0.5 ||
                 features(i, motion::feat::kContact + 1) >= 0.5;
    mask(i, 1) = features(i, motion::feat::kContact + 2) >= 0.5 ||
                 features(i, motion::feat::kContact + 3) >= 0.5;
  }
  return mask;
}

}  // namespace hoimo::stage2
