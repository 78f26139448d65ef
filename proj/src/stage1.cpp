#include "hoimotion/stage1.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace hoimo::stage1 {

namespace {

// Broadcasts a 1 x d row to n rows (constant graph node for replication).
nn::Var broadcast_row(const nn::Var& row, Eigen::Index n) {
  return nn::matmul(nn::Var::constant(Mat::Ones(n, 1)), row);
}

}  // namespace

Stage1Model::Stage1Model(const Stage1Config& cfg, Rng& rng)
    : cfg_(cfg), schedule_(diffusion::make_cosine_schedule(cfg.timesteps)) {
  text::TextEncoderConfig tc;
  tc.dim = cfg.text_dim;
  tc.vocab_buckets = 512;
  tc.max_tokens = 77;
  text_encoder_ = text::TextEncoder(tc, rng);

  bps_proj_ = nn::Mlp(rng, {cfg.raw_bps_dim, cfg.pc_dim, cfg.pc_dim});
  text_proj_ = nn::Linear(rng, cfg.text_dim, cfg.d_model);
  time_proj_ = nn::Linear(rng, cfg.d_model, cfg.d_model);
  pc_in_ = nn::Linear(rng, cfg.pc_dim, cfg.d_model);
  joint_in_ = nn::Linear(rng, 6, cfg.d_model);
  afford_in_ = nn::Linear(rng, cfg.n_points, cfg.d_model);
  afford_cross_ = nn::MultiheadAttention(rng, cfg.d_model, cfg.n_heads);
  mutual_ = nn::MultiheadAttention(rng, cfg.d_model, cfg.n_heads, /*zero_init_out=*/true);
  for (int b = 0; b < cfg.blocks; ++b) {
    joint_blocks_.emplace_back(rng, cfg.d_model, cfg.n_heads, cfg.d_ff);
    afford_blocks_.emplace_back(rng, cfg.d_model, cfg.n_heads, cfg.d_ff);
  }
  joint_head_ = nn::Linear(rng, cfg.d_model, 6);
  afford_head_ = nn::Linear(rng, cfg.d_model, cfg.n_points);

  text_encoder_.collect("text_encoder", params_);
  bps_proj_.collect("bps_proj", params_);
  text_proj_.collect("text_proj", params_);
  time_proj_.collect("time_proj", params_);
  pc_in_.collect("pc_in", params_);
  joint_in_.collect("joint_in", params_);
  afford_in_.collect("afford_in", params_);
  afford_cross_.collect("afford_cross", params_);
  mutual_.collect("mutual", params_);
  for (std::size_t b = 0; b < joint_blocks_.size(); ++b) {
    joint_blocks_[b].collect("joint_block" + std::to_string(b), params_);
    afford_blocks_[b].collect("afford_block" + std::to_string(b), params_);
  }
  joint_head_.collect("joint_head", params_);
  afford_head_.collect("afford_head", params_);

  nn::AdamWOptions opts;
  opts.lr = cfg.lr;
  optimizer_ = std::make_unique<nn::AdamW>(params_, opts);
}

nn::Var Stage1Model::project_bps(const nn::Var& raw) const {
  if (raw.cols() != cfg_.raw_bps_dim) {
    throw InvalidInput("raw basis-point features have width " + std::to_string(raw.cols()) +
                       ", expected " + std::to_string(cfg_.raw_bps_dim));
  }
  return bps_proj_.forward(raw);
}

nn::Var Stage1Model::encode_text(const std::string& sentence) const {
  return text_encoder_.encode(sentence);
}

ConditionBundle Stage1Model::make_bundle(const std::string& sentence, const Mat& raw_bps) const {
  ConditionBundle bundle;
  bundle.f_text = encode_text(sentence);
  bundle.f_pc = project_bps(nn::Var::constant(raw_bps));
  bundle.t_embed = nn::timestep_embedding(0, cfg_.d_model);
  return bundle;
}

nn::Var Stage1Model::joint_branch(const nn::Var& x_joints, const ConditionBundle& bundle) const {
  const Eigen::Index L = x_joints.rows();
  nn::Var cond = nn::add(text_proj_.forward(bundle.f_text),
                         time_proj_.forward(nn::Var::constant(bundle.t_embed)));
  nn::Var tokens = nn::add(joint_in_.forward(x_joints), pc_in_.forward(bundle.f_pc));
  tokens = nn::add(tokens, nn::Var::constant(nn::positional_encoding(L, cfg_.d_model)));
  nn::Var seq = nn::concat_rows({cond, tokens});  // conditioning token leads
  for (const nn::TransformerBlock& block : joint_blocks_) seq = block.forward(seq);
  return nn::slice_rows(seq, 1, L);
}

nn::Var Stage1Model::affordance_branch(const nn::Var& x_affordance,
                                       const ConditionBundle& bundle) const {
  const Eigen::Index L = x_affordance.rows();
  nn::Var cond = nn::add(text_proj_.forward(bundle.f_text),
                         time_proj_.forward(nn::Var::constant(bundle.t_embed)));
  nn::Var query = nn::add(broadcast_row(cond, L),
                          nn::Var::constant(nn::positional_encoding(L, cfg_.d_model)));
  nn::Var kv = nn::add(afford_in_.forward(x_affordance), pc_in_.forward(bundle.f_pc));
  nn::Var feat = nn::add(query, afford_cross_.forward(query, kv, kv));
  for (const nn::TransformerBlock& block : afford_blocks_) feat = block.forward(feat);
  return feat;
}

nn::Var Stage1Model::mutual_cross_attention(const nn::Var& joint_feat,
                                            const nn::Var& afford_feat) const {
  return nn::add(joint_feat, mutual_.forward(joint_feat, afford_feat, afford_feat));
}

std::pair<nn::Var, nn::Var> Stage1Model::predict_clean(const GuidanceState& state,
                                                       const ConditionBundle& bundle,
                                                       int t) const {
  if (t < 0 || t >= cfg_.timesteps) {
    throw InvalidInput("diffusion step " + std::to_string(t) + " outside schedule");
  }
  ConditionBundle stepped = bundle;
  stepped.t_embed = nn::timestep_embedding(t, cfg_.d_model);
  nn::Var joint_feat = joint_branch(state.x_joints, stepped);
  nn::Var afford_feat = affordance_branch(state.x_affordance, stepped);
  nn::Var fused = mutual_cross_attention(joint_feat, afford_feat);
  return {joint_head_.forward(fused), afford_head_.forward(afford_feat)};
}

TrainStats Stage1Model::train_step(const std::vector<TrainExample>& batch, Rng& rng) {
  if (batch.empty()) throw InvalidInput("training batch is empty");
  std::vector<nn::Var> joint_losses, afford_losses;
  for (const TrainExample& ex : batch) {
    if (ex.joints.rows() != ex.affordance.rows() || ex.joints.rows() != ex.raw_bps.rows()) {
      throw InvalidInput("training example has inconsistent frame counts");
    }
    const int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg_.timesteps)));
    ConditionBundle bundle = make_bundle(ex.text, ex.raw_bps);
    GuidanceState state;
    state.t = t;
    state.x_joints = nn::Var::constant(forward_diffuse(
        ex.joints, t, rng.normal_mat(ex.joints.rows(), ex.joints.cols()), schedule_));
    state.x_affordance = nn::Var::constant(forward_diffuse(
        ex.affordance, t, rng.normal_mat(ex.affordance.rows(), ex.affordance.cols()),
        schedule_));
    auto [x0_j, x0_a] = predict_clean(state, bundle, t);
    joint_losses.push_back(
        nn::mean_all(nn::abs_op(nn::sub(x0_j, nn::Var::constant(ex.joints)))));
    afford_losses.push_back(
        nn::mean_all(nn::abs_op(nn::sub(x0_a, nn::Var::constant(ex.affordance)))));
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  nn::Var joint_loss = joint_losses[0];
  nn::Var afford_loss = afford_losses[0];
  for (std::size_t i = 1; i < joint_losses.size(); ++i) {
    joint_loss = nn::add(joint_loss, joint_losses[i]);
    afford_loss = nn::add(afford_loss, afford_losses[i]);
  }
  joint_loss = nn::mul_scalar(joint_loss, inv);
  afford_loss = nn::mul_scalar(afford_loss, inv);
  nn::Var loss = nn::add(joint_loss, afford_loss);
  if (!std::isfinite(loss.item())) throw NumericError("stage-1 training loss is non-finite");

  optimizer_->zero_grad();
  nn::backward(loss);
  optimizer_->step();
  ++trained_steps_;

  TrainStats stats;
  stats.loss = loss.item();
  stats.joint_loss = joint_loss.item();
  stats.affordance_loss = afford_loss.item();
  return stats;
}

GuidancePair sample_loop(const CleanPredictor& predict,
                         const diffusion::DiffusionSchedule& schedule,
                         Eigen::Index frames, Eigen::Index n_points,
                         std::uint64_t seed, std::vector<int>* visited) {
  if (frames <= 0) throw InvalidInput("sampling needs at least one frame");
  Rng rng(seed);
  Mat x_j = rng.normal_mat(frames, 6);
  Mat x_a = rng.normal_mat(frames, n_points);
  for (int t = schedule.T - 1; t >= 0; --t) {
    if (visited != nullptr) visited->push_back(t);
    auto [x0_j, x0_a] = predict(x_j, x_a, t);
    Mat mu_j = diffusion::posterior_mean(x0_j, x_j, t, schedule);
    Mat mu_a = diffusion::posterior_mean(x0_a, x_a, t, schedule);
    const double sigma = std::sqrt(schedule.posterior_var(t));
    if (t > 0) {
      x_j = mu_j + sigma * rng.normal_mat(frames, 6);
      x_a = mu_a + sigma * rng.normal_mat(frames, n_points);
    } else {
      x_j = mu_j;
      x_a = mu_a;
    }
    if (!x_j.allFinite() || !x_a.allFinite()) {
      throw NumericError("sampling produced non-finite values at step " + std::to_string(t));
    }
  }
  GuidancePair out;
  out.joints = x_j;
  // The affordance channel is a response in (0, 1]: exact zeros would erase
  // contact candidates downstream, so the floor sits just above zero.
  out.affordance = x_a.cwiseMax(1e-6).cwiseMin(1.0);
  return out;
}

GuidancePair Stage1Model::sample(const ConditionBundle& bundle, Eigen::Index frames,
                                 std::uint64_t seed, std::vector<int>* visited) const {
  CleanPredictor predict = [&](const Mat& x_j, const Mat& x_a, int t) {
    GuidanceState state;
    state.t = t;
    state.x_joints = nn::Var::constant(x_j);
    state.x_affordance = nn::Var::constant(x_a);
    auto [j, a] = predict_clean(state, bundle, t);
    return std::make_pair(j.value(), a.value());
  };
  return sample_loop(predict, schedule_, frames, cfg_.n_points, seed, visited);
}

}  // namespace hoimo::stage1
