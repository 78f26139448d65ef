#include "doctest.h"

#include "grad_check.hpp"
#include "hoimotion/motion.hpp"
#include "hoimotion/rng.hpp"
#include "hoimotion/stage2.hpp"

#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

using namespace hoimo;
using namespace hoimo::stage2;
using hoimo::motion::JointSeq;

namespace {

MatX3 pose_figure(const Vec3& pelvis, double yaw, double arm_raise = 0.0) {
  MatX3 local(motion::skel::kJoints, 3);
  local.row(0) << 0, 0, 0;
  local.row(1) << 0.10, -0.05, 0;
  local.row(2) << -0.10, -0.05, 0;
  local.row(3) << 0, 0.12, 0;
  local.row(4) << 0.11, -0.45, 0.02;
  local.row(5) << -0.11, -0.45, 0.02;
  local.row(6) << 0, 0.25, 0;
  local.row(7) << 0.11, -0.87, 0;
  local.row(8) << -0.11, -0.87, 0;
  local.row(9) << 0, 0.38, 0;
  local.row(10) << 0.11, -0.88, 0.14;
  local.row(11) << -0.11, -0.88, 0.14;
  local.row(12) << 0, 0.50, 0;
  local.row(13) << 0.06, 0.44, 0;
  local.row(14) << -0.06, 0.44, 0;
  local.row(15) << 0, 0.60, 0.03;
  local.row(16) << 0.18, 0.42, 0;
  local.row(17) << -0.18, 0.42, 0;
  local.row(18) << 0.22, 0.18, 0.10;
  local.row(19) << -0.22, 0.18, 0.10;
  local.row(20) << 0.24, 0.02 + arm_raise, 0.28;
  local.row(21) << -0.24, 0.02 + arm_raise, 0.28;

  const double c = std::cos(yaw), s = std::sin(yaw);
  MatX3 world(motion::skel::kJoints, 3);
  for (int j = 0; j < motion::skel::kJoints; ++j) {
    const double x = local(j, 0), y = local(j, 1), z = local(j, 2);
    world(j, 0) = c * x + s * z + pelvis.x();
    world(j, 1) = y + pelvis.y();
    world(j, 2) = -s * x + c * z + pelvis.z();
  }
  return world;
}

JointSeq moving_clip(int L, double speed, double bob) {
  JointSeq joints;
  for (int l = 0; l < L; ++l) {
    const double t = static_cast<double>(l) / 10.0;
    const Vec3 pelvis(0.2 * speed * t, 0.92 + bob * std::sin(4 * t), speed * t);
    joints.push_back(pose_figure(pelvis, 0.2 * std::sin(t), 0.05 * std::sin(2 * t)));
  }
  return joints;
}

Stage2Config tiny_config() {
  Stage2Config cfg;
  cfg.timesteps = 40;
  cfg.raw_bps_dim = 24;
  cfg.pc_dim = 12;
  cfg.n_points = 4;
  cfg.text_dim = 24;
  cfg.d_model = 16;
  cfg.n_heads = 4;
  cfg.d_ff = 32;
  cfg.blocks = 1;
  cfg.fusion_dim = 16;
  cfg.lr = 2e-3;
  cfg.batch_size = 2;
  cfg.fps = 10.0;
  return cfg;
}

ControlExample make_example(const Stage2Config& cfg, int L, std::uint64_t seed, double speed,
                            double bob = 0.01) {
  JointSeq joints = moving_clip(L, speed, bob);
  motion::MotionSequence m = motion::encode_motion(joints, MaskMat(), cfg.fps);
  ControlExample ex;
  ex.features = m.features;
  ex.coarse = "A person pushes the plasticbox.";
  ex.fine = {"First, the person faces the plasticbox and grasps it with both hands.",
             "Next, maintaining grip, the person pushes it forward with both hands.",
             "Finally, the person releases it, as both legs move to reposition."};
  Rng rng(seed);
  ex.raw_bps = rng.uniform_mat(L, cfg.raw_bps_dim, 0.05, 1.0);
  ex.hand_targets = motion::hand_trajectory(motion::recover_joints(m));
  ex.affordance = rng.uniform_mat(L, cfg.n_points, 1e-3, 1.0);
  return ex;
}

// Joint matrix with every entry fixed; hands and toes are then positioned per
// test so the guidance losses see controlled inputs.
Mat flat_joints(Eigen::Index L) { return Mat::Zero(L, 3 * motion::skel::kJoints); }

void set_joint(Mat& j, Eigen::Index frame, int joint, const Vec3& p) {
  j(frame, 3 * joint + 0) = p.x();
  j(frame, 3 * joint + 1) = p.y();
  j(frame, 3 * joint + 2) = p.z();
}

double masked_hand_distance(const motion::MotionSequence& m, const GuidanceTargets& targets) {
  return joint_guidance_loss(motion::recover_joints(m), targets.hand_targets, targets.hand_mask);
}

}  // namespace

TEST_CASE("base denoiser is deterministic and shape-correct") {
  Stage2Config cfg = tiny_config();
  Rng rng(11);
  BaseDenoiser base(cfg, rng);
  Rng noise(3);
  Mat x = noise.normal_mat(5, cfg.motion_dim);
  nn::Var f_text = base.encode_text("A person lifts the box.");
  nn::Var out1 = base.denoise(nn::Var::constant(x), 7, f_text);
  nn::Var out2 = base.denoise(nn::Var::constant(x), 7, f_text);
  CHECK(out1.rows() == 5);
  CHECK(out1.cols() == cfg.motion_dim);
  CHECK(out1.value().allFinite());
  CHECK((out1.value() - out2.value()).cwiseAbs().maxCoeff() == 0.0);

  SUBCASE("steps outside the schedule are rejected") {
    CHECK_THROWS_AS(base.denoise(nn::Var::constant(x), cfg.timesteps, f_text), InvalidInput);
    CHECK_THROWS_AS(base.denoise(nn::Var::constant(x), -1, f_text), InvalidInput);
  }
  SUBCASE("injection count must match block count") {
    std::vector<nn::Var> wrong;
    CHECK_THROWS_AS(base.denoise(nn::Var::constant(x), 3, f_text, &wrong), InvalidInput);
  }
}

TEST_CASE("zero injections leave the base forward untouched") {
  Stage2Config cfg = tiny_config();
  Rng rng(12);
  BaseDenoiser base(cfg, rng);
  Rng noise(4);
  Mat x = noise.normal_mat(4, cfg.motion_dim);
  nn::Var f_text = base.encode_text("A person moves the bottle.");
  std::vector<nn::Var> zeros;
  for (int b = 0; b < cfg.blocks; ++b) {
    zeros.push_back(nn::Var::constant(Mat::Zero(5, cfg.d_model)));
  }
  Mat plain = base.denoise(nn::Var::constant(x), 9, f_text).value();
  Mat injected = base.denoise(nn::Var::constant(x), 9, f_text, &zeros).value();
  CHECK((plain - injected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("control branch at initialization reproduces the frozen base bitwise") {
  Stage2Config cfg = tiny_config();
  Rng rng(13);
  auto base = std::make_shared<BaseDenoiser>(cfg, rng);
  // Train the base a little so its weights are not at init.
  std::vector<MotionExample> warm;
  ControlExample ex = make_example(cfg, 6, 21, 0.5);
  warm.push_back({ex.features, ex.coarse});
  Rng train_rng(77);
  for (int i = 0; i < 3; ++i) base->train_step(warm, train_rng);

  Mat base_out;
  {
    nn::Var f_text = base->encode_text(ex.coarse);
    base_out = base->denoise(nn::Var::constant(ex.features), 5, f_text).value();
  }
  Stage2Model model(cfg, base, rng);
  FusedCondition cond = model.make_condition(ex.coarse, ex.fine, ex.raw_bps, ex.hand_targets,
                                             ex.affordance);
  Mat ctrl_out = model.controlnet_denoise(nn::Var::constant(ex.features), 5, cond).value();
  CHECK((base_out - ctrl_out).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fused condition has declared shapes and a zero-initialized cross path") {
  Stage2Config cfg = tiny_config();
  Rng rng(14);
  auto base = std::make_shared<BaseDenoiser>(cfg, rng);
  Stage2Model model(cfg, base, rng);
  ControlExample ex = make_example(cfg, 7, 22, 0.8);

  FusedCondition cond = model.make_condition(ex.coarse, ex.fine, ex.raw_bps, ex.hand_targets,
                                             ex.affordance);
  CHECK(cond.f_text.rows() == 1);
  CHECK(cond.f_text.cols() == cfg.text_dim);
  CHECK(cond.f_text_fine.rows() == 1);
  CHECK(cond.f_text_fine.cols() == cfg.text_dim);
  CHECK(cond.f_fusion.rows() == 7);
  CHECK(cond.f_fusion.cols() == cfg.fusion_dim);
  CHECK(cond.f_fusion.value().allFinite());

  // Until training moves the fusion cross-attention output projection, the
  // joint query passes through unchanged regardless of the fused stream.
  nn::Var f_pc = model.project_bps(nn::Var::constant(ex.raw_bps));
  nn::Var fused_a = model.fuse_affordance(f_pc, nn::Var::constant(ex.affordance));
  Mat other = ex.affordance;
  other.col(0).setConstant(0.9);
  nn::Var fused_b = model.fuse_affordance(f_pc, nn::Var::constant(other));
  nn::Var hands = nn::Var::constant(ex.hand_targets);
  Mat ja = model.fuse_joints(hands, fused_a).value();
  Mat jb = model.fuse_joints(hands, fused_b).value();
  CHECK((ja - jb).cwiseAbs().maxCoeff() == 0.0);

  SUBCASE("mismatched shapes are rejected") {
    CHECK_THROWS_AS(model.make_condition(ex.coarse, ex.fine, ex.raw_bps.topRows(3),
                                         ex.hand_targets, ex.affordance),
                    InvalidInput);
    CHECK_THROWS_AS(model.fuse_affordance(f_pc, nn::Var::constant(ex.affordance.topRows(3))),
                    InvalidInput);
    CHECK_THROWS_AS(model.fuse_joints(nn::Var::constant(ex.raw_bps), fused_a), InvalidInput);
  }
}

TEST_CASE("configuration mismatches with the base are rejected") {
  Stage2Config cfg = tiny_config();
  Rng rng(15);
  auto base = std::make_shared<BaseDenoiser>(cfg, rng);
  Stage2Config other = cfg;
  other.d_model = 32;
  CHECK_THROWS_AS(Stage2Model(other, base, rng), InvalidInput);
  CHECK_THROWS_AS(Stage2Model(cfg, nullptr, rng), InvalidInput);
}

TEST_CASE("training updates the control branch and never the frozen base") {
  Stage2Config cfg = tiny_config();
  Rng rng(16);
  auto base = std::make_shared<BaseDenoiser>(cfg, rng);
  Stage2Model model(cfg, base, rng);
  std::vector<ControlExample> batch = {make_example(cfg, 6, 31, 0.4),
                                       make_example(cfg, 8, 32, 1.0)};

  std::vector<Mat> base_before;
  for (const auto& [name, var] : base->params().entries()) base_before.push_back(var.value());
  Mat link_before = model.params().at("link0.weight").value();
  Mat fine_before = model.params().at("fine_proj.weight").value();

  Rng train_rng(5);
  double loss = model.train_controlnet(batch, train_rng);
  CHECK(std::isfinite(loss));
  CHECK(loss > 0.0);
  CHECK(model.trained_steps() == 1);

  std::size_t i = 0;
  for (const auto& [name, var] : base->params().entries()) {
    INFO("base parameter ", name);
    CHECK((var.value() - base_before[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((var.node()->grad.size() == 0 || var.node()->grad.isZero()));
    ++i;
  }
  // The links sit directly on the loss path, so one step must move them.
  CHECK((model.params().at("link0.weight").value() - link_before).cwiseAbs().maxCoeff() > 0.0);
  // Parameters upstream of the zero links get no gradient at init; AdamW
  // weight decay still nudges them, so values may drift but stay finite.
  CHECK(model.params().at("fine_proj.weight").value().allFinite());
  CHECK(fine_before.allFinite());
}

TEST_CASE("analytic gradients of the control stack match finite differences") {
  Stage2Config cfg = tiny_config();
  Rng rng(17);
  auto base = std::make_shared<BaseDenoiser>(cfg, rng);
  Stage2Model model(cfg, base, rng);
  ControlExample ex = make_example(cfg, 4, 41, 0.6);

  // Zero-initialized couplings would zero every upstream gradient; seed them
  // with small values so the check exercises the whole stack.
  Rng jitter(91);
  for (const char* name : {"link0.weight", "fusion_cross.wo.weight"}) {
    Mat v = model.params().at(name).value();
    model.params().at(name).set_value(0.05 * jitter.normal_mat(v.rows(), v.cols()));
  }

  Rng noise(6);
  Mat x_t = forward_diffuse(ex.features, 12, noise.normal_mat(4, cfg.motion_dim),
                            model.schedule());
  auto loss_fn = [&]() {
    FusedCondition cond = model.make_condition(ex.coarse, ex.fine, ex.raw_bps, ex.hand_targets,
                                               ex.affordance);
    nn::Var x0 = model.controlnet_denoise(nn::Var::constant(x_t), 12, cond);
    return nn::mean_all(nn::abs_op(nn::sub(x0, nn::Var::constant(ex.features))));
  };
  const std::vector<std::string> names = {
      "link0.weight",          "copy_in.weight",        "fine_proj.weight",
      "fusion_proj.weight",    "afford_mlp.l0.weight",  "joint_mlp.l0.weight",
      "fusion_temporal.ff1.weight", "fusion_cross.wq.weight", "bps_proj.l0.weight",
      "fine_encoder.embedding", "ctrl_text_proj.weight", "copy_block0.ln1.gamma",
  };
  std::vector<nn::Var> leaves;
  for (const std::string& n : names) leaves.push_back(model.params().at(n));
  testing::check_grads(leaves, loss_fn, 1e-3, 97);
}

TEST_CASE("control conditioning separates clips the frozen base cannot tell apart") {
  Stage2Config cfg = tiny_config();
  cfg.lr = 5e-3;
  Rng rng(18);
  auto base = std::make_shared<BaseDenoiser>(cfg, rng);

  // Two distinct motions share one coarse sentence, so the base converges to
  // their ambiguous blend. The control branch sees per-clip hand targets,
  // geometry, and fine text, which is exactly the information that separates
  // them.
  ControlExample slow = make_example(cfg, 6, 51, 0.3);
  ControlExample fast = make_example(cfg, 6, 52, 1.8, 0.08);
  fast.coarse = slow.coarse;
  fast.fine = {"First, the person faces the plasticbox and grasps it with both hands.",
               "Next, maintaining grip, the person shoves it quickly with both hands.",
               "Finally, the person releases it after the long push."};

  std::vector<MotionExample> base_batch = {{slow.features, slow.coarse},
                                           {fast.features, fast.coarse}};
  Rng base_rng(61);
  std::vector<double> base_losses;
  for (int i = 0; i < 250; ++i) base_losses.push_back(base->train_step(base_batch, base_rng));
  double base_first5 = 0.0, base_last5 = 0.0;
  for (int i = 0; i < 5; ++i) {
    base_first5 += base_losses[static_cast<std::size_t>(i)] / 5.0;
    base_last5 += base_losses[base_losses.size() - 5 + static_cast<std::size_t>(i)] / 5.0;
  }
  INFO("base first5 ", base_first5, " last5 ", base_last5);
  CHECK(base_last5 < 0.5 * base_first5);

  Stage2Model model(cfg, base, rng);

  // Deterministic probe: the same noisy input goes through the frozen base
  // and the conditioned branch; mean L1 to the true clip is compared.
  auto probe = [&](const ControlExample& ex, int t, std::uint64_t noise_seed) {
    Rng noise(noise_seed);
    Mat x_t = forward_diffuse(ex.features, t,
                              noise.normal_mat(ex.features.rows(), cfg.motion_dim),
                              model.schedule());
    FusedCondition cond = model.make_condition(ex.coarse, ex.fine, ex.raw_bps, ex.hand_targets,
                                               ex.affordance);
    nn::Var truth = nn::Var::constant(ex.features);
    const double ctrl =
        nn::mean_all(nn::abs_op(nn::sub(model.controlnet_denoise(nn::Var::constant(x_t), t, cond),
                                        truth)))
            .item();
    const double plain =
        nn::mean_all(nn::abs_op(nn::sub(
                         base->denoise(nn::Var::constant(x_t), t, base->encode_text(ex.coarse)),
                         truth)))
            .item();
    return std::make_pair(ctrl, plain);
  };

  std::vector<ControlExample> batch = {slow, fast};
  Rng ctrl_rng(62);
  std::vector<double> losses;
  for (int i = 0; i < 300; ++i) losses.push_back(model.train_controlnet(batch, ctrl_rng));
  CHECK(model.trained_steps() == 300);
  double first5 = 0.0, last20 = 0.0;
  for (int i = 0; i < 5; ++i) first5 += losses[static_cast<std::size_t>(i)] / 5.0;
  for (int i = 0; i < 20; ++i) last20 += losses[losses.size() - 20 + static_cast<std::size_t>(i)] / 20.0;
  INFO("control first5 ", first5, " last20 ", last20);
  CHECK(last20 < 0.8 * first5);

  // At a mid-schedule step the noisy input no longer identifies the clip, so
  // the trained conditioning must beat the base on both motions.
  double ctrl_sum = 0.0, plain_sum = 0.0;
  for (const ControlExample* ex : {&slow, &fast}) {
    auto [c, p] = probe(*ex, cfg.timesteps / 2, 404);
    ctrl_sum += c;
    plain_sum += p;
  }
  INFO("probe ctrl ", ctrl_sum, " base ", plain_sum);
  CHECK(ctrl_sum < 0.85 * plain_sum);
}

TEST_CASE("sampling is deterministic and produces valid motion") {
  Stage2Config cfg = tiny_config();
  Rng rng(19);
  auto base = std::make_shared<BaseDenoiser>(cfg, rng);
  Stage2Model model(cfg, base, rng);
  ControlExample ex = make_example(cfg, 6, 71, 0.7);
  FusedCondition cond = model.make_condition(ex.coarse, ex.fine, ex.raw_bps, ex.hand_targets,
                                             ex.affordance);

  motion::MotionSequence a = model.sample(cond, 6, 2024);
  motion::MotionSequence b = model.sample(cond, 6, 2024);
  motion::MotionSequence c = model.sample(cond, 6, 2025);
  CHECK(a.features.rows() == 6);
  CHECK(a.features.cols() == cfg.motion_dim);
  a.validate();
  CHECK((a.features - b.features).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.features - c.features).cwiseAbs().maxCoeff() > 0.0);
  for (int ch = 0; ch < 4; ++ch) {
    for (Eigen::Index i = 0; i < a.features.rows(); ++i) {
      const double v = a.features(i, motion::feat::kContact + ch);
      CHECK((v == 0.0 || v == 1.0));
    }
  }
}

TEST_CASE("disabling every guidance term reproduces plain sampling bitwise") {
  Stage2Config cfg = tiny_config();
  Rng rng(20);
  auto base = std::make_shared<BaseDenoiser>(cfg, rng);
  Stage2Model model(cfg, base, rng);
  ControlExample ex = make_example(cfg, 5, 72, 0.9);
  FusedCondition cond = model.make_condition(ex.coarse, ex.fine, ex.raw_bps, ex.hand_targets,
                                             ex.affordance);

  GuidanceWeights off;
  off.joint_guidance = false;
  off.foot_guidance = false;
  motion::MotionSequence plain = model.sample(cond, 5, 31337);
  motion::MotionSequence guided = model.guided_sample(cond, GuidanceTargets{}, off, 5, 31337);
  CHECK((plain.features - guided.features).cwiseAbs().maxCoeff() == 0.0);

  SUBCASE("zero refinement iterations also fall back to plain sampling") {
    GuidanceWeights none;
    none.lbfgs_iters = 0;
    motion::MotionSequence g2 = model.guided_sample(cond, GuidanceTargets{}, none, 5, 31337);
    CHECK((plain.features - g2.features).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("hand guidance pulls sampled hands toward their targets") {
  Stage2Config cfg = tiny_config();
  Rng rng(23);
  auto base = std::make_shared<BaseDenoiser>(cfg, rng);
  Stage2Model model(cfg, base, rng);
  ControlExample ex = make_example(cfg, 6, 73, 0.5);
  FusedCondition cond = model.make_condition(ex.coarse, ex.fine, ex.raw_bps, ex.hand_targets,
                                             ex.affordance);

  GuidanceTargets targets;
  targets.hand_targets = Mat(6, 6);
  for (Eigen::Index i = 0; i < 6; ++i) {
    targets.hand_targets.row(i) << 0.25, 0.85, 0.30, -0.25, 0.85, 0.30;
  }
  targets.hand_mask = MaskMat::Constant(6, 2, true);

  GuidanceWeights weights;
  weights.foot_guidance = false;
  weights.lbfgs_iters = 3;

  GuidanceWeights off;
  off.joint_guidance = false;
  off.foot_guidance = false;

  motion::MotionSequence unguided = model.guided_sample(cond, targets, off, 6, 99);
  std::vector<std::string> warnings;
  motion::MotionSequence guided = model.guided_sample(cond, targets, weights, 6, 99, &warnings);
  const double d_unguided = masked_hand_distance(unguided, targets);
  const double d_guided = masked_hand_distance(guided, targets);
  INFO("unguided ", d_unguided, " guided ", d_guided);
  CHECK(d_guided < d_unguided);
  CHECK(warnings.empty());

  SUBCASE("guided sampling is deterministic per seed") {
    motion::MotionSequence again = model.guided_sample(cond, targets, weights, 6, 99);
    CHECK((guided.features - again.features).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("both guidance terms together still produce valid motion") {
    GuidanceWeights both;
    both.lbfgs_iters = 2;
    motion::MotionSequence m = model.guided_sample(cond, targets, both, 6, 99);
    m.validate();
  }
  SUBCASE("malformed targets and weights are rejected") {
    CHECK_THROWS_AS(model.guided_sample(cond, GuidanceTargets{}, weights, 6, 99), InvalidInput);
    GuidanceWeights bad;
    bad.alpha = -1.0;
    CHECK_THROWS_AS(model.guided_sample(cond, targets, bad, 6, 99), InvalidInput);
    GuidanceWeights bad_iters;
    bad_iters.lbfgs_iters = -2;
    CHECK_THROWS_AS(model.guided_sample(cond, targets, bad_iters, 6, 99), InvalidInput);
  }
}

TEST_CASE("hand alignment loss matches hand-computed values") {
  const Eigen::Index L = 4;
  Mat joints = flat_joints(L);
  Mat targets = Mat::Zero(L, 6);
  MaskMat mask = MaskMat::Constant(L, 2, false);

  SUBCASE("zero when predictions sit exactly on the targets") {
    mask.setConstant(true);
    for (Eigen::Index i = 0; i < L; ++i) {
      set_joint(joints, i, motion::skel::kLeftHand, Vec3(0.1 * double(i), 0.8, 0.2));
      set_joint(joints, i, motion::skel::kRightHand, Vec3(-0.1, 0.8, 0.2));
      targets.row(i) << 0.1 * double(i), 0.8, 0.2, -0.1, 0.8, 0.2;
    }
    CHECK(joint_guidance_loss_var(nn::Var::constant(joints), targets, mask).item() == 0.0);
  }
  SUBCASE("a single three-centimeter deviation averages over the guided hands") {
    mask(1, 0) = true;
    set_joint(joints, 1, motion::skel::kLeftHand, Vec3(0.03, 0.0, 0.0));
    const double loss = joint_guidance_loss_var(nn::Var::constant(joints), targets, mask).item();
    CHECK(loss == doctest::Approx(0.015).epsilon(1e-6));
  }
  SUBCASE("all-false masks give exactly zero") {
    set_joint(joints, 0, motion::skel::kLeftHand, Vec3(9.0, 9.0, 9.0));
    CHECK(joint_guidance_loss_var(nn::Var::constant(joints), targets, mask).item() == 0.0);
  }
  SUBCASE("doubling every masked deviation doubles the loss") {
    mask(0, 0) = mask(2, 1) = true;
    set_joint(joints, 0, motion::skel::kLeftHand, Vec3(0.02, 0.01, -0.03));
    set_joint(joints, 2, motion::skel::kRightHand, Vec3(-0.05, 0.0, 0.04));
    const double base = joint_guidance_loss_var(nn::Var::constant(joints), targets, mask).item();
    Mat doubled = 2.0 * joints;
    const double twice = joint_guidance_loss_var(nn::Var::constant(doubled), targets, mask).item();
    CHECK(twice == doctest::Approx(2.0 * base).epsilon(1e-6));
  }
  SUBCASE("both hands masked in one frame share the frame denominator") {
    mask(3, 0) = mask(3, 1) = true;
    set_joint(joints, 3, motion::skel::kLeftHand, Vec3(0.02, 0.0, 0.0));
    set_joint(joints, 3, motion::skel::kRightHand, Vec3(0.0, 0.04, 0.0));
    const double loss = joint_guidance_loss_var(nn::Var::constant(joints), targets, mask).item();
    CHECK(loss == doctest::Approx(0.03).epsilon(1e-6));
  }
  SUBCASE("the joint-sequence wrapper agrees with the graph version") {
    mask(0, 1) = true;
    set_joint(joints, 0, motion::skel::kRightHand, Vec3(0.1, 0.2, 0.3));
    JointSeq seq;
    for (Eigen::Index i = 0; i < L; ++i) {
      MatX3 frame(motion::skel::kJoints, 3);
      for (int j = 0; j < motion::skel::kJoints; ++j) {
        frame.row(j) << joints(i, 3 * j), joints(i, 3 * j + 1), joints(i, 3 * j + 2);
      }
      seq.push_back(frame);
    }
    CHECK(joint_guidance_loss(seq, targets, mask) ==
          joint_guidance_loss_var(nn::Var::constant(joints), targets, mask).item());
  }
  SUBCASE("gradients flow to masked hand entries only") {
    mask(1, 0) = true;
    set_joint(joints, 1, motion::skel::kLeftHand, Vec3(0.03, -0.02, 0.05));
    nn::Var leaf(joints, /*requires_grad=*/true);
    auto loss_fn = [&]() { return joint_guidance_loss_var(leaf, targets, mask); };
    testing::check_grads({leaf}, loss_fn, 1e-5, 17);
    leaf.zero_grad();
    nn::Var loss = loss_fn();
    nn::backward(loss);
    CHECK(loss.item() > 0.0);
    CHECK(leaf.grad()(1, 3 * motion::skel::kLeftHand) != 0.0);
    CHECK(leaf.grad()(0, 3 * motion::skel::kLeftHand) == 0.0);
    CHECK(leaf.grad()(1, 3 * motion::skel::kRightHand) == 0.0);
  }
}

TEST_CASE("foot stability loss matches hand-computed values") {
  GuidanceWeights w;
  w.alpha = 1.0;
  w.beta = 1.0;
  w.h_g = 0.02;
  const Eigen::Index L = 5;

  SUBCASE("still feet at ground height in contact cost nothing") {
    Mat joints = flat_joints(L);
    for (Eigen::Index i = 0; i < L; ++i) {
      set_joint(joints, i, motion::skel::kLeftToe, Vec3(0.1, w.h_g, 0.0));
      set_joint(joints, i, motion::skel::kRightToe, Vec3(-0.1, w.h_g, 0.0));
    }
    MaskMat contact = MaskMat::Constant(L, 2, true);
    CHECK(foot_guidance_loss_var(nn::Var::constant(joints), contact, w).item() == 0.0);
  }
  SUBCASE("hovering feet pay the squared height gap") {
    Mat joints = flat_joints(L);
    for (Eigen::Index i = 0; i < L; ++i) {
      set_joint(joints, i, motion::skel::kLeftToe, Vec3(0.1, w.h_g + 0.1, 0.0));
      set_joint(joints, i, motion::skel::kRightToe, Vec3(-0.1, w.h_g + 0.2, 0.0));
    }
    MaskMat contact = MaskMat::Constant(L, 2, false);
    const double loss = foot_guidance_loss_var(nn::Var::constant(joints), contact, w).item();
    CHECK(loss == doctest::Approx(0.01).epsilon(1e-9));
  }
  SUBCASE("a sliding contact foot pays squared displacement per step") {
    Mat joints = flat_joints(L);
    for (Eigen::Index i = 0; i < L; ++i) {
      set_joint(joints, i, motion::skel::kLeftToe, Vec3(0.02 * double(i), w.h_g, 0.0));
      set_joint(joints, i, motion::skel::kRightToe, Vec3(-0.1, w.h_g, 0.0));
    }
    MaskMat contact = MaskMat::Constant(L, 2, false);
    contact.col(0).setConstant(true);
    GuidanceWeights slide = w;
    slide.beta = 0.0;
    const double loss = foot_guidance_loss_var(nn::Var::constant(joints), contact, slide).item();
    const double expected = double(L - 1) * 0.02 * 0.02 / double(L);
    CHECK(loss == doctest::Approx(expected).epsilon(1e-9));
  }
  SUBCASE("acceleration of a contact foot is charged separately") {
    const Eigen::Index n = 3;
    Mat joints = flat_joints(n);
    const double xs[3] = {0.0, 0.0, 0.03};
    for (Eigen::Index i = 0; i < n; ++i) {
      set_joint(joints, i, motion::skel::kLeftToe, Vec3(xs[i], w.h_g, 0.0));
      set_joint(joints, i, motion::skel::kRightToe, Vec3(-0.1, w.h_g, 0.0));
    }
    MaskMat contact = MaskMat::Constant(n, 2, false);
    contact.col(0).setConstant(true);
    const double vel_sum = 0.0 + 0.03 * 0.03;
    const double acc_sum = 0.03 * 0.03;
    const double expected = (w.alpha * vel_sum + w.beta * acc_sum) / double(n);
    const double loss = foot_guidance_loss_var(nn::Var::constant(joints), contact, w).item();
    CHECK(loss == doctest::Approx(expected).epsilon(1e-9));
  }
  SUBCASE("the motion-sequence wrapper recovers joints and contacts itself") {
    JointSeq still;
    for (int i = 0; i < 5; ++i) still.push_back(pose_figure(Vec3(0.0, 0.90, 0.0), 0.0));
    MaskMat contacts = MaskMat::Constant(5, 4, true);
    motion::MotionSequence m = motion::encode_motion(still, contacts, 10.0);
    // Toes rest at 0.90 - 0.88 = 0.02 = h_g and never move.
    CHECK(foot_guidance_loss(m, w) == doctest::Approx(0.0).epsilon(1e-10));
  }
  SUBCASE("gradients match finite differences") {
    Mat joints = flat_joints(4);
    Rng rng(55);
    for (Eigen::Index i = 0; i < 4; ++i) {
      set_joint(joints, i, motion::skel::kLeftToe,
                Vec3(0.03 * double(i), w.h_g + 0.01 * rng.normal(), 0.01 * double(i)));
      set_joint(joints, i, motion::skel::kRightToe, Vec3(-0.1, w.h_g + 0.005 * double(i), 0.0));
    }
    MaskMat contact = MaskMat::Constant(4, 2, false);
    contact(1, 0) = contact(2, 0) = contact(3, 1) = true;
    nn::Var leaf(joints, /*requires_grad=*/true);
    auto loss_fn = [&]() { return foot_guidance_loss_var(leaf, contact, w); };
    testing::check_grads({leaf}, loss_fn, 1e-5, 13);
  }
}

TEST_CASE("foot contact masks threshold the contact channels at one half") {
  Mat features = Mat::Zero(3, motion::feat::kDim);
  features(0, motion::feat::kContact + 0) = 0.6;  // left ankle
  features(1, motion::feat::kContact + 3) = 0.5;  // right toe, boundary
  features(2, motion::feat::kContact + 1) = 0.49; // left toe, below threshold
  MaskMat mask = foot_contact_mask(features);
  CHECK(mask(0, 0));
  CHECK_FALSE(mask(0, 1));
  CHECK_FALSE(mask(1, 0));
  CHECK(mask(1, 1));
  CHECK_FALSE(mask(2, 0));
  CHECK_FALSE(mask(2, 1));
  CHECK_THROWS_AS(foot_contact_mask(Mat::Zero(2, 10)), InvalidInput);
}

TEST_CASE("fine text encoding is deterministic and sized like the coarse encoding") {
  Stage2Config cfg = tiny_config();
  Rng rng(24);
  auto base = std::make_shared<BaseDenoiser>(cfg, rng);
  Stage2Model model(cfg, base, rng);
  std::array<std::string, 3> fine = {"First, the person grasps the box.",
                                     "Next, the person lifts it higher.",
                                     "Finally, the person sets it down."};
  nn::Var a = model.encode_fine_text(fine);
  nn::Var b = model.encode_fine_text(fine);
  CHECK(a.rows() == 1);
  CHECK(a.cols() == cfg.text_dim);
  CHECK((a.value() - b.value()).cwiseAbs().maxCoeff() == 0.0);
}
