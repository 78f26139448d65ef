#include <doctest.h>

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "grad_check.hpp"
#include "hoimotion/stage1.hpp"

using namespace hoimo;
using stage1::ConditionBundle;
using stage1::GuidanceState;
using stage1::Stage1Config;
using stage1::Stage1Model;
using stage1::TrainExample;

namespace {

Stage1Config tiny_config() {
  Stage1Config cfg;
  cfg.timesteps = 50;
  cfg.n_points = 8;
  cfg.raw_bps_dim = 8 * 6;
  cfg.pc_dim = 16;
  cfg.text_dim = 32;
  cfg.d_model = 16;
  cfg.n_heads = 4;
  cfg.d_ff = 32;
  cfg.blocks = 1;
  cfg.lr = 2e-3;
  cfg.batch_size = 4;
  return cfg;
}

std::vector<TrainExample> overfit_set(const Stage1Config& cfg, Eigen::Index frames) {
  Rng rng(500);
  std::vector<TrainExample> clips;
  const char* texts[4] = {
      "A person lifts the plasticbox.", "A person pushes the plasticbox.",
      "A person pulls the plasticbox.", "A person holds the plasticbox."};
  for (int c = 0; c < 4; ++c) {
    TrainExample ex;
    ex.joints = Mat(frames, 6);
    ex.affordance = Mat(frames, cfg.n_points);
    for (Eigen::Index l = 0; l < frames; ++l) {
      for (Eigen::Index j = 0; j < 6; ++j)
        ex.joints(l, j) = std::sin(0.3 * static_cast<double>(l) + 0.7 * c + j);
      for (Eigen::Index p = 0; p < cfg.n_points; ++p)
        ex.affordance(l, p) =
            0.5 + 0.4 * std::sin(0.2 * static_cast<double>(l) + 0.5 * c + p);
    }
    ex.raw_bps = rng.normal_mat(frames, cfg.raw_bps_dim);
    ex.text = texts[c];
    clips.push_back(ex);
  }
  return clips;
}

}  // namespace

TEST_CASE("bps projection is a frame-wise map that vanishes on zero input") {
  Rng rng(20);
  Stage1Model model(tiny_config(), rng);

  const nn::Var zero = nn::Var::constant(Mat::Zero(5, 48));
  CHECK(model.project_bps(zero).value().isZero(0.0));  // biases start at zero

  Mat raw = Rng(21).normal_mat(4, 48);
  raw.row(2) = raw.row(0);  // duplicate frame
  const Mat out = model.project_bps(nn::Var::constant(raw)).value();
  CHECK(out.rows() == 4);
  CHECK(out.cols() == 16);
  CHECK(out.row(2) == out.row(0));

  CHECK_THROWS_AS(model.project_bps(nn::Var::constant(Mat::Zero(5, 47))), InvalidInput);
}

TEST_CASE("bps projection gradient matches finite differences") {
  Rng rng(22);
  Stage1Model model(tiny_config(), rng);
  nn::Var raw(Rng(23).normal_mat(3, 48), /*requires_grad=*/true);
  hoimo::testing::check_grads(
      {raw}, [&] { return nn::mean_all(model.project_bps(raw)); }, 1e-4, 7);
}

TEST_CASE("dual-branch forward honors shape contracts and is deterministic") {
  Rng rng(24);
  const Stage1Config cfg = tiny_config();
  Stage1Model model(cfg, rng);
  const Eigen::Index L = 9;
  Rng data(25);
  ConditionBundle bundle =
      model.make_bundle("A person lifts the plasticbox.", data.normal_mat(L, 48));
  GuidanceState state;
  state.x_joints = nn::Var::constant(data.normal_mat(L, 6));
  state.x_affordance = nn::Var::constant(data.normal_mat(L, cfg.n_points));
  state.t = 7;

  auto [x0_j, x0_a] = model.predict_clean(state, bundle, 7);
  CHECK(x0_j.rows() == L);
  CHECK(x0_j.cols() == 6);
  CHECK(x0_a.rows() == L);
  CHECK(x0_a.cols() == cfg.n_points);
  CHECK(x0_j.value().allFinite());
  CHECK(x0_a.value().allFinite());

  auto [again_j, again_a] = model.predict_clean(state, bundle, 7);
  CHECK(x0_j.value() == again_j.value());
  CHECK(x0_a.value() == again_a.value());

  // The step embedding must actually reach the network.
  auto [late_j, late_a] = model.predict_clean(state, bundle, 40);
  CHECK((x0_j.value() - late_j.value()).cwiseAbs().maxCoeff() > 1e-10);

  CHECK_THROWS_AS(model.predict_clean(state, bundle, cfg.timesteps), InvalidInput);
  CHECK_THROWS_AS(model.predict_clean(state, bundle, -1), InvalidInput);
}

TEST_CASE("branch outputs stay aligned to the clip length") {
  Rng rng(26);
  const Stage1Config cfg = tiny_config();
  Stage1Model model(cfg, rng);
  Rng data(27);
  for (Eigen::Index L : {1, 5, 12}) {
    ConditionBundle bundle = model.make_bundle("push", data.normal_mat(L, 48));
    CHECK(model.joint_branch(nn::Var::constant(data.normal_mat(L, 6)), bundle).rows() == L);
    CHECK(model
              .affordance_branch(nn::Var::constant(data.normal_mat(L, cfg.n_points)),
                                 bundle)
              .rows() == L);
  }
}

TEST_CASE("affordance branch tolerates an all-zero text embedding") {
  Rng rng(28);
  const Stage1Config cfg = tiny_config();
  Stage1Model model(cfg, rng);
  Rng data(29);
  const Eigen::Index L = 6;
  ConditionBundle bundle = model.make_bundle("lift", data.normal_mat(L, 48));
  bundle.f_text = nn::Var::constant(Mat::Zero(1, cfg.text_dim));
  const nn::Var out =
      model.affordance_branch(nn::Var::constant(data.normal_mat(L, cfg.n_points)), bundle);
  CHECK(out.value().allFinite());
}

TEST_CASE("mutual cross-attention starts as the identity on the joint stream") {
  Rng rng(30);
  Stage1Model model(tiny_config(), rng);
  Rng data(31);
  const nn::Var joints = nn::Var::constant(data.normal_mat(7, 16));
  const nn::Var afford = nn::Var::constant(data.normal_mat(7, 16));
  // The update path's output projection is zero-initialized, so before any
  // training the joint features pass through bit-identically.
  CHECK(model.mutual_cross_attention(joints, afford).value() == joints.value());
}

TEST_CASE("training loss equals an elementwise L1 oracle recomputed outside the step") {
  Rng rng(32);
  const Stage1Config cfg = tiny_config();
  Stage1Model model(cfg, rng);
  const std::vector<TrainExample> batch = overfit_set(cfg, 12);

  // Replay the exact noise stream the step will consume.
  Rng replica(900);
  double expected_joint = 0.0, expected_afford = 0.0;
  for (const TrainExample& ex : batch) {
    const int t = static_cast<int>(replica.below(static_cast<std::uint64_t>(cfg.timesteps)));
    const Mat noise_j = replica.normal_mat(ex.joints.rows(), ex.joints.cols());
    const Mat noise_a = replica.normal_mat(ex.affordance.rows(), ex.affordance.cols());
    GuidanceState state;
    state.t = t;
    state.x_joints =
        nn::Var::constant(diffusion::forward_diffuse(ex.joints, t, noise_j, model.schedule()));
    state.x_affordance = nn::Var::constant(
        diffusion::forward_diffuse(ex.affordance, t, noise_a, model.schedule()));
    ConditionBundle bundle = model.make_bundle(ex.text, ex.raw_bps);
    auto [x0_j, x0_a] = model.predict_clean(state, bundle, t);
    expected_joint += (x0_j.value() - ex.joints).cwiseAbs().mean();
    expected_afford += (x0_a.value() - ex.affordance).cwiseAbs().mean();
  }
  expected_joint /= static_cast<double>(batch.size());
  expected_afford /= static_cast<double>(batch.size());

  Rng train_rng(900);
  const stage1::TrainStats stats = model.train_step(batch, train_rng);
  CHECK(stats.joint_loss == doctest::Approx(expected_joint).epsilon(1e-12));
  CHECK(stats.affordance_loss == doctest::Approx(expected_afford).epsilon(1e-12));
  CHECK(stats.loss == doctest::Approx(expected_joint + expected_afford).epsilon(1e-12));
  CHECK(model.trained_steps() == 1);
}

TEST_CASE("two hundred steps overfit four clips, cutting the loss by 80 percent") {
  Rng rng(33);
  const Stage1Config cfg = tiny_config();
  Stage1Model model(cfg, rng);
  const std::vector<TrainExample> batch = overfit_set(cfg, 12);
  Rng train_rng(901);
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 200; ++step) {
    const stage1::TrainStats stats = model.train_step(batch, train_rng);
    CHECK(std::isfinite(stats.loss));
    if (step < 5) first += stats.loss;
    if (step >= 195) last += stats.loss;
  }
  CHECK(last / first < 0.2);
}

TEST_CASE("full-model gradients agree with central finite differences") {
  Rng rng(34);
  Stage1Config cfg = tiny_config();
  cfg.blocks = 1;
  Stage1Model model(cfg, rng);
  Rng data(35);
  const Eigen::Index L = 4;
  const Mat raw = data.normal_mat(L, 48);
  const Mat joints_clean = data.normal_mat(L, 6);
  const Mat afford_clean = data.normal_mat(L, cfg.n_points);
  GuidanceState state;
  state.t = 11;
  state.x_joints = nn::Var::constant(data.normal_mat(L, 6));
  state.x_affordance = nn::Var::constant(data.normal_mat(L, cfg.n_points));

  auto loss_fn = [&] {
    ConditionBundle bundle = model.make_bundle("grab the box", raw);
    auto [x0_j, x0_a] = model.predict_clean(state, bundle, state.t);
    return nn::add(
        nn::mean_all(nn::abs_op(nn::sub(x0_j, nn::Var::constant(joints_clean)))),
        nn::mean_all(nn::abs_op(nn::sub(x0_a, nn::Var::constant(afford_clean)))));
  };

  std::vector<nn::Var> leaves;
  for (const char* name :
       {"joint_head.weight", "afford_head.bias", "mutual.wo.weight", "afford_cross.wq.weight",
        "bps_proj.l0.weight", "text_proj.weight", "time_proj.weight", "joint_in.weight",
        "afford_in.weight", "joint_block0.ff1.weight", "afford_block0.ln1.gamma",
        "text_encoder.embedding"}) {
    leaves.push_back(model.params().at(name));
  }
  hoimo::testing::check_grads(leaves, loss_fn, 1e-3, 97);
}

TEST_CASE("sampling visits every step once and is seed-deterministic") {
  Rng rng(36);
  const Stage1Config cfg = tiny_config();
  Stage1Model model(cfg, rng);
  Rng data(37);
  const Eigen::Index L = 7;
  ConditionBundle bundle = model.make_bundle("lift the box", data.normal_mat(L, 48));

  std::vector<int> visited;
  const stage1::GuidancePair a = model.sample(bundle, L, 42, &visited);
  REQUIRE(static_cast<int>(visited.size()) == cfg.timesteps);
  for (int i = 0; i < cfg.timesteps; ++i) CHECK(visited[static_cast<std::size_t>(i)] == cfg.timesteps - 1 - i);

  CHECK(a.joints.rows() == L);
  CHECK(a.joints.cols() == 6);
  CHECK(a.affordance.rows() == L);
  CHECK(a.affordance.cols() == cfg.n_points);
  CHECK(a.joints.allFinite());
  CHECK(a.affordance.minCoeff() > 0.0);
  CHECK(a.affordance.maxCoeff() <= 1.0);

  const stage1::GuidancePair b = model.sample(bundle, L, 42);
  const stage1::GuidancePair same = model.sample(bundle, L, 42);
  CHECK(b.joints == same.joints);
  CHECK(b.affordance == same.affordance);
  const stage1::GuidancePair other = model.sample(bundle, L, 43);
  CHECK((b.joints - other.joints).cwiseAbs().maxCoeff() > 1e-12);
}

TEST_CASE("a constant clean predictor drives sampling exactly onto its constant") {
  const diffusion::DiffusionSchedule schedule = diffusion::make_cosine_schedule(40);
  const Mat cj = Mat::Constant(5, 6, -1.25);
  const Mat ca = Mat::Constant(5, 8, 0.7);
  stage1::CleanPredictor constant = [&](const Mat&, const Mat&, int) {
    return std::make_pair(cj, ca);
  };
  const stage1::GuidancePair out = stage1::sample_loop(constant, schedule, 5, 8, 11);
  // The t = 0 posterior has coefficients (1, 0) and zero variance, so the
  // final state is the constant regardless of the noise history.
  CHECK(out.joints == cj);
  CHECK(out.affordance == ca);
}

TEST_CASE("non-finite sampling states abort with the offending step index") {
  const diffusion::DiffusionSchedule schedule = diffusion::make_cosine_schedule(30);
  stage1::CleanPredictor poisoned = [&](const Mat& xj, const Mat&, int t) {
    Mat j = Mat::Zero(xj.rows(), 6);
    if (t == 5) j(0, 0) = std::nan("");
    return std::make_pair(j, Mat::Zero(xj.rows(), 8));
  };
  CHECK_THROWS_WITH_AS(stage1::sample_loop(poisoned, schedule, 4, 8, 3),
                       doctest::Contains("step 5"), NumericError);
}
