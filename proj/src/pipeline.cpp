#include "hoimotion/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "hoimotion/affordance.hpp"
#include "hoimotion/evaluators.hpp"
#include "hoimotion/stage1.hpp"
#include "hoimotion/stage2.hpp"
#include "hoimotion/tensor_io.hpp"

#include <json.hpp>

namespace hoimo::pipeline {

namespace {

using nlohmann::json;

class Logger {
 public:
  explicit Logger(const std::filesystem::path& path) : writer_(path, /*append=*/true) {}

  void event(const std::string& phase, const std::string& what) {
    json j{{"phase", phase}, {"event", what}};
    writer_.write_line(j.dump());
  }
  void training(const std::string& phase, long step, double loss) {
    json j{{"phase", phase}, {"step", step}, {"loss", loss}};
    writer_.write_line(j.dump());
  }
  void warn(const std::string& phase, const std::string& message) {
    json j{{"phase", phase}, {"warning", message}};
    writer_.write_line(j.dump());
    std::cerr << "[" << phase << "] warning: " << message << "\n";
  }

 private:
  io::JsonlWriter writer_;
};

struct LoadedClip {
  std::string id;
  std::string scenario;
  std::string split;
  int attach_start = 0;
  int attach_end = 0;
  motion::MotionSequence motion;
  geometry::PointCloudSequence cloud;
};

std::string hash_of(const config::PipelineConfig& cfg) { return config::config_hash(cfg); }

void ensure_root(const config::PipelineConfig& cfg, const Paths& paths) {
  std::filesystem::create_directories(paths.root);
  if (!std::filesystem::exists(paths.config_copy)) {
    std::ofstream out(paths.config_copy);
    out << config::dump_config(cfg);
  }
}

void check_artifact_hash(const std::filesystem::path& prefix, const std::string& expected,
                         const std::string& phase, Logger& log) {
  const auto stored = io::tensor_extra(prefix, "config_hash");
  if (stored && !stored->empty() && *stored != expected) {
    log.warn(phase, "config hash mismatch on " + prefix.string() + " (artifact " + *stored +
                        ", current " + expected + ")");
  }
}

std::vector<LoadedClip> load_dataset(const config::PipelineConfig& cfg, const Paths& paths,
                                     const std::string& phase, Logger& log) {
  if (!std::filesystem::exists(paths.manifest)) {
    throw InvalidInput(phase + ": dataset manifest missing at " + paths.manifest.string() +
                       "; run gen-data first");
  }
  const std::string expected = hash_of(cfg);
  std::vector<LoadedClip> clips;
  for (const std::string& line : io::read_jsonl(paths.manifest)) {
    const json j = json::parse(line);
    LoadedClip clip;
    clip.id = j.at("id").get<std::string>();
    clip.scenario = j.at("scenario").get<std::string>();
    clip.split = j.at("split").get<std::string>();
    clip.attach_start = j.at("attach_start").get<int>();
    clip.attach_end = j.at("attach_end").get<int>();
    const auto motion_prefix = paths.data_dir / (clip.id + ".motion");
    const auto cloud_prefix = paths.data_dir / (clip.id + ".cloud");
    check_artifact_hash(motion_prefix, expected, phase, log);
    check_artifact_hash(cloud_prefix, expected, phase, log);
    clip.motion = motion::load_motion(motion_prefix);
    clip.cloud = geometry::load_cloud(cloud_prefix);
    clips.push_back(std::move(clip));
  }
  if (clips.empty()) throw InvalidInput(phase + ": dataset manifest is empty");
  return clips;
}

std::map<std::string, annotation::AnnotationRecord> load_annotation_map(
    const config::PipelineConfig& cfg, const Paths& paths, const std::string& phase) {
  (void)cfg;
  if (!std::filesystem::exists(paths.annotations)) {
    throw InvalidInput(phase + ": annotations missing at " + paths.annotations.string() +
                       "; run annotate first");
  }
  std::map<std::string, annotation::AnnotationRecord> by_id;
  for (auto& rec : annotation::load_annotations(paths.annotations)) {
    by_id[rec.clip_id] = std::move(rec);
  }
  return by_id;
}

// L x 6 hand rows viewed as two-joint frames for the affordance operators.
affordance::JointSequence hand_frames(const Mat& hands) {
  affordance::JointSequence frames;
  frames.reserve(static_cast<size_t>(hands.rows()));
  for (Eigen::Index l = 0; l < hands.rows(); ++l) {
    MatX3 f(2, 3);
    f.row(0) = hands.row(l).head<3>();
    f.row(1) = hands.row(l).tail<3>();
    frames.push_back(std::move(f));
  }
  return frames;
}

Mat gt_hands(const motion::MotionSequence& m) {
  return motion::hand_trajectory(motion::recover_joints(m));
}

Mat reduced_hand_affordance(const geometry::PointCloudSequence& cloud, const Mat& hands,
                            double sigma) {
  const auto dmap = affordance::distance_map(cloud, hand_frames(hands));
  return affordance::reduce_affordance(affordance::affordance_from_distance(dmap, sigma));
}

MaskMat hand_contact(const geometry::PointCloudSequence& cloud, const Mat& hands, double tau) {
  return affordance::contact_mask(hand_frames(hands), cloud, tau).values;
}

stage1::Stage1Config stage1_config(const config::PipelineConfig& cfg) {
  stage1::Stage1Config c;
  c.timesteps = cfg.s1_timesteps;
  c.n_points = cfg.cloud_points;
  c.raw_bps_dim = static_cast<Eigen::Index>(cfg.n_basis) * 6;
  c.pc_dim = cfg.s1_pc_dim;
  c.text_dim = cfg.s1_text_dim;
  c.d_model = cfg.s1_d_model;
  c.n_heads = cfg.s1_heads;
  c.d_ff = cfg.s1_d_ff;
  c.blocks = cfg.s1_blocks;
  c.lr = cfg.s1_lr;
  c.batch_size = cfg.s1_batch;
  return c;
}

stage2::Stage2Config stage2_config(const config::PipelineConfig& cfg) {
  stage2::Stage2Config c;
  c.timesteps = cfg.s2_timesteps;
  c.motion_dim = motion::feat::kDim;
  c.raw_bps_dim = static_cast<Eigen::Index>(cfg.n_basis) * 6;
  c.pc_dim = cfg.s2_pc_dim;
  c.n_points = cfg.cloud_points;
  c.text_dim = cfg.s2_text_dim;
  c.d_model = cfg.s2_d_model;
  c.n_heads = cfg.s2_heads;
  c.d_ff = cfg.s2_d_ff;
  c.blocks = cfg.s2_blocks;
  c.fusion_dim = cfg.s2_fusion_dim;
  c.lr = cfg.s2_lr;
  c.batch_size = cfg.s2_batch;
  c.fps = cfg.fps;
  return c;
}

geometry::BasisPointSet basis_for(const config::PipelineConfig& cfg) {
  return geometry::sample_basis(cfg.bps_seed, cfg.n_basis, cfg.bps_radius);
}

std::uint64_t derived_seed(const std::string& tag) { return fnv1a(tag); }

std::vector<int> step_batch(const std::string& tag, int step, int n, int batch) {
  Rng rng(derived_seed(tag + ":" + std::to_string(step)));
  std::vector<int> perm = rng.permutation(n);
  perm.resize(static_cast<size_t>(std::min(batch, n)));
  return perm;
}

// Loads a checkpoint into `params` when present; returns steps done so far.
long resume_steps(const std::filesystem::path& ckpt, nn::ParamMap& params,
                  const std::string& expected_hash, const std::string& phase, Logger& log) {
  if (!std::filesystem::exists(ckpt)) return 0;
  const io::CheckpointMeta meta = io::load_checkpoint(ckpt, params);
  if (!meta.config_hash.empty() && meta.config_hash != expected_hash) {
    log.warn(phase, "config hash mismatch on " + ckpt.string() + " (checkpoint " +
                        meta.config_hash + ", current " + expected_hash + ")");
  }
  log.event(phase, "resumed from " + ckpt.string() + " at step " + std::to_string(meta.step));
  return meta.step;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

Paths artifact_paths(const config::PipelineConfig& cfg) {
  Paths p;
  p.root = cfg.out_dir;
  p.config_copy = p.root / "config.resolved";
  p.data_dir = p.root / "data";
  p.manifest = p.data_dir / "manifest.jsonl";
  p.annotations = p.root / "annotations.jsonl";
  p.stage1_ckpt = p.root / "stage1.ckpt";
  p.stage1_dir = p.root / "stage1_samples";
  p.base_ckpt = p.root / "base.ckpt";
  p.stage2_ckpt = p.root / "stage2.ckpt";
  p.samples_dir = p.root / "samples";
  p.report_json = p.root / "report.json";
  p.report_csv = p.root / "report.csv";
  p.log_file = p.root / "log.jsonl";
  p.evaluator_ckpt = cfg.evaluator_ckpt.empty()
                         ? p.root / "evaluators.ckpt"
                         : std::filesystem::path(cfg.evaluator_ckpt);
  return p;
}

void gen_data(const config::PipelineConfig& cfg) {
  cfg.validate();
  const Paths paths = artifact_paths(cfg);
  ensure_root(cfg, paths);
  Logger log(paths.log_file);
  log.event("gen-data", "start");

  synth::SyntheticOptions opts;
  opts.clip_len = cfg.clip_len;
  opts.fps = cfg.fps;
  opts.cloud_points = cfg.cloud_points;
  opts.ground = cfg.h_g;
  std::vector<synth::InteractionClip> clips =
      synth::generate_synthetic(cfg.seed, cfg.clips, cfg.scenario, opts);
  // Deterministic split: the trailing clips are the held-out set.
  for (size_t i = 0; i < clips.size(); ++i) {
    clips[i].split =
        (static_cast<int>(i) >= cfg.clips - cfg.test_clips) ? "test" : "train";
  }

  std::filesystem::create_directories(paths.data_dir);
  const std::string hash = hash_of(cfg);
  io::JsonlWriter manifest(paths.manifest);
  for (const auto& clip : clips) {
    motion::save_motion(paths.data_dir / (clip.id + ".motion"), clip.motion, hash);
    geometry::save_cloud(paths.data_dir / (clip.id + ".cloud"), clip.cloud, hash);
    json j{{"id", clip.id},
           {"scenario", clip.scenario},
           {"split", clip.split},
           {"attach_start", clip.attach_start},
           {"attach_end", clip.attach_end}};
    manifest.write_line(j.dump());
  }
  log.event("gen-data", "wrote " + std::to_string(clips.size()) + " clips");
}

void annotate(const config::PipelineConfig& cfg) {
  cfg.validate();
  const Paths paths = artifact_paths(cfg);
  ensure_root(cfg, paths);
  Logger log(paths.log_file);
  log.event("annotate", "start");

  const std::vector<LoadedClip> clips = load_dataset(cfg, paths, "annotate", log);
  std::unique_ptr<annotation::LanguageModelClient> client = annotation::make_client(cfg.llm);

  std::vector<annotation::AnnotationRecord> records;
  for (const LoadedClip& clip : clips) {
    const auto summary =
        annotation::summarize_trajectory(clip.cloud, cfg.category, clip.motion.fps);
    annotation::AnnotationRecord rec;
    rec.clip_id = clip.id;
    rec.coarse_text =
        annotation::annotate_coarse(annotation::build_coarse_prompt(summary), *client);
    const Mat hands = gt_hands(clip.motion);
    rec.events =
        annotation::infer_contact_events(hands, clip.cloud, cfg.tau, clip.motion.fps);
    rec.fine_text = annotation::annotate_fine(
        annotation::build_fine_prompt(rec.coarse_text, summary, rec.events), *client);
    rec.client = client->name();
    records.push_back(std::move(rec));
  }
  annotation::save_annotations(paths.annotations, records);
  log.event("annotate", "wrote " + std::to_string(records.size()) + " records");
}

void train_stage1(const config::PipelineConfig& cfg) {
  cfg.validate();
  const Paths paths = artifact_paths(cfg);
  ensure_root(cfg, paths);
  Logger log(paths.log_file);
  log.event("train-stage1", "start");

  const std::vector<LoadedClip> clips = load_dataset(cfg, paths, "train-stage1", log);
  const auto annotations = load_annotation_map(cfg, paths, "train-stage1");
  const geometry::BasisPointSet basis = basis_for(cfg);

  std::vector<stage1::TrainExample> examples;
  for (const LoadedClip& clip : clips) {
    if (clip.split != "train") continue;
    stage1::TrainExample ex;
    ex.joints = gt_hands(clip.motion);
    ex.affordance = reduced_hand_affordance(clip.cloud, ex.joints, cfg.sigma);
    ex.raw_bps = geometry::encode_sequence(clip.cloud, basis);
    ex.text = annotations.at(clip.id).coarse_text;
    examples.push_back(std::move(ex));
  }
  if (examples.empty()) throw InvalidInput("train-stage1: no training clips");

  Rng init_rng(cfg.seed ^ 0x51A6E1ull);
  stage1::Stage1Model model(stage1_config(cfg), init_rng);
  const std::string hash = hash_of(cfg);
  long done = resume_steps(paths.stage1_ckpt, model.params(), hash, "train-stage1", log);
  model.set_trained_steps(done);

  const std::string tag = std::to_string(cfg.seed) + ":stage1";
  for (long step = done; step < cfg.s1_steps; ++step) {
    const std::vector<int> idx = step_batch(tag, static_cast<int>(step),
                                            static_cast<int>(examples.size()), cfg.s1_batch);
    std::vector<stage1::TrainExample> batch;
    for (int k : idx) batch.push_back(examples[static_cast<size_t>(k)]);
    Rng step_rng(derived_seed(tag + ":noise:" + std::to_string(step)));
    const stage1::TrainStats stats = model.train_step(batch, step_rng);
    model.set_trained_steps(step + 1);
    log.training("train-stage1", step + 1, stats.loss);
  }
  io::save_checkpoint(paths.stage1_ckpt, model.params(), {hash, model.trained_steps()});
  log.event("train-stage1", "saved " + paths.stage1_ckpt.string());
}

void sample_stage1(const config::PipelineConfig& cfg) {
  cfg.validate();
  const Paths paths = artifact_paths(cfg);
  ensure_root(cfg, paths);
  Logger log(paths.log_file);
  log.event("sample-stage1", "start");

  if (!std::filesystem::exists(paths.stage1_ckpt)) {
    throw InvalidInput("sample-stage1: stage-1 checkpoint missing at " +
                       paths.stage1_ckpt.string() + "; run train-stage1 first");
  }
  const std::vector<LoadedClip> clips = load_dataset(cfg, paths, "sample-stage1", log);
  const auto annotations = load_annotation_map(cfg, paths, "sample-stage1");
  const geometry::BasisPointSet basis = basis_for(cfg);

  Rng init_rng(cfg.seed ^ 0x51A6E1ull);
  stage1::Stage1Model model(stage1_config(cfg), init_rng);
  const std::string hash = hash_of(cfg);
  model.set_trained_steps(
      resume_steps(paths.stage1_ckpt, model.params(), hash, "sample-stage1", log));

  std::filesystem::create_directories(paths.stage1_dir);
  int sampled = 0;
  for (const LoadedClip& clip : clips) {
    if (clip.split != "test") continue;
    const Mat raw_bps = geometry::encode_sequence(clip.cloud, basis);
    const auto bundle =
        model.make_bundle(annotations.at(clip.id).coarse_text, raw_bps);
    const std::uint64_t seed =
        derived_seed(std::to_string(cfg.sample_seed) + ":s1:" + clip.id);
    const stage1::GuidancePair pair = model.sample(bundle, clip.motion.length(), seed);
    io::save_matrix(paths.stage1_dir / (clip.id + ".traj"), pair.joints, "f64",
                    {{"config_hash", hash}});
    io::save_matrix(paths.stage1_dir / (clip.id + ".afford"), pair.affordance, "f64",
                    {{"config_hash", hash}});
    ++sampled;
  }
  log.event("sample-stage1", "sampled " + std::to_string(sampled) + " clips");
}

void train_stage2(const config::PipelineConfig& cfg) {
  cfg.validate();
  const Paths paths = artifact_paths(cfg);
  ensure_root(cfg, paths);
  Logger log(paths.log_file);
  log.event("train-stage2", "start");

  const std::vector<LoadedClip> clips = load_dataset(cfg, paths, "train-stage2", log);
  const auto annotations = load_annotation_map(cfg, paths, "train-stage2");
  const geometry::BasisPointSet basis = basis_for(cfg);
  const stage2::Stage2Config s2cfg = stage2_config(cfg);
  const std::string hash = hash_of(cfg);

  std::vector<stage2::MotionExample> base_examples;
  std::vector<stage2::ControlExample> control_examples;
  for (const LoadedClip& clip : clips) {
    if (clip.split != "train") continue;
    const annotation::AnnotationRecord& rec = annotations.at(clip.id);
    base_examples.push_back({clip.motion.features, rec.coarse_text});
    stage2::ControlExample ex;
    ex.features = clip.motion.features;
    ex.coarse = rec.coarse_text;
    ex.fine = rec.fine_text;
    ex.raw_bps = geometry::encode_sequence(clip.cloud, basis);
    ex.hand_targets = gt_hands(clip.motion);
    ex.affordance = reduced_hand_affordance(clip.cloud, ex.hand_targets, cfg.sigma);
    control_examples.push_back(std::move(ex));
  }
  if (base_examples.empty()) throw InvalidInput("train-stage2: no training clips");

  // Base denoiser first; it must be fully trained before it is frozen.
  Rng base_rng(cfg.seed ^ 0xBA5Eull);
  auto base = std::make_shared<stage2::BaseDenoiser>(s2cfg, base_rng);
  long base_done = resume_steps(paths.base_ckpt, base->params(), hash, "train-stage2", log);
  base->set_trained_steps(base_done);
  const std::string base_tag = std::to_string(cfg.seed) + ":base";
  for (long step = base_done; step < cfg.base_steps; ++step) {
    const std::vector<int> idx = step_batch(base_tag, static_cast<int>(step),
                                            static_cast<int>(base_examples.size()),
                                            cfg.s2_batch);
    std::vector<stage2::MotionExample> batch;
    for (int k : idx) batch.push_back(base_examples[static_cast<size_t>(k)]);
    Rng step_rng(derived_seed(base_tag + ":noise:" + std::to_string(step)));
    const double loss = base->train_step(batch, step_rng);
    base->set_trained_steps(step + 1);
    log.training("train-base", step + 1, loss);
  }
  io::save_checkpoint(paths.base_ckpt, base->params(), {hash, base->trained_steps()});

  Rng ctrl_rng(cfg.seed ^ 0x57A9E2ull);
  stage2::Stage2Model model(s2cfg, base, ctrl_rng);
  long ctrl_done = resume_steps(paths.stage2_ckpt, model.params(), hash, "train-stage2", log);
  model.set_trained_steps(ctrl_done);
  const std::string ctrl_tag = std::to_string(cfg.seed) + ":ctrl";
  for (long step = ctrl_done; step < cfg.s2_steps; ++step) {
    const std::vector<int> idx = step_batch(ctrl_tag, static_cast<int>(step),
                                            static_cast<int>(control_examples.size()),
                                            cfg.s2_batch);
    std::vector<stage2::ControlExample> batch;
    for (int k : idx) batch.push_back(control_examples[static_cast<size_t>(k)]);
    Rng step_rng(derived_seed(ctrl_tag + ":noise:" + std::to_string(step)));
    const double loss = model.train_controlnet(batch, step_rng);
    model.set_trained_steps(step + 1);
    log.training("train-stage2", step + 1, loss);
  }
  io::save_checkpoint(paths.stage2_ckpt, model.params(), {hash, model.trained_steps()});
  log.event("train-stage2", "saved " + paths.stage2_ckpt.string());
}

void sample_stage2(const config::PipelineConfig& cfg) {
  cfg.validate();
  const Paths paths = artifact_paths(cfg);
  ensure_root(cfg, paths);
  Logger log(paths.log_file);
  log.event("sample", "start");

  if (!std::filesystem::exists(paths.base_ckpt) ||
      !std::filesystem::exists(paths.stage2_ckpt)) {
    throw InvalidInput("sample: stage-2 checkpoints missing under " + paths.root.string() +
                       "; run train-stage2 first");
  }
  const std::vector<LoadedClip> clips = load_dataset(cfg, paths, "sample", log);
  const auto annotations = load_annotation_map(cfg, paths, "sample");
  const geometry::BasisPointSet basis = basis_for(cfg);
  const stage2::Stage2Config s2cfg = stage2_config(cfg);
  const std::string hash = hash_of(cfg);

  Rng base_rng(cfg.seed ^ 0xBA5Eull);
  auto base = std::make_shared<stage2::BaseDenoiser>(s2cfg, base_rng);
  base->set_trained_steps(resume_steps(paths.base_ckpt, base->params(), hash, "sample", log));
  Rng ctrl_rng(cfg.seed ^ 0x57A9E2ull);
  stage2::Stage2Model model(s2cfg, base, ctrl_rng);
  model.set_trained_steps(
      resume_steps(paths.stage2_ckpt, model.params(), hash, "sample", log));

  stage2::GuidanceWeights weights;
  weights.joint_guidance = cfg.joint_guidance;
  weights.foot_guidance = cfg.foot_guidance;
  weights.alpha = cfg.alpha;
  weights.beta = cfg.beta;
  weights.h_g = cfg.h_g;
  weights.lbfgs_iters = cfg.lbfgs_iters;
  weights.validate();

  std::filesystem::create_directories(paths.samples_dir);
  int sampled = 0;
  for (const LoadedClip& clip : clips) {
    if (clip.split != "test") continue;
    const auto traj_prefix = paths.stage1_dir / (clip.id + ".traj");
    const auto afford_prefix = paths.stage1_dir / (clip.id + ".afford");
    if (!std::filesystem::exists(traj_prefix.string() + ".json")) {
      throw InvalidInput("sample: stage-1 samples missing for clip " + clip.id +
                         "; run sample-stage1 first");
    }
    check_artifact_hash(traj_prefix, hash, "sample", log);
    const Mat hand_targets = io::load_matrix(traj_prefix);
    const Mat s1_afford = io::load_matrix(afford_prefix);

    const annotation::AnnotationRecord& rec = annotations.at(clip.id);
    const Mat raw_bps = geometry::encode_sequence(clip.cloud, basis);
    const auto cond =
        model.make_condition(rec.coarse_text, rec.fine_text, raw_bps, hand_targets, s1_afford);

    stage2::GuidanceTargets targets;
    targets.hand_targets = hand_targets;
    targets.hand_mask = hand_contact(clip.cloud, hand_targets, cfg.tau);

    std::vector<std::string> warnings;
    const std::uint64_t seed =
        derived_seed(std::to_string(cfg.sample_seed) + ":s2:" + clip.id);
    const motion::MotionSequence sample =
        model.guided_sample(cond, targets, weights, clip.motion.length(), seed, &warnings);
    for (const std::string& w : warnings) log.warn("sample", clip.id + ": " + w);
    motion::save_motion(paths.samples_dir / (clip.id + ".motion"), sample, hash);
    ++sampled;
  }
  log.event("sample", "sampled " + std::to_string(sampled) + " clips");
}

metrics::EvalReport evaluate(const config::PipelineConfig& cfg) {
  cfg.validate();
  const Paths paths = artifact_paths(cfg);
  ensure_root(cfg, paths);
  Logger log(paths.log_file);
  log.event("evaluate", "start");

  const std::vector<LoadedClip> clips = load_dataset(cfg, paths, "evaluate", log);
  const auto annotations = load_annotation_map(cfg, paths, "evaluate");
  const std::string hash = hash_of(cfg);

  // Evaluator models come from the shipped/trained checkpoint; the training
  // corpus is the train split.
  eval::EvaluatorConfig ecfg;
  ecfg.motion_dim = motion::feat::kDim;
  ecfg.steps = cfg.evaluator_steps;
  ecfg.seed = cfg.evaluator_seed;
  std::vector<eval::EvalExample> corpus;
  for (const LoadedClip& clip : clips) {
    if (clip.split != "train") continue;
    corpus.push_back({clip.motion.features, annotations.at(clip.id).coarse_text});
  }
  bool trained = false;
  const eval::Evaluators evals = eval::load_or_train(paths.evaluator_ckpt, corpus, ecfg, &trained);
  log.event("evaluate", trained ? "trained evaluators" : "loaded evaluators");

  std::vector<double> hand_jpe, mpjpe, fs_vals;
  std::vector<double> s1_left, s1_right, s1_hand, s1_cos;
  std::vector<Mat> gen_clips;
  std::vector<eval::EvalExample> gen_examples;
  std::vector<MaskMat> pred_masks, gt_masks;
  bool all_stage1 = true;

  int tested = 0;
  for (const LoadedClip& clip : clips) {
    if (clip.split != "test") continue;
    const auto sample_prefix = paths.samples_dir / (clip.id + ".motion");
    if (!std::filesystem::exists(sample_prefix.string() + ".json")) {
      throw InvalidInput("evaluate: generated motion missing for clip " + clip.id +
                         "; run sample first");
    }
    check_artifact_hash(sample_prefix, hash, "evaluate", log);
    const motion::MotionSequence gen = motion::load_motion(sample_prefix);
    const motion::JointSeq gen_joints = motion::recover_joints(gen);
    const motion::JointSeq gt_joints = motion::recover_joints(clip.motion);

    hand_jpe.push_back(metrics::hand_jpe_cm(gen_joints, gt_joints));
    mpjpe.push_back(metrics::mpjpe_cm(gen_joints, gt_joints));
    fs_vals.push_back(metrics::foot_sliding(gen, cfg.h_fs));

    pred_masks.push_back(hand_contact(clip.cloud, motion::hand_trajectory(gen_joints), cfg.tau));
    gt_masks.push_back(hand_contact(clip.cloud, motion::hand_trajectory(gt_joints), cfg.tau));

    gen_clips.push_back(gen.features);
    gen_examples.push_back({gen.features, annotations.at(clip.id).coarse_text});

    const auto traj_prefix = paths.stage1_dir / (clip.id + ".traj");
    if (std::filesystem::exists(traj_prefix.string() + ".json")) {
      const Mat s1 = io::load_matrix(traj_prefix);
      const Mat gt = gt_hands(clip.motion);
      const double left =
          100.0 * (s1.leftCols(3) - gt.leftCols(3)).rowwise().norm().mean();
      const double right =
          100.0 * (s1.rightCols(3) - gt.rightCols(3)).rowwise().norm().mean();
      s1_left.push_back(left);
      s1_right.push_back(right);
      s1_hand.push_back(0.5 * (left + right));
      const Mat s1_afford = io::load_matrix(paths.stage1_dir / (clip.id + ".afford"));
      const Mat gt_afford = reduced_hand_affordance(clip.cloud, gt, cfg.sigma);
      s1_cos.push_back(metrics::affordance_similarity(s1_afford, gt_afford));
    } else {
      all_stage1 = false;
    }
    ++tested;
  }
  if (tested == 0) throw InvalidInput("evaluate: no test clips found");

  Eigen::Index total_rows = 0;
  for (const MaskMat& m : pred_masks) total_rows += m.rows();
  MaskMat pred_all(total_rows, 2), gt_all(total_rows, 2);
  Eigen::Index at = 0;
  for (size_t i = 0; i < pred_masks.size(); ++i) {
    pred_all.middleRows(at, pred_masks[i].rows()) = pred_masks[i];
    gt_all.middleRows(at, gt_masks[i].rows()) = gt_masks[i];
    at += pred_masks[i].rows();
  }
  const metrics::ContactScores contact = metrics::contact_scores(pred_all, gt_all);

  metrics::EvalReport report;
  report.hand_jpe_cm = mean_of(hand_jpe);
  report.mpjpe_cm = mean_of(mpjpe);
  report.c_prec = contact.prec;
  report.c_rec = contact.rec;
  report.c_acc = contact.acc;
  report.c_pct = contact.c_pct;
  report.f1 = contact.f1;
  report.fs = mean_of(fs_vals);

  std::vector<Mat> gt_clips;
  for (const LoadedClip& clip : clips) {
    if (clip.split == "test") gt_clips.push_back(clip.motion.features);
  }
  const Mat gen_feats = evals.motion_features(gen_clips);
  const Mat gt_feats = evals.motion_features(gt_clips);
  report.fid = metrics::fid(gen_feats, gt_feats);
  const auto [motion_emb, text_emb] = evals.retrieval_features(gen_examples);
  report.r_score = metrics::r_score(motion_emb, text_emb, cfg.eval_batch, 0);
  const int pairs = static_cast<int>(gen_feats.rows()) / 2;
  report.diversity = pairs > 0 ? metrics::diversity(gen_feats, pairs, 0) : 0.0;

  if (all_stage1 && !s1_left.empty()) {
    report.has_stage1 = true;
    report.stage1.left_jpe_cm = mean_of(s1_left);
    report.stage1.right_jpe_cm = mean_of(s1_right);
    report.stage1.hand_jpe_cm = mean_of(s1_hand);
    report.stage1.affordance_cos_sim = mean_of(s1_cos);
  }
  report.validate();

  {
    std::ofstream out(paths.report_json);
    out << report.to_json() << "\n";
  }
  {
    std::ofstream out(paths.report_csv);
    out << metrics::EvalReport::csv_header() << "\n" << report.to_csv_row() << "\n";
  }
  log.event("evaluate", "wrote " + paths.report_json.string());
  return report;
}

metrics::EvalReport run_pipeline(const config::PipelineConfig& cfg) {
  gen_data(cfg);
  annotate(cfg);
  train_stage1(cfg);
  sample_stage1(cfg);
  train_stage2(cfg);
  sample_stage2(cfg);
  return evaluate(cfg);
}

void export_render(const std::filesystem::path& motion_prefix,
                   const std::filesystem::path& out_json) {
  const motion::MotionSequence m = motion::load_motion(motion_prefix);
  const motion::JointSeq joints = motion::recover_joints(m);
  json frames = json::array();
  for (const MatX3& f : joints) {
    json frame = json::array();
    for (Eigen::Index j = 0; j < f.rows(); ++j) {
      frame.push_back({f(j, 0), f(j, 1), f(j, 2)});
    }
    frames.push_back(std::move(frame));
  }
  json doc{{"fps", m.fps}, {"joint_count", motion::skel::kJoints}, {"frames", frames}};
  std::ofstream out(out_json);
  if (!out) throw InvalidInput("cannot write render file: " + out_json.string());
  out << doc.dump(2) << "\n";
}

}  // namespace hoimo::pipeline
