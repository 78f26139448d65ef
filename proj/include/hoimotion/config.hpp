#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "hoimotion/common.hpp"

namespace hoimo::config {

// Every tunable in the pipeline, flat so a key=value file, environment
// overrides, and CLI flags all address the same names.
struct PipelineConfig {
  // data generation
  std::uint64_t seed = 7;
  int clips = 16;
  int test_clips = 4;
  int clip_len = 100;
  double fps = 30.0;
  std::string scenario = "mixed";  // carry | push | lift | mixed
  int cloud_points = 64;           // object points per frame (>= 8)

  // geometry / affordance
  int n_basis = 64;
  double bps_radius = 1.0;
  std::uint64_t bps_seed = 17;
  double sigma = 0.2;  // affordance falloff
  double tau = 0.10;   // contact distance threshold (m)

  // annotation
  std::string llm = "template";  // template | recorded:<path> | echo | http
  std::string category = "box";

  // stage 1 (hand trajectory + affordance diffusion)
  int s1_timesteps = 60;
  int s1_d_model = 32;
  int s1_heads = 4;
  int s1_d_ff = 64;
  int s1_blocks = 1;
  int s1_pc_dim = 32;
  int s1_text_dim = 64;
  double s1_lr = 2e-3;
  int s1_batch = 8;
  int s1_steps = 400;

  // stage 2 (full-body diffusion: frozen base + control branch)
  int s2_timesteps = 40;
  int s2_d_model = 32;
  int s2_heads = 4;
  int s2_d_ff = 64;
  int s2_blocks = 1;
  int s2_pc_dim = 32;
  int s2_text_dim = 64;
  int s2_fusion_dim = 32;
  double s2_lr = 2e-3;
  int s2_batch = 8;
  int base_steps = 300;
  int s2_steps = 300;

  // guidance
  bool joint_guidance = true;
  bool foot_guidance = true;
  double alpha = 1.0;
  double beta = 1.0;
  double h_g = 0.02;
  int lbfgs_iters = 5;
  std::uint64_t sample_seed = 99;

  // evaluation
  int eval_batch = 32;   // retrieval batch size
  double h_fs = 0.05;    // foot-sliding height threshold
  int evaluator_steps = 200;
  std::uint64_t evaluator_seed = 12345;
  std::string evaluator_ckpt;  // empty -> <out_dir>/evaluators.ckpt

  // paths
  std::string out_dir = "out";

  void validate() const;  // throws InvalidInput on any bad value
};

// One config key: how to read, write, and document it.
struct ConfigField {
  std::string key;
  std::string type;  // int | u64 | double | bool | string
  std::string doc;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

const std::vector<ConfigField>& config_fields();

// Applies "key = value" lines (# comments, blank lines allowed) on top of
// the given config. Unknown keys and unparsable values throw InvalidInput.
void apply_config_text(PipelineConfig& cfg, const std::string& text);

// Environment variables named <prefix><UPPERCASE_KEY> override fields;
// the fixed prefix is "HOIMO_".
void apply_env_overrides(PipelineConfig& cfg, const char* prefix = "HOIMO_");

// File, then environment, then validate.
PipelineConfig load_config(const std::filesystem::path& path, bool env_overrides = true);

// Round-trippable key=value text in declaration order.
std::string dump_config(const PipelineConfig& cfg);

// Hash over the dumped text; stamped on every artifact the pipeline writes.
std::string config_hash(const PipelineConfig& cfg);

}  // namespace hoimo::config
