#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hoimotion/config.hpp"
#include "hoimotion/metrics.hpp"
#include "hoimotion/synthetic.hpp"

namespace hoimo::pipeline {

// Fixed artifact layout under config.out_dir.
struct Paths {
  std::filesystem::path root;
  std::filesystem::path config_copy;    // resolved key=value text
  std::filesystem::path data_dir;
  std::filesystem::path manifest;       // one JSON line per clip
  std::filesystem::path annotations;
  std::filesystem::path stage1_ckpt;
  std::filesystem::path stage1_dir;     // sampled hand trajectories + affordance
  std::filesystem::path base_ckpt;
  std::filesystem::path stage2_ckpt;
  std::filesystem::path samples_dir;    // generated motions
  std::filesystem::path report_json;
  std::filesystem::path report_csv;
  std::filesystem::path log_file;
  std::filesystem::path evaluator_ckpt;
};

Paths artifact_paths(const config::PipelineConfig& cfg);

// Phases. Each loads its inputs from earlier artifacts, so any phase can be
// rerun alone; training phases resume from their checkpoint when one exists
// (optimizer moments restart, parameters and step count carry over).
void gen_data(const config::PipelineConfig& cfg);
void annotate(const config::PipelineConfig& cfg);
void train_stage1(const config::PipelineConfig& cfg);
void sample_stage1(const config::PipelineConfig& cfg);
void train_stage2(const config::PipelineConfig& cfg);  // base, then control branch
void sample_stage2(const config::PipelineConfig& cfg);
metrics::EvalReport evaluate(const config::PipelineConfig& cfg);

// All phases in order; returns the final report.
metrics::EvalReport run_pipeline(const config::PipelineConfig& cfg);

// Decodes a saved motion artifact to per-frame world joints as JSON.
void export_render(const std::filesystem::path& motion_prefix,
                   const std::filesystem::path& out_json);

}  // namespace hoimo::pipeline
