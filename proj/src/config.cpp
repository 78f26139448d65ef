#include "hoimotion/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace hoimo::config {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

long long parse_ll(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &used);
  } catch (const std::exception&) {
    throw InvalidInput("config key '" + key + "': expected an integer, got '" + value + "'");
  }
  if (used != value.size()) {
    throw InvalidInput("config key '" + key + "': expected an integer, got '" + value + "'");
  }
  return v;
}

ConfigField field_int(const char* key, int PipelineConfig::* m, const char* doc) {
  return {key, "int", doc,
          [key, m](PipelineConfig& c, const std::string& v) {
            c.*m = static_cast<int>(parse_ll(key, v));
          },
          [m](const PipelineConfig& c) { return std::to_string(c.*m); }};
}

ConfigField field_u64(const char* key, std::uint64_t PipelineConfig::* m, const char* doc) {
  return {key, "u64", doc,
          [key, m](PipelineConfig& c, const std::string& v) {
            try {
              std::size_t used = 0;
              const std::uint64_t parsed = std::stoull(v, &used);
              if (used != v.size()) throw std::invalid_argument(v);
              c.*m = parsed;
            } catch (const std::exception&) {
              throw InvalidInput("config key '" + std::string(key) +
                                 "': expected an unsigned integer, got '" + v + "'");
            }
          },
          [m](const PipelineConfig& c) { return std::to_string(c.*m); }};
}

ConfigField field_double(const char* key, double PipelineConfig::* m, const char* doc) {
  return {key, "double", doc,
          [key, m](PipelineConfig& c, const std::string& v) {
            try {
              std::size_t used = 0;
              const double parsed = std::stod(v, &used);
              if (used != v.size()) throw std::invalid_argument(v);
              c.*m = parsed;
            } catch (const std::exception&) {
              throw InvalidInput("config key '" + std::string(key) +
                                 "': expected a number, got '" + v + "'");
            }
          },
          [m](const PipelineConfig& c) { return format_double(c.*m); }};
}

ConfigField field_bool(const char* key, bool PipelineConfig::* m, const char* doc) {
  return {key, "bool", doc,
          [key, m](PipelineConfig& c, const std::string& v) {
            std::string low = v;
            std::transform(low.begin(), low.end(), low.begin(),
                           [](unsigned char ch) { return std::tolower(ch); });
            if (low == "true" || low == "1" || low == "on" || low == "yes") {
              c.*m = true;
            } else if (low == "false" || low == "0" || low == "off" || low == "no") {
              c.*m = false;
            } else {
              throw InvalidInput("config key '" + std::string(key) +
                                 "': expected a boolean, got '" + v + "'");
            }
          },
          [m](const PipelineConfig& c) { return (c.*m) ? "true" : "false"; }};
}

ConfigField field_string(const char* key, std::string PipelineConfig::* m, const char* doc) {
  return {key, "string", doc,
          [m](PipelineConfig& c, const std::string& v) { c.*m = v; },
          [m](const PipelineConfig& c) { return c.*m; }};
}

std::vector<ConfigField> build_fields() {
  std::vector<ConfigField> f;
  f.push_back(field_u64("seed", &PipelineConfig::seed, "master seed for data and training"));
  f.push_back(field_int("clips", &PipelineConfig::clips, "total generated clips"));
  f.push_back(field_int("test_clips", &PipelineConfig::test_clips, "clips held out for evaluation"));
  f.push_back(field_int("clip_len", &PipelineConfig::clip_len, "frames per clip"));
  f.push_back(field_double("fps", &PipelineConfig::fps, "frames per second"));
  f.push_back(field_string("scenario", &PipelineConfig::scenario,
                           "carry | push | lift | mixed"));
  f.push_back(field_int("cloud_points", &PipelineConfig::cloud_points,
                        "object surface points per frame"));
  f.push_back(field_int("n_basis", &PipelineConfig::n_basis, "basis points for cloud encoding"));
  f.push_back(field_double("bps_radius", &PipelineConfig::bps_radius, "basis sampling radius"));
  f.push_back(field_u64("bps_seed", &PipelineConfig::bps_seed, "basis point sampling seed"));
  f.push_back(field_double("sigma", &PipelineConfig::sigma, "affordance distance falloff"));
  f.push_back(field_double("tau", &PipelineConfig::tau, "contact distance threshold (m)"));
  f.push_back(field_string("llm", &PipelineConfig::llm,
                           "annotation backend: template | recorded:<path> | echo | http"));
  f.push_back(field_string("category", &PipelineConfig::category, "object category label"));
  f.push_back(field_int("s1_timesteps", &PipelineConfig::s1_timesteps, "stage-1 diffusion steps"));
  f.push_back(field_int("s1_d_model", &PipelineConfig::s1_d_model, "stage-1 model width"));
  f.push_back(field_int("s1_heads", &PipelineConfig::s1_heads, "stage-1 attention heads"));
  f.push_back(field_int("s1_d_ff", &PipelineConfig::s1_d_ff, "stage-1 feed-forward width"));
  f.push_back(field_int("s1_blocks", &PipelineConfig::s1_blocks, "stage-1 block depth"));
  f.push_back(field_int("s1_pc_dim", &PipelineConfig::s1_pc_dim, "stage-1 cloud feature width"));
  f.push_back(field_int("s1_text_dim", &PipelineConfig::s1_text_dim, "stage-1 text width"));
  f.push_back(field_double("s1_lr", &PipelineConfig::s1_lr, "stage-1 learning rate"));
  f.push_back(field_int("s1_batch", &PipelineConfig::s1_batch, "stage-1 batch size"));
  f.push_back(field_int("s1_steps", &PipelineConfig::s1_steps, "stage-1 training steps"));
  f.push_back(field_int("s2_timesteps", &PipelineConfig::s2_timesteps, "stage-2 diffusion steps"));
  f.push_back(field_int("s2_d_model", &PipelineConfig::s2_d_model, "stage-2 model width"));
  f.push_back(field_int("s2_heads", &PipelineConfig::s2_heads, "stage-2 attention heads"));
  f.push_back(field_int("s2_d_ff", &PipelineConfig::s2_d_ff, "stage-2 feed-forward width"));
  f.push_back(field_int("s2_blocks", &PipelineConfig::s2_blocks, "stage-2 block depth"));
  f.push_back(field_int("s2_pc_dim", &PipelineConfig::s2_pc_dim, "stage-2 cloud feature width"));
  f.push_back(field_int("s2_text_dim", &PipelineConfig::s2_text_dim, "stage-2 text width"));
  f.push_back(field_int("s2_fusion_dim", &PipelineConfig::s2_fusion_dim,
                        "stage-2 fused condition width"));
  f.push_back(field_double("s2_lr", &PipelineConfig::s2_lr, "stage-2 learning rate"));
  f.push_back(field_int("s2_batch", &PipelineConfig::s2_batch, "stage-2 batch size"));
  f.push_back(field_int("base_steps", &PipelineConfig::base_steps,
                        "training steps for the frozen-base denoiser"));
  f.push_back(field_int("s2_steps", &PipelineConfig::s2_steps, "control-branch training steps"));
  f.push_back(field_bool("joint_guidance", &PipelineConfig::joint_guidance,
                         "steer sampled hands toward stage-1 targets"));
  f.push_back(field_bool("foot_guidance", &PipelineConfig::foot_guidance,
                         "penalize floating/sliding feet while sampling"));
  f.push_back(field_double("alpha", &PipelineConfig::alpha, "foot velocity penalty weight"));
  f.push_back(field_double("beta", &PipelineConfig::beta, "foot acceleration penalty weight"));
  f.push_back(field_double("h_g", &PipelineConfig::h_g, "ground height for foot guidance (m)"));
  f.push_back(field_int("lbfgs_iters", &PipelineConfig::lbfgs_iters,
                        "guidance refinement iterations per step"));
  f.push_back(field_u64("sample_seed", &PipelineConfig::sample_seed, "sampling seed"));
  f.push_back(field_int("eval_batch", &PipelineConfig::eval_batch, "retrieval batch size"));
  f.push_back(field_double("h_fs", &PipelineConfig::h_fs, "foot-sliding height threshold (m)"));
  f.push_back(field_int("evaluator_steps", &PipelineConfig::evaluator_steps,
                        "training steps for the metric evaluators"));
  f.push_back(field_u64("evaluator_seed", &PipelineConfig::evaluator_seed,
                        "evaluator training seed"));
  f.push_back(field_string("evaluator_ckpt", &PipelineConfig::evaluator_ckpt,
                           "evaluator checkpoint path; empty uses <out_dir>/evaluators.ckpt"));
  f.push_back(field_string("out_dir", &PipelineConfig::out_dir, "artifact directory"));
  return f;
}

void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw InvalidInput(std::string(what) + " must be positive and finite");
  }
}

void check_min(long long v, long long lo, const char* what) {
  if (v < lo) {
    throw InvalidInput(std::string(what) + " must be at least " + std::to_string(lo));
  }
}

}  // namespace

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = build_fields();
  return fields;
}

void PipelineConfig::validate() const {
  check_min(clips, 2, "clips");
  check_min(test_clips, 1, "test_clips");
  if (test_clips >= clips) throw InvalidInput("test_clips must be smaller than clips");
  check_min(clip_len, 2, "clip_len");
  check_positive(fps, "fps");
  if (scenario != "carry" && scenario != "push" && scenario != "lift" && scenario != "mixed") {
    throw InvalidInput("scenario must be carry, push, lift, or mixed");
  }
  check_min(cloud_points, 8, "cloud_points");
  check_min(n_basis, 1, "n_basis");
  check_positive(bps_radius, "bps_radius");
  check_positive(sigma, "sigma");
  check_positive(tau, "tau");
  if (llm.empty()) throw InvalidInput("llm backend must not be empty");
  if (category.empty()) throw InvalidInput("category must not be empty");

  check_min(s1_timesteps, 2, "s1_timesteps");
  check_min(s1_d_model, 1, "s1_d_model");
  check_min(s1_heads, 1, "s1_heads");
  if (s1_d_model % s1_heads != 0) throw InvalidInput("s1_d_model must divide by s1_heads");
  check_min(s1_d_ff, 1, "s1_d_ff");
  check_min(s1_blocks, 1, "s1_blocks");
  check_min(s1_pc_dim, 1, "s1_pc_dim");
  check_min(s1_text_dim, 1, "s1_text_dim");
  check_positive(s1_lr, "s1_lr");
  check_min(s1_batch, 1, "s1_batch");
  check_min(s1_steps, 0, "s1_steps");

  check_min(s2_timesteps, 2, "s2_timesteps");
  check_min(s2_d_model, 1, "s2_d_model");
  check_min(s2_heads, 1, "s2_heads");
  if (s2_d_model % s2_heads != 0) throw InvalidInput("s2_d_model must divide by s2_heads");
  check_min(s2_d_ff, 1, "s2_d_ff");
  check_min(s2_blocks, 1, "s2_blocks");
  check_min(s2_pc_dim, 1, "s2_pc_dim");
  check_min(s2_text_dim, 1, "s2_text_dim");
  check_min(s2_fusion_dim, 1, "s2_fusion_dim");
  check_positive(s2_lr, "s2_lr");
  check_min(s2_batch, 1, "s2_batch");
  check_min(base_steps, 0, "base_steps");
  check_min(s2_steps, 0, "s2_steps");

  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidInput("alpha must be >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidInput("beta must be >= 0");
  if (!std::isfinite(h_g)) throw InvalidInput("h_g must be finite");
  check_min(lbfgs_iters, 0, "lbfgs_iters");
  check_min(eval_batch, 1, "eval_batch");
  check_positive(h_fs, "h_fs");
  check_min(evaluator_steps, 0, "evaluator_steps");
  if (out_dir.empty()) throw InvalidInput("out_dir must not be empty");
}

void apply_config_text(PipelineConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw InvalidInput("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw InvalidInput("config line " + std::to_string(line_no) + ": empty key");
    }
    bool found = false;
    for (const ConfigField& field : config_fields()) {
      if (field.key == key) {
        field.set(cfg, value);
        found = true;
        break;
      }
    }
    if (!found) throw InvalidInput("unknown config key: " + key);
  }
}

void apply_env_overrides(PipelineConfig& cfg, const char* prefix) {
  for (const ConfigField& field : config_fields()) {
    std::string name = prefix + field.key;
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char ch) { return std::toupper(ch); });
    if (const char* value = std::getenv(name.c_str())) {
      field.set(cfg, value);
    }
  }
}

PipelineConfig load_config(const std::filesystem::path& path, bool env_overrides) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("config file not found: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  PipelineConfig cfg;
  apply_config_text(cfg, buf.str());
  if (env_overrides) apply_env_overrides(cfg);
  cfg.validate();
  return cfg;
}

std::string dump_config(const PipelineConfig& cfg) {
  std::ostringstream out;
  for (const ConfigField& field : config_fields()) {
    out << field.key << " = " << field.get(cfg) << "\n";
  }
  return out.str();
}

std::string config_hash(const PipelineConfig& cfg) { return to_hex(fnv1a(dump_config(cfg))); }

}  // namespace hoimo::config
