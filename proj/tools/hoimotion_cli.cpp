#include <iostream>
#include <map>
#include <string>

#include "hoimotion/llm_client.hpp"
#include "hoimotion/pipeline.hpp"

#include <CLI11.hpp>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;   // bad flags, bad config, missing prerequisites
constexpr int kExitNumeric = 3;  // non-finite losses or failed numeric checks

// Every config key becomes a --key flag on the subcommand; values are kept
// as strings and applied after file and environment so the CLI wins.
void add_config_flags(CLI::App* sub, std::string& config_path,
                      std::map<std::string, std::string>& overrides) {
  sub->add_option("--config", config_path, "key=value config file (applied first)");
  for (const auto& field : hoimo::config::config_fields()) {
    const std::string key = field.key;
    sub->add_option_function<std::string>(
           "--" + key,
           [&overrides, key](const std::string& value) { overrides[key] = value; },
           field.doc)
        ->type_name(field.type);
  }
}

hoimo::config::PipelineConfig resolve_config(
    const std::string& config_path, const std::map<std::string, std::string>& overrides) {
  hoimo::config::PipelineConfig cfg;
  if (!config_path.empty()) {
    cfg = hoimo::config::load_config(config_path);  // file, then environment
  } else {
    hoimo::config::apply_env_overrides(cfg);
  }
  for (const auto& field : hoimo::config::config_fields()) {
    const auto it = overrides.find(field.key);
    if (it != overrides.end()) field.set(cfg, it->second);
  }
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage human-object interaction motion pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::map<std::string, std::string> overrides;

  CLI::App* gen = app.add_subcommand("gen-data", "Generate the synthetic interaction dataset");
  CLI::App* ann = app.add_subcommand("annotate", "Write coarse and fine text for every clip");
  CLI::App* ts1 = app.add_subcommand("train-stage1",
                                     "Train the hand-trajectory/affordance diffusion model");
  CLI::App* ss1 = app.add_subcommand("sample-stage1",
                                     "Sample hand trajectories for the held-out clips");
  CLI::App* ts2 = app.add_subcommand("train-stage2",
                                     "Train the base denoiser, then the control branch");
  CLI::App* smp = app.add_subcommand("sample", "Generate full-body motion with guidance");
  CLI::App* evl = app.add_subcommand("evaluate", "Score generated motion and write the report");
  CLI::App* run = app.add_subcommand("run", "Run every phase in order and print the report");
  for (CLI::App* sub : {gen, ann, ts1, ss1, ts2, smp, evl, run}) {
    add_config_flags(sub, config_path, overrides);
  }

  CLI::App* render = app.add_subcommand(
      "export-render", "Convert a stored motion file to a JSON joint animation");
  std::string motion_prefix, render_out;
  render->add_option("motion_prefix", motion_prefix,
                     "path prefix of a <prefix>.json/<prefix>.bin motion pair")
      ->required();
  render->add_option("output", render_out, "output JSON path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (render->parsed()) {
      hoimo::pipeline::export_render(motion_prefix, render_out);
      return kExitOk;
    }
    const hoimo::config::PipelineConfig cfg = resolve_config(config_path, overrides);
    if (gen->parsed()) {
      hoimo::pipeline::gen_data(cfg);
    } else if (ann->parsed()) {
      hoimo::pipeline::annotate(cfg);
    } else if (ts1->parsed()) {
      hoimo::pipeline::train_stage1(cfg);
    } else if (ss1->parsed()) {
      hoimo::pipeline::sample_stage1(cfg);
    } else if (ts2->parsed()) {
      hoimo::pipeline::train_stage2(cfg);
    } else if (smp->parsed()) {
      hoimo::pipeline::sample_stage2(cfg);
    } else if (evl->parsed()) {
      std::cout << hoimo::pipeline::evaluate(cfg).to_json() << "\n";
    } else if (run->parsed()) {
      std::cout << hoimo::pipeline::run_pipeline(cfg).to_json() << "\n";
    }
    return kExitOk;
  } catch (const hoimo::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const hoimo::annotation::ClientError& e) {
    std::cerr << "language-model backend error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const hoimo::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}
