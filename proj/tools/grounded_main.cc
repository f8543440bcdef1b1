#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "grounded/errors.h"
#include "grounded/pipeline.h"

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitStageFailure = 3;

using grounded::ArtifactPaths;
using grounded::PipelineConfig;

// Path flag bound to an ArtifactPaths member; empty means the default under
// the output directory.
struct PathFlag {
  std::string value;
  std::filesystem::path ArtifactPaths::*member;
};

struct Command {
  CLI::App* app = nullptr;
  std::vector<std::unique_ptr<PathFlag>> paths;
  std::function<void(PipelineConfig&)> adjust;

  void AddPath(const std::string& flag, std::filesystem::path ArtifactPaths::*member,
               const std::string& help) {
    paths.push_back(std::make_unique<PathFlag>(PathFlag{{}, member}));
    app->add_option(flag, paths.back()->value, help);
  }
};

std::vector<std::string> SplitCommas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grounded and co-referenced video description pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  app.add_option("--config", config_path, "Flat JSON config file");
  app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--out-dir", out_dir, "Directory for artifacts (default: out)");

  std::map<std::string, Command> commands;
  auto add = [&](const std::string& name, const std::string& help) -> Command& {
    Command& c = commands[name];
    c.app = app.add_subcommand(name, help);
    return c;
  };

  {
    Command& c = add("synth", "Generate a synthetic corpus and its raw video stream");
    c.AddPath("--out-corpus", &ArtifactPaths::corpus, "Clips with sentences and gold tracks");
    c.AddPath("--out-raw", &ArtifactPaths::raw, "Frames, detections and annotations");
  }
  std::optional<double> theta_hist, theta_survive;
  {
    Command& c = add("shots", "Detect shot boundaries, fitting thresholds when not given");
    c.AddPath("--in", &ArtifactPaths::raw, "Raw clips");
    c.AddPath("--out", &ArtifactPaths::boundaries, "Boundaries JSON");
    c.app->add_option("--theta-hist", theta_hist, "Histogram distance threshold");
    c.app->add_option("--theta-survive", theta_survive, "Point survival threshold");
    c.adjust = [&](PipelineConfig& config) {
      if (theta_hist) config.theta_hist = theta_hist;
      if (theta_survive) config.theta_survive = theta_survive;
    };
  }
  {
    Command& c = add("fit-pairwise", "Fit the detection-pair model on training clips");
    c.AddPath("--in", &ArtifactPaths::raw, "Raw clips");
    c.AddPath("--out", &ArtifactPaths::pairwise, "Pairwise model JSON");
  }
  {
    Command& c = add("track", "Build tracks with the two-level multicut tracker");
    c.AddPath("--in", &ArtifactPaths::raw, "Raw clips with detections");
    c.AddPath("--text", &ArtifactPaths::corpus, "Clips carrying sentences and mentions");
    c.AddPath("--boundaries", &ArtifactPaths::boundaries, "Boundaries JSON");
    c.AddPath("--model", &ArtifactPaths::pairwise, "Pairwise model JSON");
    c.AddPath("--out", &ArtifactPaths::tracks, "Tracked clips");
    c.AddPath("--norm-out", &ArtifactPaths::norm, "Feature normalization stats");
    c.AddPath("--recall-out", &ArtifactPaths::recall, "Detection and track recall");
  }
  {
    Command& c = add("link", "Train the mention linker and write attention targets");
    c.AddPath("--in", &ArtifactPaths::tracks, "Tracked clips");
    c.AddPath("--out", &ArtifactPaths::alpha_gt, "Attention targets JSONL");
    c.AddPath("--report", &ArtifactPaths::linking, "Linking summary JSON");
  }
  {
    Command& c = add("train", "Train the grounding decoder");
    c.AddPath("--in", &ArtifactPaths::tracks, "Tracked clips");
    c.AddPath("--alpha-gt", &ArtifactPaths::alpha_gt, "Attention targets JSONL");
    c.AddPath("--norm", &ArtifactPaths::norm, "Feature normalization stats");
    c.AddPath("--out", &ArtifactPaths::model, "Decoder checkpoint");
  }
  std::string prev_grounding;
  {
    Command& c = add("generate", "Describe the test clips and ground person words");
    c.AddPath("--model", &ArtifactPaths::model, "Decoder checkpoint");
    c.AddPath("--in", &ArtifactPaths::tracks, "Tracked clips");
    c.AddPath("--out", &ArtifactPaths::pred, "Predictions JSONL");
    c.AddPath("--gt-out", &ArtifactPaths::gt, "Ground-truth slots JSONL");
    c.AddPath("--grounding-out", &ArtifactPaths::grounding, "Grounded tracks per clip");
    c.app->add_option("--prev-grounding", prev_grounding,
                      "Grounded tracks of preceding clips (JSONL of {id, tracks})");
  }
  {
    Command& c = add("eval", "Score predictions against ground truth and baselines");
    c.AddPath("--pred", &ArtifactPaths::pred, "Predictions JSONL");
    c.AddPath("--gt", &ArtifactPaths::gt, "Ground-truth slots JSONL");
    c.AddPath("--in", &ArtifactPaths::tracks, "Tracked clips for the baselines");
    c.AddPath("--recall", &ArtifactPaths::recall, "Recall JSON from the track stage");
    c.AddPath("--linking", &ArtifactPaths::linking, "Linking summary JSON");
    c.AddPath("--out", &ArtifactPaths::report, "Report JSON");
  }
  std::string stages;
  {
    Command& c = add("pipeline", "Run the stages in order");
    c.app->add_option("--stages", stages, "Comma-separated subset of stages");
    c.adjust = [&](PipelineConfig& config) {
      if (!stages.empty()) config.stages = SplitCommas(stages);
    };
  }
  add("config", "Print the effective config as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfigError;
  }

  std::string name;
  for (auto& [key, command] : commands) {
    if (command.app->parsed()) name = key;
  }
  const Command& command = commands.at(name);

  PipelineConfig config;
  try {
    if (!config_path.empty()) config = grounded::LoadConfig(config_path);
    if (seed) config.seed = *seed;
    if (!out_dir.empty()) config.out_dir = out_dir;
    if (command.adjust) command.adjust(config);
    grounded::ValidateConfig(config);
  } catch (const grounded::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }

  if (name == "config") {
    std::cout << grounded::ConfigToJson(config) << "\n";
    return 0;
  }

  ArtifactPaths paths = ArtifactPaths::Under(config.out_dir);
  for (const auto& flag : command.paths) {
    if (!flag->value.empty()) paths.*(flag->member) = flag->value;
  }
  if (!prev_grounding.empty()) paths.prev_grounding = prev_grounding;

  try {
    if (name == "pipeline") {
      grounded::RunPipeline(config, paths, &std::cerr);
      std::cerr << "report written to " << paths.report.string() << "\n";
    } else {
      std::error_code ec;
      std::filesystem::create_directories(config.out_dir, ec);
      grounded::RunStage(name, config, paths, &std::cerr);
    }
  } catch (const grounded::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const grounded::StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStageFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStageFailure;
  }
  return 0;
}
