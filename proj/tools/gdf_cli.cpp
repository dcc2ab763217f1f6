#include <iostream>

#include "CLI11.hpp"
#include "gdf/pipeline.hpp"

namespace {

using Command = std::string (*)(const gdf::RunConfig&, const std::filesystem::path&, bool);

struct Options {
  std::string config;
  std::string out;
  bool force = false;
  std::int64_t seed = -1;
};

int run(const Options& opt, Command cmd) {
  gdf::RunConfig cfg = opt.config.empty() ? gdf::RunConfig{} : gdf::load_run_config(opt.config);
  if (opt.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opt.seed);
  cfg.validate();
  std::cout << cmd(cfg, opt.out, opt.force) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gdf: synthetic stereo scenes, visual odometry and self-supervised keypoint training"};
  app.require_subcommand(1, 1);
  Options opt;
  const std::vector<std::pair<std::string, std::pair<std::string, Command>>> commands = {
      {"synth", {"render a synthetic stereo sequence", gdf::cmd_synth}},
      {"vo", {"run stereo visual odometry on a dataset", gdf::cmd_vo}},
      {"label", {"score VO tracks and write keypoint labels", gdf::cmd_label}},
      {"train", {"train the keypoint network over self-supervised rounds", gdf::cmd_train}},
      {"eval", {"coverage, repeatability and trajectory metrics for one extractor", gdf::cmd_eval}},
      {"compare", {"classical vs untrained vs fine-tuned on a held-out scene", gdf::cmd_compare}},
  };
  app.add_option("--config", opt.config, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--out", opt.out, "output directory");
  app.add_flag("--force", opt.force, "overwrite a non-empty output directory");
  app.add_option("--seed", opt.seed, "override the scene seed")->check(CLI::NonNegativeNumber);
  app.fallthrough();
  for (const auto& [name, info] : commands) app.add_subcommand(name, info.first);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  try {
    for (const auto& [name, info] : commands) {
      if (app.got_subcommand(name)) return run(opt, info.second);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
