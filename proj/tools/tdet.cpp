// tdet: turbulence detection toolkit command line.
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tdet/commands.hpp"
#include "tdet/config.hpp"

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;  // key=value
};

struct Paths {
  std::string data;
  std::string checkpoint;
  std::string detections;
};

tdet::RunConfig resolve(const Globals& g, const Paths& p) {
  tdet::RunConfig config;
  if (!g.config_path.empty()) config = tdet::load_config(g.config_path);
  for (const std::string& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw tdet::ConfigError("--set expects key=value, got '" + kv + "'");
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) config.seed = *g.seed;
  if (!g.out.empty()) config.out_dir = g.out;
  if (!p.data.empty()) config.data_dir = p.data;
  if (!p.checkpoint.empty()) config.checkpoint = p.checkpoint;
  if (!p.detections.empty()) config.detections = p.detections;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object detection under simulated atmospheric turbulence"};
  app.require_subcommand(1);
  Globals g;
  Paths p;
  bool overlay = false;
  app.add_option("--config", g.config_path, "key=value settings file");
  app.add_option("--seed", g.seed, "run seed (overrides the config)");
  app.add_option("--out", g.out, "output directory (overrides the config)");
  app.add_option("--set", g.overrides, "extra key=value setting, repeatable");

  auto* gen = app.add_subcommand("gen-toy", "render the procedural shapes dataset");
  auto* synth = app.add_subcommand("synth", "apply turbulence degradation to a dataset");
  synth->add_option("--data", p.data, "input dataset directory");
  auto* train = app.add_subcommand("train", "train a detector");
  train->add_option("--data", p.data, "training dataset directory");
  auto* detect = app.add_subcommand("detect", "run inference over a dataset's images");
  detect->add_option("--checkpoint", p.checkpoint, "model checkpoint");
  detect->add_option("--data", p.data, "dataset directory with the images");
  detect->add_flag("--overlay", overlay, "also write P6 images with boxes drawn");
  auto* eval = app.add_subcommand("eval", "score detections against ground truth");
  eval->add_option("--detections", p.detections, "detections CSV");
  eval->add_option("--data", p.data, "ground-truth dataset directory");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");

  // Global options are accepted after the subcommand too.
  for (auto* sub : {gen, synth, train, detect, eval, gradcheck}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return tdet::cli::kExitInput;
  }

  tdet::RunConfig config;
  try {
    config = resolve(g, p);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return tdet::cli::kExitInput;
  }

  if (gen->parsed()) return tdet::cli::cmd_gen_toy(config, std::cout, std::cerr);
  if (synth->parsed()) return tdet::cli::cmd_synth(config, std::cout, std::cerr);
  if (train->parsed()) return tdet::cli::cmd_train(config, std::cout, std::cerr);
  if (detect->parsed()) return tdet::cli::cmd_detect(config, overlay, std::cout, std::cerr);
  if (eval->parsed()) return tdet::cli::cmd_eval(config, std::cout, std::cerr);
  return tdet::cli::cmd_gradcheck(config, std::cout, std::cerr);
}
