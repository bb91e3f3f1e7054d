// Copyright 2026 The aligndraw Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "aligndraw/commands.hpp"

namespace fs = std::filesystem;
using namespace aligndraw;

namespace {

RunConfig resolve_config(const std::string& config, bool micro,
                         const std::optional<std::uint64_t>& seed) {
  if (!config.empty() && micro) {
    throw CommandError("usage", "--config and --micro are mutually exclusive");
  }
  RunConfig run = !config.empty() ? load_run_config(config)
                  : micro         ? RunConfig::micro()
                                  : RunConfig::mnist();
  if (seed) run.seed = *seed;
  run.validate();
  return run;
}

fs::path resolve_checkpoint(const fs::path& p) {
  if (fs::is_directory(p)) {
    const fs::path latest = latest_checkpoint(p);
    if (latest.empty()) throw CommandError("io", "no checkpoint in " + p.string());
    return latest;
  }
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Caption-conditioned recurrent attention image generator"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  bool micro = false;
  app.add_option("--config", config, "Run config document");
  app.add_option("--seed", seed, "Seed for every random stream");
  app.add_option("--out", out, "Output directory");
  app.add_flag("--micro", micro, "Use the small built-in profile");

  auto* make = app.add_subcommand("make-dataset", "Write captioned digit scenes as PGM");
  auto* train_cmd = app.add_subcommand("train", "Train and checkpoint every epoch");
  bool resume = false;
  std::size_t epochs_this_run = 0;
  train_cmd->add_flag("--resume", resume, "Continue from the latest checkpoint in --out");
  train_cmd->add_option("--epochs-this-run", epochs_this_run, "Stop after this many epochs");

  std::string checkpoint, caption, which;
  std::size_t count = 16;
  auto* sample = app.add_subcommand("sample", "Draw images for a caption");
  sample->add_option("--checkpoint", checkpoint, "Checkpoint file or directory")->required();
  sample->add_option("--caption", caption, "Caption text")->required();
  sample->add_option("--count", count, "Number of images");
  auto* trace = app.add_subcommand("trace", "Per-step canvases, write boxes and alignments");
  trace->add_option("--checkpoint", checkpoint, "Checkpoint file or directory")->required();
  trace->add_option("--caption", caption, "Caption text")->required();
  auto* eval = app.add_subcommand("eval", "Bound, SSI or retrieval metrics");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file or directory")->required();
  eval->add_option("--which", which, "bound, ssi or retrieval")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    const fs::path out_dir(out);
    if (make->parsed()) {
      cmd_make_dataset(resolve_config(config, micro, seed), out_dir);
    } else if (train_cmd->parsed()) {
      const TrainReport r =
          cmd_train(resolve_config(config, micro, seed), out_dir, resume, epochs_this_run);
      for (const EpochMetrics& m : r.outcome.log)
        std::cout << "epoch " << m.epoch << " bound " << m.mean_bound << " lr " << m.lr << "\n";
      if (r.outcome.aborted) throw CommandError("numeric", r.outcome.abort_reason);
    } else if (sample->parsed()) {
      cmd_sample(resolve_checkpoint(checkpoint), caption, count, seed.value_or(1), out_dir);
    } else if (trace->parsed()) {
      cmd_trace(resolve_checkpoint(checkpoint), caption, seed.value_or(1), out_dir);
    } else if (eval->parsed()) {
      for (const MetricRow& r : cmd_eval(resolve_checkpoint(checkpoint), which,
                                         seed.value_or(1), out_dir))
        std::cout << r.metric << "\t" << r.value << "\t" << r.std_err << "\t" << r.count << "\n";
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& c : msg)
      if (c == '\n') c = ' ';
    std::cerr << "error: " << error_category(e) << ": " << msg << "\n";
    return 1;
  }
  return 0;
}
