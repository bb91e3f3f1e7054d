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

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "aligndraw/checkpoint.hpp"
#include "aligndraw/commands.hpp"
#include "aligndraw/image_io.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace aligndraw;
using namespace aligndraw::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("aligndraw-cli-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::uint8_t> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint64_t file_hash(const fs::path& p) {
  const auto b = slurp(p);
  return fnv1a64(b.data(), b.size());
}

std::string slurp_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Micro profile cut down to a few seconds of work.
RunConfig tiny_run() {
  RunConfig r = RunConfig::micro();
  r.schedule.epochs = 3;
  r.schedule.drop_epoch = 2;
  r.schedule.samples_per_epoch = 20;
  r.schedule.batch_size = 10;
  r.data.glyphs_per_class = 4;
  r.data.train_samples = 40;
  r.data.test_samples = 12;
  r.data.heldout_samples = 6;
  r.data.heldout = parse_configurations("3:top-left");
  r.eval.bound_images = 5;
  r.eval.ssi_captions = 2;
  r.eval.ssi_samples = 3;
  r.eval.retrieval_pool = 6;
  r.seed = 42;
  return r;
}

std::string category_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return error_category(e) + ": " + e.what();
  }
  return "no error";
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("run config documents round-trip and reject malformed input") {
  for (const RunConfig& c : {RunConfig::mnist(), RunConfig::micro(), tiny_run()}) {
    const std::string text = to_text(c);
    const RunConfig back = parse_run_config(text);
    CHECK(back == c);
    CHECK(to_text(back) == text);
  }
  const RunConfig m = RunConfig::mnist();
  CHECK(m.model.glimpses == 32);
  CHECK(m.model.gen_hidden == 300);
  CHECK(m.model.latent == 150);
  CHECK(m.model.read_patch == 8);
  CHECK(m.model.vocab == caption_vocab().size());
  CHECK(m.schedule.epochs == 150);
  CHECK(m.eval.ssi_samples == 50);
  const RunConfig u = RunConfig::micro();
  CHECK(u.model.glimpses == 4);
  CHECK(u.model.height == 12);
  CHECK(u.model.latent == 8);
  CHECK(u.scene().canvas == 12);

  const std::string base = to_text(RunConfig::micro());
  auto error = [](const std::string& text) {
    try {
      parse_run_config(text);
    } catch (const std::invalid_argument& e) {
      return std::string(e.what());
    }
    return std::string("accepted");
  };
  CHECK(error(base + "model.colour = 3\n").find("unknown key 'model.colour'") != std::string::npos);
  CHECK(error(base + "seed = 4\n").find("duplicate key 'seed'") != std::string::npos);
  std::string missing = base;
  const auto at = missing.find("train.clip_norm");
  missing.erase(at, missing.find('\n', at) - at + 1);
  CHECK(error(missing) == "config is missing required key 'train.clip_norm'");
  std::string bad = base;
  bad.replace(bad.find("model.glimpses = 4"), 18, "model.glimpses = four");
  CHECK(error(bad).find("expected an unsigned integer, got 'four'") != std::string::npos);
  CHECK(error("# comment only\n").find("missing required key") != std::string::npos);
  CHECK(error(base + "garbage\n").find("expected key = value") != std::string::npos);
  std::string comments = "# header\n" + base;
  CHECK(parse_run_config(comments) == RunConfig::micro());
  CHECK_THROWS_AS(load_run_config("/nonexistent.cfg"), std::runtime_error);
}

TEST_CASE("shipped config documents match the built-in presets") {
  const fs::path dir = fs::path(ALIGNDRAW_SOURCE_DIR) / "configs";
  CHECK(load_run_config(dir / "mnist.cfg") == RunConfig::mnist());
  CHECK(load_run_config(dir / "micro.cfg") == RunConfig::micro());
}

TEST_CASE("checkpoints round-trip byte for byte and detect damage") {
  const RunConfig run = tiny_run();
  RngStream rng(3);
  Checkpoint ck{run, start_training(run.model, run.schedule, run.seed)};
  ck.state.epochs_done = 2;
  ck.state.opt.step = 17;
  for (Tensor& a : ck.state.opt.accumulators)
    for (double& v : a.data()) v = rng.uniform();
  const auto bytes = serialize_checkpoint(ck);
  const Checkpoint back = deserialize_checkpoint(bytes);
  CHECK(back.run == run);
  CHECK(back.state.epochs_done == 2);
  CHECK(back.state.opt == ck.state.opt);
  for (std::size_t p = 0; p < ck.state.params.size(); ++p)
    CHECK(back.state.params.tensor(p) == ck.state.params.tensor(p));
  CHECK(serialize_checkpoint(back) == bytes);

  const fs::path dir = scratch("ckpt");
  save_checkpoint(dir / "a.ckpt", ck);
  save_checkpoint(dir / "b.ckpt", load_checkpoint(dir / "a.ckpt"));
  CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));
  CHECK(slurp(dir / "a.ckpt") == bytes);

  for (std::size_t where : {std::size_t{40}, bytes.size() / 2, bytes.size() - 20}) {
    auto broken = bytes;
    broken[where] ^= 0x10;
    CHECK_THROWS_WITH_AS(deserialize_checkpoint(broken), doctest::Contains("checksum mismatch"),
                         std::runtime_error);
  }
  auto cut = bytes;
  cut.resize(bytes.size() - 3);
  CHECK_THROWS_AS(deserialize_checkpoint(cut), std::runtime_error);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_WITH_AS(deserialize_checkpoint(magic), doctest::Contains("bad magic"), std::runtime_error);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), std::runtime_error);

  Checkpoint partial = ck;
  partial.state.opt.accumulators.pop_back();
  CHECK_THROWS_AS(serialize_checkpoint(partial), std::invalid_argument);
  fs::remove_all(dir);
}

TEST_CASE("error categories") {
  CHECK(error_category(CommandError("usage", "x")) == "usage");
  CHECK(error_category(std::domain_error("x")) == "numeric");
  CHECK(error_category(std::invalid_argument("x")) == "input");
  CHECK(error_category(std::out_of_range("x")) == "input");
  CHECK(error_category(std::runtime_error("x")) == "io");
  CHECK(error_category(std::logic_error("x")) == "internal");
}

TEST_CASE("make-dataset is reproducible and lists held-out configurations") {
  const RunConfig run = tiny_run();
  const fs::path a = scratch("data-a"), b = scratch("data-b");
  cmd_make_dataset(run, a);
  cmd_make_dataset(run, b);
  for (const char* f : {"train/captions.tsv", "test/captions.tsv", "heldout/captions.tsv",
                        "train/000000.pgm", "test/000011.pgm", "heldout/000005.pgm", "split.txt"}) {
    INFO(f);
    REQUIRE(fs::exists(a / f));
    CHECK(file_hash(a / f) == file_hash(b / f));
  }
  CHECK(slurp_text(a / "split.txt").find("heldout = 3:top-left\n") != std::string::npos);
  CHECK(read_pgm(a / "train/000000.pgm").shape() == Shape{12, 12});
  for (const StoredSample& s : read_dataset_split(a / "train"))
    CHECK(s.placement.find("3:top-left") == std::string::npos);
  for (const StoredSample& s : read_dataset_split(a / "heldout"))
    CHECK(s.placement.find("3:top-left") != std::string::npos);

  RunConfig full = RunConfig::mnist();
  full.data.glyphs_per_class = 2;
  full.data.train_samples = 2;
  full.data.test_samples = 1;
  const fs::path c = scratch("data-c");
  cmd_make_dataset(full, c);
  CHECK(read_pgm(c / "train/000001.pgm").shape() == Shape{60, 60});
  CHECK_FALSE(fs::exists(c / "heldout"));
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(c);
}

TEST_CASE("train resumes to a bit-identical continuation") {
  const RunConfig run = tiny_run();
  const fs::path straight = scratch("train-straight"), split = scratch("train-split");
  const TrainReport full = cmd_train(run, straight, false);
  REQUIRE_FALSE(full.outcome.aborted);
  CHECK(full.last_checkpoint == straight / "epoch-0003.ckpt");
  CHECK(latest_checkpoint(straight) == straight / "epoch-0003.ckpt");

  const TrainReport first = cmd_train(run, split, false, 1);
  CHECK(first.last_checkpoint == split / "epoch-0001.ckpt");
  CHECK(category_of([&] { cmd_train(run, split, false); }).rfind("usage:", 0) == 0);
  const TrainReport rest = cmd_train(run, split, true);
  CHECK(rest.outcome.state.epochs_done == 3);
  for (const char* f : {"epoch-0001.ckpt", "epoch-0002.ckpt", "epoch-0003.ckpt"})
    CHECK(slurp(straight / f) == slurp(split / f));

  // Wall time is the only column allowed to differ.
  auto strip_wall = [](const std::string& text) {
    std::string out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out += line.substr(0, line.rfind('\t')) + "\n";
    return out;
  };
  const std::string log = slurp_text(straight / "metrics.tsv");
  CHECK(strip_wall(log) == strip_wall(slurp_text(split / "metrics.tsv")));
  CHECK(std::count(log.begin(), log.end(), '\n') == 4);

  RunConfig other = run;
  other.seed = 7;
  CHECK(category_of([&] { cmd_train(other, split, true); }).rfind("config:", 0) == 0);
  const fs::path empty = scratch("train-empty");
  CHECK(category_of([&] { cmd_train(run, empty, true); }).rfind("io:", 0) == 0);
  fs::remove_all(straight);
  fs::remove_all(split);
  fs::remove_all(empty);
}

TEST_CASE("sample, trace and eval on a trained checkpoint") {
  const fs::path run_dir = fs::temp_directory_path() / "aligndraw-cli-trained";
  if (latest_checkpoint(run_dir).empty()) cmd_train(tiny_run(), scratch("trained"), false);
  const fs::path ckpt = latest_checkpoint(run_dir);
  REQUIRE_FALSE(ckpt.empty());
  const RunConfig run = load_checkpoint(ckpt).run;

  SUBCASE("sample") {
    const fs::path a = scratch("sample-a"), b = scratch("sample-b");
    const auto imgs = cmd_sample(ckpt, "The Digit THREE is at the top LEFT of the image", 1, 5, a);
    cmd_sample(ckpt, "the digit three is at the top left of the image", 1, 5, b);
    CHECK(imgs.size() == 1);
    CHECK(file_hash(a / "samples.pgm") == file_hash(b / "samples.pgm"));
    const auto four = cmd_sample(ckpt, "the digit three is at the top left of the image", 4, 5, b);
    CHECK(four[0] == imgs[0]);
    CHECK_FALSE(four[1] == imgs[0]);
    cmd_sample(ckpt, "the digit three is at the top of the digit one", 1, 5, a);
    CHECK(read_pgm(b / "samples.pgm").shape() == Shape{25, 25});
    CHECK(category_of([&] { cmd_sample(ckpt, "the digit eleven", 1, 5, a); }) ==
          "input: word 'eleven' is not in the vocabulary");
    CHECK(category_of([&] { cmd_sample(ckpt, "  ", 1, 5, a); }).rfind("input:", 0) == 0);
    CHECK(category_of([&] { cmd_sample(run_dir / "nope.ckpt", "the", 1, 5, a); }).rfind("io:", 0) == 0);
    fs::remove_all(a);
    fs::remove_all(b);
  }

  SUBCASE("trace") {
    const fs::path out = scratch("trace");
    const GenTrace g = cmd_trace(ckpt, "the digit seven is at the bottom right of the image", 3, out);
    REQUIRE(g.steps.size() == run.model.glimpses);
    std::istringstream alpha(slurp_text(out / "alpha.tsv"));
    std::string line;
    std::getline(alpha, line);
    CHECK(line == "step\tthe\tdigit\tseven\tis\tat\tthe\tbottom\tright\tof\tthe\timage");
    std::size_t rows = 0;
    while (std::getline(alpha, line)) {
      std::istringstream cells(line);
      double step = 0, v = 0, sum = 0;
      cells >> step;
      while (cells >> v) sum += v;
      CHECK(std::abs(sum - 1.0) < 1e-10);
      ++rows;
    }
    CHECK(rows == run.model.glimpses);
    CHECK(fs::exists(out / "canvas-04.pgm"));
    CHECK(fs::exists(out / "write-01.pgm"));
    // The last canvas frame is the sample image.
    const Tensor last = read_pgm(out / "canvas-04.pgm");
    for (std::size_t i = 0; i < last.size(); ++i)
      CHECK(last[i] == to_gray8(g.mean_image[i]) / 255.0);
    fs::remove_all(out);
  }

  SUBCASE("eval") {
    const fs::path out = scratch("eval");
    const auto bound = cmd_eval(ckpt, "bound", 1, out);
    REQUIRE(bound.size() == 4);
    CHECK(bound[0].metric == "bound_train");
    CHECK(bound[1].metric == "bound_test");
    CHECK(bound[2].metric == "bound_heldout");
    CHECK(bound[3].metric == "bound_gap_train_minus_test");
    CHECK(bound[3].value == bound[0].value - bound[1].value);
    CHECK(fs::exists(out / "eval-bound.tsv"));
    const auto again = cmd_eval(ckpt, "bound", 1, out);
    CHECK(again[1].value == bound[1].value);

    const auto s = cmd_eval(ckpt, "ssi", 1, out);
    REQUIRE(s.size() == 1);
    CHECK(s[0].count == 6);
    CHECK((s[0].value >= -1 && s[0].value <= 1));

    const auto r = cmd_eval(ckpt, "retrieval", 1, out);
    REQUIRE(r.size() == 5);
    CHECK(r[0].metric == "recall_at_1");
    CHECK(r[3].metric == "recall_at_50");
    CHECK(r[3].value == 1.0);
    CHECK(r[4].metric == "median_rank");
    CHECK((r[4].value >= 1 && r[4].value <= 6));
    CHECK(slurp_text(out / "eval-retrieval.tsv").rfind("metric\tvalue\tstd_err\tcount\n", 0) == 0);
    CHECK(category_of([&] { cmd_eval(ckpt, "fid", 1, out); }).rfind("usage:", 0) == 0);
    fs::remove_all(out);
  }
}

}  // TEST_SUITE
