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

#include "aligndraw/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>

#include "aligndraw/image_io.hpp"

namespace aligndraw {
namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kPoolTag = 0x706f6f6c;  // "pool"
constexpr std::uint64_t kTrainSplitTag = 1;
constexpr std::uint64_t kTestSplitTag = 2;
constexpr std::uint64_t kHeldoutSplitTag = 3;
constexpr std::uint64_t kEvalTag = 0x6576616c;  // "eval"

std::vector<SceneSample> draw_split(const DigitPool& pool, const RunConfig& run,
                                    SplitPolicy::Mode mode, std::uint64_t tag,
                                    std::size_t n) {
  SplitPolicy policy;
  policy.mode = mode;
  policy.heldout = run.data.heldout;
  policy.two_digit_fraction = run.data.two_digit_fraction;
  RngStream rng = RngStream(run.seed).derive(tag);
  std::vector<SceneSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(synthesize_sample(pool, rng, policy, run.scene()));
  return out;
}

std::string numbered(const char* stem, std::size_t k, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-%02zu%s", stem, k, ext);
  return buf;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CommandError("io", "cannot create " + dir.string() + ": " + ec.message());
}

Checkpoint open_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw CommandError("io", "checkpoint " + path.string() + " not found");
  return load_checkpoint(path);
}

void write_metrics_log(const fs::path& path, const std::vector<EpochMetrics>& log) {
  std::ofstream out(path);
  if (!out) throw CommandError("io", "cannot write " + path.string());
  out << "epoch\tmean_bound\tlr\twall_seconds\n";
  for (const EpochMetrics& m : log)
    out << m.epoch << '\t' << fmt(m.mean_bound) << '\t' << fmt(m.lr) << '\t'
        << fmt(m.wall_seconds) << '\n';
}

std::vector<EpochMetrics> read_metrics_log(const fs::path& path) {
  std::vector<EpochMetrics> log;
  std::ifstream in(path);
  if (!in) return log;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    EpochMetrics m;
    if (ss >> m.epoch >> m.mean_bound >> m.lr >> m.wall_seconds) log.push_back(m);
  }
  return log;
}

// Draws the outline of the write patch, spanning centre +- stride (p - 1) / 2
// in 1-based pixel coordinates.
void draw_box(Tensor& img, const GridValues& g, std::size_t patch) {
  const double half = g.stride * (static_cast<double>(patch) - 1.0) / 2.0;
  const long h = static_cast<long>(img.rows()), w = static_cast<long>(img.cols());
  auto px = [](double v) { return static_cast<long>(std::lround(v)) - 1; };
  const long r0 = px(g.center_x - half), r1 = px(g.center_x + half);
  const long c0 = px(g.center_y - half), c1 = px(g.center_y + half);
  auto put = [&](long r, long c) {
    if (r >= 0 && r < h && c >= 0 && c < w) img.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = 1.0;
  };
  for (long c = c0; c <= c1; ++c) put(r0, c), put(r1, c);
  for (long r = r0; r <= r1; ++r) put(r, c0), put(r, c1);
}

Tensor sigmoid_image(const Tensor& c) {
  Tensor out = Tensor::zeros_like(c);
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-c[i]));
  return out;
}

}  // namespace

std::string error_category(const std::exception& e) {
  if (const auto* ce = dynamic_cast<const CommandError*>(&e)) return ce->category();
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return "io";
  if (dynamic_cast<const std::domain_error*>(&e)) return "numeric";
  if (dynamic_cast<const std::invalid_argument*>(&e)) return "input";
  if (dynamic_cast<const std::out_of_range*>(&e)) return "input";
  if (dynamic_cast<const std::runtime_error*>(&e)) return "io";
  return "internal";
}

DigitPool load_digit_pool(const RunConfig& run, std::uint64_t tag) {
  if (run.data.digit_images != "none") {
    return DigitPool::from_archive(load_digit_archive(run.data.digit_images, run.data.digit_labels))
        .resized(run.data.digit_size);
  }
  RngStream rng = RngStream(run.seed).derive(kPoolTag, tag);
  return make_glyph_pool(run.data.glyphs_per_class, rng).resized(run.data.digit_size);
}

DatasetSplits synthesize_splits(const RunConfig& run) {
  run.validate();
  const DigitPool train_pool = load_digit_pool(run, kTrainSplitTag);
  const DigitPool test_pool = load_digit_pool(run, kTestSplitTag);
  const auto mode = run.data.heldout.empty() ? SplitPolicy::Mode::kAll : SplitPolicy::Mode::kTrain;
  DatasetSplits s;
  s.train = draw_split(train_pool, run, mode, kTrainSplitTag, run.data.train_samples);
  s.test = draw_split(test_pool, run, mode, kTestSplitTag, run.data.test_samples);
  if (!run.data.heldout.empty()) {
    s.heldout = draw_split(test_pool, run, SplitPolicy::Mode::kHeldOut, kHeldoutSplitTag,
                           run.data.heldout_samples);
  }
  return s;
}

void cmd_make_dataset(const RunConfig& run, const fs::path& out) {
  const DatasetSplits s = synthesize_splits(run);
  ensure_dir(out);
  write_dataset_split(out / "train", s.train);
  write_dataset_split(out / "test", s.test);
  if (!s.heldout.empty()) write_dataset_split(out / "heldout", s.heldout);
  std::ofstream m(out / "split.txt");
  if (!m) throw CommandError("io", "cannot write " + (out / "split.txt").string());
  m << "seed = " << run.seed << "\n";
  m << "heldout = " << (run.data.heldout.empty() ? "none" : configurations_to_string(run.data.heldout)) << "\n";
  m << "train = " << s.train.size() << "\ntest = " << s.test.size()
    << "\nheldout_samples = " << s.heldout.size() << "\n";
}

fs::path latest_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir)) return {};
  static const std::regex pattern(R"(epoch-(\d{4,})\.ckpt)");
  fs::path best;
  long best_epoch = -1;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) {
      const long e = std::stol(m[1]);
      if (e > best_epoch) best_epoch = e, best = entry.path();
    }
  }
  return best;
}

TrainReport cmd_train(const RunConfig& run, const fs::path& out, bool resume,
                      std::size_t max_epochs, bool parallel) {
  run.validate();
  ensure_dir(out);
  TrainState state;
  std::vector<EpochMetrics> log;
  const fs::path latest = latest_checkpoint(out);
  if (resume) {
    if (latest.empty()) throw CommandError("io", "no checkpoint to resume in " + out.string());
    Checkpoint ck = load_checkpoint(latest);
    if (!(ck.run == run)) {
      throw CommandError("config", "run config differs from the one in " + latest.string());
    }
    state = std::move(ck.state);
    for (const EpochMetrics& m : read_metrics_log(out / "metrics.tsv"))
      if (m.epoch <= state.epochs_done) log.push_back(m);
  } else {
    if (!latest.empty()) {
      throw CommandError("usage", out.string() + " already holds checkpoints; pass --resume");
    }
    state = start_training(run.model, run.schedule, run.seed);
  }
  const DatasetSplits splits = [&] {
    RunConfig only_train = run;
    only_train.data.test_samples = 0;
    only_train.data.heldout_samples = 0;
    return synthesize_splits(only_train);
  }();
  const std::vector<SceneSample>& pool = splits.train;
  if (pool.empty()) throw CommandError("config", "data.train_samples must be positive");
  const SampleSource source = [&](RngStream& rng) {
    const SceneSample& s = pool[rng.uniform_index(pool.size())];
    return TrainingPair{s.image, s.caption.codes};
  };

  TrainReport report;
  report.last_checkpoint = latest;
  TrainOptions opts;
  opts.max_epochs_this_call = max_epochs;
  opts.parallel = parallel;
  opts.on_epoch = [&](const TrainState& st, const EpochMetrics& m) {
    char name[32];
    std::snprintf(name, sizeof name, "epoch-%04zu.ckpt", st.epochs_done);
    save_checkpoint(out / name, Checkpoint{run, st});
    report.last_checkpoint = out / name;
    log.push_back(m);
    write_metrics_log(out / "metrics.tsv", log);
  };
  report.outcome = train(std::move(state), run.schedule, source, run.seed, opts);
  return report;
}

std::vector<std::size_t> encode_caption_text(const std::string& text) {
  const std::vector<std::string> tokens = tokenize(text);
  if (tokens.empty()) throw CommandError("input", "caption is empty");
  for (const std::string& t : tokens) {
    if (!caption_vocab().contains(t)) {
      throw CommandError("input", "word '" + t + "' is not in the vocabulary");
    }
  }
  return encode_words(tokens, caption_vocab());
}

std::vector<Tensor> cmd_sample(const fs::path& checkpoint, const std::string& caption,
                               std::size_t count, std::uint64_t seed, const fs::path& out) {
  if (count == 0) throw CommandError("usage", "--count must be positive");
  const Checkpoint ck = open_checkpoint(checkpoint);
  const Conditioning cond = Conditioning::caption(encode_caption_text(caption));
  RngStream rng(seed);
  std::vector<Tensor> images;
  for (std::size_t i = 0; i < count; ++i)
    images.push_back(generate(cond, ck.state.params, rng).mean_image);
  ensure_dir(out);
  const std::size_t cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
  write_pgm(out / "samples.pgm", tile_images(images, cols));
  return images;
}

GenTrace cmd_trace(const fs::path& checkpoint, const std::string& caption,
                   std::uint64_t seed, const fs::path& out) {
  const Checkpoint ck = open_checkpoint(checkpoint);
  const std::vector<std::size_t> codes = encode_caption_text(caption);
  RngStream rng(seed);
  GenTrace trace = generate(Conditioning::caption(codes), ck.state.params, rng);
  ensure_dir(out);
  const std::size_t patch = ck.run.model.write_patch;
  std::ofstream alpha(out / "alpha.tsv"), grid(out / "trace.tsv");
  if (!alpha || !grid) throw CommandError("io", "cannot write trace tables in " + out.string());
  alpha << "step";
  for (std::size_t c : codes) alpha << '\t' << caption_vocab().word(c);
  alpha << '\n';
  grid << "step\tcenter_x\tcenter_y\tstride\tvariance\tintensity\n";
  for (std::size_t t = 0; t < trace.steps.size(); ++t) {
    const StepTrace& st = trace.steps[t];
    Tensor img = sigmoid_image(st.canvas);
    write_pgm(out / numbered("canvas", t + 1, ".pgm"), img);
    draw_box(img, st.write_grid, patch);
    write_pgm(out / numbered("write", t + 1, ".pgm"), img);
    alpha << t + 1;
    for (std::size_t k = 0; k < st.alpha.size(); ++k) alpha << '\t' << fmt(st.alpha[k]);
    alpha << '\n';
    const GridValues& g = st.write_grid;
    grid << t + 1 << '\t' << fmt(g.center_x) << '\t' << fmt(g.center_y) << '\t'
         << fmt(g.stride) << '\t' << fmt(g.variance) << '\t' << fmt(g.intensity) << '\n';
  }
  return trace;
}

std::vector<MetricRow> cmd_eval(const fs::path& checkpoint, const std::string& which,
                                std::uint64_t seed, const fs::path& out) {
  if (which != "bound" && which != "ssi" && which != "retrieval") {
    throw CommandError("usage", "eval expects bound, ssi or retrieval, got '" + which + "'");
  }
  const Checkpoint ck = open_checkpoint(checkpoint);
  const RunConfig& run = ck.run;
  const ModelParams& params = ck.state.params;
  const DatasetSplits splits = synthesize_splits(run);
  const RngStream root = RngStream(seed).derive(kEvalTag);
  std::vector<MetricRow> rows;

  auto bound_rows = [&](const std::string& name, const std::vector<SceneSample>& set,
                        std::uint64_t tag) {
    const std::size_t n = std::min(run.eval.bound_images, set.size());
    if (n == 0) return;
    std::vector<double> means(n);
    for (std::size_t i = 0; i < n; ++i) {
      RngStream rng = root.derive(tag, i);
      means[i] = estimate_bound(set[i].image, Conditioning::caption(set[i].caption.codes),
                                params, rng, run.eval.bound_samples)
                     .mean;
    }
    double mean = 0, ss = 0;
    for (double v : means) mean += v;
    mean /= static_cast<double>(n);
    for (double v : means) ss += (v - mean) * (v - mean);
    const double se = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    rows.push_back({name, mean, se, n});
  };

  if (which == "bound") {
    bound_rows("bound_train", splits.train, 1);
    bound_rows("bound_test", splits.test, 2);
    bound_rows("bound_heldout", splits.heldout, 3);
    if (rows.size() >= 2) {
      rows.push_back({"bound_gap_train_minus_test", rows[0].value - rows[1].value,
                      std::hypot(rows[0].std_err, rows[1].std_err), rows[1].count});
    }
  } else if (which == "ssi") {
    const std::size_t n = std::min(run.eval.ssi_captions, splits.test.size());
    std::vector<std::vector<std::size_t>> caps;
    std::vector<Tensor> refs;
    for (std::size_t i = 0; i < n; ++i) {
      caps.push_back(splits.test[i].caption.codes);
      refs.push_back(splits.test[i].image);
    }
    SsiConfig cfg;
    cfg.window = std::min<std::size_t>(cfg.window, run.model.height);
    const Estimate e = ssi_protocol(params, caps, refs, root.derive(4), run.eval.ssi_samples, cfg);
    rows.push_back({"ssi_mean", e.mean, e.std_err, e.count});
  } else {
    const std::size_t n = std::min(run.eval.retrieval_pool, splits.test.size());
    if (n == 0) throw CommandError("config", "retrieval needs test samples");
    std::vector<std::vector<std::size_t>> caps, train_caps;
    std::vector<Tensor> pool;
    std::vector<std::size_t> truth;
    for (std::size_t i = 0; i < n; ++i) {
      caps.push_back(splits.test[i].caption.codes);
      pool.push_back(splits.test[i].image);
      truth.push_back(i);
    }
    for (const SceneSample& s : splits.train) train_caps.push_back(s.caption.codes);
    const Tensor baseline = mean_sentence_baseline(params, train_caps);
    const RetrievalResult r = likelihood_ratio_retrieval(params, caps, truth, pool, baseline,
                                                         root.derive(5), run.eval.retrieval_samples);
    rows.push_back({"recall_at_1", r.recall_1, 0, n});
    rows.push_back({"recall_at_5", r.recall_5, 0, n});
    rows.push_back({"recall_at_10", r.recall_10, 0, n});
    rows.push_back({"recall_at_50", r.recall_50, 0, n});
    rows.push_back({"median_rank", r.median_rank, 0, n});
  }
  ensure_dir(out);
  write_metrics_table(out / ("eval-" + which + ".tsv"), rows);
  return rows;
}

}  // namespace aligndraw
