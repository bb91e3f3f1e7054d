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

#include "aligndraw/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace aligndraw {
namespace {

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[40];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::uint64_t to_u64(std::string_view key, std::string_view s) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw std::invalid_argument("config key '" + std::string(key) +
                                "': expected an unsigned integer, got '" +
                                std::string(s) + "'");
  }
  return v;
}

double to_double(std::string_view key, std::string_view s) {
  const std::string str(s);
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(str, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != str.size() || str.empty()) {
    throw std::invalid_argument("config key '" + std::string(key) +
                                "': expected a number, got '" + str + "'");
  }
  return v;
}

bool to_bool(std::string_view key, std::string_view s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw std::invalid_argument("config key '" + std::string(key) +
                              "': expected true or false, got '" + std::string(s) + "'");
}

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

template <typename T>
Field size_field(const char* key, T RunConfig::*group, std::size_t T::*member) {
  return {key, [=](const RunConfig& c) { return std::to_string(c.*group.*member); },
          [=](RunConfig& c, std::string_view v) {
            c.*group.*member = static_cast<std::size_t>(to_u64(key, v));
          }};
}

template <typename T>
Field double_field(const char* key, T RunConfig::*group, double T::*member) {
  return {key, [=](const RunConfig& c) { return fmt_double(c.*group.*member); },
          [=](RunConfig& c, std::string_view v) { c.*group.*member = to_double(key, v); }};
}

template <typename T>
Field bool_field(const char* key, T RunConfig::*group, bool T::*member) {
  return {key, [=](const RunConfig& c) { return std::string(c.*group.*member ? "true" : "false"); },
          [=](RunConfig& c, std::string_view v) { c.*group.*member = to_bool(key, v); }};
}

template <typename T>
Field string_field(const char* key, T RunConfig::*group, std::string T::*member) {
  return {key, [=](const RunConfig& c) { return c.*group.*member; },
          [=](RunConfig& c, std::string_view v) { c.*group.*member = std::string(v); }};
}

const std::vector<Field>& fields() {
  using R = RunConfig;
  using M = ModelConfig;
  using S = TrainSchedule;
  using D = DataConfig;
  using E = EvalConfig;
  static const std::vector<Field> f = {
      {"seed", [](const R& c) { return std::to_string(c.seed); },
       [](R& c, std::string_view v) { c.seed = to_u64("seed", v); }},
      size_field("model.glimpses", &R::model, &M::glimpses),
      size_field("model.gen_hidden", &R::model, &M::gen_hidden),
      size_field("model.infer_hidden", &R::model, &M::infer_hidden),
      size_field("model.latent", &R::model, &M::latent),
      size_field("model.read_patch", &R::model, &M::read_patch),
      size_field("model.write_patch", &R::model, &M::write_patch),
      size_field("model.height", &R::model, &M::height),
      size_field("model.width", &R::model, &M::width),
      size_field("model.encoder_hidden", &R::model, &M::encoder_hidden),
      size_field("model.align_size", &R::model, &M::align_size),
      bool_field("model.use_intensity", &R::model, &M::use_intensity),
      bool_field("model.use_align", &R::model, &M::use_align),
      size_field("train.epochs", &R::schedule, &S::epochs),
      size_field("train.samples_per_epoch", &R::schedule, &S::samples_per_epoch),
      size_field("train.batch_size", &R::schedule, &S::batch_size),
      double_field("train.initial_lr", &R::schedule, &S::initial_lr),
      double_field("train.drop_lr", &R::schedule, &S::drop_lr),
      size_field("train.drop_epoch", &R::schedule, &S::drop_epoch),
      double_field("train.clip_norm", &R::schedule, &S::clip_norm),
      double_field("train.rmsprop_decay", &R::schedule, &S::rmsprop_decay),
      double_field("train.rmsprop_epsilon", &R::schedule, &S::rmsprop_epsilon),
      double_field("train.init_std", &R::schedule, &S::init_std),
      string_field("data.digit_images", &R::data, &D::digit_images),
      string_field("data.digit_labels", &R::data, &D::digit_labels),
      size_field("data.glyphs_per_class", &R::data, &D::glyphs_per_class),
      size_field("data.digit_size", &R::data, &D::digit_size),
      size_field("data.margin", &R::data, &D::margin),
      double_field("data.two_digit_fraction", &R::data, &D::two_digit_fraction),
      {"data.heldout", [](const R& c) {
         const std::string s = configurations_to_string(c.data.heldout);
         return s.empty() ? std::string("none") : s;
       },
       [](R& c, std::string_view v) {
         c.data.heldout = v == "none" ? ConfigurationSet{} : parse_configurations(v);
       }},
      size_field("data.train_samples", &R::data, &D::train_samples),
      size_field("data.test_samples", &R::data, &D::test_samples),
      size_field("data.heldout_samples", &R::data, &D::heldout_samples),
      size_field("eval.bound_samples", &R::eval, &E::bound_samples),
      size_field("eval.bound_images", &R::eval, &E::bound_images),
      size_field("eval.ssi_captions", &R::eval, &E::ssi_captions),
      size_field("eval.ssi_samples", &R::eval, &E::ssi_samples),
      size_field("eval.retrieval_pool", &R::eval, &E::retrieval_pool),
      size_field("eval.retrieval_samples", &R::eval, &E::retrieval_samples),
  };
  return f;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  schedule.validate();
  if (model.height != model.width) {
    throw std::invalid_argument("captioned digit scenes need a square canvas");
  }
  scene().validate();
  if (!(data.two_digit_fraction >= 0.0 && data.two_digit_fraction <= 1.0)) {
    throw std::invalid_argument("data.two_digit_fraction must lie in [0, 1]");
  }
  if ((data.digit_images == "none") != (data.digit_labels == "none")) {
    throw std::invalid_argument("data.digit_images and data.digit_labels go together");
  }
  if (data.glyphs_per_class == 0) {
    throw std::invalid_argument("data.glyphs_per_class must be positive");
  }
  if (eval.bound_samples == 0 || eval.ssi_samples == 0 || eval.retrieval_samples == 0) {
    throw std::invalid_argument("eval sample counts must be positive");
  }
}

SceneGeometry RunConfig::scene() const {
  return {model.height, data.digit_size, data.margin};
}

RunConfig RunConfig::mnist() {
  RunConfig c;
  c.model = ModelConfig::mnist(caption_vocab().size());
  c.schedule = TrainSchedule::mnist();
  return c;
}

RunConfig RunConfig::micro() {
  RunConfig c;
  c.model = ModelConfig::micro(caption_vocab().size());
  c.schedule = TrainSchedule::micro();
  c.data.glyphs_per_class = 50;
  c.data.digit_size = 5;
  c.data.margin = 1;
  c.data.two_digit_fraction = 0.0;
  c.data.train_samples = 1000;
  c.data.test_samples = 200;
  c.data.heldout_samples = 100;
  c.eval.bound_images = 50;
  c.eval.ssi_captions = 4;
  c.eval.ssi_samples = 8;
  c.eval.retrieval_pool = 40;
  return c;
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig c;
  c.model.vocab = caption_vocab().size();
  std::map<std::string, const Field*, std::less<>> by_key;
  for (const Field& f : fields()) by_key.emplace(f.key, &f);
  std::map<std::string, std::size_t> seen;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto it = by_key.find(key);
    if (it == by_key.end()) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": unknown key '" + std::string(key) + "'");
    }
    if (seen.count(std::string(key))) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": duplicate key '" + std::string(key) + "'");
    }
    seen[std::string(key)] = lineno;
    it->second->set(c, value);
  }
  for (const Field& f : fields()) {
    if (!seen.count(f.key)) {
      throw std::invalid_argument("config is missing required key '" + std::string(f.key) + "'");
    }
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string to_text(const RunConfig& c) {
  std::string out;
  for (const Field& f : fields()) out += std::string(f.key) + " = " + f.get(c) + "\n";
  return out;
}

}  // namespace aligndraw
