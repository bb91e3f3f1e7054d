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

#include "aligndraw/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <stdexcept>

namespace aligndraw {
namespace {

constexpr std::string_view kMagic = "ALIGNDRAW-CKPT 1\n";
constexpr std::string_view kEndManifest = "end-manifest\n";

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& b, std::size_t end) : b_(b), end_(end) {}
  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }
  std::uint64_t u(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= std::uint64_t{b_[pos_ + i]} << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n) const {
    if (pos_ + n > end_) {
      throw std::runtime_error("checkpoint truncated at byte " + std::to_string(pos_));
    }
  }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  const ModelParams& params = ckpt.state.params;
  if (!(params.config() == ckpt.run.model)) {
    throw std::invalid_argument("checkpoint parameters do not match the run's model config");
  }
  if (ckpt.state.opt.accumulators.size() != params.size()) {
    throw std::invalid_argument("checkpoint optimizer state does not match the parameters");
  }
  std::string manifest(kMagic);
  manifest += to_text(ckpt.run);
  manifest += "vocab = " + std::to_string(params.config().vocab) + "\n";
  manifest += "epochs_done = " + std::to_string(ckpt.state.epochs_done) + "\n";
  manifest += "opt_step = " + std::to_string(ckpt.state.opt.step) + "\n";
  manifest += kEndManifest;

  std::map<std::string, const Tensor*> named;
  for (std::size_t i = 0; i < params.size(); ++i) {
    named.emplace(params.name(i), &params.tensor(i));
    named.emplace("opt/" + params.name(i), &ckpt.state.opt.accumulators[i]);
  }
  std::vector<std::uint8_t> out(manifest.begin(), manifest.end());
  put_u32(out, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(t->rank()));
    for (std::size_t e : t->shape()) put_u64(out, e);
    for (std::size_t k = 0; k < t->size(); ++k) put_u64(out, std::bit_cast<std::uint64_t>((*t)[k]));
  }
  put_u64(out, fnv1a64(out.data(), out.size()));
  return out;
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kMagic.size() + 8 ||
      std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw std::runtime_error("not a checkpoint (bad magic at byte 0)");
  }
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) stored |= std::uint64_t{bytes[body + i]} << (8 * i);
  if (stored != fnv1a64(bytes.data(), body)) {
    throw std::runtime_error("checkpoint checksum mismatch at byte " + std::to_string(body));
  }
  const std::string_view all(reinterpret_cast<const char*>(bytes.data()), body);
  const std::size_t end = all.find(kEndManifest);
  if (end == std::string_view::npos) {
    throw std::runtime_error("checkpoint manifest is not terminated");
  }
  std::string run_text;
  std::size_t vocab = 0, epochs = 0;
  std::uint64_t opt_step = 0;
  bool have_vocab = false, have_epochs = false, have_step = false;
  std::size_t pos = kMagic.size();
  while (pos < end) {
    const std::size_t nl = all.find('\n', pos);
    const std::string_view line = all.substr(pos, nl - pos);
    pos = nl + 1;
    auto take = [&](std::string_view key, auto& dst, bool& flag) {
      if (line.substr(0, key.size() + 3) != std::string(key) + " = ") return false;
      dst = static_cast<std::remove_reference_t<decltype(dst)>>(
          std::stoull(std::string(line.substr(key.size() + 3))));
      flag = true;
      return true;
    };
    if (take("vocab", vocab, have_vocab) || take("epochs_done", epochs, have_epochs) ||
        take("opt_step", opt_step, have_step))
      continue;
    run_text += std::string(line) + "\n";
  }
  if (!have_vocab || !have_epochs || !have_step) {
    throw std::runtime_error("checkpoint manifest lacks vocab, epochs_done or opt_step");
  }
  Checkpoint ck;
  ck.run = parse_run_config(run_text);
  if (vocab != ck.run.model.vocab) {
    throw std::runtime_error("checkpoint vocabulary size " + std::to_string(vocab) +
                             " differs from the caption vocabulary " +
                             std::to_string(ck.run.model.vocab));
  }
  ck.state.params = ModelParams(ck.run.model);
  ck.state.epochs_done = epochs;
  ck.state.opt = OptState::for_params(ck.state.params, ck.run.schedule.rmsprop_decay,
                                      ck.run.schedule.rmsprop_epsilon);
  ck.state.opt.step = opt_step;

  Reader r(bytes, body);
  r.seek(end + kEndManifest.size());
  const std::size_t count = r.u(4);
  std::map<std::string, Tensor*> slots;
  for (std::size_t i = 0; i < ck.state.params.size(); ++i) {
    slots.emplace(ck.state.params.name(i), &ck.state.params.tensor(i));
    slots.emplace("opt/" + ck.state.params.name(i), &ck.state.opt.accumulators[i]);
  }
  std::map<std::string, bool> filled;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t at = r.pos();
    const std::string name = r.str(r.u(4));
    const auto it = slots.find(name);
    if (it == slots.end()) {
      throw std::runtime_error("checkpoint tensor '" + name + "' at byte " +
                               std::to_string(at) + " is not a model parameter");
    }
    if (filled[name]) {
      throw std::runtime_error("checkpoint tensor '" + name + "' appears twice");
    }
    filled[name] = true;
    Shape shape(r.u(4));
    for (std::size_t& e : shape) e = r.u(8);
    Tensor& dst = *it->second;
    if (shape != dst.shape()) {
      throw std::runtime_error("checkpoint tensor '" + name + "' has shape " +
                               shape_string(shape) + ", expected " +
                               shape_string(dst.shape()));
    }
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = std::bit_cast<double>(r.u(8));
  }
  if (filled.size() != slots.size()) {
    for (const auto& [name, _] : slots)
      if (!filled.count(name)) throw std::runtime_error("checkpoint lacks tensor '" + name + "'");
  }
  if (r.pos() != body) {
    throw std::runtime_error("checkpoint has trailing bytes at " + std::to_string(r.pos()));
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                  std::istreambuf_iterator<char>()};
  try {
    return deserialize_checkpoint(bytes);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace aligndraw
