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

#include "aligndraw/dataset.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "aligndraw/image_io.hpp"

namespace aligndraw {
namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t off,
                        const char* what) {
  if (off + 4 > bytes.size()) {
    throw std::runtime_error(std::string(what) + ": truncated header at byte " +
                             std::to_string(off));
  }
  return (std::uint32_t{bytes[off]} << 24) | (std::uint32_t{bytes[off + 1]} << 16) |
         (std::uint32_t{bytes[off + 2]} << 8) | std::uint32_t{bytes[off + 3]};
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

DigitArchive parse_digit_archive(std::span<const std::uint8_t> image_bytes,
                                 std::span<const std::uint8_t> label_bytes) {
  const std::uint32_t img_magic = read_be32(image_bytes, 0, "image archive");
  if (img_magic != 0x803) {
    throw std::runtime_error("image archive: bad magic at byte 0");
  }
  const std::uint32_t lbl_magic = read_be32(label_bytes, 0, "label archive");
  if (lbl_magic != 0x801) {
    throw std::runtime_error("label archive: bad magic at byte 0");
  }
  const std::size_t n = read_be32(image_bytes, 4, "image archive");
  const std::size_t rows = read_be32(image_bytes, 8, "image archive");
  const std::size_t cols = read_be32(image_bytes, 12, "image archive");
  const std::size_t n_labels = read_be32(label_bytes, 4, "label archive");
  if (n != n_labels) {
    throw std::runtime_error("label archive: count " + std::to_string(n_labels) +
                             " at byte 4 does not match image count " +
                             std::to_string(n));
  }
  const std::size_t need = 16 + n * rows * cols;
  if (image_bytes.size() < need) {
    const std::size_t item = rows * cols == 0 ? 0 : (image_bytes.size() - 16) / (rows * cols);
    throw std::runtime_error("image archive: truncated at byte " +
                             std::to_string(16 + item * rows * cols) + " (item " +
                             std::to_string(item) + " of " + std::to_string(n) + ")");
  }
  if (label_bytes.size() < 8 + n) {
    throw std::runtime_error("label archive: truncated at byte " +
                             std::to_string(label_bytes.size()));
  }
  DigitArchive out;
  out.rows = rows;
  out.cols = cols;
  out.images.reserve(n);
  out.labels.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint8_t label = label_bytes[8 + k];
    if (label > 9) {
      throw std::runtime_error("label archive: label " + std::to_string(label) +
                               " out of range at byte " + std::to_string(8 + k));
    }
    Tensor img(Shape{rows, cols});
    const std::size_t base = 16 + k * rows * cols;
    for (std::size_t i = 0; i < rows * cols; ++i) img[i] = image_bytes[base + i] / 255.0;
    out.images.push_back(std::move(img));
    out.labels.push_back(label);
  }
  return out;
}

DigitArchive load_digit_archive(const std::filesystem::path& images,
                                const std::filesystem::path& labels) {
  const auto img = slurp(images);
  const auto lbl = slurp(labels);
  return parse_digit_archive(img, lbl);
}

// ---------------------------------------------------------------------------

DigitPool DigitPool::from_archive(const DigitArchive& archive) {
  if (archive.rows != archive.cols) {
    throw std::invalid_argument("digit archive images must be square");
  }
  DigitPool pool(archive.rows);
  for (std::size_t k = 0; k < archive.images.size(); ++k)
    pool.add(archive.labels[k], archive.images[k]);
  return pool;
}

void DigitPool::add(int label, Tensor image) {
  if (label < 0 || label > 9) {
    throw std::out_of_range("digit label " + std::to_string(label));
  }
  if (image.shape() != Shape{size_, size_}) {
    throw std::invalid_argument("digit crop " + shape_string(image.shape()) +
                                " does not match pool size " + std::to_string(size_));
  }
  classes_[label].push_back(std::move(image));
}

DigitPool DigitPool::resized(std::size_t size) const {
  DigitPool out(size);
  for (int d = 0; d < 10; ++d)
    for (const Tensor& img : classes_[d])
      out.add(d, size == size_ ? img : resize_area(img, size));
  return out;
}

Tensor resize_area(const Tensor& src, std::size_t size) {
  if (src.rank() != 2 || src.rows() != src.cols() || size == 0) {
    throw std::invalid_argument("resize_area: need a square image and size > 0");
  }
  const std::size_t s = src.rows();
  const double scale = static_cast<double>(s) / static_cast<double>(size);
  // Row i of R holds the overlap of source pixel k with [i*scale, (i+1)*scale).
  std::vector<double> r(size * s, 0.0);
  for (std::size_t i = 0; i < size; ++i) {
    const double lo = i * scale, hi = (i + 1) * scale;
    for (std::size_t k = 0; k < s; ++k) {
      const double ov = std::min(hi, k + 1.0) - std::max(lo, static_cast<double>(k));
      if (ov > 0) r[i * s + k] = ov / scale;
    }
  }
  Tensor out(Shape{size, size});
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j) {
      double acc = 0.0;
      for (std::size_t a = 0; a < s; ++a) {
        const double ra = r[i * s + a];
        if (ra == 0.0) continue;
        for (std::size_t b = 0; b < s; ++b) acc += ra * src.at(a, b) * r[j * s + b];
      }
      out.at(i, j) = std::clamp(acc, 0.0, 1.0);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Procedural glyphs. Strokes live in a unit box, x to the right, y down.

namespace {

struct Pt {
  double x, y;
};
using Stroke = std::vector<Pt>;

Stroke arc(double cx, double cy, double rx, double ry, double a0, double a1) {
  Stroke s;
  const int n = 24;
  for (int k = 0; k <= n; ++k) {
    const double a = (a0 + (a1 - a0) * k / n) * std::numbers::pi / 180.0;
    s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return s;
}

std::vector<Stroke> glyph_strokes(int d) {
  switch (d) {
    case 0: return {arc(0.5, 0.5, 0.2, 0.32, 0, 360)};
    case 1: return {{{0.42, 0.28}, {0.52, 0.18}, {0.52, 0.82}}};
    case 2: {
      Stroke s = arc(0.5, 0.36, 0.19, 0.18, 200, 380);
      s.push_back({0.3, 0.82});
      s.push_back({0.72, 0.82});
      return {s};
    }
    case 3:
      return {arc(0.5, 0.33, 0.17, 0.15, 210, 450), arc(0.5, 0.65, 0.19, 0.17, 270, 510)};
    case 4: return {{{0.62, 0.82}, {0.62, 0.18}, {0.28, 0.62}, {0.75, 0.62}}};
    case 5: {
      Stroke top{{0.7, 0.18}, {0.36, 0.18}, {0.33, 0.47}};
      return {top, arc(0.5, 0.62, 0.19, 0.18, 235, 510)};
    }
    case 6:
      return {arc(0.6, 0.6, 0.28, 0.42, 260, 150), arc(0.5, 0.66, 0.17, 0.16, 0, 360)};
    case 7: return {{{0.28, 0.2}, {0.72, 0.2}, {0.42, 0.82}}};
    case 8:
      return {arc(0.5, 0.33, 0.15, 0.14, 0, 360), arc(0.5, 0.65, 0.18, 0.17, 0, 360)};
    default:
      return {arc(0.5, 0.36, 0.17, 0.16, 0, 360), {{0.67, 0.36}, {0.6, 0.82}}};
  }
}

double segment_distance(Pt p, Pt a, Pt b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

Tensor render_glyph(int d, RngStream& rng, std::size_t size) {
  const double px = static_cast<double>(size);
  const double scale = rng.uniform_range(0.85, 1.1);
  const double angle = rng.uniform_range(-0.2, 0.2);
  const double shear = rng.uniform_range(-0.2, 0.2);
  const double thick = rng.uniform_range(1.6, 2.8) * px / 28.0;
  const double tx = rng.uniform_range(-1.5, 1.5) * px / 28.0;
  const double ty = rng.uniform_range(-1.5, 1.5) * px / 28.0;
  const double c = std::cos(angle), s = std::sin(angle);
  auto map = [&](Pt p) {
    const double x = (p.x - 0.5) + shear * (p.y - 0.5), y = p.y - 0.5;
    return Pt{px * (0.5 + scale * (c * x - s * y)) + tx,
              px * (0.5 + scale * (s * x + c * y)) + ty};
  };
  std::vector<Stroke> strokes = glyph_strokes(d);
  for (Stroke& st : strokes)
    for (Pt& p : st) p = map(p);
  Tensor img(Shape{size, size});
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j) {
      const Pt q{j + 0.5, i + 0.5};
      double best = 1e9;
      for (const Stroke& st : strokes)
        for (std::size_t k = 0; k + 1 < st.size(); ++k)
          best = std::min(best, segment_distance(q, st[k], st[k + 1]));
      img.at(i, j) = std::clamp(thick / 2 + 0.5 - best, 0.0, 1.0);
    }
  return img;
}

}  // namespace

DigitPool make_glyph_pool(std::size_t per_class, RngStream& rng, std::size_t size) {
  if (per_class == 0 || size < 4) {
    throw std::invalid_argument("make_glyph_pool: need per_class > 0 and size >= 4");
  }
  DigitPool pool(size);
  for (std::size_t k = 0; k < per_class; ++k)
    for (int d = 0; d < 10; ++d) pool.add(d, render_glyph(d, rng, size));
  return pool;
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary(std::vector<std::string> sorted_words)
    : words_(std::move(sorted_words)) {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (i > 0 && words_[i - 1] >= words_[i]) {
      throw std::invalid_argument("vocabulary words must be sorted and unique");
    }
    index_.emplace(words_[i], i);
  }
}

bool Vocabulary::contains(std::string_view word) const {
  return index_.find(word) != index_.end();
}

std::size_t Vocabulary::index(std::string_view word) const {
  const auto it = index_.find(word);
  if (it == index_.end()) {
    throw std::invalid_argument("unknown word '" + std::string(word) + "'");
  }
  return it->second;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocabulary build_vocab(std::span<const std::string> sentences) {
  std::set<std::string> words;
  for (const std::string& s : sentences)
    for (std::string& w : tokenize(s)) words.insert(std::move(w));
  return Vocabulary(std::vector<std::string>(words.begin(), words.end()));
}

std::vector<std::size_t> encode_words(std::span<const std::string> tokens,
                                      const Vocabulary& vocab) {
  std::vector<std::size_t> codes;
  codes.reserve(tokens.size());
  for (const std::string& t : tokens) codes.push_back(vocab.index(t));
  return codes;
}

std::vector<std::string> decode_words(std::span<const std::size_t> codes,
                                      const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (std::size_t c : codes) {
    if (c >= vocab.size()) {
      throw std::out_of_range("word code " + std::to_string(c) + " >= vocabulary size " +
                              std::to_string(vocab.size()));
    }
    out.push_back(vocab.word(c));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::array<std::string_view, 10> kDigitWords = {
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"};
constexpr std::array<std::string_view, 8> kPositionNames = {
    "top-left", "top-right", "bottom-left", "bottom-right",
    "top",      "bottom",    "left",        "right"};
constexpr std::array<std::string_view, 3> kLayoutNames = {"corner", "horizontal",
                                                          "vertical"};

Layout parse_layout(std::string_view name) {
  for (std::size_t i = 0; i < kLayoutNames.size(); ++i)
    if (kLayoutNames[i] == name) return static_cast<Layout>(i);
  throw std::invalid_argument("unknown layout '" + std::string(name) + "'");
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::size_t parse_size(std::string_view s) {
  std::size_t v = 0;
  if (s.empty()) throw std::invalid_argument("empty number in placement");
  for (char ch : s) {
    if (!std::isdigit(static_cast<unsigned char>(ch))) {
      throw std::invalid_argument("bad number '" + std::string(s) + "' in placement");
    }
    v = v * 10 + static_cast<std::size_t>(ch - '0');
  }
  return v;
}

}  // namespace

std::string_view layout_name(Layout layout) {
  return kLayoutNames[static_cast<std::size_t>(layout)];
}
std::string_view position_name(Position pos) {
  return kPositionNames[static_cast<std::size_t>(pos)];
}
Position parse_position(std::string_view name) {
  for (std::size_t i = 0; i < kPositionNames.size(); ++i)
    if (kPositionNames[i] == name) return static_cast<Position>(i);
  throw std::invalid_argument("unknown position '" + std::string(name) + "'");
}
std::string_view digit_word(int digit) {
  return kDigitWords.at(static_cast<std::size_t>(digit));
}

std::vector<std::pair<int, Position>> Placement::configuration() const {
  std::vector<std::pair<int, Position>> out;
  for (const PastedDigit& d : digits) out.emplace_back(d.label, d.position);
  return out;
}

std::string placement_to_string(const Placement& p) {
  std::string out(layout_name(p.layout));
  out += p.flipped ? ";1" : ";0";
  for (const PastedDigit& d : p.digits) {
    out += ';' + std::to_string(d.label) + ':' + std::string(position_name(d.position)) +
           ':' + std::to_string(d.source) + ':' + std::to_string(d.row) + ':' +
           std::to_string(d.col);
  }
  return out;
}

Placement parse_placement(std::string_view text) {
  const auto parts = split(text, ';');
  if (parts.size() < 3) {
    throw std::invalid_argument("placement '" + std::string(text) + "' is incomplete");
  }
  Placement p;
  p.layout = parse_layout(parts[0]);
  if (parts[1] != "0" && parts[1] != "1") {
    throw std::invalid_argument("placement flip flag must be 0 or 1");
  }
  p.flipped = parts[1] == "1";
  for (std::size_t k = 2; k < parts.size(); ++k) {
    const auto f = split(parts[k], ':');
    if (f.size() != 5) {
      throw std::invalid_argument("placement digit '" + std::string(parts[k]) +
                                  "' needs label:position:source:row:col");
    }
    PastedDigit d;
    d.label = static_cast<int>(parse_size(f[0]));
    if (d.label > 9) throw std::invalid_argument("placement digit label out of range");
    d.position = parse_position(f[1]);
    d.source = parse_size(f[2]);
    d.row = parse_size(f[3]);
    d.col = parse_size(f[4]);
    p.digits.push_back(d);
  }
  const std::size_t expect = p.layout == Layout::kCorner ? 1 : 2;
  if (p.digits.size() != expect) {
    throw std::invalid_argument("placement layout " + std::string(parts[0]) + " needs " +
                                std::to_string(expect) + " digits");
  }
  return p;
}

void SceneGeometry::validate() const {
  if (digit == 0 || canvas == 0) throw std::invalid_argument("scene sizes must be positive");
  if (2 * (digit + margin) > canvas) {
    throw std::invalid_argument("scene canvas " + std::to_string(canvas) +
                                " too small for two digits of " + std::to_string(digit) +
                                " with margin " + std::to_string(margin));
  }
}

bool SplitPolicy::allows(const Placement& p) const {
  if (mode == Mode::kAll) return true;
  bool hit = false;
  for (const auto& c : p.configuration()) hit = hit || heldout.count(c) > 0;
  return mode == Mode::kTrain ? !hit : hit;
}

ConfigurationSet parse_configurations(std::string_view text) {
  ConfigurationSet out;
  std::string norm(text);
  std::replace(norm.begin(), norm.end(), ',', ' ');
  for (const std::string& item : tokenize(norm)) {
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos || colon != 1 || !std::isdigit(static_cast<unsigned char>(item[0]))) {
      throw std::invalid_argument("configuration '" + item + "' must look like 3:top-left");
    }
    out.emplace(item[0] - '0', parse_position(std::string_view(item).substr(2)));
  }
  return out;
}

std::string configurations_to_string(const ConfigurationSet& set) {
  std::string out;
  for (const auto& [d, pos] : set) {
    if (!out.empty()) out += ',';
    out += std::to_string(d) + ':' + std::string(position_name(pos));
  }
  return out;
}

std::vector<std::string> caption_tokens(const Placement& p) {
  auto word = [&](std::size_t k) { return std::string(digit_word(p.digits.at(k).label)); };
  switch (p.layout) {
    case Layout::kCorner: {
      const Position pos = p.digits.at(0).position;
      const bool top = pos == Position::kTopLeft || pos == Position::kTopRight;
      const bool left = pos == Position::kTopLeft || pos == Position::kBottomLeft;
      return {"the", "digit", word(0), "is", "at", "the", top ? "top" : "bottom",
              left ? "left" : "right", "of", "the", "image"};
    }
    case Layout::kVertical:
      if (p.flipped) return {"the", "digit", word(1), "is", "at", "the", "bottom", "of", "the", "digit", word(0)};
      return {"the", "digit", word(0), "is", "at", "the", "top", "of", "the", "digit", word(1)};
    case Layout::kHorizontal:
      if (p.flipped) return {"the", "digit", word(1), "is", "on", "the", "right", "of", "the", "digit", word(0)};
      return {"the", "digit", word(0), "is", "on", "the", "left", "of", "the", "digit", word(1)};
  }
  throw std::logic_error("unreachable layout");
}

namespace {

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const std::string& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

}  // namespace

std::vector<std::string> all_template_captions() {
  std::vector<std::string> out;
  for (int d = 0; d < 10; ++d)
    for (Position pos : {Position::kTopLeft, Position::kTopRight, Position::kBottomLeft,
                         Position::kBottomRight}) {
      Placement p;
      p.digits.push_back({d, pos, 0, 0, 0});
      out.push_back(join(caption_tokens(p)));
    }
  for (Layout layout : {Layout::kVertical, Layout::kHorizontal})
    for (int a = 0; a < 10; ++a)
      for (int b = 0; b < 10; ++b)
        for (bool flip : {false, true}) {
          Placement p;
          p.layout = layout;
          p.flipped = flip;
          const bool v = layout == Layout::kVertical;
          p.digits.push_back({a, v ? Position::kTop : Position::kLeft, 0, 0, 0});
          p.digits.push_back({b, v ? Position::kBottom : Position::kRight, 0, 0, 0});
          out.push_back(join(caption_tokens(p)));
        }
  return out;
}

const Vocabulary& caption_vocab() {
  static const Vocabulary vocab = [] {
    const auto captions = all_template_captions();
    return build_vocab(captions);
  }();
  return vocab;
}

Tensor render(const Placement& p, const DigitPool& pool, const SceneGeometry& geom) {
  if (pool.digit_size() != geom.digit) {
    throw std::invalid_argument("pool crops are " + std::to_string(pool.digit_size()) +
                                " pixels but the scene pastes " + std::to_string(geom.digit));
  }
  Tensor img(Shape{geom.canvas, geom.canvas}, 0.0);
  for (const PastedDigit& d : p.digits) {
    if (d.row + geom.digit > geom.canvas || d.col + geom.digit > geom.canvas) {
      throw std::out_of_range("digit pasted outside the canvas");
    }
    if (d.source >= pool.count(d.label)) {
      throw std::out_of_range("digit source index " + std::to_string(d.source) +
                              " out of range for class " + std::to_string(d.label));
    }
    const Tensor& crop = pool.get(d.label, d.source);
    for (std::size_t i = 0; i < geom.digit; ++i)
      for (std::size_t j = 0; j < geom.digit; ++j) {
        double& px = img.at(d.row + i, d.col + j);
        px = std::max(px, crop.at(i, j));
      }
  }
  return img;
}

namespace {

struct Option {
  Layout layout;
  int a, b;   // b unused for corners
  Position corner;
};

Placement skeleton(const Option& o) {
  Placement p;
  p.layout = o.layout;
  if (o.layout == Layout::kCorner) {
    p.digits.push_back({o.a, o.corner, 0, 0, 0});
  } else {
    const bool v = o.layout == Layout::kVertical;
    p.digits.push_back({o.a, v ? Position::kTop : Position::kLeft, 0, 0, 0});
    p.digits.push_back({o.b, v ? Position::kBottom : Position::kRight, 0, 0, 0});
  }
  return p;
}

}  // namespace

SceneSample synthesize_sample(const DigitPool& pool, RngStream& rng,
                              const SplitPolicy& policy, const SceneGeometry& geom) {
  geom.validate();
  for (int d = 0; d < 10; ++d) {
    if (pool.count(d) == 0) {
      throw std::invalid_argument("digit pool has no crops of class " + std::to_string(d));
    }
  }
  std::vector<Option> corners, pairs;
  for (int d = 0; d < 10; ++d)
    for (Position pos : {Position::kTopLeft, Position::kTopRight, Position::kBottomLeft,
                         Position::kBottomRight}) {
      const Option o{Layout::kCorner, d, 0, pos};
      if (policy.allows(skeleton(o))) corners.push_back(o);
    }
  if (policy.two_digit_fraction > 0.0) {
    for (Layout layout : {Layout::kVertical, Layout::kHorizontal})
      for (int a = 0; a < 10; ++a)
        for (int b = 0; b < 10; ++b) {
          const Option o{layout, a, b, Position::kTop};
          if (policy.allows(skeleton(o))) pairs.push_back(o);
        }
  }
  if (corners.empty() && pairs.empty()) {
    throw std::invalid_argument("split policy excludes every configuration");
  }
  bool two = rng.uniform() < policy.two_digit_fraction;
  if (two && pairs.empty()) two = false;
  if (!two && corners.empty()) two = true;
  const std::vector<Option>& opts = two ? pairs : corners;
  const Option o = opts[rng.uniform_index(opts.size())];

  Placement p = skeleton(o);
  const std::size_t n = geom.canvas, s = geom.digit, m = geom.margin, half = n / 2;
  for (PastedDigit& d : p.digits) d.source = rng.uniform_index(pool.count(d.label));
  if (o.layout == Layout::kCorner) {
    const Position pos = o.corner;
    const bool top = pos == Position::kTopLeft || pos == Position::kTopRight;
    const bool left = pos == Position::kTopLeft || pos == Position::kBottomLeft;
    p.digits[0].row = top ? m : n - m - s;
    p.digits[0].col = left ? m : n - m - s;
  } else {
    // First digit inside the low half, second inside the high half, jittered
    // along both axes.
    const bool v = o.layout == Layout::kVertical;
    PastedDigit& lo = p.digits[0];
    PastedDigit& hi = p.digits[1];
    const std::size_t lo_along = rng.uniform_index(half - s + 1);
    const std::size_t hi_along = half + rng.uniform_index(n - half - s + 1);
    const std::size_t lo_across = rng.uniform_index(n - s + 1);
    const std::size_t hi_across = rng.uniform_index(n - s + 1);
    (v ? lo.row : lo.col) = lo_along;
    (v ? hi.row : hi.col) = hi_along;
    (v ? lo.col : lo.row) = lo_across;
    (v ? hi.col : hi.row) = hi_across;
    p.flipped = rng.uniform() < 0.5;
  }

  SceneSample out;
  out.placement = p;
  out.image = render(p, pool, geom);
  out.caption.tokens = caption_tokens(p);
  out.caption.codes = encode_words(out.caption.tokens, caption_vocab());
  return out;
}

// ---------------------------------------------------------------------------

void write_dataset_split(const std::filesystem::path& dir,
                         std::span<const SceneSample> samples) {
  std::filesystem::create_directories(dir);
  std::ofstream tsv(dir / "captions.tsv");
  if (!tsv) throw std::runtime_error("cannot write " + (dir / "captions.tsv").string());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.pgm", k);
    write_pgm(dir / name, samples[k].image);
    tsv << name << '\t' << join(samples[k].caption.tokens) << '\t'
        << placement_to_string(samples[k].placement) << '\n';
  }
}

std::vector<StoredSample> read_dataset_split(const std::filesystem::path& dir) {
  std::ifstream tsv(dir / "captions.tsv");
  if (!tsv) throw std::runtime_error("cannot open " + (dir / "captions.tsv").string());
  std::vector<StoredSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(tsv, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 3) {
      throw std::runtime_error((dir / "captions.tsv").string() + ":" +
                               std::to_string(lineno) + ": expected 3 tab-separated fields");
    }
    StoredSample s;
    s.image = read_pgm(dir / std::string(f[0]));
    s.tokens = tokenize(f[1]);
    s.placement = std::string(f[2]);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace aligndraw
