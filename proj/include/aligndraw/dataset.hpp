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

#ifndef ALIGNDRAW_DATASET_HPP_
#define ALIGNDRAW_DATASET_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "aligndraw/rng.hpp"
#include "aligndraw/tensor.hpp"

namespace aligndraw {

// ---------------------------------------------------------------------------
// Digit sources.

struct DigitArchive {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Tensor> images;  // rows x cols, pixels in [0, 1]
  std::vector<int> labels;
};

/// Parses the big-endian IDX image (magic 0x803) and label (magic 0x801)
/// layouts. Errors name the byte offset where parsing failed.
DigitArchive parse_digit_archive(std::span<const std::uint8_t> image_bytes,
                                 std::span<const std::uint8_t> label_bytes);
DigitArchive load_digit_archive(const std::filesystem::path& images,
                                const std::filesystem::path& labels);

/// Digit crops grouped by class, all of one square size.
class DigitPool {
 public:
  explicit DigitPool(std::size_t size = 28) : size_(size) {}

  static DigitPool from_archive(const DigitArchive& archive);

  void add(int label, Tensor image);
  std::size_t digit_size() const { return size_; }
  std::size_t count(int label) const { return classes_[label].size(); }
  const Tensor& get(int label, std::size_t i) const {
    return classes_[label].at(i);
  }
  /// Same crops area-resampled to size x size.
  DigitPool resized(std::size_t size) const;

 private:
  std::size_t size_;
  std::vector<Tensor> classes_[10];
};

/// Procedurally stroked digits with random affine jitter and stroke width,
/// used when no digit archive is configured.
DigitPool make_glyph_pool(std::size_t per_class, RngStream& rng,
                          std::size_t size = 28);

/// Area-weighted resampling of a square image.
Tensor resize_area(const Tensor& src, std::size_t size);

// ---------------------------------------------------------------------------
// Captions and vocabulary.

struct Caption {
  std::vector<std::string> tokens;
  std::vector<std::size_t> codes;
};

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> sorted_words);

  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  bool contains(std::string_view word) const;
  std::size_t index(std::string_view word) const;
  const std::string& word(std::size_t code) const { return words_.at(code); }

 private:
  std::vector<std::string> words_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Sorted unique lowercase words of the given sentences.
Vocabulary build_vocab(std::span<const std::string> sentences);

/// Lowercases and splits on whitespace.
std::vector<std::string> tokenize(std::string_view text);

/// Throws std::invalid_argument naming the first unknown token.
std::vector<std::size_t> encode_words(std::span<const std::string> tokens,
                                      const Vocabulary& vocab);
std::vector<std::string> decode_words(std::span<const std::size_t> codes,
                                      const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Scene layout.

enum class Layout { kCorner, kHorizontal, kVertical };

enum class Position {
  kTopLeft,
  kTopRight,
  kBottomLeft,
  kBottomRight,
  kTop,
  kBottom,
  kLeft,
  kRight,
};

std::string_view layout_name(Layout layout);
std::string_view position_name(Position pos);
Position parse_position(std::string_view name);
std::string_view digit_word(int digit);

struct PastedDigit {
  int label = 0;
  Position position = Position::kTopLeft;
  std::size_t source = 0;  // index within the pool class
  std::size_t row = 0;     // top-left corner on the canvas
  std::size_t col = 0;
  friend bool operator==(const PastedDigit&, const PastedDigit&) = default;
};

/// One-digit corner scenes have a single digit; two-digit scenes list the
/// top (or left) digit first. `flipped` captions name the second digit
/// first ("... is at the bottom of ...").
struct Placement {
  Layout layout = Layout::kCorner;
  std::vector<PastedDigit> digits;
  bool flipped = false;

  /// (digit, position) pairs this scene exhibits.
  std::vector<std::pair<int, Position>> configuration() const;
  friend bool operator==(const Placement&, const Placement&) = default;
};

std::string placement_to_string(const Placement& p);
Placement parse_placement(std::string_view text);

/// Canvas extent, pasted digit extent and corner margin, in pixels.
struct SceneGeometry {
  std::size_t canvas = 60;
  std::size_t digit = 28;
  std::size_t margin = 2;
  void validate() const;
};

using ConfigurationSet = std::set<std::pair<int, Position>>;

/// Which configurations a generator may emit. kTrain skips every scene that
/// exhibits a held-out pair; kHeldOut emits only such scenes.
struct SplitPolicy {
  enum class Mode { kAll, kTrain, kHeldOut };
  Mode mode = Mode::kAll;
  ConfigurationSet heldout;
  double two_digit_fraction = 0.5;

  bool allows(const Placement& p) const;
};

/// Parses "3:top-left 7:bottom-right" style lists (comma or space separated).
ConfigurationSet parse_configurations(std::string_view text);
std::string configurations_to_string(const ConfigurationSet& set);

struct SceneSample {
  Tensor image;  // canvas x canvas
  Caption caption;
  Placement placement;
};

std::vector<std::string> caption_tokens(const Placement& p);

/// Every caption the templates can produce.
std::vector<std::string> all_template_captions();
/// Vocabulary of all_template_captions().
const Vocabulary& caption_vocab();

/// Pastes the placement's digits onto a blank canvas. `pool` must hold crops
/// of geometry.digit pixels.
Tensor render(const Placement& p, const DigitPool& pool,
              const SceneGeometry& geom);

SceneSample synthesize_sample(const DigitPool& pool, RngStream& rng,
                              const SplitPolicy& policy,
                              const SceneGeometry& geom);

// ---------------------------------------------------------------------------
// Dataset dumps: <dir>/<index>.pgm plus captions.tsv with one
// "file<TAB>caption<TAB>placement" record per line.

void write_dataset_split(const std::filesystem::path& dir,
                         std::span<const SceneSample> samples);

struct StoredSample {
  Tensor image;
  std::vector<std::string> tokens;
  std::string placement;
};

std::vector<StoredSample> read_dataset_split(const std::filesystem::path& dir);

}  // namespace aligndraw

#endif  // ALIGNDRAW_DATASET_HPP_
