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

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <map>

#include "aligndraw/checkpoint.hpp"
#include "aligndraw/dataset.hpp"
#include "aligndraw/image_io.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace aligndraw;
using namespace aligndraw::testing;

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

struct Idx {
  std::vector<std::uint8_t> images, labels;
};

// A small archive in the raw big-endian digit layout with deterministic contents.
Idx make_idx(std::size_t n, std::size_t rows, std::size_t cols) {
  Idx a;
  put_be32(a.images, 0x803);
  put_be32(a.images, static_cast<std::uint32_t>(n));
  put_be32(a.images, static_cast<std::uint32_t>(rows));
  put_be32(a.images, static_cast<std::uint32_t>(cols));
  put_be32(a.labels, 0x801);
  put_be32(a.labels, static_cast<std::uint32_t>(n));
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < rows * cols; ++i)
      a.images.push_back(static_cast<std::uint8_t>((k * 37 + i * 11) % 256));
    a.labels.push_back(static_cast<std::uint8_t>(k % 10));
  }
  return a;
}

struct Box {
  std::size_t r0 = SIZE_MAX, c0 = SIZE_MAX, r1 = 0, c1 = 0;
  bool empty() const { return r0 == SIZE_MAX; }
};

Box support(const Tensor& img) {
  Box b;
  const std::size_t h = img.shape()[0], w = img.shape()[1];
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c)
      if (img.at(r, c) > 0.0) {
        b.r0 = std::min(b.r0, r);
        b.c0 = std::min(b.c0, c);
        b.r1 = std::max(b.r1, r);
        b.c1 = std::max(b.c1, c);
      }
  return b;
}

bool disjoint(const Box& a, const Box& b) {
  return a.r1 < b.r0 || b.r1 < a.r0 || a.c1 < b.c0 || b.c1 < a.c0;
}

const DigitPool& shared_pool() {
  static const DigitPool pool = [] {
    RngStream rng(2026);
    return make_glyph_pool(20, rng);
  }();
  return pool;
}

std::string join_tokens(const std::vector<std::string>& t) {
  std::string s;
  for (const auto& w : t) s += (s.empty() ? "" : " ") + w;
  return s;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("digit archive parsing") {
  const Idx a = make_idx(12, 28, 28);
  const DigitArchive d = parse_digit_archive(a.images, a.labels);
  CHECK(d.images.size() == 12);
  CHECK(d.rows == 28);
  CHECK(d.labels[11] == 1);
  CHECK(d.images[0][0] == 0.0);
  // Item 0 byte 0 is 0, item 3 pixel 123 is (111 + 1353) % 256 = 184.
  CHECK(d.images[3][123] == 184 / 255.0);

  Idx bright = make_idx(1, 2, 2);
  bright.images[16] = 255;
  CHECK(parse_digit_archive(bright.images, bright.labels).images[0][0] == 1.0);

  // Golden hash of the first image's bytes as re-quantized from the parse.
  std::vector<std::uint8_t> bytes;
  for (double v : d.images[0].values()) bytes.push_back(to_gray8(v));
  CHECK(fnv1a64(bytes.data(), bytes.size()) == 0x9dc628820c0c3685ull);
}

TEST_CASE("digit archive errors name the offending byte") {
  const Idx good = make_idx(3, 4, 4);
  auto message = [](const Idx& a) {
    try {
      parse_digit_archive(a.images, a.labels);
    } catch (const std::runtime_error& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  Idx a = good;
  a.images[3] = 0x01;
  CHECK(message(a) == "image archive: bad magic at byte 0");
  a = good;
  a.labels[3] = 0x03;
  CHECK(message(a) == "label archive: bad magic at byte 0");
  a = good;
  a.labels[7] = 4;
  CHECK(message(a).find("count 4 at byte 4") != std::string::npos);
  a = good;
  a.images.resize(16 + 2 * 16 + 5);
  CHECK(message(a).find("truncated at byte 48 (item 2 of 3)") != std::string::npos);
  a = good;
  a.images.resize(10);
  CHECK(message(a).find("truncated header at byte 8") != std::string::npos);
  a = good;
  a.labels.pop_back();
  CHECK(message(a).find("label archive: truncated") != std::string::npos);
  a = good;
  a.labels[9] = 10;
  CHECK(message(a).find("label 10 out of range at byte 9") != std::string::npos);
  CHECK_THROWS_AS(load_digit_archive("/nonexistent/a", "/nonexistent/b"), std::runtime_error);
}

TEST_CASE("pools and resampling") {
  const Idx a = make_idx(20, 28, 28);
  const DigitPool p = DigitPool::from_archive(parse_digit_archive(a.images, a.labels));
  for (int d = 0; d < 10; ++d) CHECK(p.count(d) == 2);
  DigitPool q(28);
  CHECK_THROWS_AS(q.add(10, Tensor(Shape{28, 28})), std::out_of_range);
  CHECK_THROWS_AS(q.add(1, Tensor(Shape{27, 28})), std::invalid_argument);

  RngStream rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor img = random_image(rng, 28, 28);
    double m0 = 0, m1 = 0;
    for (double v : img.values()) m0 += v / 784;
    // 28 -> 7 and 28 -> 14 divide evenly, so area averaging keeps the mean exactly.
    for (std::size_t s : {7, 14}) {
      const Tensor r = resize_area(img, s);
      m1 = 0;
      for (double v : r.values()) m1 += v / (s * s);
      CHECK(std::abs(m0 - m1) < 1e-12);
    }
  }
  const Tensor one(Shape{28, 28}, 1.0);
  const Tensor small = resize_area(one, 5);
  for (double v : small.values()) CHECK(std::abs(v - 1.0) < 1e-12);

  const DigitPool& g = shared_pool();
  for (int d = 0; d < 10; ++d) {
    REQUIRE(g.count(d) == 20);
    const Tensor& img = g.get(d, 0);
    CHECK(img.shape() == Shape{28, 28});
    CHECK_FALSE(support(img).empty());
  }
  CHECK(g.resized(8).get(3, 0).shape() == Shape{8, 8});
}

TEST_CASE("vocabulary") {
  const Vocabulary& v = caption_vocab();
  CHECK(v.size() == 21);
  CHECK(std::is_sorted(v.words().begin(), v.words().end()));
  const auto templates = all_template_captions();
  CHECK(build_vocab(templates).words() == v.words());
  CHECK(build_vocab(templates).words() == build_vocab(templates).words());
  for (const std::string& c : templates) {
    const auto tokens = tokenize(c);
    CHECK(decode_words(encode_words(tokens, v), v) == tokens);
  }
  CHECK(tokenize("The  Digit\tSEVEN") == std::vector<std::string>{"the", "digit", "seven"});
  const std::vector<std::string> one{"digit"};
  CHECK(encode_words(one, v).size() == 1);
  try {
    const std::vector<std::string> bad{"the", "glyph"};
    encode_words(bad, v);
    FAIL("expected an error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("'glyph'") != std::string::npos);
  }
  const std::vector<std::size_t> big{21};
  CHECK_THROWS_AS(decode_words(big, v), std::out_of_range);
  CHECK_THROWS_AS(Vocabulary({"b", "a"}), std::invalid_argument);
}

TEST_CASE("captions follow the templates") {
  Placement p;
  p.layout = Layout::kCorner;
  p.digits = {{7, Position::kBottomLeft, 0, 30, 2}};
  CHECK(join_tokens(caption_tokens(p)) == "the digit seven is at the bottom left of the image");
  p.layout = Layout::kVertical;
  p.digits = {{3, Position::kTop, 0, 0, 5}, {1, Position::kBottom, 0, 31, 9}};
  CHECK(join_tokens(caption_tokens(p)) == "the digit three is at the top of the digit one");
  p.flipped = true;
  CHECK(join_tokens(caption_tokens(p)) == "the digit one is at the bottom of the digit three");
  p.layout = Layout::kHorizontal;
  p.flipped = false;
  p.digits = {{4, Position::kLeft, 0, 3, 0}, {9, Position::kRight, 0, 3, 31}};
  CHECK(join_tokens(caption_tokens(p)) == "the digit four is on the left of the digit nine");
  p.flipped = true;
  CHECK(join_tokens(caption_tokens(p)) == "the digit nine is on the right of the digit four");
}

TEST_CASE("ten thousand synthesized scenes satisfy the scene invariants") {
  const DigitPool& pool = shared_pool();
  const SceneGeometry geom;
  RngStream rng(5);
  std::map<std::size_t, std::size_t> hist;
  std::size_t corners = 0, pairs = 0;
  for (int k = 0; k < 10000; ++k) {
    const SceneSample s = synthesize_sample(pool, rng, SplitPolicy{}, geom);
    REQUIRE(s.image.shape() == Shape{60, 60});
    for (double v : s.image.values()) REQUIRE((v >= 0.0 && v <= 1.0));
    REQUIRE(s.caption.codes.size() == s.caption.tokens.size());
    for (const std::string& w : s.caption.tokens)
      for (char c : w) REQUIRE(!std::isupper(static_cast<unsigned char>(c)));
    for (std::size_t c : s.caption.codes) ++hist[c];
    REQUIRE(s.caption.tokens == caption_tokens(s.placement));
    REQUIRE(render(s.placement, pool, geom) == s.image);
    REQUIRE(parse_placement(placement_to_string(s.placement)) == s.placement);

    const Placement& p = s.placement;
    if (p.layout == Layout::kCorner) {
      ++corners;
      REQUIRE(p.digits.size() == 1);
      const Box b = support(s.image);
      const Position pos = p.digits[0].position;
      const bool top = pos == Position::kTopLeft || pos == Position::kTopRight;
      const bool left = pos == Position::kTopLeft || pos == Position::kBottomLeft;
      REQUIRE((top ? b.r1 < 30 : b.r0 >= 30));
      REQUIRE((left ? b.c1 < 30 : b.c0 >= 30));
    } else {
      ++pairs;
      REQUIRE(p.digits.size() == 2);
      Placement a = p, b = p;
      a.digits = {p.digits[0]};
      b.digits = {p.digits[1]};
      const Box ba = support(render(a, pool, geom)), bb = support(render(b, pool, geom));
      REQUIRE(disjoint(ba, bb));
      if (p.layout == Layout::kVertical) {
        REQUIRE(p.digits[0].position == Position::kTop);
        REQUIRE(ba.r1 < bb.r0);
      } else {
        REQUIRE(p.digits[0].position == Position::kLeft);
        REQUIRE(ba.c1 < bb.c0);
      }
    }
  }
  CHECK(hist.size() == caption_vocab().size());
  CHECK(corners > 4500);
  CHECK(pairs > 4500);
}

TEST_CASE("held-out configurations never reach training draws") {
  const DigitPool& pool = shared_pool();
  SplitPolicy train;
  train.mode = SplitPolicy::Mode::kTrain;
  train.heldout = parse_configurations("3:top-left");
  SplitPolicy held = train;
  held.mode = SplitPolicy::Mode::kHeldOut;
  RngStream rng(6);
  std::size_t threes = 0;
  for (int k = 0; k < 10000; ++k) {
    const Placement p = synthesize_sample(pool, rng, train, {}).placement;
    for (const auto& c : p.configuration()) {
      REQUIRE_FALSE((c.first == 3 && c.second == Position::kTopLeft));
      threes += c.first == 3;
    }
  }
  CHECK(threes > 0);
  for (int k = 0; k < 200; ++k) {
    const Placement p = synthesize_sample(pool, rng, held, {}).placement;
    CHECK(p.configuration() == std::vector<std::pair<int, Position>>{{3, Position::kTopLeft}});
  }

  SplitPolicy pairs;
  pairs.mode = SplitPolicy::Mode::kHeldOut;
  pairs.heldout = parse_configurations("2:top,5:left");
  for (int k = 0; k < 500; ++k) {
    const Placement p = synthesize_sample(pool, rng, pairs, {}).placement;
    bool hit = false;
    for (const auto& c : p.configuration()) hit = hit || pairs.heldout.count(c);
    CHECK(hit);
  }

  SplitPolicy none;
  none.mode = SplitPolicy::Mode::kHeldOut;
  CHECK_THROWS_WITH(synthesize_sample(pool, rng, none, {}), "split policy excludes every configuration");
}

TEST_CASE("configuration lists and placements parse strictly") {
  const ConfigurationSet s = parse_configurations("3:top-left, 7:right");
  CHECK(s.size() == 2);
  CHECK(configurations_to_string(s) == "3:top-left,7:right");
  CHECK(parse_configurations(configurations_to_string(s)) == s);
  CHECK(parse_configurations("").empty());
  CHECK_THROWS_AS(parse_configurations("12:top"), std::invalid_argument);
  CHECK_THROWS_AS(parse_configurations("3:middle"), std::invalid_argument);
  CHECK_THROWS_AS(parse_placement("corner;0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_placement("corner;2;1:top-left:0:2:2"), std::invalid_argument);
  CHECK_THROWS_AS(parse_placement("vertical;0;1:top:0:2:2"), std::invalid_argument);
  CHECK_THROWS_AS(parse_placement("corner;0;x:top-left:0:2:2"), std::invalid_argument);
  CHECK_THROWS_AS((SceneGeometry{50, 28, 2}.validate()), std::invalid_argument);
  Placement outside;
  outside.digits = {{1, Position::kTopLeft, 0, 40, 2}};
  CHECK_THROWS_AS(render(outside, shared_pool(), {}), std::out_of_range);
}

TEST_CASE("dataset dumps round-trip through PGM and the caption sidecar") {
  const auto dir = std::filesystem::temp_directory_path() / "aligndraw-dataset-test";
  std::filesystem::remove_all(dir);
  RngStream rng(7);
  std::vector<SceneSample> samples;
  for (int k = 0; k < 6; ++k) samples.push_back(synthesize_sample(shared_pool(), rng, {}, {}));
  write_dataset_split(dir, samples);
  CHECK(std::filesystem::exists(dir / "000005.pgm"));
  const auto back = read_dataset_split(dir);
  REQUIRE(back.size() == samples.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    CHECK(back[k].tokens == samples[k].caption.tokens);
    CHECK(parse_placement(back[k].placement) == samples[k].placement);
    for (std::size_t i = 0; i < back[k].image.size(); ++i)
      CHECK(back[k].image[i] == to_gray8(samples[k].image[i]) / 255.0);
  }
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(read_dataset_split(dir), std::runtime_error);
}

}  // TEST_SUITE
