#include "grounded/raw_video.h"

#include <gtest/gtest.h>

#include <sstream>

namespace grounded {
namespace {

Frame Pattern(int w, int h) {
  Frame f(w, h);
  for (std::size_t i = 0; i < f.rgb.size(); ++i) f.rgb[i] = (i * 37) % 256;
  return f;
}

TEST(FrameCodecTest, RoundTripsEveryPaddingLength) {
  for (int w = 1; w <= 4; ++w) {
    const Frame f = Pattern(w, 3);
    EXPECT_EQ(DecodeFrame(EncodeFrame(f), w, 3), f) << "w=" << w;
  }
}

TEST(FrameCodecTest, RejectsMismatchedSize) {
  const std::string enc = EncodeFrame(Pattern(4, 4));
  EXPECT_THROW(DecodeFrame(enc, 4, 5), std::invalid_argument);
  EXPECT_THROW(DecodeFrame("abc", 1, 1), std::invalid_argument);
  EXPECT_THROW(DecodeFrame("!!!!", 1, 1), std::invalid_argument);
}

TEST(RenderVideoTest, DeterministicAndSized) {
  VideoOptions o;
  o.num_frames = 6;
  const std::vector<int> cuts = {2};
  const std::vector<Sprite> sprites = {{1, {100, 100, 60, 60}, {255, 0, 0}}};
  Rng a(4), b(4);
  const auto fa = RenderVideo(o, cuts, sprites, a);
  const auto fb = RenderVideo(o, cuts, sprites, b);
  ASSERT_EQ(fa.size(), 6u);
  EXPECT_EQ(fa, fb);
  EXPECT_EQ(fa[0].width, 64);
  EXPECT_EQ(fa[0].height, 36);
}

TEST(GenerateShotVideoTest, CutsRespectMinimumShotLength) {
  Rng rng(12);
  ShotVideoOptions o;
  for (int i = 0; i < 30; ++i) {
    const ShotVideo v = GenerateShotVideo(o, rng);
    EXPECT_EQ(static_cast<int>(v.frames.size()), o.video.num_frames);
    EXPECT_LE(static_cast<int>(v.boundaries.size()), o.max_cuts);
    int prev = -1;
    for (int b : v.boundaries) {
      EXPECT_GE(b - prev, o.min_shot_length);
      prev = b;
    }
    EXPECT_GE(o.video.num_frames - 1 - prev, o.min_shot_length);
  }
}

TEST(RawJsonlTest, RoundTrip) {
  RawClip c;
  c.id = "m0001a";
  c.split = "test";
  c.frames = {Pattern(5, 3), Pattern(5, 3)};
  c.boundaries = {0};
  RawDetection d;
  d.det = {1, {10, 20, 40, 45}, 0.75};
  d.v_head = {0.5, -1};
  d.v_body = {2};
  d.label = 3;
  c.detections = {d};
  c.annotations = {{1, {11, 19, 40, 45}, 7}};
  std::istringstream in(RawClipToJsonLine(c) + "\n");
  const auto parsed = ParseRawJsonl(in);
  ASSERT_EQ(parsed.size(), 1u);
  const RawClip& p = parsed[0];
  EXPECT_EQ(p.id, c.id);
  EXPECT_EQ(p.split, "test");
  EXPECT_EQ(p.frames, c.frames);
  EXPECT_EQ(p.boundaries, c.boundaries);
  ASSERT_EQ(p.detections.size(), 1u);
  EXPECT_EQ(p.detections[0].det, d.det);
  EXPECT_EQ(p.detections[0].v_head, d.v_head);
  EXPECT_EQ(p.detections[0].label, 3);
  EXPECT_EQ(p.annotations, c.annotations);
}

TEST(RawJsonlTest, ReportsLineAndField) {
  std::istringstream in("\n{\"id\":\"x\",\"thumb_scale\":0.1}\n");
  try {
    ParseRawJsonl(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_EQ(e.field(), "thumb_size");
  }
}

}  // namespace
}  // namespace grounded
