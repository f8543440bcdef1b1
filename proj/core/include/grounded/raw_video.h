#ifndef GROUNDED_RAW_VIDEO_H_
#define GROUNDED_RAW_VIDEO_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grounded/corpus_io.h"
#include "grounded/rng.h"
#include "grounded/shot_boundary.h"
#include "grounded/tracker.h"
#include "grounded/types.h"

namespace grounded {

// A named head box, as produced by manual annotation.
struct Annotation {
  int frame = 0;
  Box box;
  int character_id = 0;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

// Detector-level view of one clip: downscaled frames, the raw detection
// stream, annotated heads and the planted shot boundaries.
struct RawClip {
  std::string id;
  std::string split = "train";
  std::array<double, 2> frame_size = {640.0, 360.0};
  std::vector<Frame> frames;  // thumbnails, full size times `thumb_scale`
  double thumb_scale = 0.1;
  std::vector<int> boundaries;  // boundary i separates frames i and i + 1
  std::vector<RawDetection> detections;
  std::vector<Annotation> annotations;
};

// A solid box drawn onto one frame, in full-resolution pixels.
struct Sprite {
  int frame = 0;
  Box box;
  std::array<std::uint8_t, 3> color{};
};

struct VideoOptions {
  int width = 64;  // rendered size
  int height = 36;
  int num_frames = 32;
  double scale = 0.1;  // rendered pixels per sprite pixel
  double pixel_noise = 2.0;
  // Chance that a shot reuses the previous shot's colors in a new layout.
  double similar_shot_prob = 0.3;
};

// Each shot gets its own textured, slowly panning background; sprites are
// drawn on top and pixel noise is added last.
std::vector<Frame> RenderVideo(const VideoOptions& options,
                               std::span<const int> boundaries,
                               std::span<const Sprite> sprites, Rng& rng);

struct ShotVideo {
  std::vector<Frame> frames;
  std::vector<int> boundaries;
};

struct ShotVideoOptions {
  VideoOptions video{.width = 160, .height = 90, .num_frames = 40,
                     .scale = 1.0};
  int max_cuts = 3;
  int min_shot_length = 6;
  int moving_boxes = 2;
};

// A short video with 0..max_cuts planted cuts and a few moving boxes.
ShotVideo GenerateShotVideo(const ShotVideoOptions& options, Rng& rng);

std::string EncodeFrame(const Frame& frame);  // base64 of the RGB bytes
Frame DecodeFrame(const std::string& base64, int width, int height);

std::string RawClipToJsonLine(const RawClip& clip);
std::vector<RawClip> ParseRawJsonl(std::istream& in);
std::vector<RawClip> ReadRawJsonl(const std::filesystem::path& path);
void WriteRawJsonl(std::span<const RawClip> clips,
                   const std::filesystem::path& path,
                   const std::optional<ArtifactStamp>& stamp = std::nullopt);

}  // namespace grounded

#endif  // GROUNDED_RAW_VIDEO_H_
