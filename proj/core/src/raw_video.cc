#include "grounded/raw_video.h"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "json_util.h"

namespace grounded {

using internal::FieldReader;
using internal::Json;

namespace {

std::uint8_t ClampByte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

std::array<std::uint8_t, 3> RandomColor(Rng& rng) {
  return {ClampByte(rng.Uniform(30, 225)), ClampByte(rng.Uniform(30, 225)),
          ClampByte(rng.Uniform(30, 225))};
}

void FillRect(Frame& f, int x0, int y0, int x1, int y1,
              const std::array<std::uint8_t, 3>& color) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, f.width);
  y1 = std::min(y1, f.height);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      for (int ch = 0; ch < 3; ++ch) f.at(x, y, ch) = color[ch];
    }
  }
}

struct ShotBackground {
  Frame texture;
  double vx = 0.0;
  double vy = 0.0;
  int start = 0;
};

constexpr int kPanPad = 8;

using Palette = std::vector<std::array<std::uint8_t, 3>>;

Palette RandomPalette(Rng& rng) {
  const auto base = RandomColor(rng);
  Palette p = {base};
  for (int k = 0; k < 12; ++k) {
    std::array<std::uint8_t, 3> c;
    for (int ch = 0; ch < 3; ++ch) {
      c[ch] = ClampByte(base[ch] + rng.Uniform(-70, 70));
    }
    p.push_back(c);
  }
  return p;
}

// palette[0] fills the background, the rest color random rectangles.
ShotBackground MakeBackground(const VideoOptions& o, int start,
                              const Palette& palette, Rng& rng) {
  ShotBackground bg;
  bg.start = start;
  bg.texture = Frame(o.width + 2 * kPanPad, o.height + 2 * kPanPad);
  FillRect(bg.texture, 0, 0, bg.texture.width, bg.texture.height, palette[0]);
  for (std::size_t r = 1; r < palette.size(); ++r) {
    const int w = rng.IntIn(2, std::max(3, bg.texture.width / 3));
    const int h = rng.IntIn(2, std::max(3, bg.texture.height / 3));
    const int x = rng.IntIn(0, bg.texture.width - 1);
    const int y = rng.IntIn(0, bg.texture.height - 1);
    FillRect(bg.texture, x, y, x + w, y + h, palette[r]);
  }
  bg.vx = rng.Uniform(-0.5, 0.5);
  bg.vy = rng.Uniform(-0.3, 0.3);
  return bg;
}

}  // namespace

std::vector<Frame> RenderVideo(const VideoOptions& options,
                               std::span<const int> boundaries,
                               std::span<const Sprite> sprites, Rng& rng) {
  std::set<int> starts = {0};
  for (int b : boundaries) {
    if (b >= 0 && b + 1 < options.num_frames) starts.insert(b + 1);
  }
  std::vector<ShotBackground> shots;
  Palette palette = RandomPalette(rng);
  for (int s : starts) {
    // A similar shot keeps the colors and rearranges the layout.
    if (!shots.empty() && !rng.Bernoulli(options.similar_shot_prob)) {
      palette = RandomPalette(rng);
    }
    shots.push_back(MakeBackground(options, s, palette, rng));
  }

  std::vector<std::vector<const Sprite*>> per_frame(options.num_frames);
  for (const Sprite& s : sprites) {
    if (s.frame >= 0 && s.frame < options.num_frames) {
      per_frame[s.frame].push_back(&s);
    }
  }

  std::vector<Frame> frames;
  frames.reserve(options.num_frames);
  std::size_t shot = 0;
  for (int t = 0; t < options.num_frames; ++t) {
    while (shot + 1 < shots.size() && shots[shot + 1].start <= t) ++shot;
    const ShotBackground& bg = shots[shot];
    const int dt = t - bg.start;
    const int ox = std::clamp(
        kPanPad + static_cast<int>(std::lround(bg.vx * dt)), 0, 2 * kPanPad);
    const int oy = std::clamp(
        kPanPad + static_cast<int>(std::lround(bg.vy * dt)), 0, 2 * kPanPad);
    Frame f(options.width, options.height);
    for (int y = 0; y < f.height; ++y) {
      for (int x = 0; x < f.width; ++x) {
        for (int ch = 0; ch < 3; ++ch) {
          f.at(x, y, ch) = bg.texture.at(x + ox, y + oy, ch);
        }
      }
    }
    for (const Sprite* s : per_frame[t]) {
      FillRect(f, static_cast<int>(std::floor(s->box.x * options.scale)),
               static_cast<int>(std::floor(s->box.y * options.scale)),
               static_cast<int>(std::ceil(s->box.right() * options.scale)),
               static_cast<int>(std::ceil(s->box.bottom() * options.scale)),
               s->color);
    }
    if (options.pixel_noise > 0.0) {
      for (auto& v : f.rgb) v = ClampByte(v + rng.Normal(0.0, options.pixel_noise));
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

ShotVideo GenerateShotVideo(const ShotVideoOptions& options, Rng& rng) {
  const VideoOptions& vo = options.video;
  ShotVideo out;
  const int lo = options.min_shot_length - 1;
  const int hi = vo.num_frames - options.min_shot_length - 1;
  int cuts = rng.IntIn(0, options.max_cuts);
  while (cuts > 0 && out.boundaries.empty()) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      std::vector<int> b;
      for (int k = 0; k < cuts; ++k) b.push_back(rng.IntIn(lo, hi));
      std::sort(b.begin(), b.end());
      bool ok = true;
      for (int k = 1; k < cuts; ++k) {
        ok = ok && b[k] - b[k - 1] >= options.min_shot_length;
      }
      if (ok) {
        out.boundaries = std::move(b);
        break;
      }
    }
    if (out.boundaries.empty()) --cuts;
  }

  std::vector<Sprite> sprites;
  const double w = vo.width / vo.scale;
  const double h = vo.height / vo.scale;
  std::vector<int> starts = {0};
  for (int b : out.boundaries) starts.push_back(b + 1);
  starts.push_back(vo.num_frames);
  for (int m = 0; m < options.moving_boxes; ++m) {
    const auto color = RandomColor(rng);
    const double size = rng.Uniform(0.08, 0.16) * h;
    for (std::size_t s = 0; s + 1 < starts.size(); ++s) {
      double x = rng.Uniform(0, w - size);
      double y = rng.Uniform(0, h - size);
      const double vx = rng.Uniform(-1.5, 1.5) / vo.scale;
      const double vy = rng.Uniform(-1.0, 1.0) / vo.scale;
      for (int t = starts[s]; t < starts[s + 1]; ++t) {
        sprites.push_back({t, {x, y, size, size}, color});
        x = std::clamp(x + vx, 0.0, w - size);
        y = std::clamp(y + vy, 0.0, h - size);
      }
    }
  }
  out.frames = RenderVideo(vo, out.boundaries, sprites, rng);
  return out;
}

std::string EncodeFrame(const Frame& frame) {
  const std::size_t n = frame.rgb.size();
  std::string out(4 * ((n + 2) / 3), '\0');
  const int written = EVP_EncodeBlock(
      reinterpret_cast<unsigned char*>(out.data()), frame.rgb.data(),
      static_cast<int>(n));
  out.resize(written);
  return out;
}

Frame DecodeFrame(const std::string& base64, int width, int height) {
  if (width <= 0 || height <= 0 || base64.size() % 4 != 0) {
    throw std::invalid_argument("bad frame encoding");
  }
  std::vector<unsigned char> buf(3 * (base64.size() / 4));
  const int n = EVP_DecodeBlock(
      buf.data(), reinterpret_cast<const unsigned char*>(base64.data()),
      static_cast<int>(base64.size()));
  if (n < 0) throw std::invalid_argument("invalid base64 frame data");
  std::size_t len = static_cast<std::size_t>(n);
  // EVP_DecodeBlock counts padding as zero bytes.
  if (!base64.empty() && base64.back() == '=') --len;
  if (base64.size() > 1 && base64[base64.size() - 2] == '=') --len;
  Frame f(width, height);
  if (len != f.rgb.size()) {
    throw std::invalid_argument("frame data does not match its size");
  }
  std::copy(buf.begin(), buf.begin() + len, f.rgb.begin());
  return f;
}

namespace {

Json BoxJson(const Box& b) { return Json::array({b.x, b.y, b.w, b.h}); }

Box ReadBox(const FieldReader& r, const Json& obj) {
  const std::vector<double> v = r.Numbers(r.Require(obj, "box"), "box");
  if (v.size() != 4) r.Fail("box", "expected [x, y, w, h]");
  if (v[2] <= 0 || v[3] <= 0) r.Fail("box", "width and height must be > 0");
  return {v[0], v[1], v[2], v[3]};
}

RawClip ParseRawClip(const Json& j, int line) {
  FieldReader r(line, "");
  RawClip c;
  c.id = r.String(r.Require(j, "id"), "id");
  if (j.contains("split")) c.split = r.String(j["split"], "split");
  if (j.contains("frame_size")) {
    const auto fs = r.Numbers(j["frame_size"], "frame_size");
    if (fs.size() != 2 || fs[0] <= 0 || fs[1] <= 0) {
      r.Fail("frame_size", "expected [width, height] > 0");
    }
    c.frame_size = {fs[0], fs[1]};
  }
  c.thumb_scale = r.Number(r.Require(j, "thumb_scale"), "thumb_scale");
  const auto ts = r.Integers(r.Require(j, "thumb_size"), "thumb_size");
  if (ts.size() != 2) r.Fail("thumb_size", "expected [width, height]");
  const Json& frames = r.Array(r.Require(j, "frames"), "frames");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string field = "frames[" + std::to_string(i) + "]";
    try {
      c.frames.push_back(DecodeFrame(r.String(frames[i], field), ts[0], ts[1]));
    } catch (const std::invalid_argument& e) {
      r.Fail(field, e.what());
    }
  }
  c.boundaries = r.Integers(r.Require(j, "boundaries"), "boundaries");
  const Json& dets = r.Array(r.Require(j, "detections"), "detections");
  for (std::size_t i = 0; i < dets.size(); ++i) {
    FieldReader d = r.Nested("detections[" + std::to_string(i) + "]");
    RawDetection rd;
    rd.det.frame = static_cast<int>(d.Integer(d.Require(dets[i], "t"), "t"));
    rd.det.box = ReadBox(d, dets[i]);
    rd.det.score = d.Number(d.Require(dets[i], "score"), "score");
    rd.v_head = d.Numbers(d.Require(dets[i], "v_head"), "v_head");
    rd.v_body = d.Numbers(d.Require(dets[i], "v_body"), "v_body");
    if (dets[i].contains("label")) {
      rd.label = static_cast<int>(d.Integer(dets[i]["label"], "label"));
    }
    c.detections.push_back(std::move(rd));
  }
  const Json& anns = r.Array(r.Require(j, "annotations"), "annotations");
  for (std::size_t i = 0; i < anns.size(); ++i) {
    FieldReader a = r.Nested("annotations[" + std::to_string(i) + "]");
    Annotation an;
    an.frame = static_cast<int>(a.Integer(a.Require(anns[i], "t"), "t"));
    an.box = ReadBox(a, anns[i]);
    an.character_id =
        static_cast<int>(a.Integer(a.Require(anns[i], "char"), "char"));
    c.annotations.push_back(an);
  }
  return c;
}

}  // namespace

std::string RawClipToJsonLine(const RawClip& clip) {
  Json frames = Json::array();
  for (const Frame& f : clip.frames) frames.push_back(EncodeFrame(f));
  Json dets = Json::array();
  for (const RawDetection& d : clip.detections) {
    dets.push_back({{"t", d.det.frame},
                    {"box", BoxJson(d.det.box)},
                    {"score", d.det.score},
                    {"v_head", d.v_head},
                    {"v_body", d.v_body},
                    {"label", d.label}});
  }
  Json anns = Json::array();
  for (const Annotation& a : clip.annotations) {
    anns.push_back(
        {{"t", a.frame}, {"box", BoxJson(a.box)}, {"char", a.character_id}});
  }
  const int tw = clip.frames.empty() ? 0 : clip.frames.front().width;
  const int th = clip.frames.empty() ? 0 : clip.frames.front().height;
  Json j = {{"id", clip.id},
            {"split", clip.split},
            {"frame_size", clip.frame_size},
            {"thumb_scale", clip.thumb_scale},
            {"thumb_size", {tw, th}},
            {"frames", std::move(frames)},
            {"boundaries", clip.boundaries},
            {"detections", std::move(dets)},
            {"annotations", std::move(anns)}};
  return j.dump();
}

std::vector<RawClip> ParseRawJsonl(std::istream& in) {
  std::vector<RawClip> clips;
  internal::ForEachJsonLine(in, [&](const Json& j, int line) {
    clips.push_back(ParseRawClip(j, line));
  });
  return clips;
}

std::vector<RawClip> ReadRawJsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return ParseRawJsonl(in);
}

void WriteRawJsonl(std::span<const RawClip> clips,
                   const std::filesystem::path& path,
                   const std::optional<ArtifactStamp>& stamp) {
  std::string text;
  if (stamp) text += MetaLine(*stamp) + "\n";
  for (const RawClip& c : clips) text += RawClipToJsonLine(c) + "\n";
  internal::WriteFile(path, text);
}

}  // namespace grounded
