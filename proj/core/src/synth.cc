#include "grounded/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "grounded/errors.h"
#include "grounded/track_repr.h"

namespace grounded {

namespace {

void Require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("synth: " + what);
}

bool IsProbability(double p) { return p >= 0.0 && p <= 1.0; }

Vec RandomHead(int dim, Gender gender, Rng& rng) {
  Vec v(dim);
  v[0] = gender == Gender::kMale ? 1.0 : -1.0;
  for (int k = 1; k < dim; ++k) v[k] = rng.Uniform(-1.0, 1.0);
  return v;
}

Vec RandomUniform(int dim, Rng& rng) {
  Vec v(dim);
  for (double& x : v) x = rng.Uniform(-1.0, 1.0);
  return v;
}

Vec Noisy(const Vec& center, double sigma, Rng& rng) {
  Vec v = center;
  if (sigma > 0.0) {
    for (double& x : v) x += rng.Normal(0.0, sigma);
  }
  return v;
}

std::array<std::uint8_t, 3> ColorOf(const Vec& v) {
  std::array<std::uint8_t, 3> c{};
  for (int ch = 0; ch < 3; ++ch) {
    const double x = ch < static_cast<int>(v.size()) ? v[ch] : 0.0;
    c[ch] = static_cast<std::uint8_t>(std::clamp(128.0 + 100.0 * x, 0.0, 255.0));
  }
  return c;
}

struct Shot {
  int first = 0;
  int last = 0;
};

// A track under construction, before ids are assigned.
struct PlannedTrack {
  int character_id = 0;  // 0 for background
  Vec v_head;
  Vec v_body;
  Vec head_center;  // appearance source, used for rendering
  Vec body_center;
  std::vector<Detection> detections;
};

Box KeepInside(Box b, const std::array<double, 2>& frame) {
  b.x = std::clamp(b.x, 0.0, std::max(0.0, frame[0] - b.w));
  b.y = std::clamp(b.y, 0.0, std::max(0.0, frame[1] - b.h));
  return b;
}

class ClipBuilder {
 public:
  ClipBuilder(const SynthConfig& cfg, Rng& rng) : cfg_(cfg), rng_(rng) {
    const int t = cfg.frames_per_clip;
    if (rng_.Bernoulli(cfg.cut_prob)) {
      const int b = rng_.IntIn(7, t - 9);
      boundaries_.push_back(b);
      shots_ = {{0, b}, {b + 1, t - 1}};
    } else {
      shots_ = {{0, t - 1}};
    }
  }

  const std::vector<int>& boundaries() const { return boundaries_; }

  // Described characters, left to right.
  std::vector<PlannedTrack> Described(const std::vector<const Character*>& who,
                                      bool off_center, bool allow_split) {
    const double w = cfg_.frame_size[0];
    const double h = cfg_.frame_size[1];
    const int t = cfg_.frames_per_clip;
    std::vector<PlannedTrack> out;
    const int n = static_cast<int>(who.size());
    for (int k = 0; k < n; ++k) {
      const Character& ch = *who[k];
      const int first = rng_.IntIn(0, 2);
      const int last = rng_.IntIn(t - 3, t - 1);
      double head_h = rng_.Uniform(60.0, 90.0);
      const double aspect = rng_.Uniform(0.75, 0.9);
      std::vector<Detection> dets;
      for (const Shot& s : shots_) {
        double lo = 0.35, hi = 0.65;
        if (n == 2) {
          lo = k == 0 ? 0.15 : 0.6;
          hi = k == 0 ? 0.4 : 0.85;
        } else if (off_center) {
          const bool left = rng_.Bernoulli(0.5);
          lo = left ? 0.06 : 0.82;
          hi = left ? 0.18 : 0.94;
        }
        double cx = rng_.Uniform(lo, hi) * w;
        double cy = rng_.Uniform(0.22, 0.4) * h;
        const double vx = rng_.Uniform(-1.5, 1.5);
        head_h = std::clamp(head_h + rng_.Uniform(-5.0, 5.0), 60.0, 90.0);
        for (int f = std::max(s.first, first); f <= std::min(s.last, last); ++f) {
          const double hh = head_h + rng_.Uniform(-1.0, 1.0);
          const double ww = hh * aspect;
          Box b = KeepInside({cx - 0.5 * ww, cy - 0.5 * hh, ww, hh},
                             cfg_.frame_size);
          dets.push_back({f, b, rng_.Uniform(0.7, 1.0)});
          cx += vx;
          cy += rng_.Uniform(-0.5, 0.5);
        }
      }
      // Optional occlusion gap splitting the track in two.
      std::vector<std::vector<Detection>> parts = {dets};
      if (allow_split && dets.size() >= 14 &&
          rng_.Bernoulli(cfg_.split_track_prob)) {
        const int g = rng_.IntIn(6, static_cast<int>(dets.size()) - 8);
        parts = {{dets.begin(), dets.begin() + g},
                 {dets.begin() + g + 2, dets.end()}};
      }
      for (auto& part : parts) {
        PlannedTrack p;
        p.character_id = ch.id;
        p.head_center = ch.head_center;
        p.body_center = ch.body_center;
        p.v_head = Noisy(ch.head_center, cfg_.sigma, rng_);
        p.v_body = Noisy(ch.body_center, cfg_.sigma, rng_);
        p.detections = std::move(part);
        out.push_back(std::move(p));
      }
    }
    return out;
  }

  PlannedTrack Background(bool centered) {
    const double w = cfg_.frame_size[0];
    const double h = cfg_.frame_size[1];
    const Shot& s = shots_[rng_.Index(shots_.size())];
    const int span = s.last - s.first + 1;
    const int len = std::min(span, rng_.IntIn(6, 15));
    const int first = s.first + rng_.IntIn(0, span - len);
    const double hh = rng_.Uniform(44.0, 52.0);
    const double ww = rng_.Uniform(40.0, hh);
    double cx = centered ? rng_.Uniform(0.45, 0.55) * w
                         : rng_.Uniform(0.05, 0.95) * w;
    double cy = centered ? rng_.Uniform(0.6, 0.7) * h
                         : rng_.Uniform(0.6, 0.85) * h;
    const double vx = rng_.Uniform(-1.0, 1.0);
    PlannedTrack p;
    const Gender g = rng_.Bernoulli(0.5) ? Gender::kMale : Gender::kFemale;
    p.head_center = RandomHead(cfg_.d_head, g, rng_);
    p.body_center = RandomUniform(cfg_.d_body, rng_);
    p.v_head = Noisy(p.head_center, cfg_.sigma, rng_);
    p.v_body = Noisy(p.body_center, cfg_.sigma, rng_);
    for (int f = first; f < first + len; ++f) {
      const Box b = KeepInside({cx - 0.5 * ww, cy - 0.5 * hh, ww, hh},
                               cfg_.frame_size);
      p.detections.push_back({f, b, rng_.Uniform(0.55, 0.95)});
      cx += vx;
    }
    return p;
  }

 private:
  const SynthConfig& cfg_;
  Rng& rng_;
  std::vector<int> boundaries_;
  std::vector<Shot> shots_;
};

RawClip RenderRaw(const SynthConfig& cfg, const Clip& clip,
                  const std::vector<PlannedTrack>& planned,
                  const std::vector<int>& boundaries, Rng& rng) {
  RawClip raw;
  raw.id = clip.id;
  raw.split = clip.split;
  raw.frame_size = cfg.frame_size;
  raw.thumb_scale = cfg.thumb_scale;
  raw.boundaries = boundaries;

  std::vector<Sprite> sprites;
  for (std::size_t k = 0; k < planned.size(); ++k) {
    const PlannedTrack& p = planned[k];
    const Track& track = clip.tracks[k];
    for (const Detection& d : p.detections) {
      sprites.push_back({d.frame, BodyRegion(d.box, cfg.frame_size),
                         ColorOf(p.body_center)});
      sprites.push_back({d.frame, d.box, ColorOf(p.head_center)});
      if (p.character_id != 0) {
        Box a = d.box;
        a.x += rng.Uniform(-2.0, 2.0);
        a.y += rng.Uniform(-2.0, 2.0);
        raw.annotations.push_back({d.frame, a, p.character_id});
      }
      if (rng.Bernoulli(cfg.miss_prob)) continue;
      raw.detections.push_back({d, Noisy(track.v_head, cfg.crop_noise, rng),
                                Noisy(track.v_body, cfg.crop_noise, rng),
                                track.id});
    }
  }
  for (int f = 0; f < cfg.frames_per_clip; ++f) {
    if (!rng.Bernoulli(cfg.spurious_prob)) continue;
    // Either a weak detection or one too small to keep.
    const bool weak = rng.Bernoulli(0.5);
    const double hh = weak ? rng.Uniform(40.0, 80.0) : rng.Uniform(15.0, 35.0);
    const double ww = hh * rng.Uniform(0.8, 1.0);
    const Box b = KeepInside({rng.Uniform(0.0, cfg.frame_size[0]),
                              rng.Uniform(0.0, cfg.frame_size[1]), ww, hh},
                             cfg.frame_size);
    const double score = weak ? rng.Uniform(0.1, 0.45) : rng.Uniform(0.5, 1.0);
    const Gender g = rng.Bernoulli(0.5) ? Gender::kMale : Gender::kFemale;
    raw.detections.push_back({{f, b, score},
                              RandomHead(cfg.d_head, g, rng),
                              RandomUniform(cfg.d_body, rng),
                              0});
  }
  std::stable_sort(raw.detections.begin(), raw.detections.end(),
                   [](const RawDetection& a, const RawDetection& b) {
                     return a.det.frame < b.det.frame;
                   });
  VideoOptions vo;
  vo.width = std::max(8, static_cast<int>(std::lround(cfg.frame_size[0] *
                                                      cfg.thumb_scale)));
  vo.height = std::max(8, static_cast<int>(std::lround(cfg.frame_size[1] *
                                                       cfg.thumb_scale)));
  vo.num_frames = cfg.frames_per_clip;
  vo.scale = cfg.thumb_scale;
  raw.frames = RenderVideo(vo, boundaries, sprites, rng);
  return raw;
}

std::string ClipName(int movie, char part) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "m%04d%c", movie, part);
  return buf;
}

}  // namespace

void ValidateSynthConfig(const SynthConfig& c) {
  Require(c.num_pairs >= 1, "num_pairs must be >= 1");
  Require(c.cast_size >= 4, "cast_size must be >= 4");
  Require(c.num_characters >= c.cast_size,
          "num_characters must be >= cast_size");
  Require(c.d_head >= 2 && c.d_body >= 3, "d_head >= 2 and d_body >= 3");
  Require(c.d_global >= 18, "d_global must be >= 18");
  Require(c.sigma >= 0.0 && c.crop_noise >= 0.0, "noise must be >= 0");
  Require(c.margin >= 0.0, "margin must be >= 0");
  // Same-gender centers differ only in the last d_head - 1 coordinates,
  // each within [-1, 1].
  Require(c.margin < 2.0 * std::sqrt(c.d_head - 1.0),
          "margin is unreachable for d_head");
  Require(c.distractors >= 0, "distractors must be >= 0");
  Require(c.max_mentions == 1 || c.max_mentions == 2,
          "max_mentions must be 1 or 2");
  for (double p : {c.share_prob, c.two_person_prob, c.singleton_prob,
                   c.split_track_prob, c.test_fraction, c.cut_prob,
                   c.miss_prob, c.spurious_prob}) {
    Require(IsProbability(p), "probabilities must lie in [0, 1]");
  }
  Require(c.frames_per_clip >= 20, "frames_per_clip must be >= 20");
  Require(c.frame_size[0] >= 320 && c.frame_size[1] >= 240,
          "frame_size must be at least 320x240");
  Require(c.thumb_scale > 0.0 && c.thumb_scale <= 1.0,
          "thumb_scale must lie in (0, 1]");
}

std::vector<Character> SampleCharacters(const SynthConfig& config, Rng& rng) {
  constexpr int kAttempts = 10000;
  std::vector<Character> out;
  for (int i = 0; i < config.num_characters; ++i) {
    Character ch;
    ch.id = i + 1;
    ch.gender = rng.Bernoulli(0.5) ? Gender::kMale : Gender::kFemale;
    bool placed = false;
    for (int a = 0; a < kAttempts && !placed; ++a) {
      ch.head_center = RandomHead(config.d_head, ch.gender, rng);
      placed = std::all_of(out.begin(), out.end(), [&](const Character& o) {
        Vec d = o.head_center;
        Axpy(-1.0, ch.head_center, d);
        return std::sqrt(SquaredNorm(d)) >= config.margin;
      });
    }
    if (!placed) {
      throw ConfigError("synth: could not place " +
                        std::to_string(config.num_characters) +
                        " characters with margin " +
                        std::to_string(config.margin));
    }
    ch.body_center = RandomUniform(config.d_body, rng);
    out.push_back(std::move(ch));
  }
  return out;
}

SyntheticData GenerateSynthetic(const SynthConfig& cfg, std::uint64_t seed) {
  ValidateSynthConfig(cfg);
  const Rng root(seed);
  Rng char_rng = root.Substream("characters");
  SyntheticData data;
  data.characters = SampleCharacters(cfg, char_rng);
  const int num_test =
      static_cast<int>(std::lround(cfg.test_fraction * cfg.num_pairs));

  for (int m = 0; m < cfg.num_pairs; ++m) {
    Rng rng = root.Substream("movie/" + std::to_string(m));
    const std::string split = m >= cfg.num_pairs - num_test ? "test" : "train";
    std::vector<const Character*> cast;
    for (const Character& c : data.characters) cast.push_back(&c);
    rng.Shuffle(std::span(cast));
    cast.resize(cfg.cast_size);

    auto count = [&](bool singleton) {
      if (singleton || cfg.max_mentions < 2) return 1;
      return rng.Bernoulli(cfg.two_person_prob) ? 2 : 1;
    };
    const bool single_a = rng.Bernoulli(cfg.singleton_prob);
    const int ka = count(single_a);
    std::vector<const Character*> in_a(cast.begin(), cast.begin() + ka);

    const bool single_b = rng.Bernoulli(cfg.singleton_prob);
    const int kb = count(single_b);
    std::vector<const Character*> carry = in_a;
    rng.Shuffle(std::span(carry));
    std::vector<const Character*> fresh(cast.begin() + ka, cast.end());
    std::vector<const Character*> in_b;
    for (int k = 0; k < kb; ++k) {
      if (!carry.empty() && rng.Bernoulli(cfg.share_prob)) {
        in_b.push_back(carry.back());
        carry.pop_back();
      } else {
        in_b.push_back(fresh.back());
        fresh.pop_back();
      }
    }

    for (int part = 0; part < 2; ++part) {
      const auto& who = part == 0 ? in_a : in_b;
      const bool singleton = part == 0 ? single_a : single_b;
      Clip clip;
      clip.id = ClipName(m, part == 0 ? 'a' : 'b');
      if (part == 1) clip.prev_id = ClipName(m, 'a');
      clip.split = split;
      clip.frame_size = cfg.frame_size;

      ClipBuilder builder(cfg, rng);
      const bool off_center = cfg.off_center_single && who.size() == 1;
      std::vector<PlannedTrack> planned =
          builder.Described(who, off_center, !singleton);
      if (!singleton) {
        int n = rng.IntIn(0, cfg.distractors);
        if (off_center) {
          planned.push_back(builder.Background(true));
          n = std::max(0, n - 1);
        }
        for (int k = 0; k < n; ++k) planned.push_back(builder.Background(false));
      }
      rng.Shuffle(std::span(planned));

      for (std::size_t k = 0; k < planned.size(); ++k) {
        Track t;
        t.id = static_cast<int>(k) + 1;
        t.detections = planned[k].detections;
        t.v_head = planned[k].v_head;
        t.v_body = planned[k].v_body;
        t.v_stat = TrackStats(t.detections);
        clip.tracks.push_back(std::move(t));
      }

      const int verb = static_cast<int>(rng.Index(kVerbs.size()));
      const int object = static_cast<int>(rng.Index(kObjects.size()));
      for (std::size_t k = 0; k < who.size(); ++k) {
        const Character& ch = *who[k];
        const bool coref =
            part == 1 && std::find(in_a.begin(), in_a.end(), &ch) != in_a.end();
        if (k > 0) clip.sentence.push_back("and");
        Mention mention;
        mention.position = static_cast<int>(clip.sentence.size());
        mention.character_id = ch.id;
        mention.gender = ch.gender;
        for (std::size_t j = 0; j < planned.size(); ++j) {
          if (planned[j].character_id == ch.id) {
            mention.gt_track_ids.push_back(clip.tracks[j].id);
          }
        }
        if (coref) mention.coref_prev = ch.id;
        clip.mentions.push_back(std::move(mention));
        clip.sentence.push_back(PersonToken(ch.gender, coref));
      }
      clip.sentence.push_back(kVerbs[verb]);
      clip.sentence.push_back(kObjects[object]);

      clip.v_global.assign(cfg.d_global, 0.0);
      for (double& x : clip.v_global) x = rng.Normal(0.0, 0.05);
      clip.v_global[verb] += 1.0;
      clip.v_global[8 + object] += 1.0;
      clip.v_global[16 + static_cast<int>(who.size()) - 1] += 1.0;

      if (cfg.render_raw) {
        Rng raw_rng = root.Substream("raw/" + clip.id);
        data.raw.push_back(
            RenderRaw(cfg, clip, planned, builder.boundaries(), raw_rng));
      }
      CapTracks(clip);
      data.corpus.clips.push_back(std::move(clip));
    }
  }
  return data;
}

Corpus GenerateCorpus(const SynthConfig& config, std::uint64_t seed) {
  SynthConfig c = config;
  c.render_raw = false;
  return GenerateSynthetic(c, seed).corpus;
}

}  // namespace grounded
