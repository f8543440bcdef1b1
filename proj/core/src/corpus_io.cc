#include "grounded/corpus_io.h"

#include <fstream>
#include <set>
#include <sstream>

#include "grounded/track_repr.h"
#include "json_util.h"

namespace grounded {

using internal::FieldReader;
using internal::Json;

ParseError::ParseError(int line, std::string field, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) +
                         (field.empty() ? "" : ", field '" + field + "'") +
                         ": " + what),
      line_(line),
      field_(std::move(field)) {}

namespace {

Track ParseTrack(const Json& j, const FieldReader& r) {
  Track t;
  t.id = static_cast<int>(r.Integer(r.Require(j, "id"), "id"));
  if (t.id <= 0) r.Fail("id", "track ids must be positive");
  const auto frames = r.Integers(r.Require(j, "frames"), "frames");
  const Json& boxes = r.Array(r.Require(j, "boxes"), "boxes");
  const auto scores = r.Numbers(r.Require(j, "score"), "score");
  if (frames.empty()) r.Fail("frames", "a track needs at least one frame");
  if (boxes.size() != frames.size() || scores.size() != frames.size()) {
    r.Fail("boxes", "frames, boxes and score must have equal length");
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string field = "boxes[" + std::to_string(i) + "]";
    const auto b = r.Numbers(boxes[i], field);
    if (b.size() != 4) r.Fail(field, "a box is [x, y, w, h]");
    if (b[2] <= 0.0 || b[3] <= 0.0) r.Fail(field, "box size must be positive");
    t.detections.push_back({frames[i], Box{b[0], b[1], b[2], b[3]}, scores[i]});
  }
  t.v_head = r.Numbers(r.Require(j, "v_head"), "v_head");
  t.v_body = r.Numbers(r.Require(j, "v_body"), "v_body");
  if (j.contains("v_stat")) {
    t.v_stat = r.Numbers(j.at("v_stat"), "v_stat");
    if (t.v_stat.size() != kStatDim) r.Fail("v_stat", "v_stat has 11 entries");
  } else {
    t.v_stat = TrackStats(t.detections);
  }
  return t;
}

Mention ParseMention(const Json& j, const FieldReader& r, const Clip& clip) {
  Mention m;
  m.position = static_cast<int>(r.Integer(r.Require(j, "pos"), "pos"));
  m.character_id = static_cast<int>(r.Integer(r.Require(j, "char"), "char"));
  const std::string g = r.String(r.Require(j, "gender"), "gender");
  if (g != "M" && g != "F") r.Fail("gender", "gender must be \"M\" or \"F\"");
  m.gender = ParseGender(g);
  m.gt_track_ids = r.Integers(r.Require(j, "gt_tracks"), "gt_tracks");
  for (int id : m.gt_track_ids) {
    if (!clip.FindTrack(id)) {
      r.Fail("gt_tracks", "unknown track id " + std::to_string(id));
    }
  }
  const Json& coref = r.Require(j, "coref_prev");
  if (!coref.is_null()) {
    m.coref_prev = static_cast<int>(r.Integer(coref, "coref_prev"));
  }
  if (m.position < 0 ||
      m.position >= static_cast<int>(clip.sentence.size())) {
    r.Fail("pos", "position outside the sentence");
  }
  const std::string& token = clip.sentence[m.position];
  if (!IsPersonToken(token)) {
    r.Fail("pos", "token '" + token + "' is not a person token");
  }
  if (token != PersonToken(m.gender, IsCorefToken(token))) {
    r.Fail("gender", "gender disagrees with token '" + token + "'");
  }
  if (IsCorefToken(token) != m.coref_prev.has_value()) {
    r.Fail("coref_prev", "coref_prev must be set exactly for *Coref tokens");
  }
  return m;
}

Clip ParseClip(const Json& j, int line) {
  FieldReader r(line, "");
  Clip c;
  c.id = r.String(r.Require(j, "id"), "id");
  if (j.contains("prev_id") && !j.at("prev_id").is_null()) {
    c.prev_id = r.String(j.at("prev_id"), "prev_id");
  }
  if (j.contains("split")) c.split = r.String(j.at("split"), "split");
  if (j.contains("frame_size")) {
    const auto fs = r.Numbers(j.at("frame_size"), "frame_size");
    if (fs.size() != 2 || fs[0] <= 0 || fs[1] <= 0) {
      r.Fail("frame_size", "frame_size is [width, height]");
    }
    c.frame_size = {fs[0], fs[1]};
  }
  const Json& tracks = r.Array(r.Require(j, "tracks"), "tracks");
  std::set<int> ids;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const FieldReader tr = r.Nested("tracks[" + std::to_string(i) + "]");
    c.tracks.push_back(ParseTrack(tracks[i], tr));
    if (!ids.insert(c.tracks.back().id).second) {
      tr.Fail("id", "duplicate track id");
    }
    const Track& t = c.tracks.back();
    if (t.v_head.size() != c.tracks.front().v_head.size() ||
        t.v_body.size() != c.tracks.front().v_body.size()) {
      tr.Fail("v_head", "feature dimensions differ between tracks");
    }
  }
  c.v_global = r.Numbers(r.Require(j, "v_global"), "v_global");
  const Json& sentence = r.Array(r.Require(j, "sentence"), "sentence");
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    c.sentence.push_back(
        r.String(sentence[i], "sentence[" + std::to_string(i) + "]"));
  }
  const Json& mentions = r.Array(r.Require(j, "mentions"), "mentions");
  for (std::size_t i = 0; i < mentions.size(); ++i) {
    c.mentions.push_back(ParseMention(
        mentions[i], r.Nested("mentions[" + std::to_string(i) + "]"), c));
  }
  return c;
}

Json ClipToJson(const Clip& c) {
  Json tracks = Json::array();
  for (const Track& t : c.tracks) {
    Json frames = Json::array(), boxes = Json::array(), scores = Json::array();
    for (const Detection& d : t.detections) {
      frames.push_back(d.frame);
      boxes.push_back({d.box.x, d.box.y, d.box.w, d.box.h});
      scores.push_back(d.score);
    }
    tracks.push_back({{"id", t.id},
                      {"frames", frames},
                      {"boxes", boxes},
                      {"score", scores},
                      {"v_head", t.v_head},
                      {"v_body", t.v_body},
                      {"v_stat", t.v_stat}});
  }
  Json mentions = Json::array();
  for (const Mention& m : c.mentions) {
    mentions.push_back(
        {{"pos", m.position},
         {"char", m.character_id},
         {"gender", std::string(1, GenderCode(m.gender))},
         {"gt_tracks", m.gt_track_ids},
         {"coref_prev", m.coref_prev ? Json(*m.coref_prev) : Json(nullptr)}});
  }
  return {{"id", c.id},
          {"prev_id", c.prev_id ? Json(*c.prev_id) : Json(nullptr)},
          {"split", c.split},
          {"frame_size", {c.frame_size[0], c.frame_size[1]}},
          {"tracks", tracks},
          {"v_global", c.v_global},
          {"sentence", c.sentence},
          {"mentions", mentions}};
}

}  // namespace

Corpus ParseCorpusJsonl(std::istream& in) {
  Corpus corpus;
  std::set<std::string> ids;
  internal::ForEachJsonLine(in, [&](const Json& j, int line) {
    if (!j.is_object()) throw ParseError(line, "", "expected a JSON object");
    Clip clip = ParseClip(j, line);
    if (!ids.insert(clip.id).second) {
      throw ParseError(line, "id", "duplicate clip id '" + clip.id + "'");
    }
    if (!corpus.clips.empty() && !clip.tracks.empty() &&
        !corpus.clips.front().tracks.empty() &&
        clip.tracks.front().v_head.size() !=
            corpus.clips.front().tracks.front().v_head.size()) {
      throw ParseError(line, "tracks", "feature dimensions differ from line 1");
    }
    corpus.clips.push_back(std::move(clip));
  });
  return corpus;
}

Corpus IngestJsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Corpus corpus = ParseCorpusJsonl(in);
  for (Clip& c : corpus.clips) CapTracks(c);
  return corpus;
}

std::string ClipToJsonLine(const Clip& clip) { return ClipToJson(clip).dump(); }

std::string MetaLine(const ArtifactStamp& stamp) {
  return Json{{"_meta", internal::StampJson(stamp)}}.dump();
}

void WriteCorpusJsonl(const Corpus& corpus, std::ostream& out,
                      const std::optional<ArtifactStamp>& stamp) {
  if (stamp) out << MetaLine(*stamp) << '\n';
  for (const Clip& c : corpus.clips) out << ClipToJsonLine(c) << '\n';
}

void ExportJsonl(const Corpus& corpus, const std::filesystem::path& path,
                 const std::optional<ArtifactStamp>& stamp) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  WriteCorpusJsonl(corpus, out, stamp);
}

}  // namespace grounded
