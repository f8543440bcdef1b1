#include "grounded/types.h"

#include <algorithm>
#include <set>

namespace grounded {

char GenderCode(Gender g) { return g == Gender::kMale ? 'M' : 'F'; }

Gender ParseGender(std::string_view code) {
  if (code == "M") return Gender::kMale;
  if (code == "F") return Gender::kFemale;
  throw std::invalid_argument("gender must be \"M\" or \"F\"");
}

double IntersectionArea(const Box& a, const Box& b) {
  const double w = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double h = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double Iou(const Box& a, const Box& b) {
  const double inter = IntersectionArea(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

bool PassesDetectionFilter(const Detection& d) {
  return d.score >= kMinDetectionScore && d.box.w >= kMinDetectionSize &&
         d.box.h >= kMinDetectionSize;
}

double Track::MeanArea() const {
  if (detections.empty()) return 0.0;
  double s = 0.0;
  for (const Detection& d : detections) s += d.box.area();
  return s / static_cast<double>(detections.size());
}

double Track::MeanCenterX() const {
  if (detections.empty()) return 0.0;
  double s = 0.0;
  for (const Detection& d : detections) s += d.box.cx();
  return s / static_cast<double>(detections.size());
}

double Track::MeanCenterY() const {
  if (detections.empty()) return 0.0;
  double s = 0.0;
  for (const Detection& d : detections) s += d.box.cy();
  return s / static_cast<double>(detections.size());
}

const Track* Clip::FindTrack(int track_id) const {
  for (const Track& t : tracks) {
    if (t.id == track_id) return &t;
  }
  return nullptr;
}

const Clip* Corpus::Find(const std::string& id) const {
  for (const Clip& c : clips) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

const Clip* Corpus::Previous(const Clip& clip) const {
  if (!clip.prev_id) return nullptr;
  return Find(*clip.prev_id);
}

void CapTracks(Clip& clip, int max_tracks) {
  if (static_cast<int>(clip.tracks.size()) <= max_tracks) return;
  std::stable_sort(clip.tracks.begin(), clip.tracks.end(),
                   [](const Track& a, const Track& b) {
                     return a.length() > b.length();
                   });
  clip.tracks.resize(max_tracks);
  std::set<int> kept;
  for (const Track& t : clip.tracks) kept.insert(t.id);
  for (Mention& m : clip.mentions) {
    std::erase_if(m.gt_track_ids, [&](int id) { return !kept.contains(id); });
  }
}

bool IsPersonToken(std::string_view token) {
  return IsNameToken(token) || IsCorefToken(token);
}

bool IsNameToken(std::string_view token) {
  return token == kMaleName || token == kFemaleName;
}

bool IsCorefToken(std::string_view token) {
  return token == kMaleCoref || token == kFemaleCoref;
}

std::string PersonToken(Gender gender, bool coref) {
  if (gender == Gender::kMale) {
    return std::string(coref ? kMaleCoref : kMaleName);
  }
  return std::string(coref ? kFemaleCoref : kFemaleName);
}

Vocabulary::Vocabulary(const std::vector<std::string>& words) {
  tokens_ = {std::string(kBos),       std::string(kEos),
             std::string(kUnk),       std::string(kMaleCoref),
             std::string(kFemaleCoref), std::string(kMaleName),
             std::string(kFemaleName)};
  std::set<std::string> rest(words.begin(), words.end());
  for (const std::string& w : rest) {
    if (std::find(tokens_.begin(), tokens_.end(), w) == tokens_.end()) {
      tokens_.push_back(w);
    }
  }
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
    index_.emplace(tokens_[i], i);
  }
}

Vocabulary Vocabulary::FromCorpus(const Corpus& corpus) {
  std::vector<std::string> words;
  for (const Clip& c : corpus.clips) {
    words.insert(words.end(), c.sentence.begin(), c.sentence.end());
  }
  return Vocabulary(words);
}

int Vocabulary::Index(std::string_view token) const {
  auto it = index_.find(token);
  return it == index_.end() ? 2 : it->second;
}

bool Vocabulary::IsPerson(int index) const { return index >= 3 && index <= 6; }

}  // namespace grounded
