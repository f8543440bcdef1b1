#ifndef GROUNDED_TYPES_H_
#define GROUNDED_TYPES_H_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "grounded/matrix.h"

namespace grounded {

// Track caps: at most 50 current tracks and 7 previous tracks (plus null).
inline constexpr int kMaxCurrentTracks = 50;
inline constexpr int kMaxPreviousTracks = 7;
inline constexpr int kStatDim = 11;

enum class Gender { kMale, kFemale };

char GenderCode(Gender g);  // 'M' or 'F'
Gender ParseGender(std::string_view code);

// Axis-aligned box anchored at its top-left corner.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }
  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double area() const { return w * h; }

  friend bool operator==(const Box&, const Box&) = default;
};

double IntersectionArea(const Box& a, const Box& b);
double Iou(const Box& a, const Box& b);

struct Detection {
  int frame = 0;
  Box box;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

// Head detection filter: score >= 0.5 and both dimensions >= 40 px.
inline constexpr double kMinDetectionScore = 0.5;
inline constexpr double kMinDetectionSize = 40.0;
bool PassesDetectionFilter(const Detection& d);

struct Track {
  int id = 0;  // positive; 0 is reserved for the null previous track
  std::vector<Detection> detections;
  Vec v_head;
  Vec v_body;
  Vec v_stat;

  int length() const { return static_cast<int>(detections.size()); }
  double MeanArea() const;
  double MeanCenterX() const;
  double MeanCenterY() const;

  friend bool operator==(const Track&, const Track&) = default;
};

struct Mention {
  int position = 0;  // token index into the clip sentence
  int character_id = 0;
  Gender gender = Gender::kMale;
  std::vector<int> gt_track_ids;
  std::optional<int> coref_prev;

  friend bool operator==(const Mention&, const Mention&) = default;
};

struct Clip {
  std::string id;
  std::optional<std::string> prev_id;
  std::string split = "train";
  std::array<double, 2> frame_size = {640.0, 360.0};
  std::vector<Track> tracks;
  Vec v_global;
  std::vector<std::string> sentence;
  std::vector<Mention> mentions;

  const Track* FindTrack(int track_id) const;
  friend bool operator==(const Clip&, const Clip&) = default;
};

struct Corpus {
  std::vector<Clip> clips;

  const Clip* Find(const std::string& id) const;
  const Clip* Previous(const Clip& clip) const;
  friend bool operator==(const Corpus&, const Corpus&) = default;
};

// Sorts tracks by length (stable, longest first) and keeps at most
// `max_tracks`; mention gt lists drop references to removed tracks.
void CapTracks(Clip& clip, int max_tracks = kMaxCurrentTracks);

// Person tokens.
inline constexpr std::string_view kMaleCoref = "MaleCoref";
inline constexpr std::string_view kFemaleCoref = "FemaleCoref";
inline constexpr std::string_view kMaleName = "MaleName";
inline constexpr std::string_view kFemaleName = "FemaleName";
inline constexpr std::string_view kBos = "<bos>";
inline constexpr std::string_view kEos = "<eos>";
inline constexpr std::string_view kUnk = "<unk>";

bool IsPersonToken(std::string_view token);
bool IsNameToken(std::string_view token);
bool IsCorefToken(std::string_view token);
std::string PersonToken(Gender gender, bool coref);

class Vocabulary {
 public:
  Vocabulary() = default;
  // Specials and the four person tokens always come first, followed by the
  // given words sorted and de-duplicated.
  explicit Vocabulary(const std::vector<std::string>& words);
  static Vocabulary FromCorpus(const Corpus& corpus);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int index) const { return tokens_.at(index); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  // Unknown words map to <unk>.
  int Index(std::string_view token) const;
  bool IsPerson(int index) const;
  int bos() const { return 0; }
  int eos() const { return 1; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int, std::less<>> index_;
};

}  // namespace grounded

#endif  // GROUNDED_TYPES_H_
