#ifndef GROUNDED_PREDICTION_H_
#define GROUNDED_PREDICTION_H_

#include <string>
#include <vector>

namespace grounded {

// One emitted person word with its grounding: `c` is a current-clip track
// id, `p` a previous-clip track id or 0 for the null track.
struct GroundingPrediction {
  int tau = 0;
  std::string word;
  int c = 0;
  int p = 0;

  friend bool operator==(const GroundingPrediction&,
                         const GroundingPrediction&) = default;
};

struct ClipPrediction {
  std::string id;
  std::vector<std::string> sentence;
  std::vector<GroundingPrediction> predictions;

  friend bool operator==(const ClipPrediction&, const ClipPrediction&) = default;
};

}  // namespace grounded

#endif  // GROUNDED_PREDICTION_H_
