#ifndef GROUNDED_ERRORS_H_
#define GROUNDED_ERRORS_H_

#include <stdexcept>
#include <string>

namespace grounded {

// Invalid or infeasible configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A pipeline stage failed; `stage()` names it.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& cause)
      : std::runtime_error("stage '" + stage + "' failed: " + cause),
        stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace grounded

#endif  // GROUNDED_ERRORS_H_
