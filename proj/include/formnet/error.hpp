#pragma once

#include <stdexcept>
#include <string>

namespace formnet {

// Base error for everything this library throws on invalid inputs or failed
// numerical procedures. `kind` is a stable machine-readable tag; `what()` is
// the human-readable message.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

inline void require(bool cond, const std::string& kind, const std::string& message) {
  if (!cond) throw Error(kind, message);
}

}  // namespace formnet
