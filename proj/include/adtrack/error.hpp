#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace adtrack {

// Thrown when a caller breaks an operation's precondition (bad shapes,
// out-of-range depths, degenerate boxes).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Sequence ingestion failure; the message names the offending file and line.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed checkpoint file.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Training diverged (non-finite loss).
class TrainingFailure : public std::runtime_error {
 public:
  TrainingFailure(const std::string& what, int epoch)
      : std::runtime_error(what + " (epoch " + std::to_string(epoch) + ")"),
        epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace adtrack
