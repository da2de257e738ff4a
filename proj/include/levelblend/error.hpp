#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace levelblend {

enum class ErrorCode {
  UnknownCharacter,
  RaggedLines,
  CannotNormalize,
  TooSmall,
  InvalidShape,
  InvalidTileId,
  InvalidConfig,
  EmptyCorpus,
  NonFiniteLoss,
  CorruptCheckpoint,
  KindMismatch,
  NoEncoder,
  NonFiniteLatent,
  InvalidBudget,
  NonFiniteFitness,
  InvalidSpec,
  IoError,
  NotFound,
  VersionConflict,
  BudgetExceeded,
  BadRequest,
};

// Stable upper-snake identifier, used on the wire (e.g. "NO_ENCODER").
std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace levelblend
