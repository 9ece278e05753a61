#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace udm {

enum class ErrorCode {
  UnsupportedFormat,
  CorruptFile,
  TooShort,
  ChannelMismatch,
  FrameCountMismatch,
  MissingChannels,
  TemplateInventoryMismatch,
  BadExternalFile,
  InfeasibleLength,
  UnknownPhone,
  ShapeMismatch,
  InvalidSpec,
  InvalidConfig,
  LengthMismatch,
  ZeroDuration,
  TranscriptUnmappable,
  UnknownReport,
  UnknownEvent,
  StaleVersion,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the engine carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// A stage error re-raised by the pipeline with the stage that failed.
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const Error& cause)
      : Error(cause.code(), "stage '" + stage + "': " + cause.what()), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace udm
