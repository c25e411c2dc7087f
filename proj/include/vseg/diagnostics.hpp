#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vseg {

enum class ErrorCode {
  // volume-io
  MissingFile,
  HeaderParse,
  SizeMismatch,
  BadLabel,
  IoFailure,
  NotNifti,
  UnsupportedDatatype,
  UnsupportedEndianness,
  UnsupportedLayout,
  Truncated,
  // preprocess / sampler
  BadConfig,
  BadMode,
  WrongModality,
  GeometryMismatch,
  CenterOutOfBounds,
  // autodiff / network
  ShapeMismatch,
  NotScalar,
  NonFinite,
  // trainer
  OutOfRange,
  TooFewCases,
  EmptySplit,
  NonFiniteLoss,
  // inference / metrics
  ModelShapeMismatch,
  ConfigMismatch,
  MissingProvenance,
  BadTolerance,
  CaseMismatch,
  // cli
  BadArgs,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

// Non-fatal conditions (degenerate shapes, constant MRI volumes, empty
// foreground). Printed to stderr unless a WarningCapture is active on the
// current thread.
void warn(const std::string& message);

class WarningCapture {
 public:
  WarningCapture();
  ~WarningCapture();
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }
  bool contains(std::string_view needle) const;

 private:
  friend void warn(const std::string& message);
  std::vector<std::string> messages_;
  WarningCapture* previous_;
};

}  // namespace vseg
