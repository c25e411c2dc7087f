#include "vseg/diagnostics.hpp"

#include <iostream>

namespace vseg {

namespace {
thread_local WarningCapture* active_capture = nullptr;
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::HeaderParse: return "HeaderParse";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::BadLabel: return "BadLabel";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::NotNifti: return "NotNifti";
    case ErrorCode::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorCode::UnsupportedEndianness: return "UnsupportedEndianness";
    case ErrorCode::UnsupportedLayout: return "UnsupportedLayout";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::BadMode: return "BadMode";
    case ErrorCode::WrongModality: return "WrongModality";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::CenterOutOfBounds: return "CenterOutOfBounds";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NotScalar: return "NotScalar";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::TooFewCases: return "TooFewCases";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::ModelShapeMismatch: return "ModelShapeMismatch";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::MissingProvenance: return "MissingProvenance";
    case ErrorCode::BadTolerance: return "BadTolerance";
    case ErrorCode::CaseMismatch: return "CaseMismatch";
    case ErrorCode::BadArgs: return "BadArgs";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

void warn(const std::string& message) {
  if (active_capture != nullptr) {
    active_capture->messages_.push_back(message);
    return;
  }
  std::cerr << "warning: " << message << '\n';
}

WarningCapture::WarningCapture() : previous_(active_capture) { active_capture = this; }

WarningCapture::~WarningCapture() { active_capture = previous_; }

bool WarningCapture::contains(std::string_view needle) const {
  for (const auto& m : messages_) {
    if (m.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace vseg
