#include "aesthetic/error.hpp"

namespace aesthetic {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::AllZeroCounts: return "AllZeroCounts";
    case ErrorCode::InvalidDistribution: return "InvalidDistribution";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::UnsupportedExponent: return "UnsupportedExponent";
    case ErrorCode::EvenKernel: return "EvenKernel";
    case ErrorCode::NonPositiveSigma: return "NonPositiveSigma";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::NotSingleChannel: return "NotSingleChannel";
    case ErrorCode::InvalidImage: return "InvalidImage";
    case ErrorCode::InvalidArchitecture: return "InvalidArchitecture";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::RangeError: return "RangeError";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::EmptyIntersection: return "EmptyIntersection";
    case ErrorCode::LabelMismatch: return "LabelMismatch";
    case ErrorCode::UnknownCategory: return "UnknownCategory";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace aesthetic
