#include "tir/error.hpp"

namespace tir {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::PayloadUnparsable: return "PayloadUnparsable";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::JudgeUnreachable: return "JudgeUnreachable";
    case ErrorCode::VerdictUnparsable: return "VerdictUnparsable";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ToolNotFound: return "ToolNotFound";
    case ErrorCode::ArgValidation: return "ArgValidation";
    case ErrorCode::BackendFailure: return "BackendFailure";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::InvalidBBox: return "InvalidBBox";
    case ErrorCode::ImageDecode: return "ImageDecode";
    case ErrorCode::EmptyIndexForCategory: return "EmptyIndexForCategory";
    case ErrorCode::FetchFailure: return "FetchFailure";
    case ErrorCode::WindowOutOfRange: return "WindowOutOfRange";
    case ErrorCode::AssistantFailure: return "AssistantFailure";
    case ErrorCode::SandboxTimeout: return "SandboxTimeout";
    case ErrorCode::SandboxViolation: return "SandboxViolation";
    case ErrorCode::LaunchFailure: return "LaunchFailure";
    case ErrorCode::FixtureMiss: return "FixtureMiss";
    case ErrorCode::StoreCorrupt: return "StoreCorrupt";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyManifest: return "EmptyManifest";
    case ErrorCode::PolicyFailure: return "PolicyFailure";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace tir
