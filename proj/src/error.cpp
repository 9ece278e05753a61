#include "udm/error.hpp"

namespace udm {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::ChannelMismatch: return "ChannelMismatch";
    case ErrorCode::FrameCountMismatch: return "FrameCountMismatch";
    case ErrorCode::MissingChannels: return "MissingChannels";
    case ErrorCode::TemplateInventoryMismatch: return "TemplateInventoryMismatch";
    case ErrorCode::BadExternalFile: return "BadExternalFile";
    case ErrorCode::InfeasibleLength: return "InfeasibleLength";
    case ErrorCode::UnknownPhone: return "UnknownPhone";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ZeroDuration: return "ZeroDuration";
    case ErrorCode::TranscriptUnmappable: return "TranscriptUnmappable";
    case ErrorCode::UnknownReport: return "UnknownReport";
    case ErrorCode::UnknownEvent: return "UnknownEvent";
    case ErrorCode::StaleVersion: return "StaleVersion";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace udm
