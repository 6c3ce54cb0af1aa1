#include "topotext/error.hpp"

namespace topotext {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::UnstableShape: return "UnstableShape";
    case ErrorKind::NoValidShape: return "NoValidShape";
    case ErrorKind::InvalidLabel: return "InvalidLabel";
    case ErrorKind::InvalidParams: return "InvalidParams";
    case ErrorKind::MappingError: return "MappingError";
    case ErrorKind::InvalidPlan: return "InvalidPlan";
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::UndefinedGain: return "UndefinedGain";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::CorruptFile: return "CorruptFile";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace topotext
