#include "semprobe/errors.hpp"

namespace semprobe {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedHeader: return "malformed_header";
    case ErrorCode::DimensionMismatch: return "dimension_mismatch";
    case ErrorCode::DuplicateToken: return "duplicate_token";
    case ErrorCode::EmptyFile: return "empty_file";
    case ErrorCode::InvalidToken: return "invalid_token";
    case ErrorCode::UnknownWord: return "unknown_word";
    case ErrorCode::ZeroQuery: return "zero_query";
    case ErrorCode::KTooLarge: return "k_too_large";
    case ErrorCode::DegeneratePoints: return "degenerate_points";
    case ErrorCode::ZeroVector: return "zero_vector";
    case ErrorCode::ConstantInput: return "constant_input";
    case ErrorCode::ShapeMismatch: return "shape_mismatch";
    case ErrorCode::StaleTape: return "stale_tape";
    case ErrorCode::ConfigInvalid: return "config_invalid";
    case ErrorCode::NonFiniteLoss: return "non_finite_loss";
    case ErrorCode::BadMagic: return "bad_magic";
    case ErrorCode::VersionUnsupported: return "version_unsupported";
    case ErrorCode::CorruptTensor: return "corrupt_tensor";
    case ErrorCode::DimensionOutOfRange: return "dimension_out_of_range";
    case ErrorCode::ZeroSemanticDirection: return "zero_semantic_direction";
    case ErrorCode::EmptyRange: return "empty_range";
    case ErrorCode::InsufficientPairs: return "insufficient_pairs";
    case ErrorCode::NoUsefulDims: return "no_useful_dims";
    case ErrorCode::UnknownModel: return "unknown_model";
    case ErrorCode::BadRange: return "bad_range";
    case ErrorCode::BadRequest: return "bad_request";
    case ErrorCode::PortInUse: return "port_in_use";
    case ErrorCode::Io: return "io_error";
  }
  return "error";
}

}  // namespace semprobe
