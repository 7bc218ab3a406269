// SPDX-License-Identifier: Apache-2.0
#include "lmaudit/errors.hpp"

#include <fmt/format.h>

namespace lmaudit {

std::string_view to_string(Stage stage) {
    switch (stage) {
    case Stage::tensor_io: return "tensor_io";
    case Stage::vocab: return "vocab";
    case Stage::spectral: return "spectral";
    case Stage::metrics: return "metrics";
    case Stage::compare: return "compare";
    case Stage::report: return "report";
    case Stage::config: return "config";
    }
    return "unknown";
}

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::unreadable: return "unreadable";
    case ErrorKind::truncated_header: return "truncated-header";
    case ErrorKind::header_overrun: return "header-overrun";
    case ErrorKind::malformed_header: return "malformed-header";
    case ErrorKind::overlapping_ranges: return "overlapping-ranges";
    case ErrorKind::bad_range: return "bad-range";
    case ErrorKind::no_candidate_tensor: return "no-candidate-tensor";
    case ErrorKind::not_2d: return "not-2d";
    case ErrorKind::non_finite: return "non-finite";
    case ErrorKind::unsupported_dtype: return "unsupported-dtype";
    case ErrorKind::length_mismatch: return "length-mismatch";
    case ErrorKind::malformed_vocab: return "malformed-vocab";
    case ErrorKind::invalid_token_id: return "invalid-token-id";
    case ErrorKind::duplicate_token_id: return "duplicate-token-id";
    case ErrorKind::vocab_too_large: return "vocab-too-large";
    case ErrorKind::shape: return "shape";
    case ErrorKind::degenerate_column: return "degenerate-column";
    case ErrorKind::out_of_range: return "out-of-range";
    case ErrorKind::mismatch: return "mismatch";
    case ErrorKind::invalid_config: return "invalid-config";
    case ErrorKind::eigen_failure: return "eigen-failure";
    }
    return "unknown";
}

Error::Error(Stage stage, ErrorKind kind, const std::string& message)
    : std::runtime_error(fmt::format("[{}] {}: {}", to_string(stage), to_string(kind), message))
    , stage_(stage)
    , kind_(kind) {}

} // namespace lmaudit
