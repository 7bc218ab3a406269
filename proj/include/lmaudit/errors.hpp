// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lmaudit {

/// Pipeline stage that raised an error. Used for stage-tagged CLI diagnostics.
enum class Stage { tensor_io, vocab, spectral, metrics, compare, report, config };

enum class ErrorKind {
    unreadable,
    truncated_header,
    header_overrun,
    malformed_header,
    overlapping_ranges,
    bad_range,
    no_candidate_tensor,
    not_2d,
    non_finite,
    unsupported_dtype,
    length_mismatch,
    malformed_vocab,
    invalid_token_id,
    duplicate_token_id,
    vocab_too_large,
    shape,
    degenerate_column,
    out_of_range,
    mismatch,
    invalid_config,
    eigen_failure,
};

std::string_view to_string(Stage stage);
std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(Stage stage, ErrorKind kind, const std::string& message);

    Stage stage() const noexcept { return stage_; }
    ErrorKind kind() const noexcept { return kind_; }

    // Numerical failures map to a distinct process exit code.
    bool numerical() const noexcept { return kind_ == ErrorKind::eigen_failure; }

private:
    Stage stage_;
    ErrorKind kind_;
};

} // namespace lmaudit
