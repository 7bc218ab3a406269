// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "lmaudit/tensor_io.hpp"

namespace lmaudit {

/// Economy SVD W = U diag(s) Vt of a V x d weight matrix.
///
/// Columns of `u` are token-score directions. Columns whose singular value
/// falls below `rel_cutoff * s[0]` are flagged degenerate and zeroed in `u`;
/// they carry no usable direction. Every non-degenerate column is sign
/// canonicalised: its largest-magnitude entry (lowest row on ties) is positive,
/// with the matching row of `vt` flipped alongside.
struct SvdFactors {
    Eigen::MatrixXf u;       // V x d, column-major
    std::vector<double> s;   // d, non-increasing
    Eigen::MatrixXd vt;      // d x d, rows are right singular vectors
    std::vector<bool> degenerate;
    double rel_cutoff = 1e-6;

    std::size_t rows() const { return static_cast<std::size_t>(u.rows()); }
    std::size_t cols() const { return s.size(); }
    /// Count of non-degenerate directions. Degenerate columns form a suffix.
    std::size_t rank() const;
};

/// Gram-path SVD: eigendecompose W^T W (accumulated in double), then
/// recover U = W V diag(s)^-1. Requires rows >= cols.
SvdFactors compute_svd(const WeightMatrix& w, double rel_cutoff = 1e-6);

/// Singular values only (same Gram path, no U back-multiplication).
std::vector<double> singular_values(const WeightMatrix& w);

/// Applies the largest-|entry|-positive rule to every (u column, vt row) pair.
/// Idempotent; leaves u * diag(s) * vt bit-for-bit unchanged.
void canonicalize_signs(SvdFactors& f);

struct ClusterRecord {
    std::size_t vector_index = 0;
    double singular_value = 0.0;
    std::vector<std::uint32_t> token_ids;
    std::vector<double> scores;       // u[t_j, i], descending
    std::vector<double> score_ratios; // scores[j] / scores[0] * 100
    std::optional<double> vcs;        // filled by metrics
};

/// The k largest signed entries of u[:, i], ties by ascending token id.
ClusterRecord top_k_tokens(const SvdFactors& f, std::size_t i, std::size_t k);

enum class DecayLabel { stepwise_clusters, cliff_plateau, gentle_slope, unclassified };

std::string_view to_string(DecayLabel label);

/// Ratio thresholds for the decay-profile classifier (all are ratios S[i]/S[i+1]).
struct DecayThresholds {
    double cliff_ratio = 4.0;
    double plateau_max = 1.25;
    double step_gap = 1.3;
    double gentle_max = 2.2;
};

struct SpectrumProfile {
    std::vector<double> top_values;
    std::vector<double> ratios;   // S[i] / S[i+1]
    std::vector<double> log_gaps; // ln S[i] - ln S[i+1]
    double leading_ratio = 0.0;
    DecayLabel decay_label = DecayLabel::unclassified;
};

/// Labels a sequence of log gaps (length m-1) with the heuristic decay classifier.
DecayLabel classify_decay(std::span<const double> log_gaps, const DecayThresholds& params = {});

/// Profile of the first m values of a positive, non-increasing spectrum.
SpectrumProfile spectrum_profile(std::span<const double> values, std::size_t m = 20,
                                 const DecayThresholds& params = {});

/// Profile over the non-degenerate singular values of `f`.
SpectrumProfile spectrum_profile(const SvdFactors& f, std::size_t m = 20, const DecayThresholds& params = {});

} // namespace lmaudit
