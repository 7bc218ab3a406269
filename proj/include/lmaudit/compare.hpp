// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lmaudit/audit.hpp"
#include "lmaudit/spectral.hpp"

namespace lmaudit {

enum class AlignmentMode { by_index, by_similarity };

std::string_view to_string(AlignmentMode mode);

struct DiffPair {
    std::size_t index_a = 0;
    std::size_t index_b = 0;
    std::optional<double> alignment_cosine; // |cos(u_a[:, index_a], u_b[:, index_b])|
    std::optional<double> vcs_a;
    std::optional<double> vcs_b;
    std::optional<double> vcs_delta; // vcs_b - vcs_a when both are defined
    double jaccard = 0.0;            // over top-k token id sets
};

struct DiffReport {
    AlignmentMode alignment_mode = AlignmentMode::by_index;
    std::vector<DiffPair> pairs;
    std::vector<std::size_t> unmatched_a; // by-similarity only
    std::vector<std::size_t> unmatched_b;
    double max_abs_vcs_delta = 0.0;
};

/// Jaccard index of two id lists treated as sets.
double jaccard(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

/// |cos| between u_a[:, i] and u_b[:, j].
double column_alignment(const SvdFactors& fa, std::size_t i, const SvdFactors& fb, std::size_t j);

/// Pairs (i, i) for i < n. Both audits must share vocabulary size, n and k.
DiffReport diff_by_index(const AuditResult& a, const AuditResult& b, std::size_t n, std::size_t k);

/// Fills alignment_cosine on every pair of a report from the two factor sets.
void attach_alignment(DiffReport& report, const SvdFactors& fa, const SvdFactors& fb);

/// Greedy matching of the first n u-columns by largest |cos|, ties by (i, j);
/// pairs below `min_alignment` stay unmatched.
DiffReport diff_by_similarity(const SvdFactors& fa, const SvdFactors& fb, const AuditResult& a,
                              const AuditResult& b, std::size_t n, double min_alignment = 0.1);

} // namespace lmaudit
