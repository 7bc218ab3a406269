// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lmaudit/spectral.hpp"
#include "lmaudit/tensor_io.hpp"
#include "lmaudit/vocab.hpp"

namespace lmaudit {

/// Vocabulary cluster score: mean pairwise cosine between the W rows of the
/// given tokens. Rows with norm below `eps` are left out; fewer than two
/// usable rows leaves the score undefined.
std::optional<double> vcs(const WeightMatrix& w, std::span<const std::uint32_t> token_ids, double eps = 1e-12);
std::optional<double> vcs(const WeightMatrix& w, const ClusterRecord& cluster, double eps = 1e-12);

struct VcsSummary {
    std::vector<std::pair<std::size_t, std::optional<double>>> per_vector;
    std::optional<double> mean_vcs; // over defined values only
    std::optional<double> max_vcs;
    std::optional<std::size_t> argmax_index; // lowest index on ties
    std::size_t undefined_count = 0;
};

/// top_k_tokens + vcs for each of the first n directions.
std::vector<ClusterRecord> build_clusters(const WeightMatrix& w, const SvdFactors& f, std::size_t n, std::size_t k);

VcsSummary summarize_vcs(std::span<const ClusterRecord> clusters);

VcsSummary vcs_summary(const WeightMatrix& w, const SvdFactors& f, std::size_t n = 30, std::size_t k = 20);

struct WpsTable {
    std::vector<double> wps;
    double mu = 0.0;
    double sigma = 0.0; // population standard deviation
    double threshold = 0.0;
    double z = 2.0;
};

/// Weighted projection score per token: sum over non-degenerate k of s[k] * |u[v, k]|.
WpsTable wps_table(const SvdFactors& f, double z = 2.0);

struct GlitchCandidate {
    std::uint32_t id = 0;
    double wps = 0.0;
    std::string token; // rendered
};

struct GlitchReport {
    std::vector<GlitchCandidate> candidates; // ascending wps, then id
    std::size_t count = 0;
    double fraction = 0.0;
};

/// Tokens with wps strictly below the threshold.
GlitchReport glitch_candidates(const WpsTable& t, const Vocabulary& vocab);

} // namespace lmaudit
