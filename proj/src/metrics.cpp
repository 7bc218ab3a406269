// SPDX-License-Identifier: Apache-2.0
#include "lmaudit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "lmaudit/errors.hpp"

namespace lmaudit {

std::optional<double> vcs(const WeightMatrix& w, std::span<const std::uint32_t> token_ids, double eps) {
    std::vector<std::span<const float>> rows;
    std::vector<double> norms;
    for (auto id : token_ids) {
        if (id >= w.rows) {
            throw Error(Stage::metrics, ErrorKind::out_of_range,
                        fmt::format("token id {} outside the {}-row weight matrix", id, w.rows));
        }
        const auto row = w.row(id);
        double sq = 0.0;
        for (float x : row) sq += static_cast<double>(x) * x;
        const double norm = std::sqrt(sq);
        if (norm >= eps) {
            rows.push_back(row);
            norms.push_back(norm);
        }
    }

    const std::size_t m = rows.size();
    if (m < 2) {
        return std::nullopt;
    }
    double total = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
            double dot = 0.0;
            for (std::size_t c = 0; c < w.cols; ++c) dot += static_cast<double>(rows[a][c]) * rows[b][c];
            total += std::clamp(dot / (norms[a] * norms[b]), -1.0, 1.0);
        }
    }
    return 2.0 * total / (static_cast<double>(m) * static_cast<double>(m - 1));
}

std::optional<double> vcs(const WeightMatrix& w, const ClusterRecord& cluster, double eps) {
    return vcs(w, cluster.token_ids, eps);
}

std::vector<ClusterRecord> build_clusters(const WeightMatrix& w, const SvdFactors& f, std::size_t n, std::size_t k) {
    if (n == 0 || n > f.rank()) {
        throw Error(Stage::metrics, ErrorKind::out_of_range,
                    fmt::format("n = {} singular vectors requested but the non-degenerate rank is {}", n, f.rank()));
    }
    if (w.rows != f.rows() || w.cols != f.cols()) {
        throw Error(Stage::metrics, ErrorKind::mismatch, "factors do not belong to this weight matrix");
    }
    std::vector<ClusterRecord> clusters;
    clusters.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto record = top_k_tokens(f, i, k);
        record.vcs = vcs(w, record);
        clusters.push_back(std::move(record));
    }
    return clusters;
}

VcsSummary summarize_vcs(std::span<const ClusterRecord> clusters) {
    VcsSummary summary;
    double sum = 0.0;
    std::size_t defined = 0;
    for (const auto& c : clusters) {
        summary.per_vector.emplace_back(c.vector_index, c.vcs);
        if (!c.vcs) {
            ++summary.undefined_count;
            continue;
        }
        sum += *c.vcs;
        ++defined;
        if (!summary.max_vcs || *c.vcs > *summary.max_vcs) {
            summary.max_vcs = c.vcs;
            summary.argmax_index = c.vector_index;
        }
    }
    if (defined > 0) {
        summary.mean_vcs = sum / static_cast<double>(defined);
    }
    return summary;
}

VcsSummary vcs_summary(const WeightMatrix& w, const SvdFactors& f, std::size_t n, std::size_t k) {
    const auto clusters = build_clusters(w, f, n, k);
    return summarize_vcs(clusters);
}

WpsTable wps_table(const SvdFactors& f, double z) {
    if (!(z >= 0.0) || !std::isfinite(z)) {
        throw Error(Stage::metrics, ErrorKind::out_of_range, "z must be finite and non-negative");
    }
    const std::size_t rows = f.rows();
    WpsTable t;
    t.z = z;
    t.wps.assign(rows, 0.0);
    for (std::size_t k = 0; k < f.cols(); ++k) {
        if (f.degenerate[k]) continue;
        const auto col = f.u.col(static_cast<Eigen::Index>(k));
        for (std::size_t v = 0; v < rows; ++v) {
            t.wps[v] += f.s[k] * std::abs(static_cast<double>(col[static_cast<Eigen::Index>(v)]));
        }
    }

    const double n = static_cast<double>(rows);
    t.mu = std::accumulate(t.wps.begin(), t.wps.end(), 0.0) / n;
    double sq = 0.0;
    for (double x : t.wps) sq += (x - t.mu) * (x - t.mu);
    t.sigma = std::sqrt(sq / n);
    t.threshold = t.mu - z * t.sigma;
    return t;
}

GlitchReport glitch_candidates(const WpsTable& t, const Vocabulary& vocab) {
    GlitchReport report;
    for (std::size_t v = 0; v < t.wps.size(); ++v) {
        if (t.wps[v] < t.threshold) {
            report.candidates.push_back({static_cast<std::uint32_t>(v), t.wps[v], render_token(vocab, v)});
        }
    }
    std::stable_sort(report.candidates.begin(), report.candidates.end(),
                     [](const GlitchCandidate& a, const GlitchCandidate& b) { return a.wps < b.wps; });
    report.count = report.candidates.size();
    report.fraction = t.wps.empty() ? 0.0 : static_cast<double>(report.count) / static_cast<double>(t.wps.size());
    return report;
}

} // namespace lmaudit
