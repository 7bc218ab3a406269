// SPDX-License-Identifier: Apache-2.0
#include "lmaudit/compare.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include <fmt/format.h>

#include "lmaudit/errors.hpp"

namespace lmaudit {

namespace {

[[noreturn]] void fail(ErrorKind kind, const std::string& message) {
    throw Error(Stage::compare, kind, message);
}

DiffPair make_pair(const AuditResult& a, std::size_t i, const AuditResult& b, std::size_t j) {
    const auto& ca = a.clusters[i].record;
    const auto& cb = b.clusters[j].record;
    DiffPair p;
    p.index_a = ca.vector_index;
    p.index_b = cb.vector_index;
    p.vcs_a = ca.vcs;
    p.vcs_b = cb.vcs;
    if (p.vcs_a && p.vcs_b) p.vcs_delta = *p.vcs_b - *p.vcs_a;
    p.jaccard = jaccard(ca.token_ids, cb.token_ids);
    return p;
}

void finish(DiffReport& report) {
    report.max_abs_vcs_delta = 0.0;
    for (const auto& p : report.pairs) {
        if (p.vcs_delta) report.max_abs_vcs_delta = std::max(report.max_abs_vcs_delta, std::abs(*p.vcs_delta));
    }
}

void require_clusters(const AuditResult& r, std::size_t n, const char* which) {
    if (r.clusters.size() < n) {
        fail(ErrorKind::mismatch, fmt::format("audit {} holds {} clusters, fewer than n = {}", which,
                                              r.clusters.size(), n));
    }
}

} // namespace

std::string_view to_string(AlignmentMode mode) {
    return mode == AlignmentMode::by_index ? "by-index" : "by-similarity";
}

double jaccard(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
    std::vector<std::uint32_t> sa(a.begin(), a.end());
    std::vector<std::uint32_t> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    sa.erase(std::unique(sa.begin(), sa.end()), sa.end());
    std::sort(sb.begin(), sb.end());
    sb.erase(std::unique(sb.begin(), sb.end()), sb.end());
    if (sa.empty() && sb.empty()) return 1.0;

    std::vector<std::uint32_t> common;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(common));
    const auto union_size = sa.size() + sb.size() - common.size();
    return static_cast<double>(common.size()) / static_cast<double>(union_size);
}

double column_alignment(const SvdFactors& fa, std::size_t i, const SvdFactors& fb, std::size_t j) {
    const auto ca = fa.u.col(static_cast<Eigen::Index>(i)).cast<double>();
    const auto cb = fb.u.col(static_cast<Eigen::Index>(j)).cast<double>();
    const double na = ca.norm();
    const double nb = cb.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::min(1.0, std::abs(ca.dot(cb)) / (na * nb));
}

DiffReport diff_by_index(const AuditResult& a, const AuditResult& b, std::size_t n, std::size_t k) {
    if (a.weights.rows != b.weights.rows) {
        fail(ErrorKind::mismatch,
             fmt::format("vocabulary sizes differ: {} vs {} rows", a.weights.rows, b.weights.rows));
    }
    if (a.config.n_vectors != n || b.config.n_vectors != n || a.config.k_tokens != k || b.config.k_tokens != k) {
        fail(ErrorKind::mismatch, fmt::format("audits used n/k = {}/{} and {}/{}, diff asked for {}/{}",
                                              a.config.n_vectors, a.config.k_tokens, b.config.n_vectors,
                                              b.config.k_tokens, n, k));
    }
    require_clusters(a, n, "a");
    require_clusters(b, n, "b");

    DiffReport report;
    report.alignment_mode = AlignmentMode::by_index;
    for (std::size_t i = 0; i < n; ++i) report.pairs.push_back(make_pair(a, i, b, i));
    finish(report);
    return report;
}

void attach_alignment(DiffReport& report, const SvdFactors& fa, const SvdFactors& fb) {
    if (fa.rows() != fb.rows()) {
        fail(ErrorKind::mismatch, "factor sets have different row counts");
    }
    for (auto& p : report.pairs) {
        if (p.index_a >= fa.cols() || p.index_b >= fb.cols()) {
            fail(ErrorKind::out_of_range, "pair index outside the factor columns");
        }
        p.alignment_cosine = column_alignment(fa, p.index_a, fb, p.index_b);
    }
}

DiffReport diff_by_similarity(const SvdFactors& fa, const SvdFactors& fb, const AuditResult& a,
                              const AuditResult& b, std::size_t n, double min_alignment) {
    if (fa.rows() != fb.rows() || a.weights.rows != b.weights.rows || fa.rows() != a.weights.rows) {
        fail(ErrorKind::mismatch, "checkpoints do not share a vocabulary size");
    }
    if (n == 0 || n > fa.rank() || n > fb.rank()) {
        fail(ErrorKind::out_of_range, fmt::format("n = {} exceeds a non-degenerate rank ({} / {})", n,
                                                  fa.rank(), fb.rank()));
    }
    require_clusters(a, n, "a");
    require_clusters(b, n, "b");

    struct Candidate {
        double cosine;
        std::size_t i;
        std::size_t j;
    };
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double c = column_alignment(fa, i, fb, j);
            if (c >= min_alignment) candidates.push_back({c, i, j});
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
        return std::tie(y.cosine, x.i, x.j) < std::tie(x.cosine, y.i, y.j);
    });

    std::vector<bool> used_a(n, false);
    std::vector<bool> used_b(n, false);
    DiffReport report;
    report.alignment_mode = AlignmentMode::by_similarity;
    for (const auto& c : candidates) {
        if (used_a[c.i] || used_b[c.j]) continue;
        used_a[c.i] = used_b[c.j] = true;
        auto pair = make_pair(a, c.i, b, c.j);
        pair.alignment_cosine = c.cosine;
        report.pairs.push_back(std::move(pair));
    }
    std::sort(report.pairs.begin(), report.pairs.end(),
              [](const DiffPair& x, const DiffPair& y) { return x.index_a < y.index_a; });
    for (std::size_t i = 0; i < n; ++i) {
        if (!used_a[i]) report.unmatched_a.push_back(i);
        if (!used_b[i]) report.unmatched_b.push_back(i);
    }
    finish(report);
    return report;
}

} // namespace lmaudit
