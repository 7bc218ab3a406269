// SPDX-License-Identifier: Apache-2.0
#include "lmaudit/spectral.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "lmaudit/errors.hpp"

namespace lmaudit {

namespace {

using Index = Eigen::Index;
using RowMajorMapF = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

constexpr Index kBlockRows = 2048;
// Fixed so the Gram reduction order never depends on the machine's thread count.
constexpr Index kGramPartitions = 4;

[[noreturn]] void fail(ErrorKind kind, const std::string& message) {
    throw Error(Stage::spectral, kind, message);
}

// Runs f(0..n-1) on up to hardware_concurrency workers. Each task owns its output.
template <typename F>
void parallel_for(std::size_t n, F&& f) {
    const std::size_t workers =
        std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::future<void>> futures;
    futures.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
        futures.push_back(std::async(std::launch::async, [&] {
            for (std::size_t i = next++; i < n; i = next++) f(i);
        }));
    }
    for (auto& fut : futures) fut.get();
}

void validate_input(const WeightMatrix& w) {
    if (w.rows < w.cols) {
        fail(ErrorKind::shape, fmt::format("weight matrix is {}x{}; rows (vocabulary) must be >= cols (hidden). "
                                           "Transposed checkpoints are rejected rather than silently flipped",
                                           w.rows, w.cols));
    }
    if (w.rows * w.cols != w.data.size() || w.cols == 0) {
        fail(ErrorKind::shape, "weight matrix storage does not match its shape");
    }
    for (std::size_t i = 0; i < w.data.size(); ++i) {
        if (!std::isfinite(w.data[i])) {
            fail(ErrorKind::non_finite, fmt::format("non-finite entry at ({}, {})", i / w.cols, i % w.cols));
        }
    }
}

RowMajorMapF as_map(const WeightMatrix& w) {
    return RowMajorMapF(w.data.data(), static_cast<Index>(w.rows), static_cast<Index>(w.cols));
}

Eigen::MatrixXd gram_matrix(const WeightMatrix& w) {
    const auto W = as_map(w);
    const Index rows = W.rows();
    const Index d = W.cols();
    const Index blocks = (rows + kBlockRows - 1) / kBlockRows;
    const Index partitions = std::min(kGramPartitions, blocks);

    std::vector<Eigen::MatrixXd> partial(static_cast<std::size_t>(partitions), Eigen::MatrixXd::Zero(d, d));
    parallel_for(static_cast<std::size_t>(partitions), [&](std::size_t p) {
        const Index first = static_cast<Index>(p) * blocks / partitions;
        const Index last = (static_cast<Index>(p) + 1) * blocks / partitions;
        for (Index b = first; b < last; ++b) {
            const Index r0 = b * kBlockRows;
            const Index nr = std::min(kBlockRows, rows - r0);
            const Eigen::MatrixXd block = W.middleRows(r0, nr).cast<double>();
            partial[p].selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
        }
    });

    Eigen::MatrixXd gram = std::move(partial[0]);
    for (std::size_t p = 1; p < partial.size(); ++p) gram += partial[p];
    return gram.selfadjointView<Eigen::Lower>();
}

// Eigenpairs of the Gram matrix, reordered to descending eigenvalue (stable on ties).
struct SortedEigen {
    std::vector<double> values;
    Eigen::MatrixXd vectors; // columns
};

SortedEigen sorted_eigen(const Eigen::MatrixXd& gram, bool with_vectors) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
        gram, with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        fail(ErrorKind::eigen_failure, "symmetric eigendecomposition of the Gram matrix did not converge");
    }
    const auto& lambda = solver.eigenvalues();
    const Index d = lambda.size();
    std::vector<Index> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return lambda[a] > lambda[b]; });

    SortedEigen out;
    out.values.reserve(static_cast<std::size_t>(d));
    for (auto j : order) out.values.push_back(lambda[j]);
    if (with_vectors) {
        out.vectors.resize(d, d);
        for (Index i = 0; i < d; ++i) out.vectors.col(i) = solver.eigenvectors().col(order[static_cast<std::size_t>(i)]);
    }
    return out;
}

} // namespace

std::size_t SvdFactors::rank() const {
    return static_cast<std::size_t>(std::count(degenerate.begin(), degenerate.end(), false));
}

std::vector<double> singular_values(const WeightMatrix& w) {
    validate_input(w);
    auto eig = sorted_eigen(gram_matrix(w), false);
    for (auto& v : eig.values) v = std::sqrt(std::max(v, 0.0));
    return eig.values;
}

SvdFactors compute_svd(const WeightMatrix& w, double rel_cutoff) {
    validate_input(w);
    if (!(rel_cutoff >= 0.0) || !std::isfinite(rel_cutoff)) {
        fail(ErrorKind::out_of_range, "rel_cutoff must be a finite non-negative number");
    }
    const auto W = as_map(w);
    const Index rows = W.rows();
    const Index d = W.cols();

    auto eig = sorted_eigen(gram_matrix(w), true);

    SvdFactors f;
    f.rel_cutoff = rel_cutoff;
    f.s.resize(static_cast<std::size_t>(d));
    f.degenerate.resize(static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < f.s.size(); ++i) f.s[i] = std::sqrt(std::max(eig.values[i], 0.0));
    for (std::size_t i = 0; i < f.s.size(); ++i) {
        // an all-zero matrix has no direction at all
        f.degenerate[i] = f.s[0] == 0.0 || f.s[i] < rel_cutoff * f.s[0];
    }
    f.vt = eig.vectors.transpose();

    Eigen::MatrixXd projector = eig.vectors;
    for (Index i = 0; i < d; ++i) {
        if (f.degenerate[static_cast<std::size_t>(i)]) {
            projector.col(i).setZero();
        } else {
            projector.col(i) /= f.s[static_cast<std::size_t>(i)];
        }
    }

    f.u.resize(rows, d);
    const Index blocks = (rows + kBlockRows - 1) / kBlockRows;
    parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t b) {
        const Index r0 = static_cast<Index>(b) * kBlockRows;
        const Index nr = std::min(kBlockRows, rows - r0);
        const Eigen::MatrixXd block = W.middleRows(r0, nr).cast<double>();
        f.u.middleRows(r0, nr) = (block * projector).cast<float>();
    });

    canonicalize_signs(f);
    return f;
}

void canonicalize_signs(SvdFactors& f) {
    const Index d = static_cast<Index>(f.s.size());
    for (Index i = 0; i < d; ++i) {
        bool flip = false;
        if (!f.degenerate[static_cast<std::size_t>(i)]) {
            const auto col = f.u.col(i);
            Index best = 0;
            for (Index r = 1; r < col.size(); ++r) {
                if (std::abs(col[r]) > std::abs(col[best])) best = r;
            }
            flip = col[best] < 0.0f;
        } else {
            // no u direction; fix the vt row by its own largest entry so output is reproducible
            const auto row = f.vt.row(i);
            Index best = 0;
            for (Index c = 1; c < row.size(); ++c) {
                if (std::abs(row[c]) > std::abs(row[best])) best = c;
            }
            flip = row[best] < 0.0;
        }
        if (flip) {
            f.u.col(i) = -f.u.col(i);
            f.vt.row(i) = -f.vt.row(i);
        }
    }
}

ClusterRecord top_k_tokens(const SvdFactors& f, std::size_t i, std::size_t k) {
    if (i >= f.cols()) {
        fail(ErrorKind::out_of_range, fmt::format("vector index {} outside 0..{}", i, f.cols()));
    }
    if (f.degenerate[i]) {
        fail(ErrorKind::degenerate_column,
             fmt::format("U[:,{}] is degenerate (S[{}] below rel_cutoff); it has no meaningful direction", i, i));
    }
    if (k == 0 || k > f.rows()) {
        fail(ErrorKind::out_of_range, fmt::format("k = {} must lie in 1..{}", k, f.rows()));
    }

    const auto col = f.u.col(static_cast<Index>(i));
    std::vector<std::uint32_t> ids(f.rows());
    std::iota(ids.begin(), ids.end(), std::uint32_t{0});
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                      [&](std::uint32_t a, std::uint32_t b) {
                          return col[a] != col[b] ? col[a] > col[b] : a < b;
                      });
    ids.resize(k);

    ClusterRecord record;
    record.vector_index = i;
    record.singular_value = f.s[i];
    record.token_ids = std::move(ids);
    for (auto id : record.token_ids) record.scores.push_back(col[id]);
    for (auto score : record.scores) record.score_ratios.push_back(score / record.scores[0] * 100.0);
    return record;
}

std::string_view to_string(DecayLabel label) {
    switch (label) {
    case DecayLabel::stepwise_clusters: return "stepwise-clusters";
    case DecayLabel::cliff_plateau: return "cliff-plateau";
    case DecayLabel::gentle_slope: return "gentle-slope";
    case DecayLabel::unclassified: return "unclassified";
    }
    return "unclassified";
}

DecayLabel classify_decay(std::span<const double> log_gaps, const DecayThresholds& params) {
    if (log_gaps.empty()) {
        return DecayLabel::unclassified;
    }
    const auto tail = log_gaps.subspan(1);
    const double tail_max = tail.empty() ? 0.0 : *std::max_element(tail.begin(), tail.end());
    if (log_gaps[0] >= std::log(params.cliff_ratio) && tail_max <= std::log(params.plateau_max)) {
        return DecayLabel::cliff_plateau;
    }

    // steps at i >= 1, and a plateau of >= 2 values between some consecutive pair of steps
    std::vector<std::size_t> steps;
    for (std::size_t i = 1; i < log_gaps.size(); ++i) {
        if (log_gaps[i] >= std::log(params.step_gap)) steps.push_back(i);
    }
    for (std::size_t j = 1; j < steps.size(); ++j) {
        if (steps[j] - steps[j - 1] >= 2) return DecayLabel::stepwise_clusters;
    }

    const double gentle = std::log(params.gentle_max);
    if (std::all_of(log_gaps.begin(), log_gaps.end(), [&](double g) { return g <= gentle; })) {
        return DecayLabel::gentle_slope;
    }
    return DecayLabel::unclassified;
}

SpectrumProfile spectrum_profile(std::span<const double> values, std::size_t m, const DecayThresholds& params) {
    if (m < 3 || m > values.size()) {
        fail(ErrorKind::out_of_range,
             fmt::format("spectrum length m = {} must lie in 3..{} (the non-degenerate count)", m, values.size()));
    }
    SpectrumProfile p;
    p.top_values.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(m));
    for (double v : p.top_values) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            fail(ErrorKind::out_of_range, "spectrum values must be positive and finite");
        }
    }
    for (std::size_t i = 0; i + 1 < m; ++i) {
        p.ratios.push_back(p.top_values[i] / p.top_values[i + 1]);
        p.log_gaps.push_back(std::log(p.top_values[i]) - std::log(p.top_values[i + 1]));
    }
    p.leading_ratio = p.ratios.front();
    p.decay_label = classify_decay(p.log_gaps, params);
    return p;
}

SpectrumProfile spectrum_profile(const SvdFactors& f, std::size_t m, const DecayThresholds& params) {
    return spectrum_profile(std::span<const double>(f.s).first(f.rank()), m, params);
}

} // namespace lmaudit
