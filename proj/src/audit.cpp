// SPDX-License-Identifier: Apache-2.0
#include "lmaudit/audit.hpp"

#include <cmath>

#include <fmt/format.h>

#include "lmaudit/errors.hpp"

namespace lmaudit {

namespace {

[[noreturn]] void bad_config(const std::string& message) {
    throw Error(Stage::config, ErrorKind::invalid_config, message);
}

bool finite_positive(double x) {
    return std::isfinite(x) && x > 0.0;
}

} // namespace

void AuditConfig::validate() const {
    if (n_vectors < 1) bad_config("n_vectors must be >= 1");
    if (k_tokens < 1) bad_config("k_tokens must be >= 1");
    if (spectrum_m < 1) bad_config("spectrum_m must be >= 1");
    if (!std::isfinite(z_sigma) || z_sigma < 0.0) bad_config("z_sigma must be finite and >= 0");
    if (!std::isfinite(rel_cutoff) || rel_cutoff < 0.0) bad_config("rel_cutoff must be finite and >= 0");
    if (!(ratio_omit_percent >= 0.0 && ratio_omit_percent <= 100.0)) {
        bad_config("ratio_omit_percent must lie in [0, 100]");
    }
    if (!finite_positive(decay.cliff_ratio) || !finite_positive(decay.plateau_max) ||
        !finite_positive(decay.step_gap) || !finite_positive(decay.gentle_max)) {
        bad_config("decay thresholds must be positive");
    }
}

WeightMatrix load_weights(const WeightSource& source) {
    WeightMatrix w;
    if (source.sidecar) {
        w = load_raw(source.weights, *source.sidecar);
    } else {
        const auto index = parse_checkpoint(source.weights);
        w = load_lm_head(index, source.weights, source.tensor_name);
    }
    if (source.model_label) {
        w.model_label = *source.model_label;
    }
    return w;
}

void check_vocabulary(const Vocabulary& vocab, const WeightMatrix& w) {
    if (vocab.size() > w.rows) {
        throw Error(Stage::vocab, ErrorKind::vocab_too_large,
                    fmt::format("vocabulary has {} entries but the weight matrix only {} rows", vocab.size(), w.rows));
    }
}

AuditResult audit_matrix(const WeightMatrix& w, const SvdFactors& f, const Vocabulary& vocab,
                         const AuditConfig& config) {
    config.validate();
    check_vocabulary(vocab, w);

    AuditResult r;
    r.model_label = w.model_label;
    r.weights = {w.source_tensor_name, w.source_dtype, w.rows, w.cols};
    r.config = config;
    r.spectrum = spectrum_profile(f, config.spectrum_m, config.decay);

    auto records = build_clusters(w, f, config.n_vectors, config.k_tokens);
    r.vcs_summary = summarize_vcs(records);
    r.clusters.reserve(records.size());
    for (auto& record : records) {
        ClusterView view;
        for (auto id : record.token_ids) view.tokens.push_back(render_token(vocab, id));
        view.record = std::move(record);
        r.clusters.push_back(std::move(view));
    }

    const auto table = wps_table(f, config.z_sigma);
    r.wps_stats = {table.mu, table.sigma, table.threshold, table.z, table.wps.size()};
    r.glitch = glitch_candidates(table, vocab);
    return r;
}

AuditRun run_audit_with_factors(const WeightSource& source, const std::filesystem::path& vocab_path,
                                const AuditConfig& config) {
    config.validate();
    const auto w = load_weights(source);
    const auto vocab = load_vocabulary(vocab_path);
    check_vocabulary(vocab, w);
    auto factors = compute_svd(w, config.rel_cutoff);
    auto result = audit_matrix(w, factors, vocab, config);
    return {std::move(result), std::move(factors)};
}

AuditResult run_audit(const WeightSource& source, const std::filesystem::path& vocab_path,
                      const AuditConfig& config) {
    return run_audit_with_factors(source, vocab_path, config).result;
}

} // namespace lmaudit
