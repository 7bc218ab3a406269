// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lmaudit/metrics.hpp"
#include "lmaudit/spectral.hpp"
#include "lmaudit/tensor_io.hpp"
#include "lmaudit/vocab.hpp"

namespace lmaudit {

inline constexpr std::string_view kToolVersion = "0.1.0";

struct AuditConfig {
    std::size_t n_vectors = 30;
    std::size_t k_tokens = 20;
    double z_sigma = 2.0;
    double rel_cutoff = 1e-6;
    double ratio_omit_percent = 10.0; // render-time only
    std::size_t spectrum_m = 20;
    DecayThresholds decay;

    /// Throws Error(Stage::config) when a field is out of range.
    void validate() const;
};

/// Where the weights came from.
struct WeightSource {
    std::filesystem::path weights;
    std::optional<std::filesystem::path> sidecar; // raw matrix + sidecar when set
    std::optional<std::string> tensor_name;       // overrides the lm_head resolution order
    std::optional<std::string> model_label;       // defaults to the weights file stem
};

struct WeightProvenance {
    std::string tensor_name;
    DType dtype = DType::F32;
    std::size_t rows = 0;
    std::size_t cols = 0;
};

struct ClusterView {
    ClusterRecord record;
    std::vector<std::string> tokens; // rendered, parallel to record.token_ids
};

struct WpsStats {
    double mu = 0.0;
    double sigma = 0.0;
    double threshold = 0.0;
    double z = 2.0;
    std::size_t vocab_rows = 0;
};

/// Everything a report needs; rendering never recomputes anything.
struct AuditResult {
    std::string model_label;
    WeightProvenance weights;
    AuditConfig config;
    SpectrumProfile spectrum;
    std::vector<ClusterView> clusters;
    VcsSummary vcs_summary;
    WpsStats wps_stats;
    GlitchReport glitch;
    std::string tool_version{kToolVersion};
};

/// Loads the weights per `source` (stage tensor_io).
WeightMatrix load_weights(const WeightSource& source);

/// Checks the vocabulary against the matrix (it may be shorter, never longer).
void check_vocabulary(const Vocabulary& vocab, const WeightMatrix& w);

/// Runs spectral and metric stages over already-computed factors.
AuditResult audit_matrix(const WeightMatrix& w, const SvdFactors& f, const Vocabulary& vocab,
                         const AuditConfig& config);

/// A full pipeline run, keeping the factors for callers that need them (diff).
struct AuditRun {
    AuditResult result;
    SvdFactors factors;
};

AuditRun run_audit_with_factors(const WeightSource& source, const std::filesystem::path& vocab_path,
                                const AuditConfig& config);

/// tensor_io -> vocab -> spectral -> metrics. Deterministic for fixed inputs.
AuditResult run_audit(const WeightSource& source, const std::filesystem::path& vocab_path,
                      const AuditConfig& config);

} // namespace lmaudit
