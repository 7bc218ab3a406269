// SPDX-License-Identifier: Apache-2.0
//
// lmaudit: static audit of a transformer's lm_head weight matrix.
//
//   lmaudit audit    --weights P --vocab P [--n 30] [--k 20] [--format json|md] [--out P]
//   lmaudit glitch   --weights P --vocab P [--z 2.0] [--format json|md]
//   lmaudit spectrum --weights P [--m 20]
//   lmaudit diff     --weights-a P --weights-b P --vocab P [--align index|similarity]
//
// Exit codes: 0 success, 2 input/format error, 3 numerical failure.

#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lmaudit/audit.hpp"
#include "lmaudit/compare.hpp"
#include "lmaudit/errors.hpp"
#include "lmaudit/report.hpp"

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

enum class Format { json, md };

struct WeightOptions {
    std::string path;
    std::string sidecar;
    std::string tensor;
    std::string label;

    lmaudit::WeightSource source() const {
        lmaudit::WeightSource s;
        s.weights = path;
        if (!sidecar.empty()) s.sidecar = sidecar;
        if (!tensor.empty()) s.tensor_name = tensor;
        if (!label.empty()) s.model_label = label;
        return s;
    }
};

const std::map<std::string, Format> kFormats{{"json", Format::json}, {"md", Format::md}};

void add_weight_options(CLI::App* cmd, WeightOptions& w, const std::string& flag = "--weights") {
    cmd->add_option(flag, w.path, "Checkpoint container, or raw matrix file when --sidecar is given")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--sidecar", w.sidecar, "JSON sidecar {rows, cols, dtype} for a raw matrix file")
        ->check(CLI::ExistingFile);
    cmd->add_option("--tensor", w.tensor, "Tensor name, overriding lm_head/output/embed_tokens resolution");
    cmd->add_option("--label", w.label, "Model label for reports (default: weights file stem)");
}

void add_audit_options(CLI::App* cmd, lmaudit::AuditConfig& c) {
    cmd->add_option("--n", c.n_vectors, "Number of leading singular vectors")->capture_default_str();
    cmd->add_option("--k", c.k_tokens, "Top tokens per singular vector")->capture_default_str();
    cmd->add_option("--z", c.z_sigma, "Glitch threshold is mu - z*sigma")->capture_default_str();
    cmd->add_option("--rel-cutoff", c.rel_cutoff, "Singular values below rel_cutoff*S[0] are degenerate")
        ->capture_default_str();
    cmd->add_option("--m", c.spectrum_m, "Singular values in the spectrum profile")->capture_default_str();
}

void add_output_options(CLI::App* cmd, Format& format, std::string& out) {
    cmd->add_option("--format", format, "Output format")
        ->transform(CLI::CheckedTransformer(kFormats, CLI::ignore_case))
        ->capture_default_str();
    cmd->add_option("--out", out, "Write to this file instead of stdout");
}

void emit(const std::string& text, const std::string& out) {
    if (out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream file(out, std::ios::binary);
    if (!file || !(file << text)) {
        throw lmaudit::Error(lmaudit::Stage::report, lmaudit::ErrorKind::unreadable,
                             "cannot write '" + out + "'");
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Static SVD audit of transformer lm_head weights"};
    app.set_version_flag("--version", std::string(lmaudit::kToolVersion));
    app.require_subcommand(1);

    lmaudit::AuditConfig config;
    WeightOptions weights;
    WeightOptions weights_b;
    std::string vocab;
    std::string out;
    Format format = Format::json;

    auto* audit = app.add_subcommand("audit", "Full audit: clusters, VCS, spectrum, WPS glitch candidates");
    add_weight_options(audit, weights);
    audit->add_option("--vocab", vocab, "Vocabulary JSON (array or {token: id})")->required()->check(CLI::ExistingFile);
    add_audit_options(audit, config);
    audit->add_option("--omit-ratio", config.ratio_omit_percent,
                      "Markdown omits tokens scoring below this % of the leading token")
        ->capture_default_str();
    add_output_options(audit, format, out);

    auto* glitch = app.add_subcommand("glitch", "WPS table and glitch-token candidates only");
    add_weight_options(glitch, weights);
    glitch->add_option("--vocab", vocab, "Vocabulary JSON")->required()->check(CLI::ExistingFile);
    glitch->add_option("--z", config.z_sigma, "Glitch threshold is mu - z*sigma")->capture_default_str();
    glitch->add_option("--rel-cutoff", config.rel_cutoff, "Degeneracy cutoff relative to S[0]")
        ->capture_default_str();
    add_output_options(glitch, format, out);

    auto* spectrum = app.add_subcommand("spectrum", "Singular value profile only");
    add_weight_options(spectrum, weights);
    spectrum->add_option("--m", config.spectrum_m, "Singular values in the profile")->capture_default_str();
    spectrum->add_option("--rel-cutoff", config.rel_cutoff, "Degeneracy cutoff relative to S[0]")
        ->capture_default_str();
    add_output_options(spectrum, format, out);

    std::string align = "index";
    double min_alignment = 0.1;
    auto* diff = app.add_subcommand("diff", "Compare two checkpoints that share a vocabulary");
    diff->add_option("--weights-a", weights.path, "Base checkpoint")->required()->check(CLI::ExistingFile);
    diff->add_option("--weights-b", weights_b.path, "Second (e.g. instruction-tuned) checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    diff->add_option("--tensor", weights.tensor, "Tensor name override applied to both checkpoints");
    diff->add_option("--vocab", vocab, "Shared vocabulary JSON")->required()->check(CLI::ExistingFile);
    diff->add_option("--align", align, "Column pairing")
        ->check(CLI::IsMember({"index", "similarity"}))
        ->capture_default_str();
    diff->add_option("--min-alignment", min_alignment, "Similarity mode leaves pairs below this |cos| unmatched")
        ->capture_default_str();
    diff->add_option("--n", config.n_vectors, "Number of leading singular vectors")->capture_default_str();
    diff->add_option("--k", config.k_tokens, "Top tokens per singular vector")->capture_default_str();
    diff->add_option("--rel-cutoff", config.rel_cutoff, "Degeneracy cutoff relative to S[0]")
        ->capture_default_str();
    diff->add_option("--m", config.spectrum_m, "Singular values in each spectrum profile")->capture_default_str();
    add_output_options(diff, format, out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInput;
    }

    try {
        if (audit->parsed()) {
            const auto result = lmaudit::run_audit(weights.source(), vocab, config);
            emit(format == Format::json ? lmaudit::render_json(result) : lmaudit::render_markdown(result), out);
        } else if (glitch->parsed()) {
            config.validate();
            const auto w = lmaudit::load_weights(weights.source());
            const auto v = lmaudit::load_vocabulary(vocab);
            lmaudit::check_vocabulary(v, w);
            const auto factors = lmaudit::compute_svd(w, config.rel_cutoff);
            const auto table = lmaudit::wps_table(factors, config.z_sigma);

            lmaudit::AuditResult result;
            result.model_label = w.model_label;
            result.weights = {w.source_tensor_name, w.source_dtype, w.rows, w.cols};
            result.config = config;
            result.wps_stats = {table.mu, table.sigma, table.threshold, table.z, table.wps.size()};
            result.glitch = lmaudit::glitch_candidates(table, v);
            emit(format == Format::json ? lmaudit::render_glitch_json(result)
                                        : lmaudit::render_glitch_markdown(result),
                 out);
        } else if (spectrum->parsed()) {
            config.validate();
            const auto w = lmaudit::load_weights(weights.source());
            const auto factors = lmaudit::compute_svd(w, config.rel_cutoff);
            const auto profile = lmaudit::spectrum_profile(factors, config.spectrum_m, config.decay);
            emit(format == Format::json ? lmaudit::render_spectrum_json(w.model_label, profile)
                                        : lmaudit::render_spectrum_markdown(w.model_label, profile),
                 out);
        } else if (diff->parsed()) {
            weights_b.tensor = weights.tensor;
            auto job_a = std::async(std::launch::async, [&] {
                return lmaudit::run_audit_with_factors(weights.source(), vocab, config);
            });
            auto job_b = std::async(std::launch::async, [&] {
                return lmaudit::run_audit_with_factors(weights_b.source(), vocab, config);
            });
            auto run_a = job_a.get();
            auto run_b = job_b.get();

            lmaudit::DiffReport report;
            if (align == "index") {
                report = lmaudit::diff_by_index(run_a.result, run_b.result, config.n_vectors, config.k_tokens);
                lmaudit::attach_alignment(report, run_a.factors, run_b.factors);
            } else {
                report = lmaudit::diff_by_similarity(run_a.factors, run_b.factors, run_a.result, run_b.result,
                                                     config.n_vectors, min_alignment);
            }
            emit(format == Format::json ? lmaudit::render_diff_json(report, run_a.result, run_b.result)
                                        : lmaudit::render_diff_markdown(report, run_a.result, run_b.result),
                 out);
        }
    } catch (const lmaudit::Error& e) {
        std::cerr << "lmaudit: " << e.what() << '\n';
        return e.numerical() ? kExitNumerical : kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "lmaudit: " << e.what() << '\n';
        return kExitInput;
    }
    return 0;
}
