// SPDX-License-Identifier: Apache-2.0
#include "lmaudit/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>

#include <fmt/format.h>
#include <json.hpp>

namespace lmaudit {

namespace {

using ojson = nlohmann::ordered_json;

ojson real(double x) {
    return round_sig6(x);
}

ojson real(const std::optional<double>& x) {
    return x ? ojson(round_sig6(*x)) : ojson(nullptr);
}

ojson reals(const std::vector<double>& xs) {
    ojson out = ojson::array();
    for (double x : xs) out.push_back(round_sig6(x));
    return out;
}

ojson source_json(const AuditResult& r) {
    return {{"tensor", r.weights.tensor_name},
            {"dtype", std::string(to_string(r.weights.dtype))},
            {"rows", r.weights.rows},
            {"cols", r.weights.cols}};
}

ojson config_json(const AuditConfig& c) {
    return {{"n_vectors", c.n_vectors},
            {"k_tokens", c.k_tokens},
            {"z_sigma", real(c.z_sigma)},
            {"rel_cutoff", real(c.rel_cutoff)},
            {"ratio_omit_percent", real(c.ratio_omit_percent)},
            {"spectrum_m", c.spectrum_m},
            {"decay_thresholds",
             {{"cliff_ratio", real(c.decay.cliff_ratio)},
              {"plateau_max", real(c.decay.plateau_max)},
              {"step_gap", real(c.decay.step_gap)},
              {"gentle_max", real(c.decay.gentle_max)}}}};
}

ojson spectrum_json(const SpectrumProfile& p) {
    return {{"top_values", reals(p.top_values)},
            {"ratios", reals(p.ratios)},
            {"log_gaps", reals(p.log_gaps)},
            {"leading_ratio", real(p.leading_ratio)},
            {"decay_label", std::string(to_string(p.decay_label))}};
}

ojson clusters_json(const std::vector<ClusterView>& clusters) {
    ojson out = ojson::array();
    for (const auto& c : clusters) {
        ojson tokens = ojson::array();
        for (std::size_t j = 0; j < c.record.token_ids.size(); ++j) {
            tokens.push_back({{"id", c.record.token_ids[j]},
                              {"token", c.tokens[j]},
                              {"score", real(c.record.scores[j])},
                              {"ratio", real(c.record.score_ratios[j])}});
        }
        out.push_back({{"index", c.record.vector_index},
                       {"singular_value", real(c.record.singular_value)},
                       {"vcs", real(c.record.vcs)},
                       {"tokens", std::move(tokens)}});
    }
    return out;
}

ojson vcs_summary_json(const VcsSummary& s) {
    return {{"mean", real(s.mean_vcs)},
            {"max", real(s.max_vcs)},
            {"argmax_index", s.argmax_index ? ojson(*s.argmax_index) : ojson(nullptr)},
            {"defined_count", s.per_vector.size() - s.undefined_count},
            {"undefined_count", s.undefined_count}};
}

ojson wps_json(const WpsStats& w) {
    return {{"mu", real(w.mu)},
            {"sigma", real(w.sigma)},
            {"threshold", real(w.threshold)},
            {"z", real(w.z)},
            {"vocab_rows", w.vocab_rows}};
}

ojson glitch_json(const GlitchReport& g) {
    ojson candidates = ojson::array();
    for (const auto& c : g.candidates) {
        candidates.push_back({{"id", c.id}, {"wps", real(c.wps)}, {"token", c.token}});
    }
    return {{"count", g.count}, {"fraction", real(g.fraction)}, {"candidates", std::move(candidates)}};
}

std::string dump(const ojson& j) {
    return j.dump(2) + "\n";
}

std::string fixed(double x, int digits) {
    return fmt::format("{:.{}f}", x, digits);
}

std::string fixed(const std::optional<double>& x, int digits) {
    return x ? fixed(*x, digits) : std::string("n/a");
}

std::string grouped(std::size_t n) {
    auto digits = std::to_string(n);
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
        out += digits[i];
    }
    return out;
}

std::string md_cell(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char ch : text) {
        if (ch == '|') out += '\\';
        out += ch;
    }
    return out;
}

std::string candidate_cell(const GlitchReport& g) {
    return fmt::format("{} ({:.2f}%)", grouped(g.count), g.fraction * 100.0);
}

void append_vcs_table(std::string& md, const AuditResult& r) {
    md += "## Vocabulary cluster scores\n\n";
    md += "| Model | Mean VCS | Max VCS | i* | Undefined |\n";
    md += "|---|---:|---:|---:|---:|\n";
    md += fmt::format("| {} | {} | {} | {} | {} |\n\n", md_cell(r.model_label), fixed(r.vcs_summary.mean_vcs, 2),
                      fixed(r.vcs_summary.max_vcs, 2),
                      r.vcs_summary.argmax_index ? std::to_string(*r.vcs_summary.argmax_index) : "n/a",
                      r.vcs_summary.undefined_count);
}

void append_spectrum_tables(std::string& md, const std::string& label, const SpectrumProfile& p) {
    md += fmt::format("## Singular value statistics (top {})\n\n", p.top_values.size());
    md += "| Model | S[0] | S[1] | S[0]/S[1] | Decay pattern |\n";
    md += "|---|---:|---:|---:|---|\n";
    md += fmt::format("| {} | {} | {} | {} | {} |\n\n", md_cell(label), fixed(p.top_values[0], 2),
                      fixed(p.top_values[1], 2), fixed(p.leading_ratio, 2), to_string(p.decay_label));
    md += "| i | S[i] | S[i]/S[i+1] |\n";
    md += "|---:|---:|---:|\n";
    for (std::size_t i = 0; i < p.top_values.size(); ++i) {
        md += fmt::format("| {} | {} | {} |\n", i, fixed(p.top_values[i], 2),
                          i < p.ratios.size() ? fixed(p.ratios[i], 3) : std::string("-"));
    }
    md += "\n";
}

void append_glitch_tables(std::string& md, const AuditResult& r) {
    md += fmt::format("## Glitch token candidates (mu - {}sigma threshold)\n\n", round_sig6(r.wps_stats.z));
    md += "| Model | mu | sigma | Threshold | Candidates (%) |\n";
    md += "|---|---:|---:|---:|---:|\n";
    md += fmt::format("| {} | {} | {} | {} | {} |\n\n", md_cell(r.model_label), fixed(r.wps_stats.mu, 2),
                      fixed(r.wps_stats.sigma, 2), fixed(r.wps_stats.threshold, 2), candidate_cell(r.glitch));
    if (r.glitch.candidates.empty()) {
        return;
    }
    md += "| ID | WPS | Token |\n";
    md += "|---:|---:|---|\n";
    for (const auto& c : r.glitch.candidates) {
        md += fmt::format("| {} | {:.6g} | {} |\n", c.id, c.wps, md_cell(c.token));
    }
    md += "\n";
}

std::string header(const AuditResult& r) {
    return fmt::format("# lm_head audit: {}\n\nSource: `{}` ({}, {} x {}); tool {}\n\n", md_cell(r.model_label),
                       r.weights.tensor_name, to_string(r.weights.dtype), r.weights.rows, r.weights.cols,
                       r.tool_version);
}

} // namespace

double round_sig6(double value) {
    if (value == 0.0 || !std::isfinite(value)) {
        return value;
    }
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.6g", value);
    return std::strtod(buffer, nullptr);
}

std::string render_json(const AuditResult& r) {
    ojson j;
    j["model_label"] = r.model_label;
    j["source"] = source_json(r);
    j["config"] = config_json(r.config);
    j["spectrum"] = spectrum_json(r.spectrum);
    j["clusters"] = clusters_json(r.clusters);
    j["vcs_summary"] = vcs_summary_json(r.vcs_summary);
    j["wps_stats"] = wps_json(r.wps_stats);
    j["glitch"] = glitch_json(r.glitch);
    j["tool_version"] = r.tool_version;
    return dump(j);
}

std::string render_markdown(const AuditResult& r) {
    std::string md = header(r);
    md += fmt::format("Config: n = {}, k = {}, z = {}, rel_cutoff = {}, tokens below {}% of the leading score "
                      "omitted\n\n",
                      r.config.n_vectors, r.config.k_tokens, round_sig6(r.config.z_sigma),
                      round_sig6(r.config.rel_cutoff), round_sig6(r.config.ratio_omit_percent));

    append_vcs_table(md, r);
    append_spectrum_tables(md, r.model_label, r.spectrum);
    append_glitch_tables(md, r);

    md += "## Singular vectors\n\n";
    md += "| U[:,i] | S[i] | VCS | Tokens (score ratio %) |\n";
    md += "|---|---:|---:|---|\n";
    for (const auto& c : r.clusters) {
        std::string tokens;
        for (std::size_t j = 0; j < c.tokens.size(); ++j) {
            const double ratio = c.record.score_ratios[j];
            // negative-score tokens are always shown, with their signed ratio
            if (ratio >= 0.0 && ratio < r.config.ratio_omit_percent) continue;
            if (!tokens.empty()) tokens += ' ';
            tokens += fmt::format("'{}'({:.0f}%)", md_cell(c.tokens[j]), ratio);
        }
        md += fmt::format("| U[:,{}] | {} | {} | {} |\n", c.record.vector_index, fixed(c.record.singular_value, 2),
                          fixed(c.record.vcs, 2), tokens);
    }
    return md;
}

std::string render_glitch_json(const AuditResult& r) {
    ojson j;
    j["model_label"] = r.model_label;
    j["source"] = source_json(r);
    j["wps_stats"] = wps_json(r.wps_stats);
    j["glitch"] = glitch_json(r.glitch);
    j["tool_version"] = r.tool_version;
    return dump(j);
}

std::string render_glitch_markdown(const AuditResult& r) {
    std::string md = header(r);
    append_glitch_tables(md, r);
    return md;
}

std::string render_spectrum_json(const std::string& model_label, const SpectrumProfile& p) {
    ojson j;
    j["model_label"] = model_label;
    j["spectrum"] = spectrum_json(p);
    j["tool_version"] = std::string(kToolVersion);
    return dump(j);
}

std::string render_spectrum_markdown(const std::string& model_label, const SpectrumProfile& p) {
    std::string md = fmt::format("# Singular value spectrum: {}\n\n", md_cell(model_label));
    append_spectrum_tables(md, model_label, p);
    return md;
}

std::string render_diff_json(const DiffReport& d, const AuditResult& a, const AuditResult& b) {
    ojson pairs = ojson::array();
    for (const auto& p : d.pairs) {
        pairs.push_back({{"index_a", p.index_a},
                         {"index_b", p.index_b},
                         {"alignment_cosine", real(p.alignment_cosine)},
                         {"vcs_a", real(p.vcs_a)},
                         {"vcs_b", real(p.vcs_b)},
                         {"vcs_delta", real(p.vcs_delta)},
                         {"jaccard", real(p.jaccard)}});
    }
    ojson j;
    j["model_a"] = a.model_label;
    j["model_b"] = b.model_label;
    j["alignment_mode"] = std::string(to_string(d.alignment_mode));
    j["n_vectors"] = a.config.n_vectors;
    j["k_tokens"] = a.config.k_tokens;
    j["max_abs_vcs_delta"] = real(d.max_abs_vcs_delta);
    j["pairs"] = std::move(pairs);
    j["unmatched_a"] = d.unmatched_a;
    j["unmatched_b"] = d.unmatched_b;
    j["tool_version"] = std::string(kToolVersion);
    return dump(j);
}

std::string render_diff_markdown(const DiffReport& d, const AuditResult& a, const AuditResult& b) {
    std::string md = fmt::format("# lm_head diff: {} vs {}\n\nAlignment: {}; max |VCS delta| = {}\n\n",
                                 md_cell(a.model_label), md_cell(b.model_label), to_string(d.alignment_mode),
                                 fixed(d.max_abs_vcs_delta, 4));
    md += "| a | b | abs cos | VCS a | VCS b | delta | Jaccard |\n";
    md += "|---:|---:|---:|---:|---:|---:|---:|\n";
    for (const auto& p : d.pairs) {
        md += fmt::format("| {} | {} | {} | {} | {} | {} | {} |\n", p.index_a, p.index_b,
                          fixed(p.alignment_cosine, 3), fixed(p.vcs_a, 3), fixed(p.vcs_b, 3),
                          fixed(p.vcs_delta, 4), fixed(p.jaccard, 2));
    }
    if (!d.unmatched_a.empty() || !d.unmatched_b.empty()) {
        md += fmt::format("\nUnmatched in a: {}\nUnmatched in b: {}\n", fmt::join(d.unmatched_a, ", "),
                          fmt::join(d.unmatched_b, ", "));
    }
    return md;
}

} // namespace lmaudit
