// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "lmaudit/audit.hpp"
#include "lmaudit/compare.hpp"
#include "lmaudit/spectral.hpp"

namespace lmaudit {

/// Rounds to 6 significant digits, the precision of every real in JSON output.
double round_sig6(double value);

// All renderers are pure: the same input always yields the same bytes.

/// JSON with top-level keys model_label, source, config, spectrum, clusters,
/// vcs_summary, wps_stats, glitch, tool_version. Undefined VCS is null.
std::string render_json(const AuditResult& r);

/// Markdown report: summary tables and one row per singular vector with
/// tokens below ratio_omit_percent of the leading score left out.
std::string render_markdown(const AuditResult& r);

/// The WPS statistics and candidate list alone.
std::string render_glitch_json(const AuditResult& r);
std::string render_glitch_markdown(const AuditResult& r);

std::string render_spectrum_json(const std::string& model_label, const SpectrumProfile& p);
std::string render_spectrum_markdown(const std::string& model_label, const SpectrumProfile& p);

std::string render_diff_json(const DiffReport& d, const AuditResult& a, const AuditResult& b);
std::string render_diff_markdown(const DiffReport& d, const AuditResult& a, const AuditResult& b);

} // namespace lmaudit
