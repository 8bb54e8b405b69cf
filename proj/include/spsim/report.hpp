#pragma once

// End-to-end pipelines: simulate (or load), correlate, fit, and write a
// reproducible report with plot-ready data files.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "spsim/config.hpp"

namespace spsim {

struct ReportOutput {
    nlohmann::json report;
    std::vector<std::filesystem::path> files;  ///< everything written, report.json last
    bool all_converged = true;
};

/// Built-in configurations: "paper-pulsed" and "paper-cw".
std::vector<std::string> preset_names();
/// Throws ConfigError for unknown names.
std::string preset_text(std::string_view name);

/// Runs the pipeline selected by run.pipeline (pulsed, cw or full) and writes
/// report.json plus CSV artifacts into out_dir. A seed override replaces
/// run.seed. Sub-runs use seeds derived from the base seed as documented in
/// docs/report.md.
ReportOutput run_report(const Config& cfg, const std::filesystem::path& out_dir,
                        std::optional<std::uint64_t> seed_override = std::nullopt);

}  // namespace spsim
