#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nqi/ensemble.hpp"
#include "nqi/featurize.hpp"
#include "nqi/synthcohort.hpp"

namespace nqi {

struct CostRatio
{
    double fn = 1.0;
    double fp = 1.0;

    friend bool operator==(const CostRatio&, const CostRatio&) = default;
};

// "2/1" -> {2, 1}. Throws Error on anything else.
CostRatio parse_cost_ratio(std::string_view s);
std::string to_string(const CostRatio& c);

struct RunConfig
{
    double window_s = 90.0;
    std::size_t min_keys = 30;
    double C = kDefaultC;
    double epsilon = kDefaultEpsilon;
    std::size_t n_models = kDefaultModels;
    double normalization_constant = kDefaultNormalization;
    double max_hold_s = 2.0;
    std::size_t n_boot = 2000;
    std::uint64_t seed = 0;
    std::vector<CostRatio> cost_ratios = {{1, 1}, {2, 1}, {1, 2}};
    BootstrapUnit bootstrap_unit = BootstrapUnit::window;
    bool standardize = false;
    std::size_t threads = 1;
    CohortSpec simulation;

    // Throws Error for out-of-range values.
    void validate() const;

    WindowParams window_params() const { return {window_s, min_keys}; }
    ValidationPolicy validation_policy() const { return {max_hold_s}; }
    EnsembleParams ensemble_params() const;

    /// JSON text. Thread count is left out of report echoes because it never
    /// changes results.
    std::string to_json(bool include_threads = true) const;
    /// Keys absent from the text keep their current values; unknown keys throw.
    void merge_json(const std::string& text);

    static RunConfig load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

bool operator==(const RunConfig& a, const RunConfig& b);

/// Writes through a temporary file in the same directory, renamed into place
/// only after `write` returns and the stream flushed cleanly.
void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& write);

// Each command is a pure function of its input files and the config. Errors
// throw; warnings go to `diag`.

void cmd_featurize(const std::filesystem::path& log, const std::filesystem::path& out, const RunConfig& config,
                   std::ostream& diag);

void cmd_train(const std::filesystem::path& features, const std::filesystem::path& metadata,
               const std::filesystem::path& model_out, const RunConfig& config, std::ostream& diag);

/// Subject scores to `out`; window scores too when `windows_out` is set.
void cmd_score(const std::filesystem::path& model, const std::filesystem::path& features,
               const std::filesystem::path& out, const std::optional<std::filesystem::path>& windows_out,
               const RunConfig& config, std::ostream& diag);

struct FoldInputs
{
    std::filesystem::path features;
    std::filesystem::path metadata;
};

/// Writes subject_scores.csv, window_scores.csv, crossval_report.txt and
/// crossval_report.json into out_dir.
void cmd_crossval(const FoldInputs& denovo, const FoldInputs& earlypd, const std::filesystem::path& out_dir,
                  const RunConfig& config, std::ostream& diag);

struct EvaluateInputs
{
    std::filesystem::path scores;  // subject or window score CSV
    std::filesystem::path metadata;
    std::optional<std::filesystem::path> log;  // enables the typing-speed covariate
    bool per_window = false;
};

/// Writes report.txt, report.json, roc_<metric>.csv, roc_band_<metric>.csv and
/// box_<metric>.csv into out_dir.
void cmd_evaluate(const EvaluateInputs& in, const std::filesystem::path& out_dir, const RunConfig& config,
                  std::ostream& diag);

/// Writes log.csv and subjects.csv for config.simulation into out_dir.
void cmd_simulate(const std::filesystem::path& out_dir, const RunConfig& config, std::ostream& diag);

} // namespace nqi
