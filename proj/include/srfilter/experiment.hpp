#pragma once

#include "srfilter/config.hpp"
#include "srfilter/ratio.hpp"
#include "srfilter/region.hpp"
#include "srfilter/repr.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace srfilter {

inline constexpr const char* kVersion = "0.1.0";

// One (n, m, epsilon) cell of the experiment grid.
struct Condition {
    std::size_t n = 0;
    std::size_t m = 0;
    double epsilon = 0.0;

    // Also used as the output directory name: "n1000_m1000_eps0.05".
    std::string label() const;
};

std::vector<Condition> conditions(const RunConfig& cfg);

std::uint64_t stage_seed(const RunConfig& cfg, const Condition& c, std::size_t repeat, std::string_view stage);

// The stages of one repeat. The CLI subcommands call the same functions, so a
// manual stage-by-stage run reproduces run_experiment exactly.
std::pair<Dataset, Dataset> generate_stage(const RunConfig& cfg, const Condition& c, std::size_t repeat);

struct SplitData {
    std::vector<Dataset> parts3b; // gamma, smooth, holdout
    std::vector<Dataset> parts4b;
};
SplitData split_stage(const RunConfig& cfg, const Condition& c, std::size_t repeat, const Dataset& d3b,
                      const Dataset& d4b);

ReprModel represent_stage(const RunConfig& cfg, const Condition& c, std::size_t repeat, const Dataset& gamma3b,
                          const Dataset& gamma4b);
RatioModel gamma_stage(const RunConfig& cfg, const Condition& c, std::size_t repeat, const Matrix& z3b,
                       const Matrix& z4b);
NoiseSpec noise_for(const RunConfig& cfg, double eta, const Matrix& z3b_smooth, const Matrix& z4b_smooth);
RatioModel gamma_tilde_stage(const RunConfig& cfg, const Condition& c, std::size_t repeat, double eta,
                             const Matrix& z3b_smooth, const Matrix& z4b_smooth);
EnrichmentCurve curve_stage(const RunConfig& cfg, const Condition& c, std::size_t repeat, double eta,
                            std::span<const double> scores, std::span<const Truth> truth);

std::vector<double> effective_q_grid(const RunConfig& cfg);
std::string eta_tag(double eta); // "eta0.1"

// Score file: event_id,truth,gamma,gamma_tilde,score
struct ScoredEvents {
    std::vector<std::uint64_t> ids;
    std::vector<Truth> truth;
    std::vector<double> gamma;
    std::vector<double> gamma_tilde;
    std::vector<double> score;
};
ScoredEvents score_events(const RatioModel& gamma, const RatioModel& gamma_tilde, std::span<const Event> events,
                          const Matrix& z);
void write_scores(const ScoredEvents& s, const std::filesystem::path& path);
ScoredEvents read_scores(const std::filesystem::path& path);

struct ConditionResult {
    Condition condition;
    double eta = 0.0;
    std::vector<EnrichmentCurve> curves; // completed repeats only
    std::vector<double> aucs;
    std::optional<AggregatedCurve> aggregate;
};

struct RepeatFailure {
    Condition condition;
    std::size_t repeat = 0;
    std::string message;
};

struct ExperimentReport {
    std::vector<ConditionResult> results;
    std::vector<RepeatFailure> failures;
    std::vector<std::string> warnings;

    bool complete() const { return failures.empty(); }
    const ConditionResult* find(const Condition& c, double eta) const;
};

// Runs every condition and repeat, writing per-repeat models and curves,
// aggregated curves, report.txt and manifest.txt under out_dir. Stage errors
// abort the affected repeat and are recorded in the report.
ExperimentReport run_experiment(const RunConfig& cfg, const std::filesystem::path& out_dir,
                                std::ostream* log = nullptr);

// key = value lines: every config entry, then "record.*" lines (version,
// derived seeds, warnings) that the config parser skips.
std::string manifest_text(const RunConfig& cfg, const std::vector<std::string>& warnings = {});

} // namespace srfilter
