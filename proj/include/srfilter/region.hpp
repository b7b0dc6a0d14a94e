#pragma once

#include "srfilter/events.hpp"
#include "srfilter/ratio.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace srfilter {

// Signal region {z : score(z) >= tau_s}.
struct SignalRegion {
    double tau_s = 0.0;
    double target_q = 1.0;
    std::size_t calibration_count = 0;
};

struct CurvePoint {
    double q = 0.0;
    double tau = 0.0;
    double p4b_in_sr = 0.0;
    // nullopt when the evaluation sample has no signal events.
    std::optional<double> s_in_sr;
};

struct EnrichmentCurve {
    std::vector<CurvePoint> points;
    std::map<std::string, std::string> metadata;
};

struct AggregatedCurve {
    EnrichmentCurve mean;
    // nullopt for a single curve or where any input curve is undefined.
    std::vector<std::optional<double>> s_std;
    std::vector<std::optional<double>> p_std;
    std::size_t count = 0;
};

// gamma(z) / gamma_tilde(z).
double peak_score(const RatioModel& gamma, const RatioModel& gamma_tilde, std::span<const double> z);
Eigen::VectorXd peak_score(const RatioModel& gamma, const RatioModel& gamma_tilde, const Matrix& z);

// tau_s is the ceil(q N)-th largest score, so exactly ceil(q N) calibration
// events (more only under ties) satisfy score >= tau_s.
SignalRegion calibrate_threshold(std::span<const double> scores_4b_holdout, double q);

inline bool in_sr(const SignalRegion& region, double score) { return score >= region.tau_s; }

// Number of members ceil(q N), robust to q N landing a rounding error above
// an integer.
std::size_t sr_member_count(double q, std::size_t n);

// 50 geometrically spaced points in [0.005, 1].
std::vector<double> default_q_grid();

EnrichmentCurve enrichment_curve(std::span<const double> scores_4b, std::span<const Truth> truth_4b,
                                 std::span<const double> q_grid);

// Trapezoidal area under s_in_sr vs p4b_in_sr with (0,0) and (1,1) appended.
double curve_auc(const EnrichmentCurve& curve);

AggregatedCurve aggregate_curves(std::span<const EnrichmentCurve> curves);

// CSV: "# key=value ..." metadata line, then q,tau,p4b_in_sr,s_in_sr
// (aggregated curves add s_std,p_std). Undefined values are written "na".
void write_curve(const EnrichmentCurve& curve, const std::filesystem::path& path);
void write_aggregated_curve(const AggregatedCurve& curve, const std::filesystem::path& path);
EnrichmentCurve read_curve(const std::filesystem::path& path);

} // namespace srfilter
