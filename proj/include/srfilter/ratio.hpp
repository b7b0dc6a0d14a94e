#pragma once

#include "srfilter/nnet.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace srfilter {

enum class RatioKind { Plain, Smoothed };

// Gaussian smoothing kernel K with diagonal standard deviation
// per_dim_scale = eta * range.
struct NoiseSpec {
    double eta = 0.1;
    std::vector<double> per_dim_scale;

    static NoiseSpec from_ranges(double eta, const std::vector<double>& ranges);
    void validate() const;
};

inline constexpr double kDefaultRatioClamp = 1e-6;

// Density ratio p_4b / p_3b (or its smoothed counterpart) obtained from a
// probabilistic classifier s(z) as rho * s / (1 - s), rho = n_3b / n_4b.
struct RatioModel {
    MLPParams classifier;
    double rho = 1.0;
    double delta = kDefaultRatioClamp;
    RatioKind kind = RatioKind::Plain;
    std::optional<NoiseSpec> noise;

    void validate() const;
    std::size_t input_dim() const { return classifier.spec.input_dim(); }
};

// Linear-interpolation percentile (p in [0, 100]).
double percentile(std::vector<double> values, double p);

// Per-column 99.5th minus 0.5th percentile; throws DataError on a zero range.
std::vector<double> compute_ranges(const Matrix& z);

// z + eps with eps_ij ~ N(0, per_dim_scale_j^2), one draw per entry.
Matrix smear(const Matrix& z, const NoiseSpec& noise, std::uint64_t seed);

RatioModel fit_ratio(const Matrix& z3b, const Matrix& z4b, const MLPSpec& spec, const TrainConfig& cfg,
                     std::uint64_t seed);

// Same as fit_ratio on independently smeared copies of both samples. With
// redraw_each_epoch the training-partition noise is redrawn every epoch.
RatioModel fit_smoothed_ratio(const Matrix& z3b, const Matrix& z4b, const NoiseSpec& noise, const MLPSpec& spec,
                              const TrainConfig& cfg, std::uint64_t seed, bool redraw_each_epoch = false);

// rho * s / (1 - s) with s clamped to [delta, 1 - delta].
double odds_ratio(double s, double rho, double delta);

double eval_ratio(const RatioModel& model, std::span<const double> z);
Eigen::VectorXd eval_ratio(const RatioModel& model, const Matrix& z);

void save_ratio(const RatioModel& model, const std::filesystem::path& path);
RatioModel load_ratio(const std::filesystem::path& path);

} // namespace srfilter
