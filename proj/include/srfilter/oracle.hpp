#pragma once

#include "srfilter/events.hpp"
#include "srfilter/region.hpp"

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace srfilter {

// Closed-form ground truth for Gaussian-mixture settings. spec4b lists the
// background and signal components together; signal_components selects S.
struct OracleSetting {
    MixtureSpec spec3b;
    MixtureSpec spec4b;
    std::vector<std::size_t> signal_components;
    std::vector<double> kernel_variances;

    void validate() const;
    std::size_t dim() const { return spec3b.dim(); }
    // Total weight of the signal components.
    double epsilon() const;
    // S alone, with renormalised weights. Requires epsilon() > 0.
    MixtureSpec signal_spec() const;
};

// P_3b = N(1, 4^2), P_4b = (1-eps) N(-1, 4^2) + eps N(7, 0.5^2), K = N(0, kernel_sd^2).
OracleSetting toy_oracle_setting(double epsilon = 0.05, double kernel_sd = 2.0);

double log_mixture_pdf(const MixtureSpec& spec, std::span<const double> x);
double mixture_pdf(const MixtureSpec& spec, std::span<const double> x);
inline double mixture_pdf(const MixtureSpec& spec, double x) { return mixture_pdf(spec, std::span<const double>(&x, 1)); }

// Mass of a 1D mixture on [a, b] from the normal CDF.
double mixture_interval_mass(const MixtureSpec& spec, double a, double b);

// Gaussian convolution: variances add, weights and means unchanged.
MixtureSpec convolve_spec(const MixtureSpec& spec, std::span<const double> kernel_variances);

double exact_gamma(const OracleSetting& s, std::span<const double> x);
double exact_gamma_tilde(const OracleSetting& s, std::span<const double> x);
double exact_score(const OracleSetting& s, std::span<const double> x);
inline double exact_gamma(const OracleSetting& s, double x) { return exact_gamma(s, std::span<const double>(&x, 1)); }
inline double exact_gamma_tilde(const OracleSetting& s, double x)
{
    return exact_gamma_tilde(s, std::span<const double>(&x, 1));
}
inline double exact_score(const OracleSetting& s, double x) { return exact_score(s, std::span<const double>(&x, 1)); }

// Adaptive Simpson quadrature of f on [a, b] to absolute tolerance tol.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol);

struct CurveIntegration {
    double abs_tol = 1e-8;
    std::size_t scan_points = 20001;
    std::size_t max_bisection = 200;
};

// Exact enrichment curve of a 1D setting for an arbitrary score function:
// for each q, tau is the largest threshold whose superlevel set carries 4b
// mass >= q (bisection on tau); P_4b and S masses of {score >= tau} come from
// adaptive quadrature over the superlevel intervals.
EnrichmentCurve exact_curve_1d(const OracleSetting& s, const std::function<double(double)>& score_fn,
                               std::span<const double> q_grid, const CurveIntegration& opts = {});

// Large-sample Monte Carlo counterpart for any dimension; the standard error
// of each s_in_sr is returned in `s_stderr`.
struct MonteCarloCurve {
    EnrichmentCurve curve;
    std::vector<double> s_stderr;
};
MonteCarloCurve monte_carlo_curve(const OracleSetting& s, const std::function<double(std::span<const double>)>& score_fn,
                                  std::span<const double> q_grid, std::size_t samples = 1000000,
                                  std::uint64_t seed = 0);

std::vector<double> uniform_grid(double lo, double hi, double step);

// Grid point maximising f; ties resolve to the smallest coordinate.
double argmax_on_grid(const std::function<double(double)>& f, std::span<const double> grid);

// Setting file (see README): "oracle setting v1", key = value lines for
// kernel_variances and signal_components, then [spec3b] / [spec4b] blocks of
// rows "weight,mean_1..mean_d,var_1..var_d".
void save_setting(const OracleSetting& s, const std::filesystem::path& path);
OracleSetting load_setting(const std::filesystem::path& path);

} // namespace srfilter
