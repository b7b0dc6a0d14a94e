#include "srfilter/oracle.hpp"

#include "srfilter/error.hpp"
#include "srfilter/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace srfilter {

void OracleSetting::validate() const
{
    spec3b.validate();
    spec4b.validate();
    if (spec3b.dim() != spec4b.dim())
        throw SpecError("oracle setting: 3b and 4b dimensions differ");
    if (kernel_variances.size() != spec3b.dim())
        throw SpecError("oracle setting: kernel dimension differs from the specs");
    for (double v : kernel_variances)
        if (!(v >= 0.0))
            throw SpecError("oracle setting: kernel variances must be non-negative");
    for (auto k : signal_components)
        if (k >= spec4b.components.size())
            throw SpecError("oracle setting: signal component index out of range");
    const double eps = epsilon();
    if (!(eps >= 0.0 && eps < 1.0))
        throw SpecError("oracle setting: implied epsilon must lie in [0, 1)");
}

double OracleSetting::epsilon() const
{
    double eps = 0.0;
    for (auto k : signal_components)
        eps += spec4b.components.at(k).weight;
    return eps;
}

MixtureSpec OracleSetting::signal_spec() const
{
    const double eps = epsilon();
    if (!(eps > 0.0))
        throw SpecError("oracle setting: no signal mass");
    MixtureSpec s;
    for (auto k : signal_components) {
        auto c = spec4b.components.at(k);
        c.weight /= eps;
        s.components.push_back(std::move(c));
    }
    return s;
}

OracleSetting toy_oracle_setting(double epsilon, double kernel_sd)
{
    return OracleSetting{toy1d_spec3b(), toy1d_spec4b(epsilon), {1}, {kernel_sd * kernel_sd}};
}

double log_mixture_pdf(const MixtureSpec& spec, std::span<const double> x)
{
    if (x.size() != spec.dim())
        throw DimensionError("mixture_pdf: point dimension does not match the spec");
    constexpr double log2pi = 1.8378770664093454835606594728112;
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    terms.reserve(spec.components.size());
    for (const auto& c : spec.components) {
        if (c.weight <= 0.0)
            continue;
        double t = std::log(c.weight);
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double d = x[j] - c.mean[j];
            t -= 0.5 * (d * d / c.variances[j] + std::log(c.variances[j]) + log2pi);
        }
        terms.push_back(t);
        best = std::max(best, t);
    }
    if (!std::isfinite(best))
        return best;
    double sum = 0.0;
    for (double t : terms)
        sum += std::exp(t - best);
    return best + std::log(sum);
}

double mixture_pdf(const MixtureSpec& spec, std::span<const double> x)
{
    return std::exp(log_mixture_pdf(spec, x));
}

double mixture_interval_mass(const MixtureSpec& spec, double a, double b)
{
    if (spec.dim() != 1)
        throw DimensionError("mixture_interval_mass: 1D spec required");
    auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); };
    double mass = 0.0;
    for (const auto& c : spec.components) {
        const double sd = std::sqrt(c.variances[0]);
        mass += c.weight * (cdf((b - c.mean[0]) / sd) - cdf((a - c.mean[0]) / sd));
    }
    return mass;
}

MixtureSpec convolve_spec(const MixtureSpec& spec, std::span<const double> kernel_variances)
{
    if (kernel_variances.size() != spec.dim())
        throw DimensionError("convolve_spec: kernel dimension does not match the spec");
    MixtureSpec out = spec;
    for (auto& c : out.components)
        for (std::size_t j = 0; j < c.variances.size(); ++j)
            c.variances[j] += kernel_variances[j];
    return out;
}

double exact_gamma(const OracleSetting& s, std::span<const double> x)
{
    return std::exp(log_mixture_pdf(s.spec4b, x) - log_mixture_pdf(s.spec3b, x));
}

double exact_gamma_tilde(const OracleSetting& s, std::span<const double> x)
{
    return std::exp(log_mixture_pdf(convolve_spec(s.spec4b, s.kernel_variances), x) -
                    log_mixture_pdf(convolve_spec(s.spec3b, s.kernel_variances), x));
}

double exact_score(const OracleSetting& s, std::span<const double> x)
{
    const double log_gamma = log_mixture_pdf(s.spec4b, x) - log_mixture_pdf(s.spec3b, x);
    const double log_gamma_tilde = log_mixture_pdf(convolve_spec(s.spec4b, s.kernel_variances), x) -
                                   log_mixture_pdf(convolve_spec(s.spec3b, s.kernel_variances), x);
    return std::exp(log_gamma - log_gamma_tilde);
}

// ---------------------------------------------------------------------------
// Quadrature

namespace {

double simpson_step(const std::function<double(double)>& f, double a, double fa, double b, double fb, double m,
                    double fm, double whole, double tol, int depth)
{
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

} // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol)
{
    if (!(b > a))
        return 0.0;
    // Seed with a uniform partition so narrow peaks are not skipped entirely.
    constexpr int pieces = 64;
    const double h = (b - a) / pieces;
    double total = 0.0;
    for (int i = 0; i < pieces; ++i) {
        const double lo = a + h * i;
        const double hi = i + 1 == pieces ? b : a + h * (i + 1);
        const double mid = 0.5 * (lo + hi);
        const double flo = f(lo), fhi = f(hi), fmid = f(mid);
        const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        total += simpson_step(f, lo, flo, hi, fhi, mid, fmid, whole, tol / pieces, 48);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Exact curves

namespace {

struct Interval {
    double lo;
    double hi;
};

class SuperlevelSets {
public:
    SuperlevelSets(const std::function<double(double)>& score, double lo, double hi, std::size_t n, double x_tol)
        : score_(score), x_tol_(x_tol)
    {
        xs_.resize(n);
        vals_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            xs_[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
            vals_[i] = score(xs_[i]);
        }
    }

    double min_value() const { return *std::min_element(vals_.begin(), vals_.end()); }
    double max_value() const { return *std::max_element(vals_.begin(), vals_.end()); }

    std::vector<Interval> intervals(double tau) const
    {
        std::vector<Interval> out;
        const std::size_t n = xs_.size();
        std::size_t i = 0;
        while (i < n) {
            if (!(vals_[i] >= tau)) {
                ++i;
                continue;
            }
            double start = i == 0 ? xs_[0] : crossing(xs_[i - 1], xs_[i], tau);
            std::size_t j = i;
            while (j + 1 < n && vals_[j + 1] >= tau)
                ++j;
            double end = j + 1 == n ? xs_[n - 1] : crossing(xs_[j + 1], xs_[j], tau);
            out.push_back({start, end});
            i = j + 1;
        }
        return out;
    }

private:
    // Bisection between `out` (score < tau) and `in` (score >= tau).
    double crossing(double out, double in, double tau) const
    {
        while (std::abs(in - out) > x_tol_) {
            const double mid = 0.5 * (in + out);
            if (score_(mid) >= tau)
                in = mid;
            else
                out = mid;
        }
        return 0.5 * (in + out);
    }

    const std::function<double(double)>& score_;
    double x_tol_;
    std::vector<double> xs_;
    std::vector<double> vals_;
};

double mass_over(const MixtureSpec& spec, const std::vector<Interval>& sets, double tol)
{
    std::function<double(double)> pdf = [&](double x) { return mixture_pdf(spec, x); };
    double total = 0.0;
    for (const auto& iv : sets)
        total += adaptive_simpson(pdf, iv.lo, iv.hi, tol);
    return std::clamp(total, 0.0, 1.0);
}

} // namespace

EnrichmentCurve exact_curve_1d(const OracleSetting& s, const std::function<double(double)>& score_fn,
                               std::span<const double> q_grid, const CurveIntegration& opts)
{
    s.validate();
    if (s.dim() != 1)
        throw DimensionError("exact_curve_1d: 1D setting required");
    if (opts.scan_points < 3)
        throw SpecError("exact_curve_1d: need at least 3 scan points");

    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto* spec : {&s.spec3b, &s.spec4b})
        for (const auto& c : spec->components) {
            const double sd = std::sqrt(c.variances[0]);
            lo = std::min(lo, c.mean[0] - 12.0 * sd);
            hi = std::max(hi, c.mean[0] + 12.0 * sd);
        }

    // Grid fine enough that every component's sd spans several cells.
    double min_sd = std::numeric_limits<double>::infinity();
    for (const auto& c : s.spec4b.components)
        min_sd = std::min(min_sd, std::sqrt(c.variances[0]));
    std::size_t n = std::max(opts.scan_points, static_cast<std::size_t>((hi - lo) / (min_sd / 20.0)) + 1);

    SuperlevelSets sets(score_fn, lo, hi, n, opts.abs_tol);
    const bool has_signal = s.epsilon() > 0.0;
    const MixtureSpec signal = has_signal ? s.signal_spec() : MixtureSpec{};
    auto p4b_mass = [&](double tau) { return mass_over(s.spec4b, sets.intervals(tau), opts.abs_tol); };

    const double vmin = sets.min_value();
    const double vmax = sets.max_value();

    EnrichmentCurve curve;
    for (double q : q_grid) {
        if (!(q > 0.0 && q <= 1.0))
            throw SpecError("exact_curve_1d: q must lie in (0, 1]");
        // lo_tau: mass >= q; hi_tau: mass < q.
        double lo_tau = vmin;
        double hi_tau = vmax + std::max(1e-12, std::abs(vmax) * 1e-9);
        double lo_mass = p4b_mass(lo_tau);
        bool converged = false;
        for (std::size_t it = 0; it < opts.max_bisection; ++it) {
            if (std::abs(lo_mass - q) <= opts.abs_tol ||
                hi_tau - lo_tau <= 1e-13 * std::max(1.0, std::abs(hi_tau))) {
                converged = true;
                break;
            }
            const double mid = 0.5 * (lo_tau + hi_tau);
            const double m = p4b_mass(mid);
            if (m >= q) {
                lo_tau = mid;
                lo_mass = m;
            } else {
                hi_tau = mid;
            }
        }
        if (!converged)
            throw Error("exact_curve_1d: threshold bisection did not converge in " +
                        std::to_string(opts.max_bisection) + " iterations");
        CurvePoint p{q, lo_tau, lo_mass, std::nullopt};
        if (has_signal)
            p.s_in_sr = mass_over(signal, sets.intervals(lo_tau), opts.abs_tol);
        curve.points.push_back(p);
    }
    return curve;
}

MonteCarloCurve monte_carlo_curve(const OracleSetting& s, const std::function<double(std::span<const double>)>& score_fn,
                                  std::span<const double> q_grid, std::size_t samples, std::uint64_t seed)
{
    s.validate();
    auto pts = sample_mixture(s.spec4b, samples, seed);
    std::vector<double> scores;
    std::vector<Truth> truth;
    scores.reserve(samples);
    truth.reserve(samples);
    std::size_t n_signal = 0;
    for (const auto& p : pts) {
        scores.push_back(score_fn(p.point));
        const bool sig = std::find(s.signal_components.begin(), s.signal_components.end(), p.component) !=
                         s.signal_components.end();
        truth.push_back(sig ? Truth::Signal : Truth::Background);
        n_signal += sig;
    }
    MonteCarloCurve out{enrichment_curve(scores, truth, q_grid), {}};
    for (const auto& p : out.curve.points) {
        const double v = p.s_in_sr.value_or(0.0);
        out.s_stderr.push_back(n_signal ? std::sqrt(v * (1.0 - v) / static_cast<double>(n_signal)) : 0.0);
    }
    out.curve.metadata["samples"] = std::to_string(samples);
    out.curve.metadata["seed"] = std::to_string(seed);
    return out;
}

std::vector<double> uniform_grid(double lo, double hi, double step)
{
    if (!(step > 0.0) || !(hi >= lo))
        throw SpecError("uniform_grid: need step > 0 and hi >= lo");
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i)
        g[i] = lo + step * static_cast<double>(i);
    return g;
}

double argmax_on_grid(const std::function<double(double)>& f, std::span<const double> grid)
{
    if (grid.empty())
        throw DataError("argmax_on_grid: empty grid");
    double best_x = 0.0;
    double best_v = -std::numeric_limits<double>::infinity();
    bool first = true;
    for (double x : grid) {
        const double v = f(x);
        if (first || v > best_v || (v == best_v && x < best_x)) {
            best_x = x;
            best_v = v;
            first = false;
        }
    }
    return best_x;
}

// ---------------------------------------------------------------------------
// Setting file

namespace {

std::string spec_block(const MixtureSpec& spec)
{
    std::string out;
    for (const auto& c : spec.components) {
        out += io::format_double(c.weight);
        for (double v : c.mean)
            out += "," + io::format_double(v);
        for (double v : c.variances)
            out += "," + io::format_double(v);
        out += '\n';
    }
    return out;
}

} // namespace

void save_setting(const OracleSetting& s, const std::filesystem::path& path)
{
    s.validate();
    std::string out = "oracle setting v1\n";
    out += "# rows: weight,mean_1..mean_d,var_1..var_d\n";
    out += "dim = " + std::to_string(s.dim()) + "\n";
    out += "kernel_variances = " + io::join_doubles(s.kernel_variances, ' ') + "\n";
    out += "signal_components =";
    for (auto k : s.signal_components)
        out += " " + std::to_string(k);
    out += "\nend\n[spec3b]\n" + spec_block(s.spec3b) + "[spec4b]\n" + spec_block(s.spec4b);
    io::write_text(path, out);
}

OracleSetting load_setting(const std::filesystem::path& path)
{
    auto lines = io::read_lines(path);
    const std::string where = "'" + path.string() + "'";
    std::size_t pos = 0;
    auto block = io::parse_header_block(lines, pos, "oracle setting v1", where);
    OracleSetting s;
    const auto d = static_cast<std::size_t>(io::parse_int(io::require_key(block, "dim", where), "dim"));
    s.kernel_variances =
        io::parse_double_list(io::require_key(block, "kernel_variances", where), ' ', "kernel_variances");
    for (auto tok : io::split(io::trim(io::require_key(block, "signal_components", where)), ' '))
        if (!io::trim(tok).empty())
            s.signal_components.push_back(static_cast<std::size_t>(io::parse_int(tok, "signal_components")));

    MixtureSpec* current = nullptr;
    for (; pos < lines.size(); ++pos) {
        auto line = io::trim(lines[pos]);
        if (line.empty() || line.front() == '#')
            continue;
        if (line == "[spec3b]") {
            current = &s.spec3b;
            continue;
        }
        if (line == "[spec4b]") {
            current = &s.spec4b;
            continue;
        }
        const std::string at = where + " line " + std::to_string(pos + 1);
        if (!current)
            throw ParseError(at + ": component row outside a [spec3b]/[spec4b] block");
        std::vector<double> vals;
        try {
            vals = io::parse_double_list(line, ',', "component");
        } catch (const ParseError& e) {
            throw ParseError(at + ": " + e.what());
        }
        if (vals.size() != 1 + 2 * d)
            throw ParseError(at + ": expected " + std::to_string(1 + 2 * d) + " values (weight, means, variances)");
        MixtureComponent c;
        c.weight = vals[0];
        c.mean.assign(vals.begin() + 1, vals.begin() + 1 + static_cast<std::ptrdiff_t>(d));
        c.variances.assign(vals.begin() + 1 + static_cast<std::ptrdiff_t>(d), vals.end());
        current->components.push_back(std::move(c));
    }
    try {
        s.validate();
    } catch (const SpecError& e) {
        throw ParseError(where + ": " + e.what());
    }
    return s;
}

} // namespace srfilter
