#include "srfilter/region.hpp"

#include "srfilter/error.hpp"
#include "srfilter/io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace srfilter {

double peak_score(const RatioModel& gamma, const RatioModel& gamma_tilde, std::span<const double> z)
{
    return eval_ratio(gamma, z) / eval_ratio(gamma_tilde, z);
}

Eigen::VectorXd peak_score(const RatioModel& gamma, const RatioModel& gamma_tilde, const Matrix& z)
{
    return eval_ratio(gamma, z).cwiseQuotient(eval_ratio(gamma_tilde, z));
}

std::size_t sr_member_count(double q, std::size_t n)
{
    const double target = q * static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::ceil(target - 1e-9 * std::max(1.0, target)));
    return std::clamp<std::size_t>(k, 1, n);
}

SignalRegion calibrate_threshold(std::span<const double> scores, double q)
{
    if (scores.empty())
        throw DataError("calibrate_threshold: no calibration scores");
    if (!(q > 0.0 && q <= 1.0))
        throw SpecError("calibrate_threshold: q must lie in (0, 1]");
    std::vector<double> sorted(scores.begin(), scores.end());
    const std::size_t k = sr_member_count(q, sorted.size());
    // k-th largest == (N - k)-th smallest, 0-based.
    auto nth = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() - k);
    std::nth_element(sorted.begin(), nth, sorted.end());
    return SignalRegion{*nth, q, scores.size()};
}

std::vector<double> default_q_grid()
{
    constexpr std::size_t n = 50;
    const double lo = std::log(0.005);
    std::vector<double> grid(n);
    for (std::size_t i = 0; i < n; ++i)
        grid[i] = std::exp(lo + (0.0 - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
    grid.back() = 1.0;
    return grid;
}

EnrichmentCurve enrichment_curve(std::span<const double> scores, std::span<const Truth> truth,
                                 std::span<const double> q_grid)
{
    if (scores.size() != truth.size())
        throw DimensionError("enrichment_curve: scores and truth labels are not aligned");
    if (scores.empty())
        throw DataError("enrichment_curve: no events");
    if (!std::is_sorted(q_grid.begin(), q_grid.end()))
        throw SpecError("enrichment_curve: q grid must be sorted ascending");

    // Sort once; the SR for threshold tau is the suffix of scores >= tau.
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<std::size_t> signal_suffix(order.size() + 1, 0);
    for (std::size_t i = order.size(); i-- > 0;)
        signal_suffix[i] = signal_suffix[i + 1] + (truth[order[i]] == Truth::Signal ? 1 : 0);
    const std::size_t total_signal = signal_suffix[0];
    const auto n = static_cast<double>(scores.size());

    EnrichmentCurve curve;
    for (double q : q_grid) {
        auto region = calibrate_threshold(scores, q);
        auto first = std::lower_bound(order.begin(), order.end(), region.tau_s,
                                      [&](std::size_t idx, double tau) { return scores[idx] < tau; });
        auto start = static_cast<std::size_t>(first - order.begin());
        CurvePoint p;
        p.q = q;
        p.tau = region.tau_s;
        p.p4b_in_sr = static_cast<double>(order.size() - start) / n;
        if (total_signal > 0)
            p.s_in_sr = static_cast<double>(signal_suffix[start]) / static_cast<double>(total_signal);
        curve.points.push_back(p);
    }
    return curve;
}

double curve_auc(const EnrichmentCurve& curve)
{
    if (curve.points.size() < 2)
        throw DataError("curve_auc: need at least 2 points");
    std::vector<std::pair<double, double>> xy{{0.0, 0.0}};
    for (const auto& p : curve.points) {
        if (!p.s_in_sr)
            throw DataError("curve_auc: curve has undefined signal fractions");
        xy.emplace_back(p.p4b_in_sr, *p.s_in_sr);
    }
    xy.emplace_back(1.0, 1.0);
    std::stable_sort(xy.begin(), xy.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    double area = 0.0;
    for (std::size_t i = 1; i < xy.size(); ++i)
        area += (xy[i].first - xy[i - 1].first) * 0.5 * (xy[i].second + xy[i - 1].second);
    return area;
}

AggregatedCurve aggregate_curves(std::span<const EnrichmentCurve> curves)
{
    if (curves.empty())
        throw DataError("aggregate_curves: no curves");
    const auto& ref = curves.front().points;
    for (const auto& c : curves) {
        if (c.points.size() != ref.size())
            throw SpecError("aggregate_curves: curves have mismatched q grids");
        for (std::size_t i = 0; i < ref.size(); ++i)
            if (c.points[i].q != ref[i].q)
                throw SpecError("aggregate_curves: curves have mismatched q grids");
    }
    const auto k = static_cast<double>(curves.size());
    AggregatedCurve out;
    out.count = curves.size();
    out.mean.metadata = curves.front().metadata;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        double p_sum = 0.0, tau_sum = 0.0, s_sum = 0.0;
        bool s_defined = true;
        for (const auto& c : curves) {
            p_sum += c.points[i].p4b_in_sr;
            tau_sum += c.points[i].tau;
            if (c.points[i].s_in_sr)
                s_sum += *c.points[i].s_in_sr;
            else
                s_defined = false;
        }
        CurvePoint m{ref[i].q, tau_sum / k, p_sum / k, std::nullopt};
        if (s_defined)
            m.s_in_sr = s_sum / k;
        std::optional<double> p_sd, s_sd;
        if (curves.size() > 1) {
            double pv = 0.0, sv = 0.0;
            for (const auto& c : curves) {
                pv += std::pow(c.points[i].p4b_in_sr - m.p4b_in_sr, 2);
                if (s_defined)
                    sv += std::pow(*c.points[i].s_in_sr - *m.s_in_sr, 2);
            }
            p_sd = std::sqrt(pv / (k - 1.0));
            if (s_defined)
                s_sd = std::sqrt(sv / (k - 1.0));
        }
        out.mean.points.push_back(m);
        out.p_std.push_back(p_sd);
        out.s_std.push_back(s_sd);
    }
    return out;
}

namespace {

std::string opt_to_string(const std::optional<double>& v) { return v ? io::format_double(*v) : "na"; }

std::string metadata_line(const std::map<std::string, std::string>& meta)
{
    std::string line = "#";
    for (const auto& [k, v] : meta)
        line += " " + k + "=" + v;
    return line + "\n";
}

} // namespace

void write_curve(const EnrichmentCurve& curve, const std::filesystem::path& path)
{
    std::string out = metadata_line(curve.metadata);
    out += "q,tau,p4b_in_sr,s_in_sr\n";
    for (const auto& p : curve.points)
        out += io::format_double(p.q) + "," + io::format_double(p.tau) + "," + io::format_double(p.p4b_in_sr) + "," +
               opt_to_string(p.s_in_sr) + "\n";
    io::write_text(path, out);
}

void write_aggregated_curve(const AggregatedCurve& curve, const std::filesystem::path& path)
{
    std::string out = metadata_line(curve.mean.metadata);
    out += "q,tau,p4b_in_sr,s_in_sr,s_std,p_std\n";
    for (std::size_t i = 0; i < curve.mean.points.size(); ++i) {
        const auto& p = curve.mean.points[i];
        out += io::format_double(p.q) + "," + io::format_double(p.tau) + "," + io::format_double(p.p4b_in_sr) + "," +
               opt_to_string(p.s_in_sr) + "," + opt_to_string(curve.s_std[i]) + "," + opt_to_string(curve.p_std[i]) +
               "\n";
    }
    io::write_text(path, out);
}

EnrichmentCurve read_curve(const std::filesystem::path& path)
{
    auto lines = io::read_lines(path);
    const std::string where = "'" + path.string() + "'";
    EnrichmentCurve curve;
    std::size_t i = 0;
    if (i < lines.size() && !lines[i].empty() && lines[i][0] == '#') {
        for (auto tok : io::split(io::trim(std::string_view(lines[i]).substr(1)), ' ')) {
            auto eq = tok.find('=');
            if (eq != std::string_view::npos)
                curve.metadata[std::string(tok.substr(0, eq))] = std::string(tok.substr(eq + 1));
        }
        ++i;
    }
    if (i >= lines.size() || lines[i].rfind("q,tau,p4b_in_sr,s_in_sr", 0) != 0)
        throw ParseError(where + " line " + std::to_string(i + 1) + ": expected header 'q,tau,p4b_in_sr,s_in_sr'");
    for (++i; i < lines.size(); ++i) {
        if (lines[i].empty())
            continue;
        auto cols = io::split(lines[i], ',');
        if (cols.size() < 4)
            throw ParseError(where + " line " + std::to_string(i + 1) + ": expected at least 4 fields");
        CurvePoint p;
        p.q = io::parse_double(cols[0], "q");
        p.tau = io::parse_double(cols[1], "tau");
        p.p4b_in_sr = io::parse_double(cols[2], "p4b_in_sr");
        if (io::trim(cols[3]) != "na")
            p.s_in_sr = io::parse_double(cols[3], "s_in_sr");
        curve.points.push_back(p);
    }
    return curve;
}

} // namespace srfilter
