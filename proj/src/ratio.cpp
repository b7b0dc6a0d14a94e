#include "srfilter/ratio.hpp"

#include "srfilter/error.hpp"
#include "srfilter/io.hpp"
#include "srfilter/repr.hpp"
#include "srfilter/rng.hpp"

#include <algorithm>
#include <cmath>

namespace srfilter {

NoiseSpec NoiseSpec::from_ranges(double eta, const std::vector<double>& ranges)
{
    NoiseSpec n{eta, {}};
    for (double r : ranges)
        n.per_dim_scale.push_back(eta * r);
    n.validate();
    return n;
}

void NoiseSpec::validate() const
{
    if (!(eta > 0.0))
        throw SpecError("noise: eta must be positive");
    if (per_dim_scale.empty())
        throw SpecError("noise: per-dimension scales missing");
    for (double s : per_dim_scale)
        if (!(s > 0.0) || !std::isfinite(s))
            throw SpecError("noise: all scales must be positive and finite");
}

void RatioModel::validate() const
{
    if (!(rho > 0.0) || !std::isfinite(rho))
        throw SpecError("ratio model: rho must be positive");
    if (!(delta > 0.0 && delta < 0.5))
        throw SpecError("ratio model: delta must lie in (0, 0.5)");
    if (kind == RatioKind::Smoothed) {
        if (!noise)
            throw SpecError("ratio model: smoothed model without noise spec");
        noise->validate();
    }
}

double percentile(std::vector<double> values, double p)
{
    if (values.empty())
        throw DataError("percentile: no values");
    const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(lo);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
    const double a = values[lo];
    if (frac == 0.0 || lo + 1 >= values.size())
        return a;
    const double b = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
    return a + frac * (b - a);
}

std::vector<double> compute_ranges(const Matrix& z)
{
    if (z.rows() < 2)
        throw DataError("compute_ranges: need at least 2 rows");
    std::vector<double> ranges;
    std::vector<double> col(static_cast<std::size_t>(z.rows()));
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        for (Eigen::Index r = 0; r < z.rows(); ++r)
            col[static_cast<std::size_t>(r)] = z(r, c);
        const double range = percentile(col, 99.5) - percentile(col, 0.5);
        if (!(range > 0.0))
            throw DataError("compute_ranges: degenerate dimension " + std::to_string(c + 1) + " has zero range");
        ranges.push_back(range);
    }
    return ranges;
}

Matrix smear(const Matrix& z, const NoiseSpec& noise, std::uint64_t seed)
{
    noise.validate();
    if (static_cast<std::size_t>(z.cols()) != noise.per_dim_scale.size())
        throw DimensionError("smear: noise dimension does not match representation width");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix out = z;
    for (Eigen::Index r = 0; r < out.rows(); ++r)
        for (Eigen::Index c = 0; c < out.cols(); ++c)
            out(r, c) += noise.per_dim_scale[static_cast<std::size_t>(c)] * normal(rng);
    return out;
}

namespace {

void check_pair(const Matrix& z3b, const Matrix& z4b, const MLPSpec& spec)
{
    if (z3b.rows() == 0 || z4b.rows() == 0)
        throw DataError("fit_ratio: both samples must be nonempty");
    if (z3b.cols() != z4b.cols())
        throw DimensionError("fit_ratio: 3b and 4b representations differ in width");
    if (static_cast<std::size_t>(z3b.cols()) != spec.input_dim())
        throw DimensionError("fit_ratio: spec input " + std::to_string(spec.input_dim()) +
                             " does not match representation width " + std::to_string(z3b.cols()));
}

Matrix stack(const Matrix& a, const Matrix& b)
{
    Matrix x(a.rows() + b.rows(), a.cols());
    x << a, b;
    return x;
}

Eigen::VectorXd stacked_labels(Eigen::Index n0, Eigen::Index n1)
{
    Eigen::VectorXd y(n0 + n1);
    y.head(n0).setZero();
    y.tail(n1).setOnes();
    return y;
}

// Rewrites the first layer so the network accepts raw inputs:
// W' = W diag(1/scale), b' = b - W' mean.
void fold_standardization(MLPParams& params, const Standardization& s)
{
    auto& first = params.layers.front();
    for (Eigen::Index c = 0; c < first.weights.cols(); ++c)
        first.weights.col(c) /= s.scale[static_cast<std::size_t>(c)];
    Eigen::Map<const Eigen::VectorXd> mean(s.mean.data(), static_cast<Eigen::Index>(s.mean.size()));
    first.bias -= first.weights * mean;
}

} // namespace

RatioModel fit_ratio(const Matrix& z3b, const Matrix& z4b, const MLPSpec& spec, const TrainConfig& cfg,
                     std::uint64_t seed)
{
    check_pair(z3b, z4b, spec);
    Matrix x = stack(z3b, z4b);
    auto standardization = Standardization::fit(x);
    standardization.apply(x);
    RatioModel model;
    model.classifier = train(spec, cfg, x, stacked_labels(z3b.rows(), z4b.rows()), seed).params;
    fold_standardization(model.classifier, standardization);
    model.rho = static_cast<double>(z3b.rows()) / static_cast<double>(z4b.rows());
    model.kind = RatioKind::Plain;
    return model;
}

RatioModel fit_smoothed_ratio(const Matrix& z3b, const Matrix& z4b, const NoiseSpec& noise, const MLPSpec& spec,
                              const TrainConfig& cfg, std::uint64_t seed, bool redraw_each_epoch)
{
    check_pair(z3b, z4b, spec);
    noise.validate();
    if (noise.per_dim_scale.size() != static_cast<std::size_t>(z3b.cols()))
        throw DimensionError("fit_smoothed_ratio: noise dimension does not match representation width");

    Matrix x = stack(smear(z3b, noise, derive_seed(seed, 0, "smear-3b")),
                     smear(z4b, noise, derive_seed(seed, 0, "smear-4b")));
    auto standardization = Standardization::fit(x);
    const auto y = stacked_labels(z3b.rows(), z4b.rows());
    const std::uint64_t train_seed = derive_seed(seed, 0, "train");

    RatioModel model;
    if (!redraw_each_epoch) {
        standardization.apply(x);
        model.classifier = train(spec, cfg, x, y, train_seed).params;
    } else {
        // The classifier sees clean inputs; the hook adds fresh noise to the
        // training partition every epoch and a fixed draw to validation.
        Matrix clean = stack(z3b, z4b);
        standardization.apply(clean);
        NoiseSpec scaled = noise;
        for (std::size_t j = 0; j < scaled.per_dim_scale.size(); ++j)
            scaled.per_dim_scale[j] /= standardization.scale[j];
        Matrix base;
        EpochHook hook = [&, scaled](std::size_t epoch, Matrix& train_x, Matrix& val_x) {
            if (epoch == 1) {
                base = train_x;
                val_x = smear(val_x, scaled, derive_seed(seed, 0, "redraw-validation"));
            }
            train_x = smear(base, scaled, derive_seed(seed, epoch, "redraw-train"));
        };
        model.classifier = train(spec, cfg, clean, y, train_seed, hook).params;
    }
    fold_standardization(model.classifier, standardization);
    model.rho = static_cast<double>(z3b.rows()) / static_cast<double>(z4b.rows());
    model.kind = RatioKind::Smoothed;
    model.noise = noise;
    return model;
}

double odds_ratio(double s, double rho, double delta)
{
    s = std::clamp(s, delta, 1.0 - delta);
    return rho * s / (1.0 - s);
}

double eval_ratio(const RatioModel& model, std::span<const double> z)
{
    return odds_ratio(forward(model.classifier, z), model.rho, model.delta);
}

Eigen::VectorXd eval_ratio(const RatioModel& model, const Matrix& z)
{
    Eigen::VectorXd s = predict(model.classifier, z);
    for (Eigen::Index i = 0; i < s.size(); ++i)
        s(i) = odds_ratio(s(i), model.rho, model.delta);
    return s;
}

void save_ratio(const RatioModel& model, const std::filesystem::path& path)
{
    model.validate();
    std::string out = "ratio v1\n";
    out += std::string("kind = ") + (model.kind == RatioKind::Smoothed ? "smoothed" : "plain") + "\n";
    out += "rho = " + io::format_double(model.rho) + "\n";
    out += "delta = " + io::format_double(model.delta) + "\n";
    if (model.kind == RatioKind::Smoothed) {
        out += "eta = " + io::format_double(model.noise->eta) + "\n";
        out += "per_dim_scale = " + io::join_doubles(model.noise->per_dim_scale, ' ') + "\n";
    }
    out += "end\n";
    out += format_mlp(model.classifier);
    io::write_text(path, out);
}

RatioModel load_ratio(const std::filesystem::path& path)
{
    auto lines = io::read_lines(path);
    const std::string where = "'" + path.string() + "'";
    std::size_t pos = 0;
    auto block = io::parse_header_block(lines, pos, "ratio v1", where);
    RatioModel m;
    const auto& kind = io::require_key(block, "kind", where);
    if (kind == "plain")
        m.kind = RatioKind::Plain;
    else if (kind == "smoothed")
        m.kind = RatioKind::Smoothed;
    else
        throw ParseError(where + ": unknown ratio kind '" + kind + "'");
    m.rho = io::parse_double(io::require_key(block, "rho", where), "rho");
    m.delta = io::parse_double(io::require_key(block, "delta", where), "delta");
    if (m.kind == RatioKind::Smoothed) {
        NoiseSpec n;
        n.eta = io::parse_double(io::require_key(block, "eta", where), "eta");
        n.per_dim_scale = io::parse_double_list(io::require_key(block, "per_dim_scale", where), ' ', "per_dim_scale");
        m.noise = n;
    }
    m.classifier = parse_mlp(lines, pos, where);
    try {
        m.validate();
    } catch (const SpecError& e) {
        throw ParseError(where + ": " + e.what());
    }
    if (m.noise && m.noise->per_dim_scale.size() != m.input_dim())
        throw ParseError(where + ": per_dim_scale width does not match classifier input");
    return m;
}

} // namespace srfilter
