#include "srfilter/repr.hpp"

#include "srfilter/error.hpp"
#include "srfilter/io.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace srfilter {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_phi(double phi)
{
    phi = std::remainder(phi, 2.0 * kPi);
    if (phi >= kPi)
        phi -= 2.0 * kPi;
    if (phi < -kPi)
        phi += 2.0 * kPi;
    return phi;
}

double canonical_phi(double phi)
{
    return wrap_phi(std::round(wrap_phi(phi) / kPhiQuantum) * kPhiQuantum);
}

const char* to_string(Canonicalization c) { return c == Canonicalization::Full ? "full" : "none"; }
const char* to_string(ReprMode m) { return m == ReprMode::Learned ? "learned" : "passthrough"; }

} // namespace

Event canonicalize(const Event& e)
{
    Event out = e;
    std::array<std::size_t, kNumJets> order{};
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return e.features[pt_slot(a)] > e.features[pt_slot(b)];
    });
    for (std::size_t j = 0; j < kNumJets; ++j)
        for (std::size_t k = 0; k < kFeaturesPerJet; ++k)
            out.features[j * kFeaturesPerJet + k] = e.features[order[j] * kFeaturesPerJet + k];

    const double phi0 = out.features[phi_slot(0)];
    for (std::size_t j = 0; j < kNumJets; ++j)
        out.features[phi_slot(j)] = canonical_phi(out.features[phi_slot(j)] - phi0);
    if (out.features[phi_slot(1)] < 0.0)
        for (std::size_t j = 0; j < kNumJets; ++j)
            out.features[phi_slot(j)] = wrap_phi(-out.features[phi_slot(j)]);

    double eta_sum = 0.0;
    for (std::size_t j = 0; j < kNumJets; ++j)
        eta_sum += out.features[eta_slot(j)];
    if (eta_sum < 0.0)
        for (std::size_t j = 0; j < kNumJets; ++j)
            out.features[eta_slot(j)] = -out.features[eta_slot(j)];
    return out;
}

Standardization Standardization::fit(const Matrix& x)
{
    Standardization s;
    const auto n = static_cast<double>(x.rows());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        double mean = x.col(c).mean();
        double var = (x.col(c).array() - mean).square().sum() / n;
        double sd = std::sqrt(var);
        s.mean.push_back(mean);
        s.scale.push_back(sd > 0.0 && std::isfinite(sd) ? sd : 1.0);
    }
    return s;
}

void Standardization::apply(Matrix& x) const
{
    if (static_cast<std::size_t>(x.cols()) != mean.size())
        throw DimensionError("standardization: width mismatch");
    for (Eigen::Index c = 0; c < x.cols(); ++c)
        x.col(c) = (x.col(c).array() - mean[static_cast<std::size_t>(c)]) / scale[static_cast<std::size_t>(c)];
}

std::size_t ReprModel::repr_dim() const
{
    if (mode == ReprMode::Learned)
        return classifier->spec.last_hidden();
    return canonicalization == Canonicalization::Full ? input_dims - 1 : input_dims;
}

ReprModel pass_through(std::size_t active_dims, Canonicalization canon)
{
    if (active_dims == 0 || active_dims > kNumFeatures)
        throw SpecError("repr: active dimension must lie in [1, 16]");
    if (canon == Canonicalization::Full && active_dims != kNumFeatures)
        throw SpecError("repr: canonicalization requires all 16 features");
    ReprModel m;
    m.mode = ReprMode::PassThrough;
    m.canonicalization = canon;
    m.input_dims = active_dims;
    return m;
}

MLPSpec default_repr_spec(std::size_t input_dims, std::size_t repr_dim)
{
    return MLPSpec::with_hidden(input_dims, {64, 64, repr_dim});
}

Matrix feature_matrix(std::span<const Event> events, std::size_t active_dims, Canonicalization canon)
{
    Matrix x(static_cast<Eigen::Index>(events.size()), static_cast<Eigen::Index>(active_dims));
    for (std::size_t i = 0; i < events.size(); ++i) {
        const Event& e = canon == Canonicalization::Full ? canonicalize(events[i]) : events[i];
        for (std::size_t j = 0; j < active_dims; ++j)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = e.features[j];
    }
    return x;
}

void prune_constant_units(MLPParams& params, const Matrix& x)
{
    if (params.layers.size() < 2)
        return;
    const Matrix h = last_hidden_activations(params, x);
    std::vector<Eigen::Index> keep;
    std::vector<Eigen::Index> dropped;
    // A unit is kept only if its 0.5%-99.5% trimmed spread is positive, so
    // that noise scales derived from representation ranges are defined.
    const auto n = static_cast<std::size_t>(h.rows());
    const auto lo_idx = static_cast<std::size_t>(std::floor(0.005 * static_cast<double>(n - 1)));
    const auto hi_idx = static_cast<std::size_t>(std::ceil(0.995 * static_cast<double>(n - 1)));
    for (Eigen::Index k = 0; k < h.cols(); ++k) {
        std::vector<double> v(h.col(k).begin(), h.col(k).end());
        std::sort(v.begin(), v.end());
        (v[hi_idx] > v[lo_idx] ? keep : dropped).push_back(k);
    }
    if (dropped.empty())
        return;
    if (keep.empty()) // fully degenerate: keep one unit so the embedding stays defined
        keep.push_back(dropped.back()), dropped.pop_back();

    DenseLayer& hidden = params.layers[params.layers.size() - 2];
    DenseLayer& output = params.layers.back();
    for (auto k : dropped)
        output.bias += output.weights.col(k) * h.col(k).mean();
    DenseLayer new_hidden{Eigen::MatrixXd(keep.size(), hidden.weights.cols()), Eigen::VectorXd(keep.size())};
    Eigen::MatrixXd new_out(output.weights.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) {
        const auto k = keep[i];
        const auto r = static_cast<Eigen::Index>(i);
        new_hidden.weights.row(r) = hidden.weights.row(k);
        new_hidden.bias(r) = hidden.bias(k);
        new_out.col(r) = output.weights.col(k);
    }
    hidden = std::move(new_hidden);
    output.weights = std::move(new_out);
    params.spec.layer_sizes[params.spec.layer_sizes.size() - 2] = keep.size();
}

ReprModel fit_representation(const Dataset& d3b, const Dataset& d4b, const MLPSpec& spec, const TrainConfig& cfg,
                             std::uint64_t seed, Canonicalization canon)
{
    if (d3b.empty() || d4b.empty())
        throw DataError("fit_representation: both datasets must be nonempty");
    if (d3b.active_dims != d4b.active_dims)
        throw DimensionError("fit_representation: 3b and 4b datasets differ in active dimensions");
    const std::size_t dims = d3b.active_dims;
    if (spec.input_dim() != dims)
        throw DimensionError("fit_representation: spec input " + std::to_string(spec.input_dim()) +
                             " does not match active feature count " + std::to_string(dims));
    if (canon == Canonicalization::Full && dims != kNumFeatures)
        throw SpecError("fit_representation: canonicalization requires all 16 features");

    Matrix x3 = feature_matrix(d3b.events, dims, canon);
    Matrix x4 = feature_matrix(d4b.events, dims, canon);
    Matrix x(x3.rows() + x4.rows(), x3.cols());
    x << x3, x4;
    Eigen::VectorXd y(x.rows());
    y.head(x3.rows()).setZero();
    y.tail(x4.rows()).setOnes();

    ReprModel model;
    model.mode = ReprMode::Learned;
    model.canonicalization = canon;
    model.input_dims = dims;
    model.standardization = Standardization::fit(x);
    model.standardization.apply(x);
    model.classifier = train(spec, cfg, x, y, seed).params;
    prune_constant_units(*model.classifier, x);
    return model;
}

namespace {

Matrix standardized_inputs(const ReprModel& model, std::span<const Event> events)
{
    Matrix x = feature_matrix(events, model.input_dims, model.canonicalization);
    if (model.mode == ReprMode::Learned)
        model.standardization.apply(x);
    return x;
}

Matrix drop_column(const Matrix& x, Eigen::Index c)
{
    Matrix out(x.rows(), x.cols() - 1);
    out.leftCols(c) = x.leftCols(c);
    out.rightCols(x.cols() - c - 1) = x.rightCols(x.cols() - c - 1);
    return out;
}

} // namespace

Matrix embed(const ReprModel& model, std::span<const Event> events, std::vector<std::string>* warnings)
{
    if (model.mode == ReprMode::Learned && !model.classifier)
        throw SpecError("embed: learned representation has no classifier");
    Matrix x = standardized_inputs(model, events);
    Matrix z;
    if (model.mode == ReprMode::Learned)
        z = last_hidden_activations(*model.classifier, x);
    else if (model.canonicalization == Canonicalization::Full)
        z = drop_column(x, static_cast<Eigen::Index>(phi_slot(0))); // canonical jet-1 phi is always 0
    else
        z = std::move(x);
    if (warnings && z.rows() > 1) {
        bool identical = true;
        for (Eigen::Index c = 0; c < z.cols() && identical; ++c)
            identical = z.col(c).maxCoeff() == z.col(c).minCoeff();
        if (identical)
            warnings->push_back("degenerate embedding: all " + std::to_string(z.rows()) + " rows are identical");
    }
    return z;
}

Eigen::VectorXd repr_classifier_probability(const ReprModel& model, std::span<const Event> events)
{
    if (model.mode != ReprMode::Learned || !model.classifier)
        throw SpecError("repr_classifier_probability: model has no classifier");
    return predict(*model.classifier, standardized_inputs(model, events));
}

void save_repr(const ReprModel& model, const std::filesystem::path& path)
{
    std::string out = "repr v1\n";
    out += std::string("mode = ") + to_string(model.mode) + "\n";
    out += std::string("canonicalization = ") + to_string(model.canonicalization) + "\n";
    out += "input_dims = " + std::to_string(model.input_dims) + "\n";
    if (model.mode == ReprMode::Learned) {
        out += "standardization_mean = " + io::join_doubles(model.standardization.mean, ' ') + "\n";
        out += "standardization_scale = " + io::join_doubles(model.standardization.scale, ' ') + "\n";
    }
    out += "end\n";
    if (model.mode == ReprMode::Learned)
        out += format_mlp(*model.classifier);
    io::write_text(path, out);
}

ReprModel load_repr(const std::filesystem::path& path)
{
    auto lines = io::read_lines(path);
    const std::string where = "'" + path.string() + "'";
    std::size_t pos = 0;
    auto block = io::parse_header_block(lines, pos, "repr v1", where);
    ReprModel m;
    const auto& mode = io::require_key(block, "mode", where);
    if (mode == "learned")
        m.mode = ReprMode::Learned;
    else if (mode == "passthrough")
        m.mode = ReprMode::PassThrough;
    else
        throw ParseError(where + ": unknown mode '" + mode + "'");
    const auto& canon = io::require_key(block, "canonicalization", where);
    if (canon != "full" && canon != "none")
        throw ParseError(where + ": unknown canonicalization '" + canon + "'");
    m.canonicalization = canon == "full" ? Canonicalization::Full : Canonicalization::None;
    m.input_dims = static_cast<std::size_t>(io::parse_int(io::require_key(block, "input_dims", where), "input_dims"));
    if (m.mode == ReprMode::Learned) {
        m.standardization.mean =
            io::parse_double_list(io::require_key(block, "standardization_mean", where), ' ', "standardization_mean");
        m.standardization.scale = io::parse_double_list(io::require_key(block, "standardization_scale", where), ' ',
                                                        "standardization_scale");
        if (m.standardization.mean.size() != m.input_dims || m.standardization.scale.size() != m.input_dims)
            throw ParseError(where + ": standardization width does not match input_dims");
        for (double s : m.standardization.scale)
            if (!(s > 0.0))
                throw ParseError(where + ": standardization scales must be positive");
        m.classifier = parse_mlp(lines, pos, where);
        if (m.classifier->spec.input_dim() != m.input_dims)
            throw ParseError(where + ": classifier input does not match input_dims");
    }
    return m;
}

void write_representations(std::span<const Event> events, const Matrix& z, const std::filesystem::path& path)
{
    if (static_cast<std::size_t>(z.rows()) != events.size())
        throw DimensionError("write_representations: row count does not match event count");
    std::string out = "event_id";
    for (Eigen::Index c = 0; c < z.cols(); ++c)
        out += ",z" + std::to_string(c + 1);
    out += '\n';
    for (std::size_t i = 0; i < events.size(); ++i) {
        out += std::to_string(events[i].id);
        for (Eigen::Index c = 0; c < z.cols(); ++c) {
            out += ',';
            out += io::format_double(z(static_cast<Eigen::Index>(i), c));
        }
        out += '\n';
    }
    io::write_text(path, out);
}

Representations read_representations(const std::filesystem::path& path)
{
    auto lines = io::read_lines(path);
    const std::string where = "'" + path.string() + "'";
    if (lines.empty() || lines[0].rfind("event_id,z1", 0) != 0)
        throw ParseError(where + " line 1: expected header 'event_id,z1,...,zD'");
    const auto width = io::split(lines[0], ',').size() - 1;
    std::vector<std::vector<double>> rows;
    Representations r;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty())
            continue;
        auto cols = io::split(lines[i], ',');
        if (cols.size() != width + 1)
            throw ParseError(where + " line " + std::to_string(i + 1) + ": expected " + std::to_string(width + 1) +
                             " fields");
        try {
            r.ids.push_back(static_cast<std::uint64_t>(io::parse_int(cols[0], "event_id")));
            std::vector<double> row;
            for (std::size_t c = 1; c < cols.size(); ++c)
                row.push_back(io::parse_double(cols[c], "z" + std::to_string(c)));
            rows.push_back(std::move(row));
        } catch (const ParseError& e) {
            throw ParseError(where + " line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    r.z.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t c = 0; c < width; ++c)
            r.z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
    return r;
}

} // namespace srfilter
