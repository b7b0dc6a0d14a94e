#include "srfilter/events.hpp"

#include "srfilter/error.hpp"
#include "srfilter/io.hpp"
#include "srfilter/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace srfilter {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_phi_slot(std::size_t slot) { return slot % kFeaturesPerJet == 2; }
bool is_positive_slot(std::size_t slot)
{
    auto k = slot % kFeaturesPerJet;
    return k == 0 || k == 3;
}

double log_normal_pdf(double x, double mean, double sd)
{
    double z = (x - mean) / sd;
    return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * kPi);
}

// log P(X > 0) for X ~ N(mean, sd^2).
double log_positive_mass(double mean, double sd)
{
    return std::log(0.5 * std::erfc(-mean / (sd * std::numbers::sqrt2)));
}

} // namespace

std::string feature_name(std::size_t slot)
{
    static const char* kinds[] = {"pt", "eta", "phi", "m"};
    return std::string(kinds[slot % kFeaturesPerJet]) + std::to_string(slot / kFeaturesPerJet + 1);
}

std::optional<std::size_t> feature_slot(std::string_view name)
{
    for (std::size_t s = 0; s < kNumFeatures; ++s)
        if (feature_name(s) == name)
            return s;
    return std::nullopt;
}

const char* to_string(Tag tag) { return tag == Tag::ThreeB ? "3b" : "4b"; }

std::optional<Truth> parse_truth(std::string_view s)
{
    if (s == "bkg")
        return Truth::Background;
    if (s == "sig")
        return Truth::Signal;
    if (s == "na")
        return Truth::Unknown;
    return std::nullopt;
}

const char* to_string(Truth truth)
{
    switch (truth) {
    case Truth::Background: return "bkg";
    case Truth::Signal: return "sig";
    case Truth::Unknown: break;
    }
    return "na";
}

std::optional<std::string> event_violation(const Event& e, std::size_t active_dims)
{
    if (e.truth == Truth::Signal && e.tag != Tag::FourB)
        return "truth: signal events must be tagged 4b";
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        if (!std::isfinite(e.features[i]))
            return feature_name(i) + ": value is not finite";
    }
    if (active_dims != kNumFeatures)
        return std::nullopt;
    for (std::size_t j = 0; j < kNumJets; ++j) {
        double pt = e.features[pt_slot(j)];
        double m = e.features[mass_slot(j)];
        double phi = e.features[phi_slot(j)];
        if (!(pt > 0.0))
            return feature_name(pt_slot(j)) + ": transverse momentum must be > 0, got " + io::format_double(pt);
        if (!(m >= 0.0))
            return feature_name(mass_slot(j)) + ": mass must be >= 0, got " + io::format_double(m);
        if (!(phi >= -kPi && phi < kPi))
            return feature_name(phi_slot(j)) + ": value " + io::format_double(phi) + " out of range [-pi, pi)";
    }
    return std::nullopt;
}

std::size_t Dataset::count(Tag tag) const
{
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [&](const Event& e) { return e.tag == tag; }));
}

std::size_t Dataset::count(Truth truth) const
{
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [&](const Event& e) { return e.truth == truth; }));
}

// ---------------------------------------------------------------------------
// Mixtures

void MixtureSpec::validate() const
{
    if (components.empty())
        throw SpecError("mixture: at least one component required");
    const std::size_t d = components.front().mean.size();
    if (d == 0)
        throw SpecError("mixture: component dimension must be positive");
    double total = 0.0;
    for (std::size_t k = 0; k < components.size(); ++k) {
        const auto& c = components[k];
        const std::string tag = "mixture component " + std::to_string(k) + ": ";
        if (!(c.weight >= 0.0 && c.weight <= 1.0))
            throw SpecError(tag + "weight must lie in [0, 1]");
        if (c.mean.size() != d || c.variances.size() != d)
            throw SpecError(tag + "all component dimensions must equal " + std::to_string(d));
        for (double v : c.variances)
            if (!(v > 0.0) || !std::isfinite(v))
                throw SpecError(tag + "variances must be strictly positive");
        for (double mu : c.mean)
            if (!std::isfinite(mu))
                throw SpecError(tag + "means must be finite");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw SpecError("mixture: weights must sum to 1 within 1e-12 (sum = " + io::format_double(total) + ")");
}

MixtureSpec single_gaussian(std::vector<double> mean, std::vector<double> variances)
{
    MixtureSpec spec;
    spec.components.push_back({1.0, std::move(mean), std::move(variances)});
    return spec;
}

std::vector<SampledPoint> sample_mixture(const MixtureSpec& spec, std::size_t count, std::uint64_t seed)
{
    spec.validate();
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<double> cumulative;
    double acc = 0.0;
    for (const auto& c : spec.components) {
        acc += c.weight;
        cumulative.push_back(acc);
    }
    const std::size_t d = spec.dim();

    std::vector<SampledPoint> out(count);
    for (auto& sp : out) {
        double u = unif(rng) * acc;
        std::size_t k = 0;
        while (k + 1 < cumulative.size() && !(u < cumulative[k]))
            ++k;
        // Never land on a zero-weight tail component through rounding.
        while (spec.components[k].weight == 0.0 && k > 0)
            --k;
        const auto& c = spec.components[k];
        sp.component = k;
        sp.point.resize(d);
        for (std::size_t j = 0; j < d; ++j)
            sp.point[j] = c.mean[j] + std::sqrt(c.variances[j]) * normal(rng);
    }
    return out;
}

std::pair<Dataset, Dataset> generate_from_mixtures(const MixtureSpec& spec3b, const MixtureSpec& spec4b,
                                                   std::span<const std::size_t> signal_components,
                                                   std::size_t n, std::size_t m, std::uint64_t seed,
                                                   const std::string& name)
{
    spec3b.validate();
    spec4b.validate();
    if (spec3b.dim() != spec4b.dim())
        throw SpecError("mixture: 3b and 4b specs must share a dimension");
    const std::size_t d = spec3b.dim();
    if (d > kNumFeatures)
        throw SpecError("mixture: dimension exceeds the 16 feature slots");
    for (auto k : signal_components)
        if (k >= spec4b.components.size())
            throw SpecError("mixture: signal component index out of range");

    auto fill = [&](const std::vector<SampledPoint>& pts, Tag tag, bool truth_from_component, Dataset& ds) {
        ds.events.reserve(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            Event e;
            e.id = i;
            e.tag = tag;
            std::copy(pts[i].point.begin(), pts[i].point.end(), e.features.begin());
            if (truth_from_component) {
                bool sig = std::find(signal_components.begin(), signal_components.end(), pts[i].component) !=
                           signal_components.end();
                e.truth = sig ? Truth::Signal : Truth::Background;
            } else {
                e.truth = Truth::Background;
            }
            ds.events.push_back(e);
        }
    };

    Dataset d3b{name + "_3b", seed, d, {}, {}};
    Dataset d4b{name + "_4b", seed, d, {}, {}};
    fill(sample_mixture(spec3b, n, derive_seed(seed, 0, "3b")), Tag::ThreeB, false, d3b);
    fill(sample_mixture(spec4b, m, derive_seed(seed, 0, "4b")), Tag::FourB, true, d4b);
    return {std::move(d3b), std::move(d4b)};
}

MixtureSpec toy1d_spec3b(const Toy1dParams& p)
{
    return single_gaussian({p.mean3b}, {p.sd3b * p.sd3b});
}

MixtureSpec toy1d_spec4b(double epsilon, const Toy1dParams& p)
{
    MixtureSpec spec;
    spec.components.push_back({1.0 - epsilon, {p.background_mean4b}, {p.background_sd4b * p.background_sd4b}});
    spec.components.push_back({epsilon, {p.signal_mean}, {p.signal_sd * p.signal_sd}});
    return spec;
}

std::pair<Dataset, Dataset> generate_toy1d(std::size_t n, std::size_t m, double epsilon, std::uint64_t seed,
                                           const Toy1dParams& params)
{
    if (!(epsilon >= 0.0 && epsilon < 1.0))
        throw SpecError("toy1d: epsilon must lie in [0, 1)");
    const std::size_t signal[] = {1};
    return generate_from_mixtures(toy1d_spec3b(params), toy1d_spec4b(epsilon, params), signal, n, m, seed, "toy1d");
}

// ---------------------------------------------------------------------------
// Physics-like generator

PhysicsParams PhysicsParams::defaults() { return make(0.25, 0.5, 0.35, 0.03); }

PhysicsParams PhysicsParams::make(double signal_width, double signal_offset, double pt_shift, double mass_shift,
                                  std::vector<std::size_t> signal_features)
{
    PhysicsParams p;
    if (!signal_features.empty())
        p.signal_features = std::move(signal_features);
    // Background 4b: harder subleading jets, slightly heavier jets.
    for (std::size_t j = 1; j < kNumJets; ++j)
        p.background_shift[pt_slot(j)] = pt_shift * p.pt_sd[j];
    for (std::size_t j = 0; j < kNumJets; ++j)
        p.background_shift[mass_slot(j)] = mass_shift * p.mass_sd[j];
    p.signal_center.clear();
    p.signal_width.clear();
    for (auto slot : p.signal_features) {
        p.signal_center.push_back(p.base_mean(slot) + p.background_shift[slot] + signal_offset * p.base_sd(slot));
        p.signal_width.push_back(signal_width * p.base_sd(slot));
    }
    return p;
}

double PhysicsParams::base_mean(std::size_t slot) const
{
    std::size_t j = slot / kFeaturesPerJet;
    switch (slot % kFeaturesPerJet) {
    case 0: return pt_mean[j];
    case 3: return mass_mean[j];
    default: return 0.0;
    }
}

double PhysicsParams::base_sd(std::size_t slot) const
{
    std::size_t j = slot / kFeaturesPerJet;
    switch (slot % kFeaturesPerJet) {
    case 0: return pt_sd[j];
    case 1: return eta_sd[j];
    case 2: return 2.0 * kPi / std::sqrt(12.0);
    default: return mass_sd[j];
    }
}

void PhysicsParams::validate() const
{
    for (std::size_t j = 0; j < kNumJets; ++j) {
        if (!(pt_sd[j] > 0.0) || !(eta_sd[j] > 0.0) || !(mass_sd[j] > 0.0))
            throw SpecError("physics params: standard deviations must be positive");
        if (!(pt_mean[j] > 0.0) || !(mass_mean[j] >= 0.0))
            throw SpecError("physics params: pt means must be positive and mass means non-negative");
    }
    if (signal_center.size() != signal_features.size() || signal_width.size() != signal_features.size())
        throw SpecError("physics params: signal center/width must match signal_features");
    for (std::size_t k = 0; k < signal_features.size(); ++k) {
        auto slot = signal_features[k];
        if (slot >= kNumFeatures || is_phi_slot(slot))
            throw SpecError("physics params: signal features must be non-phi slots < 16");
        if (!(signal_width[k] > 0.0))
            throw SpecError("physics params: signal widths must be positive");
    }
    for (std::size_t s = 0; s < kNumFeatures; ++s)
        if (is_phi_slot(s) && background_shift[s] != 0.0)
            throw SpecError("physics params: phi cannot be shifted (uniform)");
}

namespace {

struct Marginal {
    double mean;
    double sd;
    bool positive;
};

enum class Population { ThreeB, Background4b, Signal };

Marginal marginal(const PhysicsParams& p, std::size_t slot, Population pop)
{
    Marginal mg{p.base_mean(slot), p.base_sd(slot), is_positive_slot(slot)};
    if (pop != Population::ThreeB)
        mg.mean += p.background_shift[slot];
    if (pop == Population::Signal) {
        auto it = std::find(p.signal_features.begin(), p.signal_features.end(), slot);
        if (it != p.signal_features.end()) {
            auto k = static_cast<std::size_t>(it - p.signal_features.begin());
            mg.mean = p.signal_center[k];
            mg.sd = p.signal_width[k];
        }
    }
    return mg;
}

// Log density of generator jet `jet` evaluated at the four features of
// output jet `slot_jet` of x.
double jet_log_density(const PhysicsParams& p, const Features& x, std::size_t jet, std::size_t slot_jet,
                       Population pop)
{
    double lp = 0.0;
    for (std::size_t k = 0; k < kFeaturesPerJet; ++k) {
        const std::size_t src = jet * kFeaturesPerJet + k;
        const double v = x[slot_jet * kFeaturesPerJet + k];
        if (is_phi_slot(src)) {
            if (!(v >= -kPi && v < kPi))
                return -std::numeric_limits<double>::infinity();
            lp -= std::log(2.0 * kPi);
            continue;
        }
        auto mg = marginal(p, src, pop);
        if (mg.positive) {
            if (!(v > 0.0))
                return -std::numeric_limits<double>::infinity();
            lp += log_normal_pdf(v, mg.mean, mg.sd) - log_positive_mass(mg.mean, mg.sd);
        } else {
            lp += log_normal_pdf(v, mg.mean, mg.sd);
        }
    }
    return lp;
}

// Events are emitted with jets sorted by descending pt, so the density is a
// sum over the 4! assignments of generator jets to output positions.
double physics_log_density(const PhysicsParams& p, const Features& x, Population pop)
{
    for (std::size_t j = 0; j + 1 < kNumJets; ++j)
        if (x[pt_slot(j)] < x[pt_slot(j + 1)])
            return -std::numeric_limits<double>::infinity();
    std::array<std::array<double, kNumJets>, kNumJets> lj{};
    for (std::size_t g = 0; g < kNumJets; ++g)
        for (std::size_t o = 0; o < kNumJets; ++o)
            lj[g][o] = jet_log_density(p, x, g, o, pop);
    std::array<std::size_t, kNumJets> perm{0, 1, 2, 3};
    std::vector<double> terms;
    do {
        double t = 0.0;
        for (std::size_t o = 0; o < kNumJets; ++o)
            t += lj[perm[o]][o];
        terms.push_back(t);
    } while (std::next_permutation(perm.begin(), perm.end()));
    const double mx = *std::max_element(terms.begin(), terms.end());
    if (!std::isfinite(mx))
        return mx;
    double sum = 0.0;
    for (double t : terms)
        sum += std::exp(t - mx);
    return mx + std::log(sum);
}

struct DrawStats {
    std::size_t draws = 0;
    std::size_t resamples = 0;
};

Features draw_physics(const PhysicsParams& p, Population pop, Rng& rng, DrawStats& stats)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(-kPi, kPi);
    Features x{};
    for (std::size_t s = 0; s < kNumFeatures; ++s) {
        if (is_phi_slot(s)) {
            double phi = unif(rng);
            x[s] = phi >= kPi ? -kPi : phi;
            continue;
        }
        auto mg = marginal(p, s, pop);
        ++stats.draws;
        double v = mg.mean + mg.sd * normal(rng);
        while (mg.positive && !(v > 0.0)) {
            ++stats.resamples;
            v = mg.mean + mg.sd * normal(rng);
        }
        x[s] = v;
    }
    std::array<std::size_t, kNumJets> order{0, 1, 2, 3};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[pt_slot(a)] > x[pt_slot(b)]; });
    Features sorted{};
    for (std::size_t o = 0; o < kNumJets; ++o)
        for (std::size_t k = 0; k < kFeaturesPerJet; ++k)
            sorted[o * kFeaturesPerJet + k] = x[order[o] * kFeaturesPerJet + k];
    return sorted;
}

} // namespace

double physics_log_density_3b(const PhysicsParams& p, const Features& x)
{
    return physics_log_density(p, x, Population::ThreeB);
}

double physics_log_density_background4b(const PhysicsParams& p, const Features& x)
{
    return physics_log_density(p, x, Population::Background4b);
}

double physics_log_density_signal(const PhysicsParams& p, const Features& x)
{
    return physics_log_density(p, x, Population::Signal);
}

double physics_background_ratio(const PhysicsParams& p, const Features& x)
{
    return std::exp(physics_log_density_background4b(p, x) - physics_log_density_3b(p, x));
}

Features physics_signal_center(const PhysicsParams& p)
{
    Features x{};
    for (std::size_t s = 0; s < kNumFeatures; ++s)
        x[s] = is_phi_slot(s) ? 0.0 : p.base_mean(s) + p.background_shift[s];
    for (std::size_t k = 0; k < p.signal_features.size(); ++k)
        x[p.signal_features[k]] = p.signal_center[k];
    return x;
}

std::pair<Dataset, Dataset> generate_physics_like(std::size_t n, std::size_t m, double epsilon,
                                                  const PhysicsParams& params, std::uint64_t seed)
{
    params.validate();
    if (!(epsilon >= 0.0 && epsilon < 1.0))
        throw SpecError("physics_like: epsilon must lie in [0, 1)");

    auto make = [&](std::size_t count, Tag tag, std::string_view stream) {
        Dataset ds{std::string("physics_like_") + to_string(tag), seed, kNumFeatures, {}, {}};
        ds.events.reserve(count);
        Rng rng(derive_seed(seed, 0, stream));
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        DrawStats stats;
        for (std::size_t i = 0; i < count; ++i) {
            Event e;
            e.id = i;
            e.tag = tag;
            Population pop = Population::ThreeB;
            if (tag == Tag::FourB) {
                bool sig = unif(rng) < epsilon;
                pop = sig ? Population::Signal : Population::Background4b;
                e.truth = sig ? Truth::Signal : Truth::Background;
            } else {
                e.truth = Truth::Background;
            }
            e.features = draw_physics(params, pop, rng, stats);
            ds.events.push_back(e);
        }
        if (stats.draws > 0 && stats.resamples > stats.draws / 100) {
            std::ostringstream msg;
            msg << "truncation resampling rate " << static_cast<double>(stats.resamples) / stats.draws
                << " exceeds 1%";
            ds.warnings.push_back(msg.str());
        }
        return ds;
    };
    return {make(n, Tag::ThreeB, "3b"), make(m, Tag::FourB, "4b")};
}

// ---------------------------------------------------------------------------
// Splitting

void SplitSpec::validate() const
{
    if (fractions.empty())
        throw SpecError("split: at least one fraction required");
    double total = 0.0;
    for (const auto& [label, f] : fractions) {
        if (!(f > 0.0 && f <= 1.0))
            throw SpecError("split: fraction for '" + label + "' must lie in (0, 1]");
        total += f;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw SpecError("split: fractions must sum to 1 within 1e-12 (sum = " + io::format_double(total) + ")");
}

SplitSpec SplitSpec::standard()
{
    return SplitSpec{{{"gamma", 0.75}, {"smooth", 0.0625}, {"holdout", 0.1875}}};
}

std::vector<Dataset> split(const Dataset& ds, const SplitSpec& spec, std::uint64_t seed)
{
    spec.validate();
    if (ds.empty())
        throw DataError("split: dataset '" + ds.name + "' is empty");

    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    const double total = static_cast<double>(ds.size());
    std::vector<Dataset> parts;
    std::size_t cursor = 0;
    for (std::size_t k = 0; k < spec.fractions.size(); ++k) {
        const auto& [label, f] = spec.fractions[k];
        std::size_t size = 0;
        if (k + 1 == spec.fractions.size()) {
            size = ds.size() - cursor;
        } else {
            size = static_cast<std::size_t>(std::floor(f * total * (1.0 + 1e-12)));
            size = std::min(size, ds.size() - cursor);
        }
        Dataset part{ds.name + "." + label, seed, ds.active_dims, {}, ds.warnings};
        part.events.reserve(size);
        for (std::size_t i = 0; i < size; ++i)
            part.events.push_back(ds.events[order[cursor + i]]);
        cursor += size;
        parts.push_back(std::move(part));
    }
    return parts;
}

// ---------------------------------------------------------------------------
// CSV persistence

std::string event_csv_header()
{
    std::string h = "event_id";
    for (std::size_t s = 0; s < kNumFeatures; ++s)
        h += "," + feature_name(s);
    h += ",tag,truth";
    return h;
}

void write_events(const Dataset& ds, const std::filesystem::path& path)
{
    std::string out;
    out.reserve(ds.size() * 200 + 256);
    out += "# name=" + ds.name + " seed=" + std::to_string(ds.seed) + " dims=" + std::to_string(ds.active_dims) +
           "\n";
    out += event_csv_header();
    out += '\n';
    for (const auto& e : ds.events) {
        out += std::to_string(e.id);
        for (double v : e.features) {
            out += ',';
            out += io::format_double(v);
        }
        out += ',';
        out += to_string(e.tag);
        out += ',';
        out += to_string(e.truth);
        out += '\n';
    }
    io::write_text(path, out);
}

Dataset read_events(const std::filesystem::path& path)
{
    auto lines = io::read_lines(path);
    Dataset ds;
    ds.name = path.stem().string();
    const std::string where = "'" + path.string() + "'";

    std::size_t idx = 0;
    if (idx < lines.size() && !lines[idx].empty() && lines[idx][0] == '#') {
        std::istringstream meta(lines[idx].substr(1));
        std::string kv;
        while (meta >> kv) {
            auto eq = kv.find('=');
            if (eq == std::string::npos)
                continue;
            auto key = kv.substr(0, eq);
            auto val = kv.substr(eq + 1);
            if (key == "name")
                ds.name = val;
            else if (key == "seed")
                ds.seed = static_cast<std::uint64_t>(std::stoull(val));
            else if (key == "dims")
                ds.active_dims = static_cast<std::size_t>(io::parse_int(val, "dims"));
        }
        if (ds.active_dims == 0 || ds.active_dims > kNumFeatures)
            throw ParseError(where + " line 1: dims must be in [1, 16]");
        ++idx;
    }
    if (idx >= lines.size() || lines[idx] != event_csv_header())
        throw ParseError(where + " line " + std::to_string(idx + 1) + ": expected header '" + event_csv_header() +
                         "'");
    ++idx;

    for (; idx < lines.size(); ++idx) {
        const auto& line = lines[idx];
        if (line.empty())
            continue;
        const std::string at = where + " line " + std::to_string(idx + 1);
        auto cols = io::split(line, ',');
        if (cols.size() != kNumFeatures + 3)
            throw ParseError(at + ": expected " + std::to_string(kNumFeatures + 3) + " fields, got " +
                             std::to_string(cols.size()));
        Event e;
        try {
            e.id = static_cast<std::uint64_t>(io::parse_int(cols[0], "event_id"));
            for (std::size_t s = 0; s < kNumFeatures; ++s)
                e.features[s] = io::parse_double(cols[s + 1], feature_name(s));
        } catch (const ParseError& err) {
            throw ParseError(at + ": " + err.what());
        }
        auto tag = io::trim(cols[kNumFeatures + 1]);
        if (tag == "3b")
            e.tag = Tag::ThreeB;
        else if (tag == "4b")
            e.tag = Tag::FourB;
        else
            throw ParseError(at + ": tag must be 3b or 4b, got '" + std::string(tag) + "'");
        auto truth = parse_truth(io::trim(cols[kNumFeatures + 2]));
        if (!truth)
            throw ParseError(at + ": truth must be bkg, sig or na, got '" + std::string(cols[kNumFeatures + 2]) + "'");
        e.truth = *truth;
        if (auto why = event_violation(e, ds.active_dims))
            throw ParseError(at + ": " + *why);
        ds.events.push_back(e);
    }
    return ds;
}

} // namespace srfilter
