#include "srfilter/config.hpp"

#include "srfilter/error.hpp"
#include "srfilter/io.hpp"
#include "srfilter/region.hpp"

#include <functional>

namespace srfilter {

PhysicsParams PhysicsKnobs::params() const
{
    return PhysicsParams::make(signal_width, signal_offset, pt_shift, mass_shift, signal_features);
}

void RunConfig::validate() const
{
    try {
        split.validate();
    } catch (const SpecError& e) {
        throw ConfigError(e.what());
    }
    if (n.empty() || epsilon.empty())
        throw ConfigError("config: data.n and data.epsilon need at least one value");
    if (!m.empty() && m.size() != n.size())
        throw ConfigError("config: data.m must list as many values as data.n");
    for (auto v : n)
        if (v == 0)
            throw ConfigError("config: data.n values must be positive");
    for (auto v : m)
        if (v == 0)
            throw ConfigError("config: data.m values must be positive");
    for (double e : epsilon)
        if (!(e >= 0.0 && e < 1.0))
            throw ConfigError("config: data.epsilon values must lie in [0, 1)");
    if (eta.empty())
        throw ConfigError("config: noise.eta needs at least one value");
    for (double e : eta)
        if (!(e > 0.0))
            throw ConfigError("config: noise.eta values must be positive");
    if (repeats < 1)
        throw ConfigError("config: run.repeats must be >= 1");
    if (repr_dim == 0)
        throw ConfigError("config: repr.dim must be positive");
    if (source == DataSource::Files && (files_3b.empty() || files_4b.empty()))
        throw ConfigError("config: source = files requires data.files_3b and data.files_4b");
    for (double q : q_grid)
        if (!(q > 0.0 && q <= 1.0))
            throw ConfigError("config: curve.q_grid values must lie in (0, 1]");
    if (!std::is_sorted(q_grid.begin(), q_grid.end()))
        throw ConfigError("config: curve.q_grid must be ascending");
    for (const auto* st : {&repr, &gamma, &gamma_tilde}) {
        try {
            st->train.validate();
        } catch (const SpecError& e) {
            throw ConfigError(e.what());
        }
        if (st->hidden.empty())
            throw ConfigError("config: hidden layer list must not be empty");
    }
}

namespace {

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& value)
{
    std::vector<T> out;
    for (auto tok : io::split(value, ',')) {
        tok = io::trim(tok);
        if (tok.empty())
            continue;
        if constexpr (std::is_floating_point_v<T>) {
            out.push_back(io::parse_double(tok, key));
        } else {
            auto v = io::parse_int(tok, key);
            if (v < 0)
                throw ParseError("negative value for " + key);
            out.push_back(static_cast<T>(v));
        }
    }
    return out;
}

std::string join_sizes(const std::vector<std::size_t>& v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes")
        return true;
    if (v == "false" || v == "0" || v == "no")
        return false;
    throw ConfigError("config: " + key + " expects true/false, got '" + v + "'");
}

bool apply_train(TrainConfig& t, const std::string& field, const std::string& key, const std::string& v)
{
    if (field == "learning_rate")
        t.learning_rate = io::parse_double(v, key);
    else if (field == "batch_size")
        t.batch_size = static_cast<std::size_t>(io::parse_int(v, key));
    else if (field == "max_epochs")
        t.max_epochs = static_cast<std::size_t>(io::parse_int(v, key));
    else if (field == "patience")
        t.patience = static_cast<std::size_t>(io::parse_int(v, key));
    else if (field == "validation_fraction")
        t.validation_fraction = io::parse_double(v, key);
    else
        return false;
    return true;
}

} // namespace

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value)
{
    const std::string v(io::trim(value));
    if (key.rfind("record.", 0) == 0)
        return; // manifest bookkeeping, not a setting
    try {
        if (key == "source") {
            if (v == "toy1d")
                cfg.source = DataSource::Toy1d;
            else if (v == "physics_like")
                cfg.source = DataSource::PhysicsLike;
            else if (v == "files")
                cfg.source = DataSource::Files;
            else
                throw ConfigError("config: source must be toy1d, physics_like or files");
        } else if (key == "data.n") {
            cfg.n = parse_list<std::size_t>(key, v);
        } else if (key == "data.m") {
            cfg.m = parse_list<std::size_t>(key, v);
        } else if (key == "data.epsilon") {
            cfg.epsilon = parse_list<double>(key, v);
        } else if (key == "data.files_3b") {
            cfg.files_3b = v;
        } else if (key == "data.files_4b") {
            cfg.files_4b = v;
        } else if (key == "split.fractions") {
            auto f = parse_list<double>(key, v);
            static const char* labels[] = {"gamma", "smooth", "holdout"};
            if (f.size() != 3)
                throw ConfigError("config: split.fractions needs 3 values (gamma, smooth, holdout)");
            cfg.split.fractions.clear();
            for (std::size_t i = 0; i < 3; ++i)
                cfg.split.fractions.emplace_back(labels[i], f[i]);
        } else if (key == "repr.mode") {
            if (v == "passthrough")
                cfg.repr_mode = ReprMode::PassThrough;
            else if (v == "learned")
                cfg.repr_mode = ReprMode::Learned;
            else
                throw ConfigError("config: repr.mode must be passthrough or learned");
        } else if (key == "repr.canonicalize") {
            if (v == "full")
                cfg.canonicalization = Canonicalization::Full;
            else if (v == "none")
                cfg.canonicalization = Canonicalization::None;
            else
                throw ConfigError("config: repr.canonicalize must be full or none");
        } else if (key == "repr.dim") {
            cfg.repr_dim = static_cast<std::size_t>(io::parse_int(v, key));
        } else if (key == "repr.hidden") {
            cfg.repr.hidden = parse_list<std::size_t>(key, v);
        } else if (key == "model.gamma.hidden") {
            cfg.gamma.hidden = parse_list<std::size_t>(key, v);
        } else if (key == "model.gamma_tilde.hidden") {
            cfg.gamma_tilde.hidden = parse_list<std::size_t>(key, v);
        } else if (key.rfind("train.", 0) == 0) {
            auto rest = key.substr(6);
            auto dot = rest.find('.');
            if (dot == std::string::npos)
                throw ConfigError("config: unknown key '" + key + "'");
            auto stage = rest.substr(0, dot);
            auto field = rest.substr(dot + 1);
            TrainConfig* t = stage == "repr"          ? &cfg.repr.train
                             : stage == "gamma"       ? &cfg.gamma.train
                             : stage == "gamma_tilde" ? &cfg.gamma_tilde.train
                                                      : nullptr;
            if (!t || !apply_train(*t, field, key, v))
                throw ConfigError("config: unknown key '" + key + "'");
        } else if (key == "noise.eta") {
            cfg.eta = parse_list<double>(key, v);
        } else if (key == "noise.mode") {
            if (v == "range")
                cfg.noise_mode = NoiseMode::RangeFraction;
            else if (v == "absolute")
                cfg.noise_mode = NoiseMode::Absolute;
            else
                throw ConfigError("config: noise.mode must be range or absolute");
        } else if (key == "noise.redraw_each_epoch") {
            cfg.redraw_each_epoch = parse_bool(key, v);
        } else if (key == "curve.q_grid") {
            cfg.q_grid = v == "default" ? std::vector<double>{} : parse_list<double>(key, v);
        } else if (key == "run.repeats") {
            cfg.repeats = static_cast<std::size_t>(io::parse_int(v, key));
        } else if (key == "run.seed") {
            cfg.seed = static_cast<std::uint64_t>(std::stoull(v));
        } else if (key == "toy.mean3b") {
            cfg.toy.mean3b = io::parse_double(v, key);
        } else if (key == "toy.sd3b") {
            cfg.toy.sd3b = io::parse_double(v, key);
        } else if (key == "toy.background_mean4b") {
            cfg.toy.background_mean4b = io::parse_double(v, key);
        } else if (key == "toy.background_sd4b") {
            cfg.toy.background_sd4b = io::parse_double(v, key);
        } else if (key == "toy.signal_mean") {
            cfg.toy.signal_mean = io::parse_double(v, key);
        } else if (key == "toy.signal_sd") {
            cfg.toy.signal_sd = io::parse_double(v, key);
        } else if (key == "physics.signal_width") {
            cfg.physics.signal_width = io::parse_double(v, key);
        } else if (key == "physics.signal_offset") {
            cfg.physics.signal_offset = io::parse_double(v, key);
        } else if (key == "physics.pt_shift") {
            cfg.physics.pt_shift = io::parse_double(v, key);
        } else if (key == "physics.mass_shift") {
            cfg.physics.mass_shift = io::parse_double(v, key);
        } else if (key == "physics.signal_features") {
            cfg.physics.signal_features.clear();
            for (auto tok : io::split(v, ',')) {
                auto slot = feature_slot(io::trim(tok));
                if (!slot || *slot % kFeaturesPerJet == 1 || *slot % kFeaturesPerJet == 2)
                    throw ConfigError("config: physics.signal_features takes pt/m feature names, got '" +
                                      std::string(io::trim(tok)) + "'");
                cfg.physics.signal_features.push_back(*slot);
            }
        } else {
            throw ConfigError("config: unknown key '" + key + "'");
        }
    } catch (const ParseError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw ConfigError("config: invalid value '" + v + "' for " + key);
    } catch (const std::out_of_range&) {
        throw ConfigError("config: value out of range for " + key);
    }
}

RunConfig parse_config(const std::vector<std::string>& lines, const std::vector<std::string>& overrides,
                       const std::string& where)
{
    RunConfig cfg;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto line = io::trim(lines[i]);
        if (line.empty() || line.front() == '#')
            continue;
        auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(where + " line " + std::to_string(i + 1) + ": expected 'key = value'");
        try {
            apply_setting(cfg, std::string(io::trim(line.substr(0, eq))), std::string(io::trim(line.substr(eq + 1))));
        } catch (const ConfigError& e) {
            throw ConfigError(where + " line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    for (const auto& o : overrides) {
        auto eq = o.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override '" + o + "' is not key=value");
        apply_setting(cfg, std::string(io::trim(std::string_view(o).substr(0, eq))),
                      std::string(io::trim(std::string_view(o).substr(eq + 1))));
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides)
{
    std::vector<std::string> lines;
    try {
        lines = io::read_lines(path);
    } catch (const ParseError& e) {
        throw ConfigError(e.what());
    }
    return parse_config(lines, overrides, "'" + path.string() + "'");
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg)
{
    std::vector<std::pair<std::string, std::string>> e;
    auto add = [&](std::string k, std::string v) { e.emplace_back(std::move(k), std::move(v)); };
    auto dbl = [](double v) { return io::format_double(v); };
    auto dlist = [](const std::vector<double>& v) { return io::join_doubles(v, ','); };

    add("source", cfg.source == DataSource::Toy1d         ? "toy1d"
                  : cfg.source == DataSource::PhysicsLike ? "physics_like"
                                                          : "files");
    add("data.n", join_sizes(cfg.n));
    std::vector<std::size_t> m;
    for (std::size_t i = 0; i < cfg.n.size(); ++i)
        m.push_back(cfg.m_for(i));
    add("data.m", join_sizes(m));
    add("data.epsilon", dlist(cfg.epsilon));
    if (cfg.source == DataSource::Files) {
        add("data.files_3b", cfg.files_3b.string());
        add("data.files_4b", cfg.files_4b.string());
    }
    std::vector<double> fr;
    for (const auto& [label, f] : cfg.split.fractions)
        fr.push_back(f);
    add("split.fractions", dlist(fr));
    add("repr.mode", cfg.repr_mode == ReprMode::Learned ? "learned" : "passthrough");
    add("repr.canonicalize", cfg.canonicalization == Canonicalization::Full ? "full" : "none");
    add("repr.dim", std::to_string(cfg.repr_dim));
    add("repr.hidden", join_sizes(cfg.repr.hidden));
    add("model.gamma.hidden", join_sizes(cfg.gamma.hidden));
    add("model.gamma_tilde.hidden", join_sizes(cfg.gamma_tilde.hidden));
    for (auto [name, st] : {std::pair{"repr", &cfg.repr}, std::pair{"gamma", &cfg.gamma},
                            std::pair{"gamma_tilde", &cfg.gamma_tilde}}) {
        const std::string p = std::string("train.") + name + ".";
        add(p + "learning_rate", dbl(st->train.learning_rate));
        add(p + "batch_size", std::to_string(st->train.batch_size));
        add(p + "max_epochs", std::to_string(st->train.max_epochs));
        add(p + "patience", std::to_string(st->train.patience));
        add(p + "validation_fraction", dbl(st->train.validation_fraction));
    }
    add("noise.eta", dlist(cfg.eta));
    add("noise.mode", cfg.noise_mode == NoiseMode::Absolute ? "absolute" : "range");
    add("noise.redraw_each_epoch", cfg.redraw_each_epoch ? "true" : "false");
    add("curve.q_grid", cfg.q_grid.empty() ? "default" : dlist(cfg.q_grid));
    add("run.repeats", std::to_string(cfg.repeats));
    add("run.seed", std::to_string(cfg.seed));
    add("toy.mean3b", dbl(cfg.toy.mean3b));
    add("toy.sd3b", dbl(cfg.toy.sd3b));
    add("toy.background_mean4b", dbl(cfg.toy.background_mean4b));
    add("toy.background_sd4b", dbl(cfg.toy.background_sd4b));
    add("toy.signal_mean", dbl(cfg.toy.signal_mean));
    add("toy.signal_sd", dbl(cfg.toy.signal_sd));
    add("physics.signal_width", dbl(cfg.physics.signal_width));
    add("physics.signal_offset", dbl(cfg.physics.signal_offset));
    add("physics.pt_shift", dbl(cfg.physics.pt_shift));
    add("physics.mass_shift", dbl(cfg.physics.mass_shift));
    {
        std::string names;
        const auto feats = cfg.physics.signal_features.empty() ? PhysicsParams{}.signal_features
                                                               : cfg.physics.signal_features;
        for (std::size_t i = 0; i < feats.size(); ++i)
            names += (i ? "," : "") + feature_name(feats[i]);
        add("physics.signal_features", names);
    }
    return e;
}

} // namespace srfilter
