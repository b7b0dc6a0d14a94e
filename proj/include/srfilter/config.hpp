#pragma once

#include "srfilter/events.hpp"
#include "srfilter/nnet.hpp"
#include "srfilter/repr.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace srfilter {

enum class DataSource { Toy1d, PhysicsLike, Files };
enum class NoiseMode { RangeFraction, Absolute };

struct StageSettings {
    std::vector<std::size_t> hidden{64, 64};
    TrainConfig train;
};

// Knobs of the physics-like generator exposed through the config file.
struct PhysicsKnobs {
    double signal_width = 0.25;  // blob sd in units of the base feature sd
    double signal_offset = 0.5;  // blob center offset in units of the base sd
    double pt_shift = 0.35;      // 4b shift of subleading-jet pt, in base sd
    double mass_shift = 0.03;    // 4b shift of jet masses, in base sd
    std::vector<std::size_t> signal_features; // empty: generator default

    PhysicsParams params() const;
};

struct RunConfig {
    DataSource source = DataSource::Toy1d;
    std::vector<std::size_t> n{10000};
    std::vector<std::size_t> m; // empty: m = n
    std::vector<double> epsilon{0.05};
    std::filesystem::path files_3b;
    std::filesystem::path files_4b;
    SplitSpec split = SplitSpec::standard();

    ReprMode repr_mode = ReprMode::PassThrough;
    Canonicalization canonicalization = Canonicalization::Full;
    std::size_t repr_dim = 8;
    StageSettings repr{{64, 64}, {}};
    StageSettings gamma;
    StageSettings gamma_tilde;

    std::vector<double> eta{0.01, 0.1, 1.0};
    NoiseMode noise_mode = NoiseMode::RangeFraction;
    bool redraw_each_epoch = false;

    std::vector<double> q_grid;
    std::size_t repeats = 10;
    std::uint64_t seed = 1;

    Toy1dParams toy;
    PhysicsKnobs physics;

    void validate() const;
    std::size_t m_for(std::size_t i) const { return m.empty() ? n.at(i) : m.at(i); }
};

// Applies "key = value" assignments. Unknown keys and malformed values throw
// ConfigError.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

// Parses a flat key = value file ('#' comments), then applies overrides
// given as "key=value".
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
RunConfig parse_config(const std::vector<std::string>& lines, const std::vector<std::string>& overrides = {},
                       const std::string& where = "<config>");

// Every resolved setting, in a stable order, as key = value pairs that
// parse_config accepts.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg);

} // namespace srfilter
