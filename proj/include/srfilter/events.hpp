#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace srfilter {

inline constexpr std::size_t kNumJets = 4;
inline constexpr std::size_t kFeaturesPerJet = 4;
inline constexpr std::size_t kNumFeatures = kNumJets * kFeaturesPerJet;

// Feature slots, jet-major: (pt, eta, phi, m) for jets 0..3.
constexpr std::size_t pt_slot(std::size_t jet) { return jet * kFeaturesPerJet; }
constexpr std::size_t eta_slot(std::size_t jet) { return jet * kFeaturesPerJet + 1; }
constexpr std::size_t phi_slot(std::size_t jet) { return jet * kFeaturesPerJet + 2; }
constexpr std::size_t mass_slot(std::size_t jet) { return jet * kFeaturesPerJet + 3; }

// Column name of a feature slot as used in the event CSV ("pt1", "phi3", ...).
std::string feature_name(std::size_t slot);
// Inverse of feature_name; nullopt for unknown names.
std::optional<std::size_t> feature_slot(std::string_view name);

enum class Tag : std::uint8_t { ThreeB, FourB };
enum class Truth : std::uint8_t { Background, Signal, Unknown };

using Features = std::array<double, kNumFeatures>;

struct Event {
    std::uint64_t id = 0;
    Features features{};
    Tag tag = Tag::ThreeB;
    Truth truth = Truth::Unknown;
};

// Returns a description of the first violated invariant, if any. Kinematic
// invariants (pt > 0, m >= 0, phi in [-pi, pi)) only apply to full 16-feature
// events; low-dimensional toy data stores abstract coordinates in the leading
// slots.
std::optional<std::string> event_violation(const Event& e, std::size_t active_dims = kNumFeatures);

struct Dataset {
    std::string name;
    std::uint64_t seed = 0;
    // Number of leading feature slots that carry data (1 for the 1D toy).
    std::size_t active_dims = kNumFeatures;
    std::vector<Event> events;
    std::vector<std::string> warnings;

    std::size_t size() const { return events.size(); }
    bool empty() const { return events.empty(); }
    std::size_t count(Tag tag) const;
    std::size_t count(Truth truth) const;
};

// Diagonal-covariance Gaussian mixture.
struct MixtureComponent {
    double weight = 1.0;
    std::vector<double> mean;
    std::vector<double> variances;
};

struct MixtureSpec {
    std::vector<MixtureComponent> components;

    std::size_t dim() const { return components.empty() ? 0 : components.front().mean.size(); }
    // Throws SpecError naming the violated invariant.
    void validate() const;
};

MixtureSpec single_gaussian(std::vector<double> mean, std::vector<double> variances);

struct SampledPoint {
    std::vector<double> point;
    std::size_t component = 0;
};

std::vector<SampledPoint> sample_mixture(const MixtureSpec& spec, std::size_t count, std::uint64_t seed);

// Draws n 3b events from spec3b and m 4b events from spec4b; 4b draws from a
// component listed in signal_components get truth Signal. The spec dimension
// becomes the dataset's active_dims.
std::pair<Dataset, Dataset> generate_from_mixtures(const MixtureSpec& spec3b, const MixtureSpec& spec4b,
                                                   std::span<const std::size_t> signal_components,
                                                   std::size_t n, std::size_t m, std::uint64_t seed,
                                                   const std::string& name = "mixture");

// One-dimensional toy: 3b ~ N(1, 4^2), 4b ~ (1-eps) N(-1, 4^2) + eps N(7, 0.5^2).
struct Toy1dParams {
    double mean3b = 1.0;
    double sd3b = 4.0;
    double background_mean4b = -1.0;
    double background_sd4b = 4.0;
    double signal_mean = 7.0;
    double signal_sd = 0.5;
};

MixtureSpec toy1d_spec3b(const Toy1dParams& p = {});
// Components are {background, signal}; signal is index 1.
MixtureSpec toy1d_spec4b(double epsilon, const Toy1dParams& p = {});

std::pair<Dataset, Dataset> generate_toy1d(std::size_t n, std::size_t m, double epsilon, std::uint64_t seed,
                                           const Toy1dParams& params = {});

// Physics-like 16-feature generator. Every non-phi feature is an independent
// truncated normal (pt > 0, m >= 0); phi is uniform on [-pi, pi). Background
// 4b events shift the 3b means by `background_shift`; signal events replace
// the listed features by a narrow normal blob and draw the others from the
// 4b background marginals. Features refer to generator jets; emitted events
// list jets by descending pt, and the densities below (sums over the 24 jet
// orderings) are those of the emitted, sorted events.
struct PhysicsParams {
    std::array<double, kNumJets> pt_mean{120.0, 90.0, 65.0, 45.0};
    std::array<double, kNumJets> pt_sd{35.0, 25.0, 18.0, 12.0};
    std::array<double, kNumJets> eta_sd{1.3, 1.3, 1.3, 1.3};
    std::array<double, kNumJets> mass_mean{15.0, 12.0, 10.0, 8.0};
    std::array<double, kNumJets> mass_sd{4.0, 3.5, 3.0, 2.5};
    Features background_shift{};
    std::vector<std::size_t> signal_features{pt_slot(0), mass_slot(0), mass_slot(1), mass_slot(2), mass_slot(3)};
    std::vector<double> signal_center;
    std::vector<double> signal_width;

    static PhysicsParams defaults();
    // Shifts and blob geometry in units of each feature's base sd.
    // An empty feature list keeps the default signal features.
    static PhysicsParams make(double signal_width, double signal_offset, double pt_shift, double mass_shift,
                              std::vector<std::size_t> signal_features = {});
    void validate() const;

    double base_mean(std::size_t slot) const;
    double base_sd(std::size_t slot) const;
};

// Log densities over the full 16-feature space (phi contributes -log(2 pi)).
double physics_log_density_3b(const PhysicsParams& p, const Features& x);
double physics_log_density_background4b(const PhysicsParams& p, const Features& x);
double physics_log_density_signal(const PhysicsParams& p, const Features& x);
// B_4b(x) / P_3b(x).
double physics_background_ratio(const PhysicsParams& p, const Features& x);
Features physics_signal_center(const PhysicsParams& p);

std::pair<Dataset, Dataset> generate_physics_like(std::size_t n, std::size_t m, double epsilon,
                                                  const PhysicsParams& params, std::uint64_t seed);

struct SplitSpec {
    std::vector<std::pair<std::string, double>> fractions;

    void validate() const;
    // 75% gamma, 6.25% smoothed gamma, 18.75% held out.
    static SplitSpec standard();
};

std::vector<Dataset> split(const Dataset& ds, const SplitSpec& spec, std::uint64_t seed);

// Event CSV: optional "# name=... seed=... dims=..." line, then the header
// event_id,pt1,eta1,phi1,m1,...,pt4,eta4,phi4,m4,tag,truth
std::string event_csv_header();
void write_events(const Dataset& ds, const std::filesystem::path& path);
Dataset read_events(const std::filesystem::path& path);

const char* to_string(Tag tag);
const char* to_string(Truth truth);
std::optional<Truth> parse_truth(std::string_view s); // "bkg", "sig", "na"

} // namespace srfilter
