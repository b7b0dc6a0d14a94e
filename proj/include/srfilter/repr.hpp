#pragma once

#include "srfilter/events.hpp"
#include "srfilter/nnet.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace srfilter {

enum class Canonicalization { None, Full };
enum class ReprMode { PassThrough, Learned };

// Quantum applied to canonical phi values so that symmetry-transformed copies
// of an event map to bit-identical canonical forms.
inline constexpr double kPhiQuantum = 1.0 / 16777216.0; // 2^-24 rad

// Sort jets by descending pt, rotate so jet-1 phi = 0, reflect phi so that
// jet-2 phi >= 0, reflect eta so that the eta sum is >= 0.
Event canonicalize(const Event& e);

struct Standardization {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardization fit(const Matrix& x);
    void apply(Matrix& x) const;
};

// Event representation zeta(x). Pass-through returns the active raw features
// (canonicalized events drop jet-1 phi, which is identically 0); learned returns the last hidden layer of
// a 3b-vs-4b classifier evaluated on canonicalized, standardized features.
struct ReprModel {
    ReprMode mode = ReprMode::PassThrough;
    Canonicalization canonicalization = Canonicalization::None;
    std::size_t input_dims = 1;
    Standardization standardization;
    std::optional<MLPParams> classifier;

    std::size_t repr_dim() const;
};

ReprModel pass_through(std::size_t active_dims, Canonicalization canon = Canonicalization::None);

// Classifier defaults to hidden widths {64, 64, 8}; repr_dim is the last one.
MLPSpec default_repr_spec(std::size_t input_dims, std::size_t repr_dim = 8);

ReprModel fit_representation(const Dataset& d3b, const Dataset& d4b, const MLPSpec& spec, const TrainConfig& cfg,
                             std::uint64_t seed, Canonicalization canon = Canonicalization::Full);

// Removes last-hidden units whose 0.5%-99.5% spread on x is zero (dead or
// nearly dead ReLUs), folding their mean contribution into the next layer's
// bias. Outputs are unchanged for exactly constant units.
void prune_constant_units(MLPParams& params, const Matrix& x);

// Active features (canonicalized when requested), one row per event.
Matrix feature_matrix(std::span<const Event> events, std::size_t active_dims, Canonicalization canon);

// Rows are events, columns the representation. A degenerate embedding
// (every row identical) appends a warning when `warnings` is given.
Matrix embed(const ReprModel& model, std::span<const Event> events, std::vector<std::string>* warnings = nullptr);

// 4b probability of the representation classifier (learned mode only).
Eigen::VectorXd repr_classifier_probability(const ReprModel& model, std::span<const Event> events);

void save_repr(const ReprModel& model, const std::filesystem::path& path);
ReprModel load_repr(const std::filesystem::path& path);

// Representation CSV: event_id,z1,...,zD
struct Representations {
    std::vector<std::uint64_t> ids;
    Matrix z;
};

void write_representations(std::span<const Event> events, const Matrix& z, const std::filesystem::path& path);
Representations read_representations(const std::filesystem::path& path);

} // namespace srfilter
