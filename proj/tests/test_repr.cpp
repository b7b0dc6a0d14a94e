#include "srfilter/error.hpp"
#include "srfilter/repr.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace srfilter;

namespace {

double wrap(double phi)
{
    phi = std::remainder(phi, 2.0 * M_PI);
    return phi >= M_PI ? phi - 2.0 * M_PI : phi;
}

Event rotate(Event e, double angle)
{
    for (std::size_t j = 0; j < kNumJets; ++j)
        e.features[phi_slot(j)] = wrap(e.features[phi_slot(j)] + angle);
    return e;
}

Event reflect_phi(Event e)
{
    for (std::size_t j = 0; j < kNumJets; ++j)
        e.features[phi_slot(j)] = wrap(-e.features[phi_slot(j)]);
    return e;
}

Event reflect_eta(Event e)
{
    for (std::size_t j = 0; j < kNumJets; ++j)
        e.features[eta_slot(j)] = -e.features[eta_slot(j)];
    return e;
}

Event shuffle_jets(Event e, std::uint64_t seed)
{
    std::array<std::size_t, kNumJets> order{0, 1, 2, 3};
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    Event out = e;
    for (std::size_t j = 0; j < kNumJets; ++j)
        for (std::size_t k = 0; k < kFeaturesPerJet; ++k)
            out.features[j * kFeaturesPerJet + k] = e.features[order[j] * kFeaturesPerJet + k];
    return out;
}

Dataset sample_events(std::size_t n, std::uint64_t seed)
{
    return generate_physics_like(n, 1, 0.0, PhysicsParams::defaults(), seed).first;
}

} // namespace

TEST_CASE("canonical form")
{
    for (const auto& e : sample_events(200, 3).events) {
        const Event c = canonicalize(e);
        CHECK_FALSE(event_violation(c).has_value());
        CHECK(c.features[phi_slot(0)] == 0.0);
        CHECK(c.features[phi_slot(1)] >= 0.0);
        double eta_sum = 0.0;
        for (std::size_t j = 0; j < kNumJets; ++j)
            eta_sum += c.features[eta_slot(j)];
        CHECK(eta_sum >= 0.0);
        for (std::size_t j = 0; j + 1 < kNumJets; ++j)
            CHECK(c.features[pt_slot(j)] >= c.features[pt_slot(j + 1)]);
        CHECK(canonicalize(c).features == c.features);
    }
}

TEST_CASE("canonicalization removes the event symmetries exactly")
{
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> angle(-M_PI, M_PI);
    for (const auto& e : sample_events(300, 5).events) {
        const auto ref = canonicalize(e).features;
        CHECK(canonicalize(rotate(e, angle(rng))).features == ref);
        CHECK(canonicalize(rotate(e, 1.3)).features == ref);
        CHECK(canonicalize(reflect_phi(e)).features == ref);
        CHECK(canonicalize(reflect_eta(e)).features == ref);
        CHECK(canonicalize(reflect_eta(reflect_phi(rotate(e, angle(rng))))).features == ref);
        CHECK(canonicalize(shuffle_jets(e, rng())).features == ref);
    }
}

TEST_CASE("learned representation is symmetry invariant and deterministic")
{
    auto [d3, d4] = generate_physics_like(3000, 3000, 0.05, PhysicsParams::defaults(), 6);
    TrainConfig cfg;
    cfg.max_epochs = 3;
    auto model = fit_representation(d3, d4, default_repr_spec(kNumFeatures, 8), cfg, 2);
    CHECK(model.repr_dim() == model.classifier->spec.last_hidden());
    CHECK(model.repr_dim() <= 8);
    for (double s : model.standardization.scale)
        CHECK(s > 0.0);

    std::vector<Event> originals(d4.events.begin(), d4.events.begin() + 50);
    std::vector<Event> transformed;
    for (std::size_t i = 0; i < originals.size(); ++i)
        transformed.push_back(reflect_eta(reflect_phi(rotate(shuffle_jets(originals[i], i), 0.4 * i))));
    Matrix a = embed(model, originals);
    Matrix b = embed(model, transformed);
    CHECK(a.rows() == 50);
    CHECK(static_cast<std::size_t>(a.cols()) == model.repr_dim());
    CHECK(a == b);
    CHECK(embed(model, originals) == a);

    auto again = fit_representation(d3, d4, default_repr_spec(kNumFeatures, 8), cfg, 2);
    CHECK(embed(again, originals) == a);
}

TEST_CASE("pruning dead units leaves classifier outputs unchanged")
{
    auto p = init_params(MLPSpec{{2, 6, 4, 1}}, 13);
    // Kill unit 1 of the last hidden layer and make unit 3 constant.
    p.layers[1].weights.row(1).setZero();
    p.layers[1].bias(1) = -1.0;
    p.layers[1].weights.row(3).setZero();
    p.layers[1].bias(3) = 0.7;
    Matrix x(400, 2);
    x.setRandom();
    auto before = predict(p, x);
    prune_constant_units(p, x);
    CHECK(p.spec.last_hidden() == 2);
    CHECK((predict(p, x) - before).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("degenerate embedding is flagged")
{
    auto [d3, d4] = generate_physics_like(500, 500, 0.0, PhysicsParams::defaults(), 7);
    TrainConfig cfg;
    cfg.max_epochs = 1;
    auto model = fit_representation(d3, d4, default_repr_spec(kNumFeatures, 4), cfg, 3);
    for (auto& l : model.classifier->layers) {
        l.weights.setZero();
        l.bias.setZero();
    }
    std::vector<std::string> warnings;
    Matrix z = embed(model, d4.events, &warnings);
    CHECK((z.rowwise() - z.row(0)).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("degenerate") != std::string::npos);
}

TEST_CASE("pass-through representation")
{
    auto [t3, t4] = generate_toy1d(20, 20, 0.1, 1);
    auto toy = pass_through(1);
    Matrix z = embed(toy, t4.events);
    CHECK(z.cols() == 1);
    for (std::size_t i = 0; i < t4.size(); ++i)
        CHECK(z(static_cast<Eigen::Index>(i), 0) == t4.events[i].features[0]);

    auto full = pass_through(kNumFeatures, Canonicalization::Full);
    auto events = sample_events(10, 2);
    Matrix zf = embed(full, events.events);
    CHECK(zf.cols() == 15);
    CHECK(full.repr_dim() == 15);
    CHECK_THROWS_AS(pass_through(1, Canonicalization::Full), SpecError);
}

TEST_CASE("representation classifier separates the toy populations")
{
    auto [d3, d4] = generate_toy1d(6000, 6000, 0.05, 9);
    TrainConfig cfg;
    cfg.max_epochs = 15;
    auto model = fit_representation(d3, d4, default_repr_spec(1, 8), cfg, 4, Canonicalization::None);
    auto [h3, h4] = generate_toy1d(4000, 4000, 0.05, 10);
    auto p3 = repr_classifier_probability(model, h3.events);
    auto p4 = repr_classifier_probability(model, h4.events);
    // Held-out AUC by rank comparison against a 1000x1000 subsample.
    double wins = 0.0;
    for (int i = 0; i < 1000; ++i)
        for (int j = 0; j < 1000; ++j)
            wins += p4(i) > p3(j) ? 1.0 : (p4(i) == p3(j) ? 0.5 : 0.0);
    CHECK(wins / 1e6 >= 0.55);
}

TEST_CASE("representation classifier is at chance on identical populations")
{
    Toy1dParams same;
    same.background_mean4b = same.mean3b;
    same.background_sd4b = same.sd3b;
    auto [d3, d4] = generate_toy1d(6000, 6000, 0.0, 11, same);
    TrainConfig cfg;
    cfg.max_epochs = 10;
    auto model = fit_representation(d3, d4, default_repr_spec(1, 8), cfg, 4, Canonicalization::None);
    auto [h3, h4] = generate_toy1d(5000, 5000, 0.0, 12, same);
    auto p3 = repr_classifier_probability(model, h3.events);
    auto p4 = repr_classifier_probability(model, h4.events);
    int correct = 0;
    for (Eigen::Index i = 0; i < p3.size(); ++i)
        correct += p3(i) < 0.5;
    for (Eigen::Index i = 0; i < p4.size(); ++i)
        correct += p4(i) >= 0.5;
    CHECK(std::abs(correct / 10000.0 - 0.5) <= 0.03);
}

TEST_CASE("representation persistence")
{
    testing::TempDir dir("repr");
    auto [d3, d4] = generate_physics_like(800, 800, 0.05, PhysicsParams::defaults(), 14);
    TrainConfig cfg;
    cfg.max_epochs = 2;
    auto model = fit_representation(d3, d4, default_repr_spec(kNumFeatures, 8), cfg, 5);
    save_repr(model, dir / "repr.model");
    auto back = load_repr(dir / "repr.model");
    CHECK(embed(back, d4.events) == embed(model, d4.events));

    Matrix z = embed(model, d4.events);
    write_representations(d4.events, z, dir / "z.csv");
    auto rz = read_representations(dir / "z.csv");
    CHECK(rz.z == z);
    CHECK(rz.ids.size() == d4.size());
    CHECK(rz.ids[3] == d4.events[3].id);
}
