#include "srfilter/experiment.hpp"

#include "srfilter/error.hpp"
#include "srfilter/io.hpp"
#include "srfilter/rng.hpp"

#include <cmath>
#include <ostream>

namespace srfilter {

namespace {

const char* const kStageNames[] = {"generate", "split-3b", "split-4b", "repr", "gamma"};

MLPSpec ratio_spec(std::size_t input_dim, const std::vector<std::size_t>& hidden)
{
    MLPSpec spec;
    spec.layer_sizes.push_back(input_dim);
    spec.layer_sizes.insert(spec.layer_sizes.end(), hidden.begin(), hidden.end());
    spec.layer_sizes.push_back(1);
    return spec;
}

std::string gamma_tilde_stage_name(double eta) { return "gamma_tilde/" + eta_tag(eta); }

} // namespace

std::string Condition::label() const
{
    return "n" + std::to_string(n) + "_m" + std::to_string(m) + "_eps" + io::format_double(epsilon);
}

std::vector<Condition> conditions(const RunConfig& cfg)
{
    std::vector<Condition> out;
    for (std::size_t i = 0; i < cfg.n.size(); ++i)
        for (double eps : cfg.epsilon)
            out.push_back({cfg.n[i], cfg.m_for(i), eps});
    return out;
}

std::uint64_t stage_seed(const RunConfig& cfg, const Condition& c, std::size_t repeat, std::string_view stage)
{
    return derive_seed(cfg.seed, repeat, c.label() + "/" + std::string(stage));
}

std::string eta_tag(double eta) { return "eta" + io::format_double(eta); }

std::vector<double> effective_q_grid(const RunConfig& cfg)
{
    return cfg.q_grid.empty() ? default_q_grid() : cfg.q_grid;
}

std::pair<Dataset, Dataset> generate_stage(const RunConfig& cfg, const Condition& c, std::size_t repeat)
{
    const auto seed = stage_seed(cfg, c, repeat, "generate");
    switch (cfg.source) {
    case DataSource::Toy1d:
        return generate_toy1d(c.n, c.m, c.epsilon, seed, cfg.toy);
    case DataSource::PhysicsLike:
        return generate_physics_like(c.n, c.m, c.epsilon, cfg.physics.params(), seed);
    case DataSource::Files:
        break;
    }
    auto d3b = read_events(cfg.files_3b);
    auto d4b = read_events(cfg.files_4b);
    if (d3b.count(Tag::FourB) > 0 || d4b.count(Tag::ThreeB) > 0)
        throw DataError("input files: '" + cfg.files_3b.string() + "' must hold only 3b events and '" +
                        cfg.files_4b.string() + "' only 4b events");
    if (d3b.active_dims != d4b.active_dims)
        throw DimensionError("input files: 3b and 4b samples have different dimensions");
    return {std::move(d3b), std::move(d4b)};
}

SplitData split_stage(const RunConfig& cfg, const Condition& c, std::size_t repeat, const Dataset& d3b,
                      const Dataset& d4b)
{
    return {split(d3b, cfg.split, stage_seed(cfg, c, repeat, "split-3b")),
            split(d4b, cfg.split, stage_seed(cfg, c, repeat, "split-4b"))};
}

ReprModel represent_stage(const RunConfig& cfg, const Condition& c, std::size_t repeat, const Dataset& gamma3b,
                          const Dataset& gamma4b)
{
    if (cfg.repr_mode == ReprMode::PassThrough) {
        const auto canon = gamma3b.active_dims == kNumFeatures ? cfg.canonicalization : Canonicalization::None;
        return pass_through(gamma3b.active_dims, canon);
    }
    auto hidden = cfg.repr.hidden;
    hidden.push_back(cfg.repr_dim);
    MLPSpec spec = ratio_spec(gamma3b.active_dims, hidden);
    const auto canon = gamma3b.active_dims == kNumFeatures ? cfg.canonicalization : Canonicalization::None;
    return fit_representation(gamma3b, gamma4b, spec, cfg.repr.train, stage_seed(cfg, c, repeat, "repr"), canon);
}

RatioModel gamma_stage(const RunConfig& cfg, const Condition& c, std::size_t repeat, const Matrix& z3b,
                       const Matrix& z4b)
{
    return fit_ratio(z3b, z4b, ratio_spec(static_cast<std::size_t>(z3b.cols()), cfg.gamma.hidden), cfg.gamma.train,
                     stage_seed(cfg, c, repeat, "gamma"));
}

NoiseSpec noise_for(const RunConfig& cfg, double eta, const Matrix& z3b_smooth, const Matrix& z4b_smooth)
{
    if (cfg.noise_mode == NoiseMode::Absolute)
        return NoiseSpec{eta, std::vector<double>(static_cast<std::size_t>(z3b_smooth.cols()), eta)};
    Matrix pooled(z3b_smooth.rows() + z4b_smooth.rows(), z3b_smooth.cols());
    pooled << z3b_smooth, z4b_smooth;
    return NoiseSpec::from_ranges(eta, compute_ranges(pooled));
}

RatioModel gamma_tilde_stage(const RunConfig& cfg, const Condition& c, std::size_t repeat, double eta,
                             const Matrix& z3b_smooth, const Matrix& z4b_smooth)
{
    auto noise = noise_for(cfg, eta, z3b_smooth, z4b_smooth);
    return fit_smoothed_ratio(z3b_smooth, z4b_smooth, noise,
                              ratio_spec(static_cast<std::size_t>(z3b_smooth.cols()), cfg.gamma_tilde.hidden),
                              cfg.gamma_tilde.train, stage_seed(cfg, c, repeat, gamma_tilde_stage_name(eta)),
                              cfg.redraw_each_epoch);
}

EnrichmentCurve curve_stage(const RunConfig& cfg, const Condition& c, std::size_t repeat, double eta,
                            std::span<const double> scores, std::span<const Truth> truth)
{
    const auto grid = effective_q_grid(cfg);
    auto curve = enrichment_curve(scores, truth, grid);
    curve.metadata["condition"] = c.label();
    curve.metadata["eta"] = io::format_double(eta);
    curve.metadata["repeat"] = std::to_string(repeat);
    curve.metadata["seed"] = std::to_string(cfg.seed);
    return curve;
}

ScoredEvents score_events(const RatioModel& gamma, const RatioModel& gamma_tilde, std::span<const Event> events,
                          const Matrix& z)
{
    if (static_cast<std::size_t>(z.rows()) != events.size())
        throw DimensionError("score: " + std::to_string(z.rows()) + " representations for " +
                             std::to_string(events.size()) + " events");
    ScoredEvents s;
    auto g = eval_ratio(gamma, z);
    auto gt = eval_ratio(gamma_tilde, z);
    for (std::size_t i = 0; i < events.size(); ++i) {
        s.ids.push_back(events[i].id);
        s.truth.push_back(events[i].truth);
        s.gamma.push_back(g(static_cast<Eigen::Index>(i)));
        s.gamma_tilde.push_back(gt(static_cast<Eigen::Index>(i)));
        s.score.push_back(s.gamma.back() / s.gamma_tilde.back());
    }
    return s;
}

void write_scores(const ScoredEvents& s, const std::filesystem::path& path)
{
    std::string out = "event_id,truth,gamma,gamma_tilde,score\n";
    for (std::size_t i = 0; i < s.ids.size(); ++i) {
        out += std::to_string(s.ids[i]);
        out += ',';
        out += to_string(s.truth[i]);
        for (double v : {s.gamma[i], s.gamma_tilde[i], s.score[i]}) {
            out += ',';
            out += io::format_double(v);
        }
        out += '\n';
    }
    io::write_text(path, out);
}

ScoredEvents read_scores(const std::filesystem::path& path)
{
    const auto lines = io::read_lines(path);
    const std::string where = "'" + path.string() + "'";
    if (lines.empty() || lines[0] != "event_id,truth,gamma,gamma_tilde,score")
        throw ParseError(where + ": expected header 'event_id,truth,gamma,gamma_tilde,score'");
    ScoredEvents s;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty())
            continue;
        const std::string at = where + " line " + std::to_string(i + 1);
        auto f = io::split(lines[i], ',');
        if (f.size() != 5)
            throw ParseError(at + ": expected 5 fields, got " + std::to_string(f.size()));
        s.ids.push_back(static_cast<std::uint64_t>(io::parse_int(f[0], at + " event_id")));
        auto truth = parse_truth(f[1]);
        if (!truth)
            throw ParseError(at + ": field 'truth' must be bkg, sig or na");
        s.truth.push_back(*truth);
        s.gamma.push_back(io::parse_double(f[2], at + " gamma"));
        s.gamma_tilde.push_back(io::parse_double(f[3], at + " gamma_tilde"));
        s.score.push_back(io::parse_double(f[4], at + " score"));
    }
    if (s.ids.empty())
        throw DataError(where + ": no scored events");
    return s;
}

const ConditionResult* ExperimentReport::find(const Condition& c, double eta) const
{
    for (const auto& r : results)
        if (r.condition.n == c.n && r.condition.m == c.m && r.condition.epsilon == c.epsilon && r.eta == eta)
            return &r;
    return nullptr;
}

std::string manifest_text(const RunConfig& cfg, const std::vector<std::string>& warnings)
{
    std::string out;
    for (const auto& [k, v] : config_entries(cfg))
        out += k + " = " + v + "\n";
    out += std::string("record.version = ") + kVersion + "\n";
    for (const auto& c : conditions(cfg)) {
        for (std::size_t r = 0; r < cfg.repeats; ++r) {
            const std::string p = "record.seed." + c.label() + ".r" + std::to_string(r) + ".";
            for (const char* stage : kStageNames)
                out += p + stage + " = " + std::to_string(stage_seed(cfg, c, r, stage)) + "\n";
            for (double eta : cfg.eta)
                out += p + gamma_tilde_stage_name(eta) + " = " +
                       std::to_string(stage_seed(cfg, c, r, gamma_tilde_stage_name(eta))) + "\n";
        }
    }
    for (std::size_t i = 0; i < warnings.size(); ++i)
        out += "record.warning." + std::to_string(i) + " = " + warnings[i] + "\n";
    return out;
}

ExperimentReport run_experiment(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream* log)
{
    cfg.validate();
    ExperimentReport report;
    for (const auto& c : conditions(cfg))
        for (double eta : cfg.eta)
            report.results.push_back({c, eta, {}, {}, std::nullopt});

    const auto conds = conditions(cfg);
    auto result_index = [&](const Condition& c, std::size_t k) {
        for (std::size_t i = 0; i < conds.size(); ++i)
            if (conds[i].label() == c.label())
                return i * cfg.eta.size() + k;
        throw Error("internal: unknown condition");
    };
    for (const auto& c : conds) {
        const auto cond_dir = out_dir / c.label();
        for (std::size_t r = 0; r < cfg.repeats; ++r) {
            const auto rep_dir = cond_dir / ("repeat_" + std::to_string(r));
            try {
                auto [d3b, d4b] = generate_stage(cfg, c, r);
                for (const auto& w : d3b.warnings)
                    report.warnings.push_back(c.label() + " r" + std::to_string(r) + ": " + w);
                for (const auto& w : d4b.warnings)
                    report.warnings.push_back(c.label() + " r" + std::to_string(r) + ": " + w);
                auto parts = split_stage(cfg, c, r, d3b, d4b);
                auto repr = represent_stage(cfg, c, r, parts.parts3b[0], parts.parts4b[0]);
                if (repr.mode == ReprMode::Learned)
                    save_repr(repr, rep_dir / "repr.model");

                std::vector<std::string> embed_warnings;
                auto z3g = embed(repr, parts.parts3b[0].events, &embed_warnings);
                auto z4g = embed(repr, parts.parts4b[0].events, &embed_warnings);
                auto z3s = embed(repr, parts.parts3b[1].events, &embed_warnings);
                auto z4s = embed(repr, parts.parts4b[1].events, &embed_warnings);
                auto z4h = embed(repr, parts.parts4b[2].events, &embed_warnings);
                for (const auto& w : embed_warnings)
                    report.warnings.push_back(c.label() + " r" + std::to_string(r) + ": " + w);

                auto gamma = gamma_stage(cfg, c, r, z3g, z4g);
                save_ratio(gamma, rep_dir / "gamma.model");

                std::vector<EnrichmentCurve> curves;
                for (double eta : cfg.eta) {
                    auto gt = gamma_tilde_stage(cfg, c, r, eta, z3s, z4s);
                    save_ratio(gt, rep_dir / ("gamma_tilde_" + eta_tag(eta) + ".model"));
                    auto scored = score_events(gamma, gt, parts.parts4b[2].events, z4h);
                    auto curve = curve_stage(cfg, c, r, eta, scored.score, scored.truth);
                    write_curve(curve, rep_dir / ("curve_" + eta_tag(eta) + ".csv"));
                    curves.push_back(std::move(curve));
                }
                for (std::size_t k = 0; k < cfg.eta.size(); ++k) {
                    auto& res = report.results[result_index(c, k)];
                    res.curves.push_back(curves[k]);
                    if (curves[k].points.empty() || !curves[k].points.front().s_in_sr)
                        continue;
                    res.aucs.push_back(curve_auc(curves[k]));
                }
                if (log)
                    *log << c.label() << " repeat " << r << " done\n" << std::flush;
            } catch (const Error& e) {
                report.failures.push_back({c, r, e.what()});
                if (log)
                    *log << c.label() << " repeat " << r << " failed: " << e.what() << "\n" << std::flush;
            }
        }
    }

    std::string summary = "condition,eta,completed,failed,auc_mean,auc_std\n";
    for (auto& res : report.results) {
        std::size_t failed = 0;
        for (const auto& f : report.failures)
            if (f.condition.label() == res.condition.label())
                ++failed;
        if (!res.curves.empty()) {
            auto agg = aggregate_curves(res.curves);
            agg.mean.metadata.erase("repeat");
            agg.mean.metadata["repeats"] = std::to_string(res.curves.size());
            if (failed > 0)
                agg.mean.metadata["incomplete"] = std::to_string(failed);
            write_aggregated_curve(agg, out_dir / res.condition.label() / ("curve_" + eta_tag(res.eta) + ".csv"));
            res.aggregate = std::move(agg);
        }
        double mean = 0.0, sd = 0.0;
        for (double a : res.aucs)
            mean += a;
        if (!res.aucs.empty())
            mean /= static_cast<double>(res.aucs.size());
        for (double a : res.aucs)
            sd += (a - mean) * (a - mean);
        if (res.aucs.size() > 1)
            sd = std::sqrt(sd / static_cast<double>(res.aucs.size() - 1));
        summary += res.condition.label() + "," + io::format_double(res.eta) + "," +
                   std::to_string(res.curves.size()) + "," + std::to_string(failed) + "," +
                   (res.aucs.empty() ? std::string("na") : io::format_double(mean)) + "," +
                   (res.aucs.size() > 1 ? io::format_double(sd) : std::string("na")) + "\n";
    }
    for (const auto& f : report.failures)
        summary += "# failed " + f.condition.label() + " repeat " + std::to_string(f.repeat) + ": " + f.message + "\n";
    io::write_text(out_dir / "report.csv", summary);
    io::write_text(out_dir / "manifest.txt", manifest_text(cfg, report.warnings));
    return report;
}

} // namespace srfilter
