#include "srfilter/cli.hpp"

#include "srfilter/error.hpp"
#include "srfilter/experiment.hpp"
#include "srfilter/io.hpp"
#include "srfilter/oracle.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

namespace srfilter {

namespace {

namespace fs = std::filesystem;

const char* const kPartLabels[] = {"gamma", "smooth", "holdout"};

struct Common {
    std::string config;
    std::vector<std::string> overrides;
    std::string out;
    std::string in;
    std::size_t repeat = 0;
    std::size_t condition = 0;

    fs::path input_dir() const { return in.empty() ? fs::path(out) : fs::path(in); }
};

RunConfig resolve_config(const Common& c)
{
    RunConfig cfg = c.config.empty() ? parse_config({}, c.overrides) : load_config(c.config, c.overrides);
    if (c.repeat >= cfg.repeats)
        throw ConfigError("--repeat " + std::to_string(c.repeat) + " is outside run.repeats = " +
                          std::to_string(cfg.repeats));
    return cfg;
}

Condition resolve_condition(const RunConfig& cfg, const Common& c)
{
    auto all = conditions(cfg);
    if (c.condition >= all.size())
        throw ConfigError("--condition " + std::to_string(c.condition) + " is outside the " +
                          std::to_string(all.size()) + " configured (n, epsilon) conditions");
    return all[c.condition];
}

fs::path require_file(const fs::path& p, const std::string& schema)
{
    if (!fs::exists(p))
        throw DataError("missing input '" + p.string() + "' (expected " + schema + ")");
    return p;
}

std::string part_file(const char* tag, std::size_t k) { return std::string(tag) + "_" + kPartLabels[k] + ".csv"; }

Dataset read_part(const fs::path& dir, const char* tag, std::size_t k)
{
    return read_events(require_file(dir / part_file(tag, k), "event CSV written by 'generate'"));
}

Matrix read_z(const fs::path& dir, const char* tag, std::size_t k, std::vector<std::uint64_t>* ids = nullptr)
{
    auto r = read_representations(
        require_file(dir / ("z_" + part_file(tag, k)), "representation CSV written by 'represent'"));
    if (ids)
        *ids = std::move(r.ids);
    return std::move(r.z);
}

RatioModel read_model(const fs::path& p, const std::string& producer)
{
    return load_ratio(require_file(p, "ratio model written by '" + producer + "'"));
}

void write_manifest(const fs::path& out, const RunConfig& cfg, const std::string& subcommand, const Common& c)
{
    std::string text = manifest_text(cfg);
    text += "record.subcommand = " + subcommand + "\n";
    text += "record.repeat = " + std::to_string(c.repeat) + "\n";
    text += "record.condition = " + resolve_condition(cfg, c).label() + "\n";
    io::write_text(out / "manifest.txt", text);
}

std::vector<double> etas_for(const RunConfig& cfg, const std::vector<double>& requested)
{
    return requested.empty() ? cfg.eta : requested;
}

int cmd_generate(const Common& c, std::ostream& out)
{
    auto cfg = resolve_config(c);
    auto cond = resolve_condition(cfg, c);
    const fs::path dir = c.out;
    auto [d3b, d4b] = generate_stage(cfg, cond, c.repeat);
    write_events(d3b, dir / "events_3b.csv");
    write_events(d4b, dir / "events_4b.csv");
    auto parts = split_stage(cfg, cond, c.repeat, d3b, d4b);
    for (std::size_t k = 0; k < 3; ++k) {
        write_events(parts.parts3b[k], dir / part_file("3b", k));
        write_events(parts.parts4b[k], dir / part_file("4b", k));
    }
    for (const auto& w : d4b.warnings)
        out << "warning: " << w << "\n";
    write_manifest(dir, cfg, "generate", c);
    out << "generated " << d3b.size() << " 3b and " << d4b.size() << " 4b events into " << dir.string() << "\n";
    return 0;
}

int cmd_represent(const Common& c, std::ostream& out)
{
    auto cfg = resolve_config(c);
    auto cond = resolve_condition(cfg, c);
    const auto in = c.input_dir();
    const fs::path dir = c.out;
    std::vector<Dataset> p3, p4;
    for (std::size_t k = 0; k < 3; ++k) {
        p3.push_back(read_part(in, "3b", k));
        p4.push_back(read_part(in, "4b", k));
    }
    auto repr = represent_stage(cfg, cond, c.repeat, p3[0], p4[0]);
    save_repr(repr, dir / "repr.model");
    std::vector<std::string> warnings;
    for (std::size_t k = 0; k < 3; ++k) {
        write_representations(p3[k].events, embed(repr, p3[k].events, &warnings), dir / ("z_" + part_file("3b", k)));
        write_representations(p4[k].events, embed(repr, p4[k].events, &warnings), dir / ("z_" + part_file("4b", k)));
    }
    for (const auto& w : warnings)
        out << "warning: " << w << "\n";
    write_manifest(dir, cfg, "represent", c);
    out << "representation dimension " << repr.repr_dim() << "\n";
    return 0;
}

int cmd_fit_ratio(const Common& c, std::ostream& out)
{
    auto cfg = resolve_config(c);
    auto cond = resolve_condition(cfg, c);
    const auto in = c.input_dir();
    auto z3 = read_z(in, "3b", 0);
    auto z4 = read_z(in, "4b", 0);
    if (z3.cols() != z4.cols())
        throw DimensionError("fit-ratio: 3b and 4b representations differ in dimension");
    auto model = gamma_stage(cfg, cond, c.repeat, z3, z4);
    save_ratio(model, fs::path(c.out) / "gamma.model");
    write_manifest(c.out, cfg, "fit-ratio", c);
    out << "wrote " << (fs::path(c.out) / "gamma.model").string() << "\n";
    return 0;
}

int cmd_fit_smoothed(const Common& c, const std::vector<double>& etas, std::ostream& out)
{
    auto cfg = resolve_config(c);
    auto cond = resolve_condition(cfg, c);
    const auto in = c.input_dir();
    auto z3 = read_z(in, "3b", 1);
    auto z4 = read_z(in, "4b", 1);
    if (z3.cols() != z4.cols())
        throw DimensionError("fit-smoothed: 3b and 4b representations differ in dimension");
    for (double eta : etas_for(cfg, etas)) {
        auto model = gamma_tilde_stage(cfg, cond, c.repeat, eta, z3, z4);
        const auto path = fs::path(c.out) / ("gamma_tilde_" + eta_tag(eta) + ".model");
        save_ratio(model, path);
        out << "wrote " << path.string() << "\n";
    }
    write_manifest(c.out, cfg, "fit-smoothed", c);
    return 0;
}

int cmd_score(const Common& c, const std::vector<double>& etas, std::ostream& out)
{
    auto cfg = resolve_config(c);
    const auto in = c.input_dir();
    auto events = read_part(in, "4b", 2);
    std::vector<std::uint64_t> ids;
    auto z = read_z(in, "4b", 2, &ids);
    if (ids.size() != events.size())
        throw DimensionError("score: '" + (in / "z_4b_holdout.csv").string() + "' has " + std::to_string(ids.size()) +
                             " rows but the holdout sample has " + std::to_string(events.size()) + " events");
    for (std::size_t i = 0; i < ids.size(); ++i)
        if (ids[i] != events.events[i].id)
            throw DataError("score: event ids of the representation and holdout files disagree at row " +
                            std::to_string(i + 1));
    auto gamma = read_model(in / "gamma.model", "fit-ratio");
    for (double eta : etas_for(cfg, etas)) {
        auto gt = read_model(in / ("gamma_tilde_" + eta_tag(eta) + ".model"), "fit-smoothed");
        auto scored = score_events(gamma, gt, events.events, z);
        const auto path = fs::path(c.out) / ("scores_" + eta_tag(eta) + ".csv");
        write_scores(scored, path);
        out << "wrote " << path.string() << "\n";
    }
    write_manifest(c.out, cfg, "score", c);
    return 0;
}

int cmd_select(const Common& c, const std::vector<double>& etas, double q, std::ostream& out)
{
    auto cfg = resolve_config(c);
    if (!(q > 0.0 && q <= 1.0))
        throw ConfigError("--q must lie in (0, 1]");
    const auto in = c.input_dir();
    for (double eta : etas_for(cfg, etas)) {
        auto scored = read_scores(
            require_file(in / ("scores_" + eta_tag(eta) + ".csv"), "score CSV written by 'score'"));
        auto region = calibrate_threshold(scored.score, q);
        std::string members = "event_id,score\n";
        std::size_t count = 0;
        for (std::size_t i = 0; i < scored.ids.size(); ++i) {
            if (!in_sr(region, scored.score[i]))
                continue;
            members += std::to_string(scored.ids[i]) + "," + io::format_double(scored.score[i]) + "\n";
            ++count;
        }
        const fs::path dir = c.out;
        io::write_text(dir / ("members_" + eta_tag(eta) + ".csv"), members);
        io::write_text(dir / ("region_" + eta_tag(eta) + ".txt"),
                       "signal region v1\ntau_s = " + io::format_double(region.tau_s) +
                           "\nq = " + io::format_double(region.target_q) +
                           "\ncalibration_count = " + std::to_string(region.calibration_count) +
                           "\nmembers = " + std::to_string(count) + "\nend\n");
        out << eta_tag(eta) << ": tau_s = " << io::format_double(region.tau_s) << ", " << count << " of "
            << scored.ids.size() << " events selected\n";
    }
    write_manifest(c.out, cfg, "select", c);
    return 0;
}

int cmd_curve(const Common& c, const std::vector<double>& etas, std::ostream& out)
{
    auto cfg = resolve_config(c);
    auto cond = resolve_condition(cfg, c);
    const auto in = c.input_dir();
    for (double eta : etas_for(cfg, etas)) {
        auto scored = read_scores(
            require_file(in / ("scores_" + eta_tag(eta) + ".csv"), "score CSV written by 'score'"));
        auto curve = curve_stage(cfg, cond, c.repeat, eta, scored.score, scored.truth);
        const auto path = fs::path(c.out) / ("curve_" + eta_tag(eta) + ".csv");
        write_curve(curve, path);
        if (!curve.points.empty() && curve.points.front().s_in_sr)
            out << eta_tag(eta) << ": auc = " << io::format_double(curve_auc(curve)) << "\n";
        else
            out << eta_tag(eta) << ": no signal-labelled events, auc undefined\n";
    }
    write_manifest(c.out, cfg, "curve", c);
    return 0;
}

struct ErrorSummary {
    double median = 0.0;
    double p90 = 0.0;
    double max = 0.0;
};

ErrorSummary summarize(std::vector<double> rel)
{
    ErrorSummary s;
    s.median = percentile(rel, 50.0);
    s.p90 = percentile(rel, 90.0);
    s.max = *std::max_element(rel.begin(), rel.end());
    return s;
}

struct OracleCheckOptions {
    std::string setting;
    bool oracle_as_model = false;
    double eta = std::nan("");
    double kernel_sd = std::nan("");
    double lo = -8.0;
    double hi = 8.0;
    double step = 0.1;
};

int cmd_oracle_check(const Common& c, const OracleCheckOptions& o, std::ostream& out)
{
    auto cfg = resolve_config(c);
    auto cond = resolve_condition(cfg, c);
    const double eta = std::isnan(o.eta) ? cfg.eta.front() : o.eta;

    OracleSetting setting;
    if (!o.setting.empty()) {
        setting = load_setting(o.setting);
    } else {
        if (cfg.source != DataSource::Toy1d)
            throw ConfigError("oracle-check: without --setting the configured source must be toy1d");
        double kernel_sd = o.kernel_sd;
        if (std::isnan(kernel_sd)) {
            if (cfg.noise_mode != NoiseMode::Absolute)
                throw ConfigError("oracle-check: pass --kernel-sd or use noise.mode = absolute");
            kernel_sd = eta;
        }
        setting.spec3b = toy1d_spec3b(cfg.toy);
        setting.spec4b = toy1d_spec4b(cond.epsilon, cfg.toy);
        setting.signal_components = {1};
        setting.kernel_variances = {kernel_sd * kernel_sd};
        setting.validate();
    }
    if (setting.dim() != 1)
        throw DimensionError("oracle-check: grid comparison needs a one-dimensional setting, got dimension " +
                             std::to_string(setting.dim()));

    std::function<double(double)> g_hat, gt_hat;
    if (o.oracle_as_model) {
        g_hat = [&](double x) { return exact_gamma(setting, x); };
        gt_hat = [&](double x) { return exact_gamma_tilde(setting, x); };
    } else {
        const auto in = c.input_dir();
        auto gamma = std::make_shared<RatioModel>(read_model(in / "gamma.model", "fit-ratio"));
        auto gt = std::make_shared<RatioModel>(
            read_model(in / ("gamma_tilde_" + eta_tag(eta) + ".model"), "fit-smoothed"));
        if (gamma->input_dim() != 1 || gt->input_dim() != 1)
            throw DimensionError("oracle-check: models must take one input, got " +
                                 std::to_string(gamma->input_dim()) + " and " + std::to_string(gt->input_dim()));
        g_hat = [gamma](double x) { return eval_ratio(*gamma, std::span<const double>(&x, 1)); };
        gt_hat = [gt](double x) { return eval_ratio(*gt, std::span<const double>(&x, 1)); };
    }

    const auto grid = uniform_grid(o.lo, o.hi, o.step);
    std::vector<double> eg, egt, es;
    for (double x : grid) {
        const double g = exact_gamma(setting, x), gt = exact_gamma_tilde(setting, x);
        const double gh = g_hat(x), gth = gt_hat(x);
        eg.push_back(std::abs(gh - g) / g);
        egt.push_back(std::abs(gth - gt) / gt);
        es.push_back(std::abs(gh / gth - g / gt) / (g / gt));
    }
    std::string text = "oracle check v1\n";
    text += "grid_lo = " + io::format_double(o.lo) + "\ngrid_hi = " + io::format_double(o.hi) +
            "\ngrid_step = " + io::format_double(o.step) + "\ngrid_points = " + std::to_string(grid.size()) + "\n";
    for (auto [name, errs] : {std::pair{"gamma", &eg}, std::pair{"gamma_tilde", &egt}, std::pair{"score", &es}}) {
        auto s = summarize(*errs);
        text += std::string(name) + "_median_rel_error = " + io::format_double(s.median) + "\n";
        text += std::string(name) + "_p90_rel_error = " + io::format_double(s.p90) + "\n";
        text += std::string(name) + "_max_rel_error = " + io::format_double(s.max) + "\n";
    }
    text += "score_argmax = " + io::format_double(argmax_on_grid([&](double x) { return g_hat(x) / gt_hat(x); }, grid)) +
            "\n";
    text += "oracle_score_argmax = " +
            io::format_double(argmax_on_grid([&](double x) { return exact_score(setting, x); }, grid)) + "\n";
    text += "gamma_argmax = " + io::format_double(argmax_on_grid(g_hat, grid)) + "\nend\n";
    io::write_text(fs::path(c.out) / "oracle_check.txt", text);
    out << text;
    return 0;
}

int cmd_run(const Common& c, std::ostream& out)
{
    auto cfg = resolve_config(c);
    auto report = run_experiment(cfg, c.out, &out);
    for (const auto& res : report.results) {
        out << res.condition.label() << " " << eta_tag(res.eta) << ": " << res.curves.size() << " repeats";
        if (!res.aucs.empty()) {
            double mean = 0.0;
            for (double a : res.aucs)
                mean += a;
            out << ", mean auc " << io::format_double(mean / static_cast<double>(res.aucs.size()));
        }
        out << "\n";
    }
    // run_experiment already wrote the manifest with every derived seed.
    std::ofstream(fs::path(c.out) / "manifest.txt", std::ios::app) << "record.subcommand = run\n";
    if (!report.complete()) {
        out << report.failures.size() << " repeat(s) failed; aggregation is incomplete\n";
        return 1;
    }
    return 0;
}

void add_common(CLI::App* sub, Common& c, bool needs_input)
{
    sub->add_option("--config", c.config, "Config file (key = value)");
    sub->add_option("--set", c.overrides, "Override a config value (key=value)")->take_all()->allow_extra_args(false);
    sub->add_option("--out", c.out, "Output directory")->required();
    sub->add_option("--repeat", c.repeat, "Repeat index used for seed derivation");
    sub->add_option("--condition", c.condition, "Index into the (n, epsilon) grid");
    if (needs_input)
        sub->add_option("--in", c.in, "Input directory (defaults to --out)");
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Signal-region selection by peak score"};
    app.require_subcommand(1);
    Common common;
    std::vector<double> etas;
    double q = 0.1;
    OracleCheckOptions oc;

    auto* gen = app.add_subcommand("generate", "Generate 3b/4b events and split them");
    add_common(gen, common, false);
    auto* rep = app.add_subcommand("represent", "Fit or apply the event representation");
    add_common(rep, common, true);
    auto* fr = app.add_subcommand("fit-ratio", "Fit the density ratio on the first split");
    add_common(fr, common, true);
    auto* fs_ = app.add_subcommand("fit-smoothed", "Fit the smoothed density ratio on the second split");
    add_common(fs_, common, true);
    fs_->add_option("--eta", etas, "Noise scales (defaults to noise.eta)");
    auto* sc = app.add_subcommand("score", "Score held-out 4b events");
    add_common(sc, common, true);
    sc->add_option("--eta", etas, "Noise scales (defaults to noise.eta)");
    auto* sel = app.add_subcommand("select", "Calibrate the signal region and list its members");
    add_common(sel, common, true);
    sel->add_option("--eta", etas, "Noise scales (defaults to noise.eta)");
    sel->add_option("--q", q, "Target 4b fraction in the signal region");
    auto* cur = app.add_subcommand("curve", "Build enrichment curves from score files");
    add_common(cur, common, true);
    cur->add_option("--eta", etas, "Noise scales (defaults to noise.eta)");
    auto* orc = app.add_subcommand("oracle-check", "Compare fitted ratios with the exact ones on a grid");
    add_common(orc, common, true);
    orc->add_option("--setting", oc.setting, "Oracle setting file (defaults to the configured toy)");
    orc->add_flag("--oracle-as-model", oc.oracle_as_model, "Use the exact ratios as the model");
    orc->add_option("--eta", oc.eta, "Noise scale selecting the smoothed model");
    orc->add_option("--kernel-sd", oc.kernel_sd, "Kernel standard deviation of the setting");
    orc->add_option("--grid-lo", oc.lo, "Grid start");
    orc->add_option("--grid-hi", oc.hi, "Grid end");
    orc->add_option("--grid-step", oc.step, "Grid step");
    auto* run = app.add_subcommand("run", "Run the full experiment");
    add_common(run, common, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen)
            return cmd_generate(common, out);
        if (*rep)
            return cmd_represent(common, out);
        if (*fr)
            return cmd_fit_ratio(common, out);
        if (*fs_)
            return cmd_fit_smoothed(common, etas, out);
        if (*sc)
            return cmd_score(common, etas, out);
        if (*sel)
            return cmd_select(common, etas, q, out);
        if (*cur)
            return cmd_curve(common, etas, out);
        if (*orc)
            return cmd_oracle_check(common, oc, out);
        if (*run)
            return cmd_run(common, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

} // namespace srfilter
