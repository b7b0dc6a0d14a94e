#include "srfilter/cli.hpp"
#include "srfilter/config.hpp"
#include "srfilter/error.hpp"
#include "srfilter/experiment.hpp"
#include "srfilter/io.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace srfilter;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "srfilter");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// Small and quick: toy source, narrow networks, few epochs.
const std::vector<std::string> kSmall{"--set", "source=toy1d",          "--set", "data.n=3000",
                                      "--set", "noise.eta=0.1,1",       "--set", "model.gamma.hidden=8",
                                      "--set", "model.gamma_tilde.hidden=8", "--set", "train.gamma.max_epochs=5",
                                      "--set", "train.gamma_tilde.max_epochs=5", "--set", "run.repeats=1"};

std::vector<std::string> with_small(std::vector<std::string> args)
{
    args.insert(args.end(), kSmall.begin(), kSmall.end());
    return args;
}

} // namespace

TEST_CASE("config parsing and overrides")
{
    auto cfg = parse_config({"# comment", "source = physics_like", "", "data.n = 1000, 2000", "data.epsilon = 0.01",
                             "model.gamma.hidden = 32,16", "train.gamma_tilde.batch_size = 64",
                             "physics.signal_features = m1, m2"},
                            {"data.epsilon=0.02,0.05", "run.seed=7"});
    CHECK(cfg.source == DataSource::PhysicsLike);
    CHECK(cfg.n == std::vector<std::size_t>{1000, 2000});
    CHECK(cfg.epsilon == std::vector<double>{0.02, 0.05});
    CHECK(cfg.gamma.hidden == std::vector<std::size_t>{32, 16});
    CHECK(cfg.gamma_tilde.train.batch_size == 64);
    CHECK(cfg.seed == 7);
    CHECK(cfg.physics.signal_features.size() == 2);
    CHECK(conditions(cfg).size() == 4);
    CHECK(cfg.m_for(1) == 2000);

    CHECK_THROWS_AS(parse_config({"data.bogus = 1"}), ConfigError);
    CHECK_THROWS_AS(parse_config({"data.n = ten"}), ConfigError);
    CHECK_THROWS_AS(parse_config({"no equals sign"}), ConfigError);
    CHECK_THROWS_AS(parse_config({"data.epsilon = 1.5"}), ConfigError);
    CHECK_THROWS_AS(parse_config({"split.fractions = 0.5,0.5"}), ConfigError);
    CHECK_THROWS_AS(parse_config({}, {"noise.eta"}), ConfigError);
    CHECK_THROWS_AS(parse_config({"physics.signal_features = nope"}), ConfigError);
}

TEST_CASE("config entries re-parse to the same config")
{
    auto cfg = parse_config({"source = physics_like", "data.n = 500", "noise.mode = absolute", "noise.eta = 2",
                             "curve.q_grid = 0.1,0.5,1", "repr.mode = learned", "repr.dim = 4"});
    std::vector<std::string> lines;
    for (const auto& [k, v] : config_entries(cfg))
        lines.push_back(k + " = " + v);
    auto back = parse_config(lines);
    CHECK(config_entries(back) == config_entries(cfg));

    // Manifests re-parse as configs; record.* lines are ignored.
    std::istringstream manifest(manifest_text(cfg, {"a warning"}));
    std::vector<std::string> mlines;
    for (std::string l; std::getline(manifest, l);)
        mlines.push_back(l);
    CHECK(config_entries(parse_config(mlines)) == config_entries(cfg));
}

TEST_CASE("condition labels and seeds")
{
    auto cfg = parse_config({"data.n = 1000", "data.epsilon = 0.05"});
    auto c = conditions(cfg).front();
    CHECK(c.label() == "n1000_m1000_eps0.05");
    CHECK(stage_seed(cfg, c, 0, "gamma") != stage_seed(cfg, c, 1, "gamma"));
    CHECK(stage_seed(cfg, c, 0, "gamma") != stage_seed(cfg, c, 0, "generate"));
    CHECK(stage_seed(cfg, c, 0, "gamma") == stage_seed(cfg, c, 0, "gamma"));
    CHECK(eta_tag(0.1) == "eta0.1");
}

TEST_CASE("cli exit codes")
{
    testing::TempDir dir("cli_codes");
    CHECK(cli({"--help"}).code == 0);
    CHECK(cli({"nonsense"}).code == 2);
    CHECK(cli({"generate"}).code == 2); // --out missing
    CHECK(cli({"generate", "--out", dir.path().string(), "--set", "data.n=-3"}).code == 2);
    CHECK(cli({"generate", "--out", dir.path().string(), "--config", (dir / "absent.conf").string()}).code == 2);
    // A stage error: scoring without fitted models.
    auto r = cli({"score", "--out", dir.path().string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("generate") != std::string::npos);
}

TEST_CASE("generate writes event files and a manifest")
{
    testing::TempDir dir("cli_generate");
    auto r = cli(with_small({"generate", "--out", dir.path().string()}));
    REQUIRE(r.code == 0);
    for (const char* f : {"events_3b.csv", "events_4b.csv", "3b_gamma.csv", "3b_smooth.csv", "3b_holdout.csv",
                          "4b_gamma.csv", "4b_smooth.csv", "4b_holdout.csv", "manifest.txt"})
        CHECK(fs::exists(dir / f));
    auto d4 = read_events(dir / "events_4b.csv");
    CHECK(d4.size() == 3000);
    CHECK(read_events(dir / "4b_holdout.csv").size() == 563);
    CHECK(slurp(dir / "manifest.txt").find("record.subcommand = generate") != std::string::npos);
}

TEST_CASE("cli stages compose into the run_experiment curve")
{
    testing::TempDir dir("cli_chain");
    const auto d = dir.path().string();
    for (const char* sub : {"generate", "represent", "fit-ratio", "fit-smoothed", "score", "curve"}) {
        auto r = cli(with_small({sub, "--out", d}));
        REQUIRE_MESSAGE(r.code == 0, sub, ": ", r.err);
    }
    auto sel = cli(with_small({"select", "--out", d, "--q", "0.3", "--eta", "0.1"}));
    REQUIRE(sel.code == 0);
    const auto members = io::read_lines(dir / "members_eta0.1.csv");
    CHECK(members.size() - 1 >= 169); // ceil(0.3 * 563)
    CHECK(slurp(dir / "region_eta0.1.txt").find("signal region v1") == 0);

    testing::TempDir full("cli_chain_run");
    auto run = cli(with_small({"run", "--out", full.path().string()}));
    REQUIRE(run.code == 0);
    const auto label = "n3000_m3000_eps0.05";
    for (const char* eta : {"eta0.1", "eta1"}) {
        const auto mine = slurp(dir / (std::string("curve_") + eta + ".csv"));
        const auto theirs = slurp(full.path() / label / "repeat_0" / (std::string("curve_") + eta + ".csv"));
        CHECK(!mine.empty());
        CHECK(mine == theirs);
    }
    CHECK(slurp(full / "manifest.txt").find("record.subcommand = run") != std::string::npos);
}

TEST_CASE("select on 1000 scored events")
{
    testing::TempDir dir("cli_select");
    ScoredEvents s;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        s.ids.push_back(i);
        s.truth.push_back(Truth::Unknown);
        s.gamma.push_back(1.0);
        s.gamma_tilde.push_back(1.0);
        s.score.push_back(0.5 + 0.001 * static_cast<double>((i * 7919) % 1000));
    }
    write_scores(s, dir / "scores_eta0.1.csv");
    auto r = cli({"select", "--out", dir.path().string(), "--set", "noise.eta=0.1", "--q", "0.3"});
    REQUIRE(r.code == 0);
    CHECK(io::read_lines(dir / "members_eta0.1.csv").size() - 1 == 300);
    CHECK(cli({"select", "--out", dir.path().string(), "--set", "noise.eta=0.1", "--q", "0"}).code == 2);
}

TEST_CASE("scores round trip")
{
    testing::TempDir dir("scores");
    ScoredEvents s{{3, 9}, {Truth::Signal, Truth::Background}, {1.5, 0.25}, {1.0, 0.5}, {1.5, 0.5}};
    write_scores(s, dir / "s.csv");
    auto back = read_scores(dir / "s.csv");
    CHECK(back.ids == s.ids);
    CHECK(back.truth == s.truth);
    CHECK(back.score == s.score);
    write(dir / "bad.csv", "event_id,truth,gamma,gamma_tilde,score\n1,maybe,1,1,1\n");
    CHECK_THROWS_AS(read_scores(dir / "bad.csv"), ParseError);
}

TEST_CASE("oracle-check with the oracle as model reports zero error")
{
    testing::TempDir dir("cli_oracle");
    auto r = cli({"oracle-check", "--out", dir.path().string(), "--oracle-as-model", "--set", "noise.mode=absolute",
                  "--set", "noise.eta=2"});
    REQUIRE(r.code == 0);
    auto text = slurp(dir / "oracle_check.txt");
    CHECK(text.find("gamma_max_rel_error = 0\n") != std::string::npos);
    CHECK(text.find("score_max_rel_error = 0\n") != std::string::npos);
    CHECK(text.find("oracle_score_argmax = 7") != std::string::npos);
    // Range-fraction noise has no fixed kernel to compare against.
    CHECK(cli({"oracle-check", "--out", dir.path().string(), "--oracle-as-model"}).code == 2);
}

TEST_CASE("run_experiment is deterministic and records failures")
{
    auto cfg = parse_config({"data.n = 2000", "noise.eta = 0.1", "model.gamma.hidden = 8",
                             "model.gamma_tilde.hidden = 8", "train.gamma.max_epochs = 3",
                             "train.gamma_tilde.max_epochs = 3", "run.repeats = 2"});
    testing::TempDir a("det_a"), b("det_b");
    auto ra = run_experiment(cfg, a.path());
    auto rb = run_experiment(cfg, b.path());
    REQUIRE(ra.complete());
    REQUIRE(ra.results.size() == 1);
    CHECK(ra.results[0].aucs == rb.results[0].aucs);
    const std::string label = "n2000_m2000_eps0.05";
    for (const auto& rel : {label + "/curve_eta0.1.csv", label + "/repeat_0/curve_eta0.1.csv",
                            label + "/repeat_1/curve_eta0.1.csv", std::string("report.csv")})
        CHECK(slurp(a / rel) == slurp(b / rel));
    CHECK(fs::exists(a / label / "repeat_1" / "gamma.model"));
    CHECK(slurp(a / "manifest.txt").find("record.seed." + label + ".r1.gamma") != std::string::npos);

    // Missing input files fail every repeat without aborting the run.
    auto bad = parse_config({"source = files", "data.files_3b = /nonexistent/3b.csv",
                             "data.files_4b = /nonexistent/4b.csv", "run.repeats = 1", "data.n = 10"});
    testing::TempDir c("det_c");
    auto rc = run_experiment(bad, c.path());
    CHECK_FALSE(rc.complete());
    CHECK(slurp(c / "report.csv").find("# failed") != std::string::npos);
}
