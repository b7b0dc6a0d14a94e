#include "srfilter/error.hpp"
#include "srfilter/io.hpp"
#include "srfilter/rng.hpp"

#include <doctest.h>

#include <limits>
#include <set>

using namespace srfilter;

TEST_CASE("format_double round-trips exactly")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
        CHECK(io::parse_double(io::format_double(v), "v") == v);
    }
    CHECK(io::format_double(0.05) == "0.05");
    CHECK(io::parse_double(io::format_double(std::numeric_limits<double>::denorm_min()), "v") ==
          std::numeric_limits<double>::denorm_min());
}

TEST_CASE("strict number parsing rejects trailing junk")
{
    CHECK_THROWS_AS(io::parse_double("1.5x", "value"), ParseError);
    CHECK_THROWS_AS(io::parse_double("", "value"), ParseError);
    CHECK_THROWS_AS(io::parse_int("12.0", "count"), ParseError);
    CHECK(io::parse_int("-42", "count") == -42);
}

TEST_CASE("header blocks parse key = value lines")
{
    std::vector<std::string> lines{"magic v1", "a = 1", "b = two words", "end", "rest"};
    std::size_t pos = 0;
    auto block = io::parse_header_block(lines, pos, "magic v1", "test");
    CHECK(pos == 4);
    CHECK(block.at("a") == "1");
    CHECK(block.at("b") == "two words");
    CHECK_THROWS_AS(io::require_key(block, "c", "test"), ParseError);

    std::vector<std::string> bad{"other v1", "end"};
    pos = 0;
    CHECK_THROWS_AS(io::parse_header_block(bad, pos, "magic v1", "test"), ParseError);
}

TEST_CASE("derived seeds separate repeats and stages")
{
    std::set<std::uint64_t> seen;
    for (std::uint64_t r = 0; r < 50; ++r)
        for (const char* stage : {"generate", "split-3b", "split-4b", "gamma", "gamma_tilde/eta0.1"})
            seen.insert(derive_seed(1, r, stage));
    CHECK(seen.size() == 250);
    CHECK(derive_seed(7, 3, "gamma") == derive_seed(7, 3, "gamma"));
    CHECK(derive_seed(7, 3, "gamma") != derive_seed(8, 3, "gamma"));
}
