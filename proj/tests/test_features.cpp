#include <doctest.h>

#include <cmath>
#include <set>

#include "errors.hpp"
#include "features.hpp"
#include "helpers.hpp"

using namespace aqua;

TEST_CASE("norm_ratio") {
    CHECK(*norm_ratio(0.02, 0.02) == 0.0);
    CHECK(*norm_ratio(0.02, 0.01) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(*norm_ratio(0.0, 0.05) == -1.0);
    CHECK(!norm_ratio(0.0, 0.0));
    CHECK(!norm_ratio(0.03, -0.03));
}

TEST_CASE("norm_ratio antisymmetry and scale invariance") {
    testutil::XorShift rng(42);
    for (int i = 0; i < 500; ++i) {
        double a = rng.uniform(1e-4, 0.3);
        double b = rng.uniform(1e-4, 0.3);
        double c = rng.uniform(0.1, 10.0);
        CHECK(*norm_ratio(a, b) == doctest::Approx(-*norm_ratio(b, a)).epsilon(1e-12));
        CHECK(*norm_ratio(c * a, c * b) == doctest::Approx(*norm_ratio(a, b)).epsilon(1e-9));
    }
}

TEST_CASE("three_band") {
    CHECK(*three_band(0.04, 0.04, 0.7) == 0.0);
    CHECK(*three_band(0.02, 0.04, 0.01) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(*three_band(0.04, 0.02, 0.01) == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK(!three_band(0.0, 0.04, 0.01));
    CHECK(!three_band(0.04, 0.0, 0.01));
}

TEST_CASE("line_height") {
    // Point on the chord.
    CHECK(line_height(0.01, 0.02, 0.03, 443, 490, 537) == doctest::Approx(0.0).epsilon(1e-15));
    // Equal endpoints: chord is flat at R(i).
    CHECK(line_height(0.01, 0.03, 0.01, 560, 665, 705) == doctest::Approx(0.02).epsilon(1e-12));
    // Flat spectrum.
    CHECK(line_height(0.02, 0.02, 0.02, 443, 490, 560) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK_THROWS_AS(line_height(0.1, 0.1, 0.1, 560, 560, 705), ConfigError);
}

TEST_CASE("line_height is invariant under chord-lying linear ramps") {
    testutil::XorShift rng(7);
    for (int i = 0; i < 200; ++i) {
        double li = 443, lj = 560, lk = 705;
        double ri = rng.uniform(0.0, 0.3), rj = rng.uniform(0.0, 0.3), rk = rng.uniform(0.0, 0.3);
        double base = line_height(ri, rj, rk, li, lj, lk);
        // Add a ramp a + b*lambda to every reflectance.
        double a = rng.uniform(-0.1, 0.1), b = rng.uniform(-1e-4, 1e-4);
        double ramped = line_height(ri + a + b * li, rj + a + b * lj, rk + a + b * lk, li, lj, lk);
        CHECK(ramped == doctest::Approx(base).epsilon(1e-9));
    }
}

TEST_CASE("parse_feature") {
    FeatureExpr lh = parse_feature("LH(B7,B8A,B11)");
    CHECK(lh.kind == FeatureExpr::Kind::LineHeight);
    CHECK(lh.a == BandId::B7);
    CHECK(lh.b == BandId::B8A);
    CHECK(lh.c == BandId::B11);

    FeatureExpr p = parse_feature("(B4)^3");
    CHECK(p.kind == FeatureExpr::Kind::Power);
    CHECK(p.a == BandId::B4);
    CHECK(p.exponent == 3);

    CHECK_THROWS_WITH_AS(parse_feature("NR(B2,B9)"), doctest::Contains("B9"), DataError);
    CHECK_THROWS_WITH_AS(parse_feature("B9"), doctest::Contains("B9"), DataError);
    CHECK_THROWS_WITH_AS(parse_feature("TB(B1,B3,B5)"), doctest::Contains("consecutive"),
                         DataError);
    CHECK_THROWS_AS(parse_feature("NR(B2,B2)"), DataError);
    CHECK_THROWS_AS(parse_feature("(B4)^4"), DataError);
    CHECK_THROWS_AS(parse_feature("XX(B1,B2)"), DataError);
}

TEST_CASE("enumerate_candidates counts and order") {
    auto all = enumerate_candidates();
    CHECK(all.size() == 136);

    std::size_t bands = 0, powers = 0, ratios = 0, tb = 0, lh = 0;
    for (const auto& e : all) {
        switch (e.kind) {
            case FeatureExpr::Kind::Band: ++bands; break;
            case FeatureExpr::Kind::Power: ++powers; break;
            case FeatureExpr::Kind::NormRatio: ++ratios; break;
            case FeatureExpr::Kind::ThreeBand: ++tb; break;
            case FeatureExpr::Kind::LineHeight: ++lh; break;
        }
    }
    CHECK(bands == 10);
    CHECK(powers == 20);
    CHECK(ratios == 90);
    CHECK(tb == 8);
    CHECK(lh == 8);

    // Deterministic, duplicate-free namespace.
    std::set<std::string> names;
    for (const auto& e : all) names.insert(e.name());
    CHECK(names.size() == 136);
}

TEST_CASE("canonical names round-trip through the parser") {
    for (const auto& e : enumerate_candidates()) {
        CHECK(parse_feature(e.name()) == e);
    }
}

TEST_CASE("Table-style selected-variable lists parse into the namespace") {
    auto candidates = enumerate_candidates();
    std::set<std::string> names;
    for (const auto& e : candidates) names.insert(e.name());

    const std::vector<std::string> chla = {
        "B2",          "(B2)^2",        "(B4)^3",        "(B8A)^2",
        "(B8A)^3",     "(B11)^2",       "NR(B2,B3)",     "TB(B2,B3,B4)",
        "LH(B1,B2,B3)", "LH(B3,B4,B5)", "LH(B7,B8A,B11)",
    };
    for (const auto& n : chla) {
        CHECK(names.count(parse_feature(n).name()) == 1);
    }
    CHECK(chla.size() == 11);

    // SS list repeats B3; the parser accepts the literal list and drops the
    // duplicate column.
    const std::vector<std::string> ss = {"B3",     "B3",     "(B3)^3",       "B4",
                                         "(B4)^2", "(B4)^3", "B5",           "(B5)^3",
                                         "LH(B4,B5,B6)", "LH(B5,B6,B7)"};
    std::size_t dropped = 0;
    auto parsed = parse_feature_list(ss, &dropped);
    CHECK(dropped == 1);
    CHECK(parsed.size() == 9);
}

namespace {

MatchupTable tiny_table() {
    std::string csv = testutil::synthetic_matchup_csv(
        2, 2018, 2019, 5,
        [](const Spectrum& s, testutil::XorShift&) { return 4.0 * s[BandId::B3] + 1.0; });
    return parse_matchup_csv(csv, {}, "test");
}

}  // namespace

TEST_CASE("evaluate_features") {
    MatchupTable t = tiny_table();

    SUBCASE("identity feature reproduces the band column") {
        auto m = evaluate_features(t, {parse_feature("B2")});
        REQUIRE(m.cols == 1);
        for (std::size_t r = 0; r < m.rows; ++r) {
            CHECK(m.at(r, 0) == t.records[r].spectrum[BandId::B2]);
        }
    }
    SUBCASE("powers square the reflectance") {
        MatchupTable one;
        one.records.push_back(t.records[0]);
        one.records[0].spectrum[BandId::B3] = 0.1;
        finalize_table(one);
        auto m = evaluate_features(one, {parse_feature("(B3)^2")});
        CHECK(m.at(0, 0) == doctest::Approx(0.01).epsilon(1e-15));
    }
    SUBCASE("one column per expression") {
        const std::vector<std::string> chla = {
            "B2",          "(B2)^2",        "(B4)^3",        "(B8A)^2",
            "(B8A)^3",     "(B11)^2",       "NR(B2,B3)",     "TB(B2,B3,B4)",
            "LH(B1,B2,B3)", "LH(B3,B4,B5)", "LH(B7,B8A,B11)",
        };
        auto m = evaluate_features(t, parse_feature_list(chla));
        CHECK(m.cols == 11);
        CHECK(m.rows == t.records.size());
    }
    SUBCASE("matrix is NaN-free even with zero denominators") {
        MatchupTable z;
        z.records.push_back(t.records[0]);
        for (BandId b : kAllBands) z.records[0].spectrum[b] = 0.0;
        finalize_table(z);
        FeatureEvalLog log;
        auto m = evaluate_features(z, enumerate_candidates(), &log);
        for (double v : m.values) CHECK(std::isfinite(v));
        CHECK(log.undefined_substitutions > 0);
    }
    SUBCASE("csv export carries station and date columns") {
        auto m = evaluate_features(t, {parse_feature("B2"), parse_feature("NR(B2,B3)")});
        std::string csv = feature_matrix_csv(m);
        bool quoted = csv.rfind("station_id,date,B2,\"NR(B2,B3)\"", 0) == 0;
        bool bare = csv.rfind("station_id,date,B2,NR(B2,B3)", 0) == 0;
        CHECK((quoted || bare));
    }
}
