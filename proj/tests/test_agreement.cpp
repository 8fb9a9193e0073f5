#include "doctest.h"

#include "helpers.hpp"

#include "kappaforge/agreement.hpp"

#include <cmath>

using namespace kappaforge;
using kftest::make_vector;

TEST_CASE("observed agreement basics") {
    auto a = make_vector("a", {"1", "1", "1", "1", "1"});
    CHECK(observed_agreement(a, a) == 1.0);

    auto x = make_vector("x", {"1", "0", "1"});
    auto y = make_vector("y", {"1", "1", "1"});
    CHECK(observed_agreement(x, y) == doctest::Approx(2.0 / 3.0));
    CHECK(observed_agreement(x, y) == observed_agreement(y, x));

    LabelVector p{"p", {{"u1", "0"}}};
    LabelVector q{"q", {{"u2", "0"}}};
    CHECK_THROWS_AS(observed_agreement(p, q), NoSharedUnits);
}

TEST_CASE("cohen kappa hand case is exact") {
    auto a = make_vector("a", {"1", "1", "0", "0"});
    auto b = make_vector("b", {"1", "0", "0", "0"});
    KappaResult k = cohen_kappa(a, b);
    CHECK(k.p_o == 0.75);
    CHECK(k.p_e == 0.5);
    CHECK(k.kappa == 0.5);
    CHECK(k.n_units == 4);
    CHECK_FALSE(k.degenerate);
    CHECK(k.band == "Moderate");
}

TEST_CASE("cohen kappa identity and degenerate conventions") {
    auto a = make_vector("a", {"x", "y", "x", "z"});
    KappaResult identity = cohen_kappa(a, a);
    CHECK(identity.kappa == 1.0);
    CHECK(identity.p_o == 1.0);
    CHECK_FALSE(identity.degenerate);

    auto zeros1 = make_vector("a", {"0", "0", "0"});
    auto zeros2 = make_vector("b", {"0", "0", "0"});
    KappaResult degenerate = cohen_kappa(zeros1, zeros2);
    CHECK(degenerate.degenerate);
    CHECK(degenerate.kappa == 1.0);

    LabelVector one{"a", {{"u0", "0"}}};
    LabelVector two{"b", {{"u0", "0"}}};
    CHECK_THROWS_AS(cohen_kappa(one, two), FewerThanTwoUnits);
}

TEST_CASE("cohen kappa matches the brute-force oracle on random instances") {
    std::mt19937_64 rng(20240917);
    for (int trial = 0; trial < 1000; ++trial) {
        auto vectors = kftest::random_two_coders(rng, 2, 12, 4);
        KappaResult k = cohen_kappa(vectors[0], vectors[1]);
        kftest::OracleKappa oracle = kftest::oracle_cohen_kappa(vectors[0], vectors[1]);
        CHECK(std::abs(k.p_o - oracle.p_o) < 1e-12);
        CHECK(std::abs(k.p_e - oracle.p_e) < 1e-12);
        CHECK(std::abs(k.kappa - oracle.kappa) < 1e-12);

        KappaResult swapped = cohen_kappa(vectors[1], vectors[0]);
        CHECK(std::abs(k.kappa - swapped.kappa) < 1e-12);
    }
}

TEST_CASE("kappa is invariant under bijective relabeling of both coders") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        auto vectors = kftest::random_two_coders(rng, 3, 10, 4);
        KappaResult before = cohen_kappa(vectors[0], vectors[1]);
        LabelVector ra = vectors[0], rb = vectors[1];
        for (auto& [unit, label] : ra.labels) label = "swap_" + label;
        for (auto& [unit, label] : rb.labels) label = "swap_" + label;
        KappaResult after = cohen_kappa(ra, rb);
        CHECK(std::abs(before.kappa - after.kappa) < 1e-12);
    }
}

TEST_CASE("landis-koch banding per the half-open intervals") {
    CHECK(landis_koch_band(0.76) == Band::Substantial);
    CHECK(landis_koch_band(0.93) == Band::AlmostPerfect);
    CHECK(landis_koch_band(-0.1) == Band::NoAgreement);
    CHECK(landis_koch_band(0.0) == Band::Slight);
    CHECK(landis_koch_band(0.20) == Band::Slight);
    CHECK(landis_koch_band(0.205) == Band::Fair);
    CHECK(landis_koch_band(0.40) == Band::Fair);
    CHECK(landis_koch_band(0.60) == Band::Moderate);
    CHECK(landis_koch_band(0.605) == Band::Substantial);
    CHECK(landis_koch_band(0.80) == Band::Substantial);
    CHECK(landis_koch_band(0.805) == Band::AlmostPerfect);
    CHECK(landis_koch_band(1.0) == Band::AlmostPerfect);
    CHECK(landis_koch_band(-1.0) == Band::NoAgreement);
    CHECK_THROWS_AS(landis_koch_band(1.0001), OutOfRange);
    CHECK_THROWS_AS(landis_koch_band(-1.0001), OutOfRange);
}

TEST_CASE("krippendorff alpha hand case") {
    // u1:(0,0) u2:(0,0) u3:(0,1) u4:(1,1)  ->  o_00=4, o_11=2, o_01=o_10=1
    auto a = make_vector("a", {"0", "0", "0", "1"});
    auto b = make_vector("b", {"0", "0", "1", "1"});
    AlphaOutcome out = krippendorff_alpha({a, b});
    REQUIRE(out.ok());
    CHECK(out.result.observed_disagreement == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(out.result.expected_disagreement == doctest::Approx(30.0 / 56.0).epsilon(1e-12));
    CHECK(out.result.alpha == doctest::Approx(16.0 / 30.0).epsilon(1e-12));
    CHECK(out.result.n_pairable == 8);

    // Two coders, no missing data: D_o = 1 - observed agreement.
    double oa = observed_agreement(a, b);
    CHECK(out.result.observed_disagreement == doctest::Approx(1.0 - oa).epsilon(1e-12));
}

TEST_CASE("alpha outcomes for degenerate and perfect data") {
    auto same1 = make_vector("a", {"0", "0", "0"});
    auto same2 = make_vector("b", {"0", "0", "0"});
    CHECK(krippendorff_alpha({same1, same2}).status == AlphaStatus::ZeroExpectedDisagreement);

    auto p1 = make_vector("a", {"0", "1", "0", "1"});
    auto p2 = make_vector("b", {"0", "1", "0", "1"});
    AlphaOutcome perfect = krippendorff_alpha({p1, p2});
    REQUIRE(perfect.ok());
    CHECK(perfect.result.alpha == 1.0);

    LabelVector lonely_a{"a", {{"u1", "0"}}};
    LabelVector lonely_b{"b", {{"u2", "1"}}};
    CHECK(krippendorff_alpha({lonely_a, lonely_b}).status == AlphaStatus::NoPairableValues);
}

TEST_CASE("alpha handles ten identical instances like a reliability run") {
    std::vector<LabelVector> instances;
    for (int i = 0; i < 10; ++i) {
        instances.push_back(make_vector("inst" + std::to_string(i), {"0", "1", "0", "0", "1"}));
    }
    AlphaOutcome out = krippendorff_alpha(instances);
    REQUIRE(out.ok());
    CHECK(out.result.alpha == 1.0);
}

TEST_CASE("alpha matches the reference coincidence-matrix oracle") {
    std::mt19937_64 rng(424242);
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        auto vectors = kftest::random_multi_coders(rng, 10, 30, 4, 0.2);
        kftest::OracleAlpha oracle = kftest::oracle_krippendorff_alpha(vectors);
        AlphaOutcome out = krippendorff_alpha(vectors);
        if (!oracle.defined) {
            CHECK_FALSE(out.ok());
            continue;
        }
        REQUIRE(out.ok());
        CHECK(std::abs(out.result.alpha - oracle.alpha) < 1e-9);
        CHECK(std::abs(out.result.observed_disagreement - oracle.d_o) < 1e-9);
        CHECK(std::abs(out.result.expected_disagreement - oracle.d_e) < 1e-9);
        ++checked;
    }
    CHECK(checked > 150);
}

TEST_CASE("alpha rejects labels outside a declared domain") {
    auto a = make_vector("a", {"0", "1"});
    auto b = make_vector("b", {"0", "x"});
    std::set<std::string> domain = {"0", "1"};
    CHECK_THROWS_AS(krippendorff_alpha({a, b}, domain), OutOfRange);
}

TEST_CASE("bootstrap is seed-deterministic") {
    auto a = make_vector("a", {"0", "0", "0", "1", "1", "0", "1", "0"});
    auto b = make_vector("b", {"0", "0", "1", "1", "1", "0", "0", "0"});
    BootstrapOptions options;
    options.n_resamples = 400;
    options.seed = 1234;

    BootstrapCi first = bootstrap_alpha_ci({a, b}, options);
    BootstrapCi second = bootstrap_alpha_ci({a, b}, options);
    CHECK(first.lo == second.lo);
    CHECK(first.hi == second.hi);
    CHECK(first.lo <= first.hi);

    // A different seed draws a different resample distribution (the discrete
    // percentiles themselves may coincide).
    options.parallel = false;
    auto dist_a = bootstrap_alpha_distribution_serial({a, b}, options);
    options.seed = 1235;
    auto dist_b = bootstrap_alpha_distribution_serial({a, b}, options);
    CHECK(dist_a != dist_b);
}

TEST_CASE("bootstrap default depth is 1000 resamples") {
    BootstrapOptions defaults;
    CHECK(defaults.n_resamples == 1000);
    CHECK(defaults.level == 0.95);
}

TEST_CASE("parallel and serial bootstrap paths are identical") {
    std::mt19937_64 rng(777);
    auto vectors = kftest::random_multi_coders(rng, 6, 25, 3, 0.1);
    BootstrapOptions options;
    options.n_resamples = 500;
    options.seed = 99;
    auto serial = bootstrap_alpha_distribution_serial(vectors, options);
    auto parallel = bootstrap_alpha_distribution_parallel(vectors, options);
    REQUIRE(serial.size() == parallel.size());
    for (size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i] == parallel[i]);
    }
}

TEST_CASE("constant statistic collapses the interval") {
    // Perfect agreement: every non-degenerate resample yields exactly 1.0.
    auto a = make_vector("a", {"0", "1", "0", "1", "1"});
    BootstrapOptions options;
    options.n_resamples = 200;
    options.seed = 5;
    BootstrapCi ci = bootstrap_alpha_ci({a, a}, options);
    CHECK(ci.lo == 1.0);
    CHECK(ci.hi == 1.0);
}

TEST_CASE("bootstrap on all-identical data reports DegenerateData") {
    auto a = make_vector("a", {"0", "0", "0"});
    auto b = make_vector("b", {"0", "0", "0"});
    BootstrapOptions options;
    options.n_resamples = 50;
    CHECK_THROWS_AS(bootstrap_alpha_ci({a, b}, options), DegenerateData);
}

TEST_CASE("pairwise matrix composes kappa and observed agreement") {
    auto a = make_vector("h1", {"0", "0", "0", "1"});
    auto b = make_vector("h2", {"0", "0", "1", "1"});
    auto c = make_vector("h3", {"0", "0", "0", "1"});
    AgreementMatrix matrix = pairwise_matrix({a, b, c});
    REQUIRE(matrix.coder_ids.size() == 3);

    CHECK(matrix.at(0, 0).kappa == 1.0);
    CHECK(matrix.at(0, 2).kappa == 1.0); // identical coders
    CHECK(matrix.at(0, 1).kappa == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(matrix.at(1, 0).kappa == matrix.at(0, 1).kappa);
    CHECK(matrix.at(0, 1).n == 4);

    SUBCASE("three identical coders give an all-ones grid") {
        AgreementMatrix same = pairwise_matrix({a, a, a});
        for (size_t i = 0; i < 3; ++i) {
            for (size_t j = 0; j < 3; ++j) {
                CHECK(same.at(i, j).kappa == 1.0);
            }
        }
    }

    SUBCASE("a disjoint pair is unavailable while the rest computes") {
        LabelVector d{"d", {{"z1", "0"}, {"z2", "1"}}};
        AgreementMatrix mixed = pairwise_matrix({a, b, d});
        CHECK(mixed.at(0, 1).available);
        CHECK_FALSE(mixed.at(0, 2).available);
        CHECK_FALSE(mixed.at(2, 1).available);
        CHECK(mixed.at(2, 2).available);
    }
}

TEST_CASE("matrix CSV export carries coder ids") {
    auto a = make_vector("h1", {"0", "1", "0"});
    auto b = make_vector("h2", {"0", "1", "1"});
    AgreementMatrix matrix = pairwise_matrix({a, b});
    std::string csv = matrix_to_csv(matrix, "kappa");
    CHECK(csv.find("coder,h1,h2") == 0);
    std::string ncsv = matrix_to_csv(matrix, "n");
    CHECK(ncsv.find(",3") != std::string::npos);
    CHECK_THROWS_AS(matrix_to_csv(matrix, "bogus"), OutOfRange);
}
