#include "geostyle/events.hpp"

#include "geostyle/error.hpp"
#include "geostyle/rng.hpp"
#include "geostyle/synth.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace geostyle;

namespace {

/// Brute-force oracle: direct tail sum with exact binomial coefficients in
/// long double. Independent of the log-space recurrence under test.
long double binom_tail_oracle(int k, int n, double p0) {
    long double sum = 0.0L;
    for (int j = k; j <= n; ++j) {
        long double coeff = 1.0L;
        for (int i = 0; i < j; ++i) {
            coeff = coeff * static_cast<long double>(n - i) / static_cast<long double>(i + 1);
        }
        sum += coeff * std::pow(static_cast<long double>(p0), j) *
               std::pow(1.0L - static_cast<long double>(p0), n - j);
    }
    return sum;
}

/// Independent partition enumerator: recursive assignment of each outlier to
/// an existing group or a fresh one. Structured differently from the
/// restricted-growth-string loop in the implementation.
void enumerate_recursive(const std::vector<Outlier>& outliers, std::size_t next,
                         std::vector<std::vector<std::size_t>>& groups, double& best_cost,
                         std::vector<std::vector<std::size_t>>& best,
                         const EventConfig& cfg) {
    if (next == outliers.size()) {
        double cost = 0.0;
        for (const auto& g : groups) {
            std::vector<Outlier> members;
            for (auto idx : g) members.push_back(outliers[idx]);
            cost += group_cost(members, cfg);
        }
        if (cost < best_cost) {
            best_cost = cost;
            best = groups;
        }
        return;
    }
    // index-based: the recursion grows `groups`, so references would dangle
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        groups[gi].push_back(next);
        enumerate_recursive(outliers, next + 1, groups, best_cost, best, cfg);
        groups[gi].pop_back();
    }
    groups.push_back({next});
    enumerate_recursive(outliers, next + 1, groups, best_cost, best, cfg);
    groups.pop_back();
}

double oracle_best_cost(const std::vector<Outlier>& outliers, const EventConfig& cfg) {
    std::vector<std::vector<std::size_t>> groups, best;
    double best_cost = std::numeric_limits<double>::infinity();
    enumerate_recursive(outliers, 0, groups, best_cost, best, cfg);
    return best_cost;
}

Outlier outlier_at(std::int64_t week, double saliency) {
    Outlier o;
    o.week = week;
    o.saliency = saliency;
    o.p_value = 1.0 / saliency;
    o.log_p = std::log(o.p_value);
    return o;
}

} // namespace

TEST_CASE("binomial_pvalue reference values and brute force") {
    const auto [p1, lp1] = binomial_pvalue(10, 10, 0.5);
    CHECK(p1 == doctest::Approx(9.765625e-4).epsilon(1e-12));
    CHECK(lp1 == doctest::Approx(std::log(9.765625e-4)).epsilon(1e-12));

    const auto [p2, lp2] = binomial_pvalue(0, 5, 0.3);
    CHECK(p2 == 1.0);
    CHECK(lp2 == 0.0);

    const auto [p3, lp3] = binomial_pvalue(3, 4, 0.5);
    CHECK(p3 == doctest::Approx(0.3125).epsilon(1e-12));

    for (int n = 1; n <= 30; ++n) {
        for (int k = 0; k <= n; ++k) {
            for (int pi = 1; pi <= 9; ++pi) {
                const double p0 = 0.1 * pi;
                const auto [p, lp] = binomial_pvalue(k, n, p0);
                const long double oracle = binom_tail_oracle(k, n, p0);
                CHECK(std::abs(p - static_cast<double>(oracle)) <=
                      1e-12 * static_cast<double>(oracle));
                CHECK(lp <= 1e-15);
            }
        }
    }
    CHECK_THROWS_AS(binomial_pvalue(5, 4, 0.5), ContractError);
    CHECK_THROWS_AS(binomial_pvalue(-1, 4, 0.5), ContractError);
}

TEST_CASE("p-value is non-increasing in k and handles extreme tails in log space") {
    for (double p0 : {0.05, 0.3, 0.7}) {
        double prev = 1.1;
        for (int k = 0; k <= 40; ++k) {
            const auto [p, lp] = binomial_pvalue(k, 40, p0);
            CHECK(p <= prev + 1e-15);
            prev = p;
        }
    }
    // far tail: p underflows double but log_p stays informative
    const auto [p, lp] = binomial_pvalue(900, 1000, 0.1);
    CHECK(p >= 1e-300);
    CHECK(lp < -500.0);
    CHECK(std::isfinite(lp));
}

TEST_CASE("detect_outliers flags only improbable positive deviations") {
    FitResult fit;
    fit.kind = ModelKind::linear;
    fit.params.m_lin = 0.0;
    fit.params.c_lin = 0.10; // null: p0 = 0.10 everywhere
    fit.start_week = 0;
    TrendSeries s;
    s.city = "c";
    s.signal = "x";
    s.buckets.push_back(make_bucket(1, 50, 100)); // wildly high
    s.buckets.push_back(make_bucket(2, 10, 100)); // dead on the null
    s.buckets.push_back(make_bucket(3, 0, 100));  // k = 0 never flags
    const auto outliers = detect_outliers(s, fit);
    REQUIRE(outliers.size() == 1);
    CHECK(outliers[0].week == 1);
    CHECK(outliers[0].p_value < 1e-20);
    CHECK(outliers[0].saliency > 1e20);
}

TEST_CASE("pair_cost reference values") {
    CHECK(pair_cost(1) == doctest::Approx(0.95));
    CHECK(pair_cost(52) == doctest::Approx(0.75));
    CHECK(pair_cost(50) == doctest::Approx(0.85));
    CHECK(std::isinf(pair_cost(10)));
    CHECK(std::isinf(pair_cost(2))); // delta_max itself is not proximal
    CHECK_THROWS_AS(pair_cost(0), ContractError);
}

TEST_CASE("pair_cost annual window edges") {
    // d(delta) = min(delta mod 52, 52 - delta mod 52); finite iff
    // delta >= 47 and d < 5
    CHECK(std::isinf(pair_cost(47)));                 // d = 5, excluded
    CHECK(pair_cost(48) == doctest::Approx(0.95));    // d = 4
    CHECK(pair_cost(56) == doctest::Approx(0.95));    // d = 4
    CHECK(std::isinf(pair_cost(57)));                 // d = 5, excluded
    CHECK(pair_cost(104) == doctest::Approx(0.75));   // two-year gap admitted
    CHECK(pair_cost(100) == doctest::Approx(0.95));   // d = 4 around two years
}

TEST_CASE("group_cost") {
    const EventConfig cfg;
    SUBCASE("annual pair") {
        const std::vector<Outlier> g{outlier_at(10, 100.0), outlier_at(62, 50.0)};
        CHECK(group_cost(g, cfg) == doctest::Approx(0.75 / 75.0));
    }
    SUBCASE("singleton") {
        CHECK(group_cost({outlier_at(5, 20.0)}, cfg) == doctest::Approx(0.05));
    }
    SUBCASE("incoherent gap is infinite") {
        const std::vector<Outlier> g{outlier_at(10, 100.0), outlier_at(20, 100.0)};
        CHECK(std::isinf(group_cost(g, cfg)));
    }
}

TEST_CASE("best_partition on reference cases") {
    const EventConfig cfg;
    SUBCASE("three annual outliers group together") {
        const std::vector<Outlier> outliers{outlier_at(0, 40.0), outlier_at(52, 40.0),
                                            outlier_at(104, 40.0)};
        const Partition part = best_partition(outliers, cfg);
        REQUIRE(part.groups.size() == 1);
        CHECK(part.groups[0].size() == 3);
        CHECK(part.cost == doctest::Approx(0.75 / 40.0));
        CHECK(part.exact);
    }
    SUBCASE("incompatible outliers stay singletons") {
        const std::vector<Outlier> outliers{outlier_at(0, 40.0), outlier_at(20, 40.0)};
        const Partition part = best_partition(outliers, cfg);
        CHECK(part.groups.size() == 2);
        CHECK(part.cost == doctest::Approx(2.0 / 40.0));
    }
    SUBCASE("single outlier") {
        const Partition part = best_partition({outlier_at(7, 10.0)}, cfg);
        REQUIRE(part.groups.size() == 1);
        CHECK(part.cost == doctest::Approx(0.1));
    }
    SUBCASE("grouping dominance at exactly one year") {
        const std::vector<Outlier> outliers{outlier_at(3, 33.0), outlier_at(55, 33.0)};
        const Partition part = best_partition(outliers, cfg);
        REQUIRE(part.groups.size() == 1); // 0.75/s beats 1/s
    }
    SUBCASE("unsorted input is rejected") {
        CHECK_THROWS_AS(best_partition({outlier_at(5, 10.0), outlier_at(3, 10.0)}, cfg),
                        ContractError);
    }
}

TEST_CASE("groups cannot mix saliency scales") {
    const EventConfig cfg;
    // a year-apart pair of comparable spikes is one event...
    const std::vector<Outlier> comparable{outlier_at(0, 1e20), outlier_at(52, 1e22)};
    CHECK(std::isfinite(group_cost(comparable, cfg)));
    CHECK(best_partition(comparable, cfg).groups.size() == 1);
    // ...but a huge spike does not claim a barely-significant blip a year
    // away, so a one-off event stays a one-off
    const std::vector<Outlier> mixed{outlier_at(0, 1e20), outlier_at(52, 30.0)};
    CHECK(std::isinf(group_cost(mixed, cfg)));
    const Partition part = best_partition(mixed, cfg);
    CHECK(part.groups.size() == 2);
}

TEST_CASE("best_partition equals the independent enumerator on random instances") {
    const EventConfig cfg;
    Rng rng(1234);
    for (int trial = 0; trial < 250; ++trial) {
        const std::size_t m = 2 + rng.uniform_index(7); // up to 8 outliers
        std::vector<Outlier> outliers;
        std::int64_t week = 0;
        for (std::size_t i = 0; i < m; ++i) {
            week += 1 + static_cast<std::int64_t>(rng.uniform_index(60));
            outliers.push_back(outlier_at(week, rng.uniform(20.0, 1e6)));
        }
        const Partition part = best_partition(outliers, cfg);
        const double oracle = oracle_best_cost(outliers, cfg);
        CHECK(part.cost == doctest::Approx(oracle).epsilon(1e-12));
    }
}

TEST_CASE("greedy path beyond the exact cap still produces finite partitions") {
    EventConfig cfg;
    cfg.max_outliers_exact = 5;
    Rng rng(9);
    std::vector<Outlier> outliers;
    std::int64_t week = 0;
    for (int i = 0; i < 14; ++i) {
        week += 1 + static_cast<std::int64_t>(rng.uniform_index(30));
        outliers.push_back(outlier_at(week, rng.uniform(30.0, 1e4)));
    }
    const Partition part = best_partition(outliers, cfg);
    CHECK(!part.exact);
    CHECK(std::isfinite(part.cost));
    std::size_t covered = 0;
    for (const auto& g : part.groups) covered += g.size();
    CHECK(covered == outliers.size());
}

TEST_CASE("extract_events end to end on noise-free injections") {
    // noise-free counts mean the only outliers are the injected ones
    SynthSpec spec;
    spec.params.r = 0.0;
    spec.params.m_lin = 0.0;
    spec.params.c_lin = 0.25;
    spec.kind = ModelKind::full;
    spec.n_weeks = 170;
    spec.samples_per_week = {400};
    spec.noise_free = true;
    spec.start_week = 2200;

    SUBCASE("annual event three years running") {
        spec.injected = {{{2230, 2282, 2334}, 0.2}};
        const auto gen = generate_series(spec, "tokyo", "yellow");
        FitRecord fr{"tokyo", "yellow", fit_trend(gen.series, ModelKind::full, {})};
        const auto events = extract_events({gen.series}, {fr});
        REQUIRE(events.size() == 1);
        CHECK(events[0].classification == EventClass::annual);
        CHECK(events[0].weeks == std::vector<std::int64_t>{2230, 2282, 2334});
        CHECK(events[0].saliency > 1e6);
    }
    SUBCASE("single-week spike is a one-off") {
        spec.injected = {{{2260}, 0.2}};
        const auto gen = generate_series(spec, "tokyo", "yellow");
        FitRecord fr{"tokyo", "yellow", fit_trend(gen.series, ModelKind::full, {})};
        const auto events = extract_events({gen.series}, {fr});
        REQUIRE(events.size() == 1);
        CHECK(events[0].classification == EventClass::one_off);
        CHECK(events[0].weeks == std::vector<std::int64_t>{2260});
    }
    SUBCASE("no outliers, no events") {
        spec.injected.clear();
        const auto gen = generate_series(spec, "tokyo", "yellow");
        FitRecord fr{"tokyo", "yellow", fit_trend(gen.series, ModelKind::full, {})};
        CHECK(extract_events({gen.series}, {fr}).empty());
    }
    SUBCASE("missing fit is a contract violation") {
        const auto gen = generate_series(spec, "tokyo", "yellow");
        CHECK_THROWS_AS(extract_events({gen.series}, {}), ContractError);
    }
}

TEST_CASE("event ranking is a deterministic total order") {
    // ties in saliency break by city, then signal, then first week; exercised
    // through extract_events ordering on identical synthetic trends
    SynthSpec spec;
    spec.params.c_lin = 0.25;
    spec.n_weeks = 120;
    spec.samples_per_week = {400};
    spec.noise_free = true;
    spec.start_week = 2200;
    spec.injected = {{{2260}, 0.2}};
    const auto gen_b = generate_series(spec, "bomuni", "yellow");
    const auto gen_a = generate_series(spec, "ankara", "yellow");
    FitRecord fa{"ankara", "yellow", fit_trend(gen_a.series, ModelKind::full, {})};
    FitRecord fb{"bomuni", "yellow", fit_trend(gen_b.series, ModelKind::full, {})};
    const auto events = extract_events({gen_b.series, gen_a.series}, {fa, fb});
    REQUIRE(events.size() == 2);
    CHECK(events[0].city == "ankara"); // equal saliency, city breaks the tie
}

TEST_CASE("events serialize with ISO week starts") {
    Event e;
    e.city = "tokyo";
    e.signal = "yellow";
    e.weeks = {2343};
    e.cost = 0.01;
    e.saliency = 100.0;
    e.classification = EventClass::annual;
    const std::string text = events_to_json({e});
    CHECK(text.find("\"2014-12-01\"") != std::string::npos);
    CHECK(text.find("\"annual\"") != std::string::npos);
}
