#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <numeric>
#include <random>

#include "auditcalib/stats.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace auditcalib;
using namespace auditcalib::stats;
using test_support::throws_code;
using namespace oracles;

namespace {

std::vector<double> distinct_sample(std::mt19937_64& rng, std::size_t n) {
    std::vector<double> v(n);
    std::iota(v.begin(), v.end(), 0.0);
    std::shuffle(v.begin(), v.end(), rng);
    return v;
}

}  // namespace

TEST_CASE("pearson") {
    const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 1, 4, 3, 5};
    const auto r = pearson(x, y);
    CHECK(std::abs(r.coefficient - 0.8) < 1e-9);
    CHECK(std::abs(r.coefficient - brute_pearson(x, y)) < 1e-12);
    // t = 0.8 sqrt(3) / 0.6 with 3 df.
    const double t = 0.8 * std::sqrt(3.0) / 0.6;
    const boost::math::students_t dist(3.0);
    CHECK(std::abs(r.p_value - 2.0 * boost::math::cdf(boost::math::complement(dist, t))) < 1e-10);

    std::vector<double> lin, neg;
    for (const double v : x) {
        lin.push_back(2 * v + 1);
        neg.push_back(-v);
    }
    CHECK(pearson(x, lin).coefficient == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(pearson(x, neg).coefficient == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(throws_code([&] { pearson(x, std::vector<double>(5, 2.0)); }, ErrorCode::constant_input));
    CHECK(throws_code([&] { pearson(x, std::vector<double>{1, 2}); }, ErrorCode::length_mismatch));
    CHECK(throws_code([] { pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}); },
                      ErrorCode::length_mismatch));
}

TEST_CASE("spearman") {
    const std::vector<double> x{1, 2, 3, 4, 5};
    CHECK(std::abs(spearman(x, std::vector<double>{1, 2, 3, 5, 4}).coefficient - 0.9) < 1e-12);
    CHECK(spearman(x, std::vector<double>{10, 20, 35, 90, 91}).coefficient == doctest::Approx(1.0));

    std::mt19937_64 rng(21);
    int checked = 0;
    while (checked < 200) {
        const std::size_t n = 3 + rng() % 10;
        const auto a = test_support::tied(rng, n, 4), b = test_support::tied(rng, n, 5);
        if (constant(a) || constant(b)) continue;
        ++checked;
        const double oracle = brute_pearson(brute_ranks(a), brute_ranks(b));
        CHECK(std::abs(spearman(a, b).coefficient - oracle) < 1e-12);
    }
}

TEST_CASE("average ranks") {
    CHECK(average_ranks(std::vector<double>{3, 1, 3, 2}) == std::vector<double>{3.5, 1, 3.5, 2});
}

TEST_CASE("kendall tau-b") {
    CHECK(std::abs(kendall_tau(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}).coefficient - 1.0 / 3.0) <
          1e-15);
    CHECK(kendall_tau(std::vector<double>{1, 2, 3, 4}, std::vector<double>{5, 6, 7, 8}).coefficient == 1.0);
    CHECK(throws_code([] { kendall_tau(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}); },
                      ErrorCode::degenerate_input));

    std::mt19937_64 rng(22);
    int checked = 0;
    while (checked < 200) {
        const std::size_t n = 3 + rng() % 10;
        const auto a = test_support::tied(rng, n, 4), b = test_support::tied(rng, n, 3);
        if (constant(a) || constant(b)) continue;
        ++checked;
        const auto c = brute_pairs(a, b);
        const double oracle = static_cast<double>(c.concordant - c.discordant) /
                              std::sqrt(static_cast<double>(c.total - c.tied_x) * static_cast<double>(c.total - c.tied_y));
        CHECK(std::abs(kendall_tau(a, b).coefficient - oracle) < 1e-12);
        const double tau_a = static_cast<double>(c.concordant - c.discordant) / c.total;
        CHECK(std::abs(kendall_tau(a, b, KendallVariant::tau_a).coefficient - tau_a) < 1e-12);
    }
}

TEST_CASE("pair counts agree with enumeration on larger inputs") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng() % 120;
        const auto a = test_support::tied(rng, n, 1 + static_cast<int>(rng() % 20));
        const auto b = test_support::tied(rng, n, 1 + static_cast<int>(rng() % 20));
        const auto fast = pair_counts(a, b);
        const auto c = brute_pairs(a, b);
        CHECK(fast.concordant == c.concordant);
        CHECK(fast.discordant == c.discordant);
        CHECK(fast.tied_x == c.tied_x);
        CHECK(fast.tied_y == c.tied_y);
        CHECK(fast.tied() == c.tied_any);
        CHECK(fast.total == c.total);
    }
}

TEST_CASE("concordance rate") {
    const auto r = concordance_rate(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2});
    CHECK(r.concordant == 2);
    CHECK(r.discordant == 1);
    CHECK(r.rate == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(concordance_rate(std::vector<double>{1, 2, 3}, std::vector<double>{0.5, 0.5, 0.5}).rate == 0.0);
    CHECK(concordance_rate(std::vector<double>{1, 2, 3, 4}, std::vector<double>{2, 4, 6, 8}).rate == 1.0);

    std::mt19937_64 rng(24);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng() % 11;
        const auto a = test_support::tied(rng, n, 4), b = test_support::tied(rng, n, 3);
        const auto c = brute_pairs(a, b);
        const auto def = concordance_rate(a, b);
        CHECK(def.concordant + def.discordant + def.tied == def.total_pairs);
        CHECK(def.total_pairs == static_cast<std::int64_t>(n * (n - 1) / 2));
        CHECK(std::abs(def.rate - static_cast<double>(c.concordant) / c.total) < 1e-12);
        const auto drop = concordance_rate(a, b, TiePolicy::drop_pairs);
        const double expected = c.total == c.tied_any ? 0.0 : static_cast<double>(c.concordant) / (c.total - c.tied_any);
        CHECK(std::abs(drop.rate - expected) < 1e-12);
    }
}

TEST_CASE("rank statistics: monotone invariance and antisymmetry") {
    std::mt19937_64 rng(25);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 4 + rng() % 30;
        const auto a = test_support::uniform(rng, n), b = test_support::uniform(rng, n);
        std::vector<double> a2, b2, nb;
        for (const double v : a) a2.push_back(std::exp(3 * v));
        for (const double v : b) {
            b2.push_back(v * v * v + 2);
            nb.push_back(-v);
        }
        CHECK(std::abs(spearman(a, b).coefficient - spearman(a2, b2).coefficient) < 1e-12);
        CHECK(std::abs(kendall_tau(a, b).coefficient - kendall_tau(a2, b2).coefficient) < 1e-12);
        CHECK(concordance_rate(a, b).concordant == concordance_rate(a2, b2).concordant);
        CHECK(std::abs(pearson(a, nb).coefficient + pearson(a, b).coefficient) < 1e-12);
        CHECK(std::abs(spearman(a, nb).coefficient + spearman(a, b).coefficient) < 1e-12);
        CHECK(std::abs(kendall_tau(a, nb).coefficient + kendall_tau(a, b).coefficient) < 1e-12);
        CHECK(concordance_rate(a, nb).concordant == concordance_rate(a, b).discordant);
    }
}

TEST_CASE("percentile gap") {
    const auto r = percentile_gap(std::vector<double>{10, 20, 30}, std::vector<double>{0.3, 0.2, 0.1});
    REQUIRE(r.gaps.size() == 3);
    CHECK(r.gaps[0] == doctest::Approx(-200.0 / 3.0));
    CHECK(r.gaps[1] == 0.0);
    CHECK(r.gaps[2] == doctest::Approx(200.0 / 3.0));
    CHECK(r.mean_gap == 0.0);
    CHECK(std::abs(r.gap_sd - 66.67) < 0.01);

    std::mt19937_64 rng(26);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng() % 100;
        const auto p = percentile_gap(test_support::uniform(rng, n), test_support::uniform(rng, n));
        CHECK(p.mean_gap == 0.0);
        for (const double v : p.conf_percentiles) {
            CHECK(v >= 0.0);
            CHECK(v <= 100.0);
        }
    }
}

TEST_CASE("welch and pooled t tests") {
    const std::vector<double> a{1, 2, 3}, b{2, 3, 4};
    const auto w = welch_t(a, b);
    CHECK(std::abs(w.statistic - (-1.2247)) < 1e-4);
    CHECK(std::abs(*w.df - 4.0) < 1e-9);
    CHECK(std::abs(*w.cohen_d - (-1.0)) < 1e-9);
    CHECK(*w.effect == EffectLabel::large);
    const boost::math::students_t dist(4.0);
    CHECK(std::abs(w.p_value - 2.0 * boost::math::cdf(dist, w.statistic)) < 1e-10);

    const auto s = student_t(a, b);
    CHECK(std::abs(s.statistic - w.statistic) < 1e-12);  // equal n and variance
    CHECK(*s.df == 4.0);

    const auto back = welch_t(b, a);
    CHECK(back.statistic == -w.statistic);
    CHECK(back.p_value == doctest::Approx(w.p_value).epsilon(1e-15));

    const std::vector<double> x{0.3, 0.9, 0.1, 0.5}, shuffled{0.5, 0.1, 0.9, 0.3};
    const auto same = welch_t(x, shuffled);
    CHECK(same.statistic == 0.0);
    CHECK(same.p_value == 1.0);
    CHECK(*same.cohen_d == 0.0);
    CHECK(*same.effect == EffectLabel::negligible);

    CHECK(throws_code([] { welch_t(std::vector<double>{1}, std::vector<double>{1, 2}); }, ErrorCode::degenerate_input));
    CHECK(throws_code([] { welch_t(std::vector<double>{1, 1}, std::vector<double>{2, 2}); },
                      ErrorCode::degenerate_input));
}

TEST_CASE("effect label cutpoints") {
    CHECK(effect_label(0.19) == EffectLabel::negligible);
    CHECK(effect_label(0.2) == EffectLabel::small);
    CHECK(effect_label(-0.5) == EffectLabel::medium);
    CHECK(effect_label(0.8) == EffectLabel::large);
}

TEST_CASE("t distribution p values match critical-value tables") {
    struct Row {
        double df, t10, t05, t01;
    };
    const Row table[] = {
        {1, 6.314, 12.706, 63.657}, {2, 2.920, 4.303, 9.925},  {5, 2.015, 2.571, 4.032},
        {10, 1.812, 2.228, 3.169},  {20, 1.725, 2.086, 2.845}, {30, 1.697, 2.042, 2.750},
    };
    for (const auto& row : table) {
        CHECK(std::abs(student_t_two_sided_p(row.t10, row.df) - 0.10) < 1e-3);
        CHECK(std::abs(student_t_two_sided_p(row.t05, row.df) - 0.05) < 1e-3);
        CHECK(std::abs(student_t_two_sided_p(row.t01, row.df) - 0.01) < 1e-3);
        CHECK(std::abs(student_t_two_sided_p(-row.t05, row.df) - 0.05) < 1e-3);
    }
    CHECK(student_t_two_sided_p(0.0, 7.0) == 1.0);
    CHECK(std::abs(normal_two_sided_p(1.959963984540054) - 0.05) < 1e-12);
}

TEST_CASE("incomplete beta agrees with an independent implementation") {
    std::mt19937_64 rng(27);
    std::uniform_real_distribution<double> shape(0.05, 400.0), unit(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 2000; ++trial) {
        const double a = shape(rng), b = shape(rng), x = unit(rng);
        worst = std::max(worst, std::abs(regularized_incomplete_beta(a, b, x) - boost::math::ibeta(a, b, x)));
    }
    CHECK(worst <= 1e-10);
    CHECK(regularized_incomplete_beta(2, 3, 0.0) == 0.0);
    CHECK(regularized_incomplete_beta(2, 3, 1.0) == 1.0);
}

TEST_CASE("wilcoxon rank sum") {
    const auto r = wilcoxon_rank_sum(std::vector<double>{1, 2}, std::vector<double>{3, 4});
    CHECK(r.exact);
    CHECK(r.statistic == 3.0);
    CHECK(r.p_value == 1.0 / 3.0);

    const auto same = wilcoxon_rank_sum(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3});
    CHECK_FALSE(same.exact);  // ties force the approximation
    CHECK(std::abs(same.p_value - 1.0) < 1e-6);

    CHECK(throws_code([] { wilcoxon_rank_sum(std::vector<double>{}, std::vector<double>{1}); },
                      ErrorCode::empty_input));
}

TEST_CASE("wilcoxon exact branch matches subset enumeration") {
    std::mt19937_64 rng(28);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t N = 2 + rng() % 11;
        const std::size_t n1 = 1 + rng() % (N - 1);
        const auto v = distinct_sample(rng, N);
        const std::vector<double> a(v.begin(), v.begin() + n1), b(v.begin() + n1, v.end());
        const auto r = wilcoxon_rank_sum(a, b);
        REQUIRE(r.exact);
        CHECK(std::abs(r.p_value - brute_wilcoxon_p(n1, N, r.statistic)) < 1e-12);
    }
}

TEST_CASE("wilcoxon normal approximation tracks the exact p value") {
    // Samples of at least 3 values each; below that the discrete null is too
    // coarse for any continuous approximation to stay within 0.05.
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t N = 6 + rng() % 7;
        const std::size_t n1 = 3 + rng() % (N - 5);
        const auto v = distinct_sample(rng, N);
        const std::vector<double> a(v.begin(), v.begin() + n1), b(v.begin() + n1, v.end());
        const auto exact = wilcoxon_rank_sum(a, b, WilcoxonMethod::exact);
        const auto approx = wilcoxon_rank_sum(a, b, WilcoxonMethod::normal);
        CHECK(std::abs(exact.p_value - approx.p_value) <= 0.05);
    }
}

TEST_CASE("serialized results carry a stats_kind discriminator") {
    const std::vector<double> a{1, 2, 3, 4}, b{2, 1, 4, 3};
    CHECK(to_json(correlate(a, b))["stats_kind"] == "correlation");
    CHECK(to_json(concordance_rate(a, b))["stats_kind"] == "concordance");
    CHECK(to_json(percentile_gap(a, b))["stats_kind"] == "percentile_gap");
    CHECK(to_json(welch_t(a, b))["stats_kind"] == "welch_t");
    CHECK(to_json(wilcoxon_rank_sum(a, b))["stats_kind"] == "wilcoxon_rank_sum");
}
