#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "poisimex/poisimex.hpp"

using namespace poisimex;

TEST(KaplanMeier, NoCensoring) {
    const std::vector<double> t{1, 2, 3};
    const std::vector<int> e{1, 1, 1};
    const auto c = km_curve(t, e);
    ASSERT_EQ(c.steps(), 3u);
    EXPECT_NEAR(c.survival[0], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(c.survival[1], 1.0 / 3.0, 1e-15);
    EXPECT_EQ(c.survival[2], 0.0);
    ASSERT_TRUE(c.median);
    EXPECT_EQ(*c.median, 2.0);
}

TEST(KaplanMeier, AllCensored) {
    const std::vector<double> t{1, 2, 3};
    const std::vector<int> e{0, 0, 0};
    const auto c = km_curve(t, e);
    EXPECT_EQ(c.steps(), 0u);
    EXPECT_EQ(c.survival_at(10.0), 1.0);
    EXPECT_FALSE(c.median);
}

TEST(KaplanMeier, HandProductLimit) {
    const std::vector<double> t{1, 2, 3, 4};
    const std::vector<int> e{1, 0, 1, 1};
    const auto c = km_curve(t, e);
    EXPECT_NEAR(c.survival_at(1.0), 0.75, 1e-15);
    EXPECT_NEAR(c.survival_at(2.5), 0.75, 1e-15);
    EXPECT_NEAR(c.survival_at(3.0), 0.375, 1e-15);
    EXPECT_EQ(c.survival_at(4.0), 0.0);
    EXPECT_EQ(c.survival_at(0.5), 1.0);
    // Greenwood and log-minus-log band at t = 1
    EXPECT_NEAR(c.variance[0], 0.046875, 1e-12);
    EXPECT_NEAR(c.lower95[0], 0.1279469175951458, 1e-10);
    EXPECT_NEAR(c.upper95[0], 0.9605486422850784, 1e-10);
    EXPECT_NEAR(std::sqrt(c.variance[1]), 0.28641098, 1e-7);
}

// Reference: statsmodels SurvfuncRight on the same data.
TEST(KaplanMeier, TiesCountEventsFirst) {
    const std::vector<double> t{2, 3, 3, 5, 7, 8, 9};
    const std::vector<int> e{1, 1, 0, 1, 0, 1, 1};
    const auto c = km_curve(t, e);
    const std::vector<double> times{2, 3, 5, 8, 9};
    const std::vector<double> s{0.85714286, 0.71428571, 0.53571429, 0.26785714, 0.0};
    const std::vector<double> se{0.13226001, 0.17074694, 0.20078654, 0.21436542};
    ASSERT_EQ(c.time, times);
    for (std::size_t k = 0; k < s.size(); ++k) EXPECT_NEAR(c.survival[k], s[k], 1e-8);
    for (std::size_t k = 0; k < se.size(); ++k) EXPECT_NEAR(std::sqrt(c.variance[k]), se[k], 1e-8);
    EXPECT_EQ(c.n_risk, (std::vector<std::size_t>{7, 6, 4, 2, 1}));
}

TEST(KaplanMeier, CountsCensoredBeforeFirstEvent) {
    const auto c = km_curve(std::vector<double>{1, 2, 3}, std::vector<int>{0, 1, 1});
    EXPECT_EQ(c.n_subjects, 3u);
    EXPECT_EQ(c.n_risk.front(), 2u);
}

TEST(KaplanMeier, Invariants) {
    auto eng = RngStream(4).engine();
    std::exponential_distribution<double> ex(0.3);
    std::bernoulli_distribution ev(0.7);
    std::vector<double> t;
    std::vector<int> e;
    for (int i = 0; i < 300; ++i) {
        t.push_back(std::ceil(ex(eng) * 4.0) / 4.0);
        e.push_back(ev(eng) ? 1 : 0);
    }
    const auto c = km_curve(t, e);
    for (std::size_t k = 0; k < c.steps(); ++k) {
        EXPECT_LE(c.survival[k], 1.0);
        EXPECT_GE(c.survival[k], 0.0);
        EXPECT_LE(c.lower95[k], c.survival[k] + 1e-12);
        EXPECT_GE(c.upper95[k], c.survival[k] - 1e-12);
        if (k > 0) {
            EXPECT_LE(c.survival[k], c.survival[k - 1]);
            EXPECT_LE(c.n_risk[k], c.n_risk[k - 1]);
            EXPECT_GT(c.time[k], c.time[k - 1]);
        }
    }
}

TEST(KaplanMeier, InputErrors) {
    EXPECT_THROW(km_curve(std::vector<double>{}, std::vector<int>{}), PreconditionError);
    EXPECT_THROW(km_curve(std::vector<double>{1.0}, std::vector<int>{2}), PreconditionError);
    EXPECT_THROW(km_curve(std::vector<double>{-1.0}, std::vector<int>{1}), PreconditionError);
    EXPECT_THROW(km_curve(std::vector<double>{1.0, 2.0}, std::vector<int>{1}), ArityError);
}

TEST(KaplanMeier, CsvExport) {
    const auto csv = curve_csv(km_curve(std::vector<double>{1, 2}, std::vector<int>{1, 1}));
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "time,n_risk,n_event,survival,lower95,upper95");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

// Reference statistics from statsmodels survdiff.
TEST(Logrank, EightUnitExample) {
    const std::vector<SurvivalSample> g{{"a", {1, 3, 5, 7}, {1, 1, 0, 1}}, {"b", {2, 4, 6, 8}, {1, 1, 1, 1}}};
    const auto r = logrank_test(g);
    EXPECT_NEAR(r.statistic, 0.07844815512223964, 1e-10);
    EXPECT_NEAR(r.p_value, 0.7794115422103929, 1e-10);
    EXPECT_EQ(r.df, 1u);
    EXPECT_DOUBLE_EQ(r.observed[0] + r.observed[1], 7.0);
    EXPECT_NEAR(r.expected[0] + r.expected[1], 7.0, 1e-12);
}

TEST(Logrank, HandTally) {
    // Direct O - E and hypergeometric variance for the eight-unit example.
    const std::vector<double> ta{1, 3, 5, 7}, tb{2, 4, 6, 8};
    const std::vector<int> ea{1, 1, 0, 1}, eb{1, 1, 1, 1};
    double oe = 0.0, v = 0.0;
    for (double t = 1; t <= 8; t += 1) {
        double na = 0, nb = 0, da = 0, db = 0;
        for (std::size_t i = 0; i < 4; ++i) {
            if (ta[i] >= t) ++na;
            if (tb[i] >= t) ++nb;
            if (ta[i] == t) da += ea[i];
            if (tb[i] == t) db += eb[i];
        }
        const double n = na + nb, d = da + db;
        if (d == 0) continue;
        oe += da - d * na / n;
        if (n > 1) v += d * (na / n) * (nb / n) * (n - d) / (n - 1);
    }
    const std::vector<SurvivalSample> g{{"a", ta, ea}, {"b", tb, eb}};
    EXPECT_NEAR(logrank_test(g).statistic, oe * oe / v, 1e-12);
}

TEST(Logrank, ThreeGroups) {
    const std::vector<SurvivalSample> g{{"a", {1, 3, 5, 7}, {1, 1, 0, 1}},
                                        {"b", {2, 4, 6, 8}, {1, 1, 1, 1}},
                                        {"c", {2.5, 3, 9, 10}, {0, 1, 1, 0}}};
    const auto r = logrank_test(g);
    EXPECT_NEAR(r.statistic, 2.805386931653344, 1e-9);
    EXPECT_NEAR(r.p_value, 0.24593365714437498, 1e-9);
    EXPECT_EQ(r.df, 2u);
}

TEST(Logrank, IdenticalGroups) {
    const SurvivalSample a{"a", {1, 2, 3, 5}, {1, 0, 1, 1}};
    SurvivalSample b = a;
    b.label = "b";
    const auto r = logrank_test(std::vector<SurvivalSample>{a, b});
    EXPECT_EQ(r.statistic, 0.0);
    EXPECT_EQ(r.p_value, 1.0);
}

TEST(Logrank, LabelSwapSymmetric) {
    const SurvivalSample a{"a", {1, 3, 5, 7, 9}, {1, 1, 0, 1, 1}};
    const SurvivalSample b{"b", {2, 2, 6, 8}, {1, 0, 1, 1}};
    const SurvivalSample c{"c", {4, 5, 11}, {1, 1, 0}};
    const double s1 = logrank_test(std::vector<SurvivalSample>{a, b, c}).statistic;
    const double s2 = logrank_test(std::vector<SurvivalSample>{c, a, b}).statistic;
    const double s3 = logrank_test(std::vector<SurvivalSample>{b, c, a}).statistic;
    EXPECT_NEAR(s1, s2, 1e-10);
    EXPECT_NEAR(s1, s3, 1e-10);
}

TEST(Logrank, GroupWithoutEventsStillDefined) {
    const std::vector<SurvivalSample> g{{"a", {1, 2, 3}, {1, 1, 1}}, {"b", {4, 5, 6}, {0, 0, 0}}};
    const auto r = logrank_test(g);
    EXPECT_TRUE(std::isfinite(r.statistic));
    EXPECT_GE(r.p_value, 0.0);
    EXPECT_LE(r.p_value, 1.0);
}

TEST(Logrank, Errors) {
    const std::vector<SurvivalSample> none{{"a", {1, 2}, {0, 0}}, {"b", {3}, {0}}};
    EXPECT_THROW(logrank_test(none), PreconditionError);
    const std::vector<SurvivalSample> one{{"a", {1, 2}, {1, 1}}};
    EXPECT_THROW(logrank_test(one), PreconditionError);
}

TEST(Logrank, NullCalibration) {
    // Under a common survival law p-values should be roughly uniform.
    std::size_t rejections = 0;
    const int reps = 400;
    for (int r = 0; r < reps; ++r) {
        auto eng = RngStream(5, "null", static_cast<std::uint64_t>(r)).engine();
        std::exponential_distribution<double> ex(1.0);
        std::vector<SurvivalSample> g{{"a", {}, {}}, {"b", {}, {}}};
        for (auto& s : g)
            for (int i = 0; i < 40; ++i) {
                s.times.push_back(ex(eng));
                s.events.push_back(ex(eng) < 2.0 ? 1 : 0);
            }
        if (logrank_test(g).p_value < 0.05) ++rejections;
    }
    EXPECT_NEAR(static_cast<double>(rejections) / reps, 0.05, 0.035);
}

TEST(ChiSquare, KnownQuantiles) {
    EXPECT_NEAR(chi_square_sf(3.841458820694124, 1), 0.05, 1e-12);
    EXPECT_NEAR(chi_square_sf(5.991464547107979, 2), 0.05, 1e-12);
    EXPECT_EQ(chi_square_sf(0.0, 3), 1.0);
}
