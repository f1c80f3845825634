#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "poisimex/poisimex.hpp"

using namespace poisimex;

namespace {

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double var_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST(Rng, SameSeedSameSequence) {
    auto a = RngStream(42, "scenario", 3).engine();
    auto b = RngStream(42, "scenario", 3).engine();
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(Rng, StreamsDifferByKey) {
    const RngStream base(42, "scenario", 0);
    EXPECT_NE(base.key(), RngStream(43, "scenario", 0).key());
    EXPECT_NE(base.key(), RngStream(42, "scenario", 1).key());
    EXPECT_NE(base.child("a").key(), base.child("b").key());
    EXPECT_NE(base.child("a", 0).key(), base.child("a", 1).key());
    EXPECT_EQ(base.child("a", 5).key(), RngStream(42, "scenario", 0).child("a", 5).key());
}

TEST(Rng, ChildStreamsIndependentOfDrawOrder) {
    const RngStream base(7);
    std::vector<double> forward, backward(10);
    for (std::size_t i = 0; i < 10; ++i) forward.push_back(sample_distribution(NormalLaw{}, 1, base.child("u", i))[0]);
    for (std::size_t i = 10; i-- > 0;) backward[i] = sample_distribution(NormalLaw{}, 1, base.child("u", i))[0];
    EXPECT_EQ(forward, backward);
}

TEST(Distributions, GammaMean) {
    const auto v = sample_distribution(GammaLaw{1.0, 2.0}, 1'000'000, RngStream(1));
    EXPECT_NEAR(mean_of(v), 2.0, 0.02);
}

TEST(Distributions, PoissonZeroMeanIsDegenerate) {
    const auto v = sample_distribution(PoissonLaw{0.0}, 5, RngStream(1));
    EXPECT_EQ(v, std::vector<double>(5, 0.0));
}

TEST(Distributions, NegBinomialMeanMatchesCovariate) {
    const double x = 2.0, r = 5.0;
    const auto v = sample_distribution(NegBinomialLaw{r, r / (r + x)}, 1'000'000, RngStream(2));
    EXPECT_NEAR(mean_of(v), x, 0.02);
    EXPECT_NEAR(var_of(v), x + x * x / r, 0.05);
}

TEST(Distributions, AnalyticMoments) {
    EXPECT_DOUBLE_EQ(law_mean(GammaLaw{2.0, 3.0}), 6.0);
    EXPECT_DOUBLE_EQ(law_variance(GammaLaw{2.0, 3.0}), 18.0);
    EXPECT_DOUBLE_EQ(law_mean(UniformLaw{0.5, 9.0}), 4.75);
    EXPECT_DOUBLE_EQ(law_mean(BinomialLaw{40, 0.25}), 10.0);
    EXPECT_DOUBLE_EQ(law_variance(PointMassLaw{3.0}), 0.0);
}

TEST(Distributions, InvalidParametersRejected) {
    EXPECT_THROW(sample_distribution(GammaLaw{0.0, 1.0}, 1, RngStream(1)), ParameterError);
    EXPECT_THROW(sample_distribution(GammaLaw{1.0, -1.0}, 1, RngStream(1)), ParameterError);
    EXPECT_THROW(sample_distribution(PoissonLaw{-1.0}, 1, RngStream(1)), ParameterError);
    EXPECT_THROW(sample_distribution(BinomialLaw{10, 1.5}, 1, RngStream(1)), ParameterError);
    EXPECT_THROW(sample_distribution(UniformLaw{2.0, 1.0}, 1, RngStream(1)), ParameterError);
}

TEST(Distributions, SamplesReproducible) {
    EXPECT_EQ(sample_distribution(GammaLaw{2.0, 1.0}, 50, RngStream(9)), sample_distribution(GammaLaw{2.0, 1.0}, 50, RngStream(9)));
}

TEST(SurrogateDensity, Examples) {
    EXPECT_DOUBLE_EQ(surrogate_density(ObservedUnit{0.0, 4, 2.0}), 2.0);
    EXPECT_DOUBLE_EQ(surrogate_density(ObservedUnit{0.0, 0, 1.0}), 0.0);
    const double core = std::numbers::pi * 0.3 * 0.3;
    EXPECT_DOUBLE_EQ(surrogate_density(ObservedUnit{0.0, 7, core}), 7.0 / core);
    EXPECT_NEAR(surrogate_density(ObservedUnit{0.0, 7, core}), 24.758, 1e-3);
}

TEST(ObservedUnit, InvariantsEnforced) {
    EXPECT_THROW(validate(ObservedUnit{0.0, -1, 1.0}), ValidationError);
    EXPECT_THROW(validate(ObservedUnit{0.0, 1, 0.0}), ValidationError);
    ObservedUnit u{0.0, 1, 1.0};
    u.event = 2;
    EXPECT_THROW(validate(u), ValidationError);
}

TEST(Dataset, RejectsMixedZDimension) {
    Dataset ds({"z"});
    ObservedUnit u{1.0, 1, 1.0, {0.5}};
    ds.push_back(u);
    u.z.clear();
    EXPECT_THROW(ds.push_back(u), Error);
}

TEST(GenerateDataset, ScenarioOneShape) {
    auto spec = find_scenario("table1_gamma_1_2_n50");
    const auto ds = generate_dataset(spec, RngStream(1));
    ASSERT_EQ(ds.size(), 50u);
    EXPECT_EQ(ds.z_dim(), 1u);
    EXPECT_TRUE(ds.has_truth());
    for (int e : ds.event()) EXPECT_EQ(e, 1);
    for (long w : ds.w()) EXPECT_GE(w, 0);
}

TEST(GenerateDataset, NoiselessPointMass) {
    ScenarioSpec s;
    s.x_law = PointMassLaw{3.5};
    s.truth = RegressionTruth{0.0, 1.0, {0.0}, 0.0};
    s.n = 20;
    const auto ds = generate_dataset(s, RngStream(5));
    for (double y : ds.y()) EXPECT_DOUBLE_EQ(y, 3.5);
}

TEST(GenerateDataset, AftCensoringFraction) {
    auto spec = find_scenario("table5_aft_n100");
    spec.n = 10'000;
    const auto ds = generate_dataset(spec, RngStream(3));
    const double censored = 1.0 - static_cast<double>(ds.event_count()) / static_cast<double>(ds.size());
    EXPECT_NEAR(censored, 0.20, 0.02);
}

TEST(GenerateDataset, ExponentialCensoringCalibrated) {
    auto spec = find_scenario("table5_aft_n100");
    spec.censoring_mode = CensoringMode::Exponential;
    spec.n = 20'000;
    const auto ds = generate_dataset(spec, RngStream(4));
    const double censored = 1.0 - static_cast<double>(ds.event_count()) / static_cast<double>(ds.size());
    EXPECT_NEAR(censored, 0.20, 0.02);
}

TEST(GenerateDataset, Deterministic) {
    const auto spec = find_scenario("table3_gamma_2_z_n100");
    const auto a = generate_dataset(spec, RngStream(11, "x", 2));
    const auto b = generate_dataset(spec, RngStream(11, "x", 2));
    EXPECT_EQ(a.y(), b.y());
    EXPECT_EQ(a.w(), b.w());
    EXPECT_EQ(a.x_true(), b.x_true());
}

TEST(GenerateDataset, ValidationErrors) {
    ScenarioSpec s;
    s.n = 0;
    EXPECT_THROW(generate_dataset(s, RngStream(1)), ParameterError);
    s = ScenarioSpec{};
    s.truth.beta_z = {};
    EXPECT_THROW(generate_dataset(s, RngStream(1)), ParameterError);
    s = ScenarioSpec{};
    s.censoring_rate = 0.2;
    EXPECT_THROW(generate_dataset(s, RngStream(1)), ParameterError);
    s = ScenarioSpec{};
    s.x_law = UniformLaw{0.0, 1.0};
    s.x_scale_from_z = true;
    EXPECT_THROW(generate_dataset(s, RngStream(1)), ParameterError);
}

// Conditional moments of W given a fixed density: Poisson mean and variance
// both equal X*A.
TEST(Surrogate, PoissonConditionalMoments) {
    ScenarioSpec s;
    s.x_law = PointMassLaw{2.5};
    s.z_law.reset();
    s.truth.beta_z = {};
    s.area = 2.0;
    s.n = 200'000;
    const auto ds = generate_dataset(s, RngStream(6));
    std::vector<double> w(ds.w().begin(), ds.w().end());
    const double n = static_cast<double>(w.size());
    const double mu = 5.0;
    EXPECT_NEAR(mean_of(w), mu, 3.0 * std::sqrt(mu / n));
    EXPECT_NEAR(var_of(w), mu, 3.0 * std::sqrt(2.0 * mu * mu / n + mu / n));
}

TEST(Surrogate, BinomialMeanAndSupport) {
    ScenarioSpec s;
    s.x_law = GammaLaw{1.0, 10.0};
    s.surrogate = SurrogateLaw{SurrogateKind::Binomial, 40};
    s.n = 100'000;
    const auto ds = generate_dataset(s, RngStream(8));
    double resid = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_LE(ds.x_true()[i], 40.0);
        EXPECT_LE(ds.w()[i], 40);
        resid += static_cast<double>(ds.w()[i]) - ds.x_true()[i];
    }
    EXPECT_NEAR(resid / static_cast<double>(ds.size()), 0.0, 0.03);
}

// Var(X)/Var(W) = b/(1+b) for X ~ Gamma(a,b) and Poisson W with unit area.
TEST(Surrogate, VarianceRatioLaw) {
    struct Case {
        double shape, scale, ratio;
    };
    for (const auto& c : {Case{0.1, 9.0, 0.9}, Case{2.0 / 3.0, 3.0, 0.75}, Case{2.0, 1.0, 0.5}}) {
        ScenarioSpec s;
        s.x_law = GammaLaw{c.shape, c.scale};
        s.z_law.reset();
        s.truth.beta_z = {};
        s.n = 1'000'000;
        const auto ds = generate_dataset(s, RngStream(10));
        std::vector<double> w(ds.w().begin(), ds.w().end());
        EXPECT_NEAR(var_of(ds.x_true()) / var_of(w), c.ratio, 0.01) << c.shape << "," << c.scale;
    }
}

TEST(Catalog, UnknownIdListsCatalog) {
    try {
        find_scenario("no_such_scenario");
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("table1_gamma_1_2_n50"), std::string::npos);
    }
}

TEST(Catalog, AliasesResolve) {
    EXPECT_EQ(find_scenario("table1").id, "table1_gamma_1_2_n100");
    EXPECT_EQ(find_scenario("table5").response, ResponseKind::LognormalAft);
    for (const auto& [id, spec] : scenario_catalog()) EXPECT_NO_THROW(validate(spec)) << id;
}

TEST(Config, ScenarioJsonRoundTrip) {
    for (const auto& [id, spec] : scenario_catalog()) {
        const json j = to_json_value(spec);
        EXPECT_EQ(to_json_value(scenario_from_json(j)), j) << id;
    }
}
