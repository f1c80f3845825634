#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "poisimex/poisimex.hpp"

using namespace poisimex;

namespace {

Dataset counts_dataset(const std::vector<long>& w, const std::vector<double>& a) {
    Dataset ds;
    for (std::size_t i = 0; i < w.size(); ++i) ds.push_back(ObservedUnit{static_cast<double>(i), w[i], a[i]});
    return ds;
}

std::vector<ExtrapolantPoint> sample_curve(const std::vector<double>& lambdas, double (*f)(double)) {
    std::vector<ExtrapolantPoint> pts;
    for (double l : lambdas) pts.push_back({l, f(l)});
    return pts;
}

const std::vector<double> kGrid{0.0, 0.5, 1.0, 1.5, 2.0};

// Limit of the per-lambda naive slope for Gamma(1,2) truth, unit area, beta_x = 1.
double limit_curve(double l) { return 4.0 / (4.0 + (1.0 + l) * 2.0); }

Dataset large_gamma_dataset(std::size_t n, std::uint64_t seed) {
    ScenarioSpec s;
    s.x_law = GammaLaw{1.0, 2.0};
    s.z_law.reset();
    s.truth = RegressionTruth{2.0, 1.0, {}, 5.0};
    s.n = n;
    return generate_dataset(s, RngStream(seed));
}

}  // namespace

TEST(EstimateSigma, Examples) {
    EXPECT_EQ(estimate_sigma(counts_dataset({0, 0, 0}, {1, 2, 3})), (std::vector<double>{0, 0, 0}));
    EXPECT_EQ(estimate_sigma(counts_dataset({2, 4, 6}, {1, 1, 1})), (std::vector<double>{4, 4, 4}));
    EXPECT_EQ(estimate_sigma(counts_dataset({2, 8}, {1, 2})), (std::vector<double>{3, 1.5}));
    EXPECT_THROW(estimate_sigma(Dataset{}), PreconditionError);
}

// Per-unit variance estimates converge to E[X]/A_i.
TEST(EstimateSigma, StronglyConsistent) {
    auto eng = RngStream(3).engine();
    std::gamma_distribution<double> gx(1.0, 2.0);
    Dataset ds;
    for (int i = 0; i < 100'000; ++i) {
        const double a = i % 2 == 0 ? 1.0 : 2.0;
        std::poisson_distribution<long> pw(gx(eng) * a);
        ds.push_back(ObservedUnit{0.0, pw(eng), a});
    }
    const auto s = estimate_sigma(ds);
    double worst = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) worst = std::max(worst, std::abs(s[i] - 2.0 / ds.a()[i]));
    EXPECT_LT(worst, 0.05);
}

TEST(PseudoCovariate, ZeroLambdaIsObservedDensity) {
    const auto ds = counts_dataset({3, 5, 0, 9}, {1.0, 0.5, 2.0, 0.2827});
    const auto sigma2 = estimate_sigma(ds);
    EXPECT_EQ(generate_pseudo_covariate(ds, 0.0, sigma2, RngStream(1)), ds.surrogate_densities());
}

TEST(PseudoCovariate, ForcedNoiseArithmetic) {
    const auto ds = counts_dataset({3, 5, 0}, {1.0, 0.5, 2.0});
    const std::vector<double> sigma2(3, 4.0), ones(3, 1.0);
    const auto v = generate_pseudo_covariate(ds, 1.0, sigma2, ones);
    const auto base = ds.surrogate_densities();
    for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(v[i], base[i] + 2.0);
}

TEST(PseudoCovariate, NegativeLambdaRejected) {
    const auto ds = counts_dataset({1, 2}, {1, 1});
    EXPECT_THROW(generate_pseudo_covariate(ds, -0.5, std::vector<double>{1, 1}, RngStream(1)), ParameterError);
    EXPECT_THROW(generate_pseudo_covariate(ds, 1.0, std::vector<double>{1}, RngStream(1)), ArityError);
}

TEST(PseudoCovariate, NoiseVarianceScalesWithLambda) {
    const auto ds = counts_dataset(std::vector<long>(200'000, 4), std::vector<double>(200'000, 1.0));
    const std::vector<double> sigma2(ds.size(), 4.0);
    const auto v = generate_pseudo_covariate(ds, 1.5, sigma2, RngStream(2));
    double s = 0.0;
    for (double x : v) s += (x - 4.0) * (x - 4.0);
    EXPECT_NEAR(s / static_cast<double>(v.size()), 6.0, 0.06);
}

TEST(Extrapolant, ConstantValues) {
    std::vector<ExtrapolantPoint> pts;
    for (double l : kGrid) pts.push_back({l, 7.0});
    for (auto kind : {ExtrapolantKind::Linear, ExtrapolantKind::Quadratic}) {
        const auto c = fit_extrapolant(pts, kind);
        EXPECT_NEAR(c.c[0], 7.0, 1e-12);
        for (std::size_t k = 1; k < c.c.size(); ++k) EXPECT_NEAR(c.c[k], 0.0, 1e-12);
        EXPECT_NEAR(extrapolate(c, -1.0), 7.0, 1e-12);
        EXPECT_NEAR(extrapolate(c, 3.3), 7.0, 1e-12);
    }
}

TEST(Extrapolant, ExactQuadratic) {
    const auto c = fit_extrapolant(sample_curve(kGrid, [](double l) { return 1 + 2 * l + 3 * l * l; }), ExtrapolantKind::Quadratic);
    EXPECT_NEAR(c.c[0], 1.0, 1e-10);
    EXPECT_NEAR(c.c[1], 2.0, 1e-10);
    EXPECT_NEAR(c.c[2], 3.0, 1e-10);
}

// Reference values: numpy.polyfit of the limit curve on the grid, evaluated at -1.
TEST(Extrapolant, LimitCurve) {
    const auto pts = sample_curve(kGrid, limit_curve);
    EXPECT_NEAR(extrapolate(fit_extrapolant(pts, ExtrapolantKind::Quadratic)), 0.8980952380952373, 1e-9);
    EXPECT_NEAR(extrapolate(fit_extrapolant(pts, ExtrapolantKind::Linear)), 0.7806349206349206, 1e-9);
    EXPECT_NEAR(extrapolate(fit_extrapolant(pts, ExtrapolantKind::Rational)), 1.0, 1e-6);
}

TEST(Extrapolant, EvaluationExamples) {
    EXPECT_DOUBLE_EQ(extrapolate(Curve{ExtrapolantKind::Quadratic, {1, 2, 3}}), 2.0);
    EXPECT_DOUBLE_EQ(extrapolate(Curve{ExtrapolantKind::Linear, {5, 1}}), 4.0);
    EXPECT_DOUBLE_EQ(extrapolate(Curve{ExtrapolantKind::Rational, {0, 4, 2}}), 4.0);
}

TEST(Extrapolant, PoleAtTarget) {
    EXPECT_THROW(extrapolate(Curve{ExtrapolantKind::Rational, {0, 4, 1}}), SingularityError);
}

TEST(Extrapolant, ArityChecked) {
    EXPECT_THROW(fit_extrapolant(sample_curve({0.0, 1.0}, limit_curve), ExtrapolantKind::Quadratic), ArityError);
    EXPECT_THROW(fit_extrapolant(sample_curve({1.0}, limit_curve), ExtrapolantKind::Linear), ArityError);
    EXPECT_THROW(extrapolate(Curve{ExtrapolantKind::Quadratic, {1, 2}}), ArityError);
}

TEST(Extrapolant, LinearDataRationalFitFallsBack) {
    const auto pts = sample_curve(kGrid, [](double l) { return 3.0 - 0.5 * l; });
    try {
        const auto c = fit_extrapolant(pts, ExtrapolantKind::Rational);
        EXPECT_NEAR(extrapolate(c), 3.5, 1e-3);
    } catch (const ExtrapolationError& e) {
        EXPECT_EQ(e.fallback().kind, ExtrapolantKind::Linear);
        EXPECT_NEAR(extrapolate(e.fallback()), 3.5, 1e-10);
    }
}

TEST(SimexConfig, Validation) {
    SimexConfig c;
    EXPECT_NO_THROW(validate(c));
    c.B = 1;
    EXPECT_THROW(validate(c), ParameterError);
    c = SimexConfig{};
    c.lambda_grid = {1.0, 0.5};
    EXPECT_THROW(validate(c), ParameterError);
    c.lambda_grid = {0.0, 1.0};
    EXPECT_THROW(validate(c), ParameterError);
    c.lambda_grid = {1.0};
    EXPECT_THROW(validate(c), ArityError);
    c.extrapolant = ExtrapolantKind::Linear;
    EXPECT_NO_THROW(validate(c));
}

TEST(RunSimex, AnchorEqualsNaiveFit) {
    const auto ds = generate_dataset(find_scenario("table1_gamma_1_2_n100"), RngStream(4));
    SimexConfig cfg;
    cfg.B = 20;
    const auto r = run_simex(ds, Fitter::LinearModel, cfg);
    const auto naive = fit_ols(ds, CovariateSource::SurrogateDensity);
    EXPECT_EQ(r.lambdas.front(), 0.0);
    EXPECT_EQ(r.per_lambda_mean.front(), naive.parameters());
    for (const auto& row : r.per_lambda_var_sampling)
        for (double v : row) EXPECT_GE(v, 0.0);
    for (double e : r.estimate) EXPECT_TRUE(std::isfinite(e));
    EXPECT_EQ(r.parameter_names, (std::vector<std::string>{"beta0", "beta_x", "beta_z", "sigma"}));
}

TEST(RunSimex, ZeroPseudoNoiseReturnsNaive) {
    const auto ds = generate_dataset(find_scenario("table1_gamma_1_2_n100"), RngStream(5));
    SimexConfig cfg;
    cfg.B = 5;
    cfg.variance_method = VarianceMethod::None;
    cfg.measurement_variance = std::vector<double>(ds.size(), 0.0);
    const auto r = run_simex(ds, Fitter::LinearModel, cfg);
    const auto naive = r.naive.parameters();
    for (const auto& row : r.per_lambda_mean)
        for (std::size_t j = 0; j < naive.size(); ++j) EXPECT_DOUBLE_EQ(row[j], naive[j]);
    for (std::size_t j = 0; j < naive.size(); ++j) EXPECT_NEAR(r.estimate[j], naive[j], 1e-10 * (1 + std::abs(naive[j])));
}

TEST(RunSimex, DeterministicAndThreadInvariant) {
    const auto ds = generate_dataset(find_scenario("table5_aft_n100"), RngStream(6));
    SimexConfig cfg;
    cfg.B = 30;
    cfg.variance_method = VarianceMethod::None;
    const auto a = run_simex(ds, Fitter::AftLognormal, cfg);
    const auto b = run_simex(ds, Fitter::AftLognormal, cfg);
    cfg.threads = 4;
    const auto c = run_simex(ds, Fitter::AftLognormal, cfg);
    EXPECT_EQ(a.estimate, b.estimate);
    EXPECT_EQ(a.estimate, c.estimate);
    EXPECT_EQ(a.per_lambda_mean, c.per_lambda_mean);
    EXPECT_EQ(a.per_lambda_var_sampling, c.per_lambda_var_sampling);
    cfg.seed = 2;
    EXPECT_NE(run_simex(ds, Fitter::AftLognormal, cfg).estimate, a.estimate);
}

TEST(RunSimex, PerLambdaSlopeFollowsLimitCurve) {
    const auto ds = large_gamma_dataset(20'000, 7);
    SimexConfig cfg;
    cfg.B = 20;
    cfg.variance_method = VarianceMethod::None;
    const auto r = run_simex(ds, Fitter::LinearModel, cfg);
    for (std::size_t k = 0; k < r.lambdas.size(); ++k) {
        EXPECT_NEAR(r.per_lambda_mean[k][1], limit_curve(r.lambdas[k]), 0.03) << r.lambdas[k];
        if (k > 0) {
            EXPECT_LT(r.per_lambda_mean[k][1], r.per_lambda_mean[k - 1][1]);
        }
    }
}

TEST(RunSimex, AftOnPoissonDataCorrectsTowardTruth) {
    auto spec = find_scenario("table5_aft_n100");
    spec.n = 5'000;
    const auto ds = generate_dataset(spec, RngStream(8));
    SimexConfig cfg;
    cfg.B = 20;
    cfg.variance_method = VarianceMethod::None;
    const auto r = run_simex(ds, Fitter::AftLognormal, cfg);
    EXPECT_GT(r.estimate[1], r.naive.coefficients[1] + 0.1);
    EXPECT_NEAR(r.estimate[1], 0.898, 0.08);
}

// |error| of the rational-extrapolant estimate, averaged over replicates,
// shrinks as N grows.
TEST(RunSimex, ConsistencyAcrossSampleSizes) {
    SimexConfig cfg;
    cfg.B = 20;
    cfg.extrapolant = ExtrapolantKind::Rational;
    cfg.variance_method = VarianceMethod::None;
    std::vector<double> err;
    for (std::size_t n : {100u, 1000u, 10000u}) {
        double acc = 0.0;
        const int reps = 50;
        for (int r = 0; r < reps; ++r) {
            const auto ds = large_gamma_dataset(n, 1000 + static_cast<std::uint64_t>(r));
            acc += std::abs(run_simex(ds, Fitter::LinearModel, cfg, RngStream(r, "consistency", n)).estimate[1] - 1.0);
        }
        err.push_back(acc / reps);
    }
    EXPECT_GT(err[0], err[1]);
    EXPECT_GT(err[1], err[2]);
    EXPECT_LT(err[2], 0.05);
}

namespace {

SimexResult synthetic_result(double (*model)(double), double (*sampling)(double)) {
    SimexResult r;
    r.parameter_names = {"beta_x"};
    for (double l : kGrid) {
        r.lambdas.push_back(l);
        r.per_lambda_var_model.push_back({model(l)});
        r.per_lambda_var_sampling.push_back({sampling(l)});
    }
    return r;
}

}  // namespace

TEST(DifferenceVariance, NoiseFreeConstant) {
    const auto r = synthetic_result([](double) { return 0.3; }, [](double) { return 0.0; });
    EXPECT_NEAR(simex_variance_difference(r, SimexConfig{})[0], 0.3, 1e-12);
}

TEST(DifferenceVariance, ExactDifference) {
    const auto r = synthetic_result([](double l) { return 1.0 + l / 4; }, [](double l) { return l / 4; });
    EXPECT_NEAR(simex_variance_difference(r, SimexConfig{})[0], 1.0, 1e-12);
}

TEST(DifferenceVariance, TooFewPositiveDifferences) {
    const auto r = synthetic_result([](double l) { return 1.0 - l; }, [](double) { return 0.0; });
    try {
        simex_variance_difference(r, SimexConfig{});
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("bootstrap"), std::string::npos);
    }
    SimexConfig small;
    small.B = 1;
    EXPECT_THROW(simex_variance_difference(r, small), ParameterError);
}

TEST(DifferenceVariance, NegativeExtrapolationFloored) {
    const auto r = synthetic_result([](double l) { return 0.1 + l; }, [](double) { return 0.0; });
    std::vector<std::string> warnings;
    EXPECT_EQ(simex_variance_difference(r, SimexConfig{}, &warnings)[0], 0.0);
    EXPECT_FALSE(warnings.empty());
}

TEST(DifferenceVariance, FromRunIsPositive) {
    const auto ds = generate_dataset(find_scenario("table2_gamma_1_10_n200"), RngStream(9));
    SimexConfig cfg;
    cfg.B = 50;
    const auto r = run_simex(ds, Fitter::LinearModel, cfg);
    ASSERT_EQ(r.variance.size(), 4u);
    EXPECT_GT(r.variance[1], 0.0);
    const auto naive = fit_ols(ds, CovariateSource::SurrogateDensity);
    EXPECT_GT(r.variance[1], 0.5 * naive.coefficient_variances[1]);
}

TEST(Bootstrap, IdenticalUnitsHaveZeroVariance) {
    Dataset ds;
    for (int i = 0; i < 30; ++i) ds.push_back(ObservedUnit{1.5, 4, 1.0});
    const auto v = bootstrap_variance(ds, 50, RngStream(1), [](const Dataset& d, const RngStream&) {
        double m = 0.0;
        for (double y : d.y()) m += y;
        return std::vector<double>{m / static_cast<double>(d.size())};
    });
    EXPECT_EQ(v[0], 0.0);
}

TEST(Bootstrap, MeanVarianceMatchesTheory) {
    Dataset ds;
    const auto y = sample_distribution(NormalLaw{0.0, 2.0}, 400, RngStream(2));
    for (double v : y) ds.push_back(ObservedUnit{v, 0, 1.0});
    const auto var = bootstrap_variance(ds, 2000, RngStream(3), [](const Dataset& d, const RngStream&) {
        double m = 0.0;
        for (double v : d.y()) m += v;
        return std::vector<double>{m / static_cast<double>(d.size())};
    });
    EXPECT_NEAR(var[0], 4.0 / 400.0, 0.0015);
}

TEST(Bootstrap, SimexBootstrapDeterministic) {
    const auto ds = generate_dataset(find_scenario("table1_gamma_1_2_n100"), RngStream(10));
    SimexConfig cfg;
    cfg.B = 10;
    cfg.bootstrap_reps = 20;
    const auto a = simex_variance_bootstrap(ds, Fitter::LinearModel, cfg);
    const auto b = simex_variance_bootstrap(ds, Fitter::LinearModel, cfg);
    cfg.threads = 3;
    const auto c = simex_variance_bootstrap(ds, Fitter::LinearModel, cfg);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
    for (double v : a) EXPECT_GT(v, 0.0);
}
