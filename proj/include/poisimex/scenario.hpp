#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "poisimex/dataset.hpp"
#include "poisimex/distributions.hpp"
#include "poisimex/errors.hpp"
#include "poisimex/rng.hpp"

namespace poisimex {

/// True regression coefficients and residual scale.
struct RegressionTruth {
    double beta0 = 0.0;
    double beta_x = 1.0;
    std::vector<double> beta_z;
    double sigma_eps = 1.0;
};

enum class SurrogateKind { Poisson, Binomial, NegBinomial };

/// Law of W given the true density X and area A. All three have mean X*A.
struct SurrogateLaw {
    SurrogateKind kind = SurrogateKind::Poisson;
    long trials = 40;      // Binomial(m, XA/m)
    double size = 5.0;     // NegBinomial(r, r/(r + XA))
};

enum class ResponseKind { Linear, LognormalAft };

enum class CensoringMode {
    /// Exponential censoring times, rate calibrated to hit the target fraction.
    Exponential,
    /// Each unit independently flagged censored at its own event time.
    RandomFlag
};

/// Full recipe for one simulation setting.
struct ScenarioSpec {
    std::string id = "custom";
    Law x_law = GammaLaw{1.0, 2.0};
    /// Scenario-3 mode: X_i ~ Gamma(shape, scale = Z_i). Requires a gamma x_law and a z_law.
    bool x_scale_from_z = false;
    std::optional<Law> z_law = UniformLaw{0.5, 9.0};
    SurrogateLaw surrogate;
    RegressionTruth truth{2.0, 1.0, {0.5}, 5.0};
    ResponseKind response = ResponseKind::Linear;
    double censoring_rate = 0.0;
    CensoringMode censoring_mode = CensoringMode::Exponential;
    std::size_t n = 100;
    double area = 1.0;
    /// Exponential censoring rate; filled by prepare_scenario() when empty.
    std::optional<double> censoring_time_rate;

    std::size_t z_dim() const noexcept { return z_law ? 1u : 0u; }
};

inline void validate(const ScenarioSpec& s) {
    validate(s.x_law);
    if (s.z_law) validate(*s.z_law);
    if (s.n == 0) throw ParameterError("scenario: sample size must be positive");
    if (!(s.area > 0.0)) throw ParameterError("scenario: area must be positive");
    // sigma_eps = 0 is accepted so noiseless test datasets can be generated
    if (!(s.truth.sigma_eps >= 0.0)) throw ParameterError("scenario: sigma_eps must be non-negative");
    if (s.truth.beta_z.size() != s.z_dim())
        throw ParameterError("scenario: beta_z length must match the number of Z covariates");
    if (!(s.censoring_rate >= 0.0 && s.censoring_rate < 1.0))
        throw ParameterError("scenario: censoring rate must lie in [0,1)");
    if (s.response == ResponseKind::Linear && s.censoring_rate != 0.0)
        throw ParameterError("scenario: linear response cannot be censored");
    if (s.x_scale_from_z) {
        if (!std::holds_alternative<GammaLaw>(s.x_law) || !s.z_law)
            throw ParameterError("scenario: scale-from-Z mode needs a gamma X law and a Z law");
    }
    if (s.surrogate.kind == SurrogateKind::Binomial && s.surrogate.trials <= 0)
        throw ParameterError("scenario: binomial surrogate needs positive trials");
    if (s.surrogate.kind == SurrogateKind::NegBinomial && !(s.surrogate.size > 0.0))
        throw ParameterError("scenario: negative binomial surrogate needs positive size");
}

namespace detail {

template <class Engine>
double draw_x_supported(const ScenarioSpec& s, double z, Engine& eng) {
    const double cap = s.surrogate.kind == SurrogateKind::Binomial
                           ? static_cast<double>(s.surrogate.trials) / s.area
                           : std::numeric_limits<double>::infinity();
    for (int attempt = 0; attempt < 100000; ++attempt) {
        double x = 0.0;
        if (s.x_scale_from_z) {
            const auto g = std::get<GammaLaw>(s.x_law);
            x = draw(GammaLaw{g.shape, z}, eng);
        } else {
            x = draw(s.x_law, eng);
        }
        if (x <= cap) return x;
    }
    throw ParameterError("scenario: true covariate law almost never satisfies the binomial support");
}

template <class Engine>
long draw_surrogate(const SurrogateLaw& law, double x, double area, Engine& eng) {
    const double mean = std::max(0.0, x * area);
    switch (law.kind) {
        case SurrogateKind::Poisson:
            return static_cast<long>(draw(PoissonLaw{mean}, eng));
        case SurrogateKind::Binomial: {
            const double p = std::min(1.0, mean / static_cast<double>(law.trials));
            return static_cast<long>(draw(BinomialLaw{law.trials, p}, eng));
        }
        case SurrogateKind::NegBinomial:
            return static_cast<long>(draw(NegBinomialLaw{law.size, law.size / (law.size + mean)}, eng));
    }
    return 0;
}

inline double linear_predictor(const RegressionTruth& t, double x, const std::vector<double>& z) {
    double mu = t.beta0 + t.beta_x * x;
    for (std::size_t j = 0; j < z.size(); ++j) mu += t.beta_z[j] * z[j];
    return mu;
}

}  // namespace detail

/// Rate r of Exp(r) censoring times giving P(C < T) = target over the given
/// latent log event times (bisection on log r).
inline double exponential_censoring_rate(std::span<const double> log_times, double target) {
    if (log_times.empty()) throw PreconditionError("censoring calibration: no pilot times");
    if (!(target > 0.0 && target < 1.0)) throw ParameterError("censoring calibration: target must lie in (0,1)");
    auto censored_fraction = [&](double log_rate) {
        double acc = 0.0;
        for (double lt : log_times) acc += -std::expm1(-std::exp(log_rate + lt));
        return acc / static_cast<double>(log_times.size());
    };
    double lo = -80.0, hi = 40.0;
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        (censored_fraction(mid) < target ? lo : hi) = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

/// Exponential censoring rate whose marginal censoring probability matches
/// `spec.censoring_rate`, found by bisection on a pilot sample of latent times.
inline double calibrate_censoring_rate(const ScenarioSpec& spec, std::size_t pilot = 100000) {
    validate(spec);
    if (spec.censoring_rate <= 0.0) return 0.0;
    RngStream stream(0x5EEDCA1Bu, spec.id, 0);
    auto eng = stream.child("censoring-pilot").engine();
    std::vector<double> times(pilot);
    std::normal_distribution<double> eps(0.0, 1.0);
    for (auto& t : times) {
        double z = 0.0;
        if (spec.z_law) z = draw(*spec.z_law, eng);
        const double x = detail::draw_x_supported(spec, z, eng);
        const std::vector<double> zs = spec.z_law ? std::vector<double>{z} : std::vector<double>{};
        const double log_t = detail::linear_predictor(spec.truth, x, zs) + spec.truth.sigma_eps * eps(eng);
        t = log_t;
    }
    return exponential_censoring_rate(times, spec.censoring_rate);
}

/// Fills derived fields (exponential censoring rate) once per scenario.
inline ScenarioSpec prepare_scenario(ScenarioSpec spec) {
    validate(spec);
    if (spec.response == ResponseKind::LognormalAft && spec.censoring_rate > 0.0 &&
        spec.censoring_mode == CensoringMode::Exponential && !spec.censoring_time_rate)
        spec.censoring_time_rate = calibrate_censoring_rate(spec);
    return spec;
}

/// Simulates one dataset, retaining the true densities as hidden truth.
///
/// Per unit: Z, then X (scale Z_i in tied mode, redrawn while outside the
/// binomial support), then W | X, then the response, then censoring.
inline Dataset generate_dataset(const ScenarioSpec& raw_spec, const RngStream& rng) {
    const ScenarioSpec spec = prepare_scenario(raw_spec);
    auto eng = rng.engine();
    std::normal_distribution<double> eps(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    Dataset ds(spec.z_law ? std::vector<std::string>{"z"} : std::vector<std::string>{});
    ds.reserve(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        ObservedUnit u;
        u.a = spec.area;
        double z = 0.0;
        if (spec.z_law) {
            z = draw(*spec.z_law, eng);
            u.z.push_back(z);
        }
        const double x = detail::draw_x_supported(spec, z, eng);
        u.w = detail::draw_surrogate(spec.surrogate, x, spec.area, eng);
        const double noise = spec.truth.sigma_eps > 0.0 ? spec.truth.sigma_eps * eps(eng) : 0.0;
        const double y = detail::linear_predictor(spec.truth, x, u.z) + noise;
        u.y = y;
        u.event = 1;
        if (spec.response == ResponseKind::LognormalAft && spec.censoring_rate > 0.0) {
            if (spec.censoring_mode == CensoringMode::RandomFlag) {
                u.event = unif(eng) < spec.censoring_rate ? 0 : 1;
            } else {
                const double c = std::exponential_distribution<double>(*spec.censoring_time_rate)(eng);
                const double log_c = std::log(std::max(c, std::numeric_limits<double>::min()));
                if (log_c < y) {
                    u.y = log_c;
                    u.event = 0;
                }
            }
        }
        ds.push_back(u, x);
    }
    return ds;
}

}  // namespace poisimex
