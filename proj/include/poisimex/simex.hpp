#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "poisimex/aft.hpp"
#include "poisimex/dataset.hpp"
#include "poisimex/errors.hpp"
#include "poisimex/extrapolant.hpp"
#include "poisimex/linear_model.hpp"
#include "poisimex/parallel.hpp"
#include "poisimex/rng.hpp"

namespace poisimex {

enum class Fitter { LinearModel, AftLognormal };

enum class VarianceMethod { None, Difference, Bootstrap };

inline VarianceMethod parse_variance_method(std::string_view s) {
    if (s == "none") return VarianceMethod::None;
    if (s == "difference" || s == "difference-extrapolation") return VarianceMethod::Difference;
    if (s == "bootstrap") return VarianceMethod::Bootstrap;
    throw ParameterError("unknown variance method '" + std::string(s) + "' (none|difference|bootstrap)");
}

inline std::string_view to_string(VarianceMethod m) {
    switch (m) {
        case VarianceMethod::None: return "none";
        case VarianceMethod::Difference: return "difference";
        case VarianceMethod::Bootstrap: return "bootstrap";
    }
    return "?";
}

struct SimexConfig {
    /// Added-noise levels; the lambda = 0 anchor (the naive fit) is implicit.
    std::vector<double> lambda_grid{0.5, 1.0, 1.5, 2.0};
    std::size_t B = 100;
    ExtrapolantKind extrapolant = ExtrapolantKind::Quadratic;
    VarianceMethod variance_method = VarianceMethod::Difference;
    std::size_t bootstrap_reps = 200;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    /// Known per-unit measurement-error variances on the density scale.
    /// When empty they are estimated from the data (estimate_sigma).
    std::optional<std::vector<double>> measurement_variance;
};

inline void validate(const SimexConfig& c) {
    if (c.lambda_grid.empty()) throw ParameterError("simex: lambda grid is empty");
    for (std::size_t k = 0; k < c.lambda_grid.size(); ++k) {
        if (!(c.lambda_grid[k] > 0.0) || !std::isfinite(c.lambda_grid[k]))
            throw ParameterError("simex: grid lambdas must be positive (lambda = 0 is implicit)");
        if (k > 0 && !(c.lambda_grid[k] > c.lambda_grid[k - 1]))
            throw ParameterError("simex: lambda grid must be strictly ascending");
    }
    if (c.B < 2) throw ParameterError("simex: B must be at least 2");
    if (c.lambda_grid.size() + 1 < parameter_count(c.extrapolant))
        throw ArityError("simex: lambda grid too short for the chosen extrapolant");
    if (c.variance_method == VarianceMethod::Bootstrap && c.bootstrap_reps < 2)
        throw ParameterError("simex: bootstrap needs at least 2 replicates");
}

/// Outcome of one SIMEX run. Row 0 of the per-lambda tables is the lambda = 0
/// anchor and equals the naive fit exactly.
struct SimexResult {
    std::vector<std::string> parameter_names;
    std::vector<double> lambdas;
    std::vector<std::vector<double>> per_lambda_mean;
    std::vector<std::vector<double>> per_lambda_var_sampling;
    std::vector<std::vector<double>> per_lambda_var_model;
    std::vector<std::size_t> failures;
    std::vector<Curve> extrapolant_fit;
    std::vector<double> estimate;
    std::vector<double> variance;
    std::vector<double> sigma2;
    ModelFit naive;
    std::vector<std::string> warnings;
};

/// Per-unit measurement-error variance of W/A, estimated as mean(W/A) / A_i.
inline std::vector<double> estimate_sigma(const Dataset& ds) {
    if (ds.empty()) throw PreconditionError("estimate_sigma: empty dataset");
    double vbar = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) vbar += static_cast<double>(ds.w()[i]) / ds.a()[i];
    vbar /= static_cast<double>(ds.size());
    std::vector<double> s(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) s[i] = vbar / ds.a()[i];
    return s;
}

/// Pseudo covariate W_i/A_i + sqrt(lambda) sigma_i U_i for given standard
/// normal deviates U. Negative values are kept.
inline std::vector<double> generate_pseudo_covariate(const Dataset& ds, double lambda, std::span<const double> sigma2,
                                                     std::span<const double> noise) {
    if (!(lambda >= 0.0)) throw ParameterError("pseudo data: lambda must be non-negative");
    if (sigma2.size() != ds.size() || noise.size() != ds.size())
        throw ArityError("pseudo data: sigma and noise must have one entry per unit");
    auto v = ds.surrogate_densities();
    if (lambda == 0.0) return v;
    const double root = std::sqrt(lambda);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(sigma2[i] >= 0.0)) throw ParameterError("pseudo data: measurement variances must be non-negative");
        v[i] += root * std::sqrt(sigma2[i]) * noise[i];
    }
    return v;
}

/// Same, drawing U_i from `rng`.
inline std::vector<double> generate_pseudo_covariate(const Dataset& ds, double lambda, std::span<const double> sigma2,
                                                     const RngStream& rng) {
    auto eng = rng.engine();
    std::normal_distribution<double> norm(0.0, 1.0);
    std::vector<double> u(ds.size());
    for (auto& x : u) x = norm(eng);
    return generate_pseudo_covariate(ds, lambda, sigma2, u);
}

inline ModelFit fit_model(Fitter fitter, const DesignView& d) {
    switch (fitter) {
        case Fitter::LinearModel: return fit_ols(d);
        case Fitter::AftLognormal: return fit_aft_lognormal(d);
    }
    throw ParameterError("unknown fitter");
}

inline ModelFit fit_model(Fitter fitter, const Dataset& ds, CovariateSource source) {
    const auto v = covariate_column(ds, source);
    return fit_model(fitter, make_view(ds, v));
}

namespace detail {

inline Curve fit_curve_with_fallback(std::span<const ExtrapolantPoint> pts, ExtrapolantKind kind, const std::string& what,
                                     std::vector<std::string>& warnings) {
    try {
        Curve c = fit_extrapolant(pts, kind);
        if (kind == ExtrapolantKind::Rational && c.c[2] - 1.0 <= 0.0) {
            // pole between the target and the data
            warnings.push_back(what + ": rational curve has a pole in [-1, 0]; using linear extrapolant");
            return fit_extrapolant(pts, ExtrapolantKind::Linear);
        }
        return c;
    } catch (const ExtrapolationError& e) {
        warnings.push_back(what + ": " + e.what() + "; using linear extrapolant");
        return e.fallback();
    }
}

}  // namespace detail

/// Difference-extrapolation variance: extrapolates mean model variance minus
/// the between-replicate variance of the estimates, over the lambdas where
/// that difference is positive. Negative extrapolations are floored at 0.
inline std::vector<double> simex_variance_difference(const SimexResult& r, const SimexConfig& config,
                                                     std::vector<std::string>* warnings = nullptr) {
    if (config.B < 2) throw ParameterError("difference variance: B must be at least 2");
    std::vector<std::string> local;
    auto& warn = warnings ? *warnings : local;
    const std::size_t params = r.parameter_names.size();
    std::vector<double> out(params);
    for (std::size_t j = 0; j < params; ++j) {
        std::vector<ExtrapolantPoint> pts;
        for (std::size_t k = 0; k < r.lambdas.size(); ++k) {
            const double diff = r.per_lambda_var_model.at(k).at(j) - r.per_lambda_var_sampling.at(k).at(j);
            if (diff > 0.0 && std::isfinite(diff)) pts.push_back({r.lambdas[k], diff});
        }
        if (pts.size() < 3)
            throw NumericalError("difference variance for " + r.parameter_names[j] +
                                 ": fewer than 3 positive differences; use the bootstrap variance instead");
        const Curve c = detail::fit_curve_with_fallback(pts, config.extrapolant, "variance of " + r.parameter_names[j], warn);
        double v = extrapolate(c, -1.0);
        if (v < 0.0) {
            warn.push_back("variance of " + r.parameter_names[j] + " extrapolated negative; floored at 0");
            v = 0.0;
        }
        out[j] = v;
    }
    return out;
}

/// Nonparametric case-resampling variance of an arbitrary estimator.
/// Each resample r draws from its own child stream, so results do not depend
/// on thread count. More than 10% failing resamples is an error.
template <class Estimator>
std::vector<double> bootstrap_variance(const Dataset& ds, std::size_t reps, const RngStream& rng, Estimator&& estimator,
                                       unsigned threads = 1) {
    if (reps < 2) throw ParameterError("bootstrap: need at least 2 replicates");
    if (ds.empty()) throw PreconditionError("bootstrap: empty dataset");
    std::vector<std::optional<std::vector<double>>> results(reps);
    parallel_for(reps, threads, [&](std::size_t r) {
        auto eng = rng.child("bootstrap", r).engine();
        std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
        std::vector<std::size_t> rows(ds.size());
        for (auto& i : rows) i = pick(eng);
        try {
            results[r] = estimator(ds.subset(rows), rng.child("bootstrap-inner", r));
        } catch (const NumericalError&) {
        } catch (const PreconditionError&) {
        }
    });
    std::vector<const std::vector<double>*> ok;
    for (const auto& r : results)
        if (r) ok.push_back(&*r);
    const std::size_t failed = reps - ok.size();
    if (static_cast<double>(failed) > 0.1 * static_cast<double>(reps) || ok.size() < 2)
        throw NumericalError("bootstrap: " + std::to_string(failed) + " of " + std::to_string(reps) + " resamples failed");
    const std::size_t dim = ok.front()->size();
    std::vector<double> mean(dim, 0.0), var(dim, 0.0);
    for (const auto* v : ok)
        for (std::size_t j = 0; j < dim; ++j) mean[j] += (*v)[j];
    for (auto& m : mean) m /= static_cast<double>(ok.size());
    for (const auto* v : ok)
        for (std::size_t j = 0; j < dim; ++j) var[j] += ((*v)[j] - mean[j]) * ((*v)[j] - mean[j]);
    for (auto& v : var) v /= static_cast<double>(ok.size() - 1);
    return var;
}

inline SimexResult run_simex(const Dataset& ds, Fitter fitter, const SimexConfig& config, std::optional<RngStream> stream = {});

/// Bootstrap variance of the SIMEX estimate: full SIMEX on every resample.
inline std::vector<double> simex_variance_bootstrap(const Dataset& ds, Fitter fitter, const SimexConfig& config,
                                                    std::optional<RngStream> stream = {}) {
    if (config.bootstrap_reps < 2) throw ParameterError("bootstrap: need at least 2 replicates");
    SimexConfig inner = config;
    inner.variance_method = VarianceMethod::None;
    inner.threads = 1;
    inner.measurement_variance.reset();
    const RngStream base = stream ? *stream : RngStream(config.seed, "simex", 0);
    return bootstrap_variance(
        ds, config.bootstrap_reps, base.child("simex-bootstrap"),
        [&](const Dataset& resample, const RngStream& s) { return run_simex(resample, fitter, inner, s).estimate; },
        config.threads);
}

/// SIMEX for a conditionally Poisson surrogate.
///
/// For each grid lambda, B pseudo covariates W/A + sqrt(lambda) sigma_i U are
/// fitted and their estimates averaged; the curve of averages (anchored at the
/// naive fit for lambda = 0) is extrapolated to lambda = -1 per parameter.
inline SimexResult run_simex(const Dataset& ds, Fitter fitter, const SimexConfig& config, std::optional<RngStream> stream) {
    validate(config);
    if (ds.empty()) throw PreconditionError("simex: empty dataset");
    const RngStream base = stream ? *stream : RngStream(config.seed, "simex", 0);

    SimexResult r;
    r.sigma2 = config.measurement_variance ? *config.measurement_variance : estimate_sigma(ds);
    if (r.sigma2.size() != ds.size()) throw ArityError("simex: one measurement variance per unit required");
    r.naive = fit_model(fitter, ds, CovariateSource::SurrogateDensity);
    if (!r.naive.converged) r.warnings.push_back("naive fit did not converge");
    r.parameter_names = r.naive.parameter_names();
    const std::size_t params = r.parameter_names.size();
    const std::size_t grid = config.lambda_grid.size();
    const std::size_t B = config.B;

    r.lambdas.push_back(0.0);
    r.lambdas.insert(r.lambdas.end(), config.lambda_grid.begin(), config.lambda_grid.end());
    r.per_lambda_mean.push_back(r.naive.parameters());
    r.per_lambda_var_sampling.emplace_back(params, 0.0);
    r.per_lambda_var_model.push_back(r.naive.parameter_variances());
    r.failures.push_back(0);

    struct Draw {
        bool ok = false;
        std::vector<double> est, var;
    };
    std::vector<Draw> draws(grid * B);
    parallel_for(grid * B, config.threads, [&](std::size_t item) {
        const std::size_t k = item / B, b = item % B;
        const auto v = generate_pseudo_covariate(ds, config.lambda_grid[k], r.sigma2, base.child("lambda", k).child("draw", b));
        try {
            const ModelFit f = fit_model(fitter, make_view(ds, v));
            if (!f.converged) return;
            draws[item] = Draw{true, f.parameters(), f.parameter_variances()};
        } catch (const NumericalError&) {
        } catch (const PreconditionError&) {
        }
    });

    for (std::size_t k = 0; k < grid; ++k) {
        std::vector<double> mean(params, 0.0), model(params, 0.0), samp(params, 0.0);
        std::size_t ok = 0;
        for (std::size_t b = 0; b < B; ++b) {
            const Draw& d = draws[k * B + b];
            if (!d.ok) continue;
            ++ok;
            for (std::size_t j = 0; j < params; ++j) {
                mean[j] += d.est[j];
                model[j] += d.var[j];
            }
        }
        const std::size_t failed = B - ok;
        if (static_cast<double>(failed) > 0.1 * static_cast<double>(B) || ok < 2)
            throw NumericalError("simex: " + std::to_string(failed) + " of " + std::to_string(B) +
                                 " pseudo fits failed at lambda = " + std::to_string(config.lambda_grid[k]));
        for (std::size_t j = 0; j < params; ++j) {
            mean[j] /= static_cast<double>(ok);
            model[j] /= static_cast<double>(ok);
        }
        for (std::size_t b = 0; b < B; ++b) {
            const Draw& d = draws[k * B + b];
            if (!d.ok) continue;
            for (std::size_t j = 0; j < params; ++j) samp[j] += (d.est[j] - mean[j]) * (d.est[j] - mean[j]);
        }
        for (auto& s : samp) s /= static_cast<double>(ok - 1);
        r.per_lambda_mean.push_back(std::move(mean));
        r.per_lambda_var_sampling.push_back(std::move(samp));
        r.per_lambda_var_model.push_back(std::move(model));
        r.failures.push_back(failed);
        if (failed > 0)
            r.warnings.push_back(std::to_string(failed) + " pseudo fits dropped at lambda = " + std::to_string(config.lambda_grid[k]));
    }

    r.extrapolant_fit.reserve(params);
    r.estimate.resize(params);
    for (std::size_t j = 0; j < params; ++j) {
        std::vector<ExtrapolantPoint> pts;
        for (std::size_t k = 0; k < r.lambdas.size(); ++k) pts.push_back({r.lambdas[k], r.per_lambda_mean[k][j]});
        r.extrapolant_fit.push_back(detail::fit_curve_with_fallback(pts, config.extrapolant, r.parameter_names[j], r.warnings));
        r.estimate[j] = extrapolate(r.extrapolant_fit.back(), -1.0);
    }

    switch (config.variance_method) {
        case VarianceMethod::None: break;
        case VarianceMethod::Difference: r.variance = simex_variance_difference(r, config, &r.warnings); break;
        case VarianceMethod::Bootstrap: r.variance = simex_variance_bootstrap(ds, fitter, config, base); break;
    }
    return r;
}

}  // namespace poisimex
