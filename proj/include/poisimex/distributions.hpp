#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "poisimex/errors.hpp"
#include "poisimex/rng.hpp"

namespace poisimex {

struct GammaLaw {
    double shape = 1.0;
    double scale = 1.0;
};

struct UniformLaw {
    double lo = 0.0;
    double hi = 1.0;
};

struct NormalLaw {
    double mean = 0.0;
    double sd = 1.0;
};

struct PoissonLaw {
    double mean = 1.0;
};

struct BinomialLaw {
    long trials = 1;
    double p = 0.5;
};

/// Number of failures before the r-th success; r may be non-integer.
struct NegBinomialLaw {
    double r = 1.0;
    double p = 0.5;
};

struct ExponentialLaw {
    double rate = 1.0;
};

/// Degenerate law at a single value. Used for noiseless test datasets.
struct PointMassLaw {
    double value = 0.0;
};

using Law = std::variant<GammaLaw, UniformLaw, NormalLaw, PoissonLaw, BinomialLaw, NegBinomialLaw,
                         ExponentialLaw, PointMassLaw>;

inline void validate(const Law& law) {
    auto fail = [](const std::string& m) { throw ParameterError(m); };
    auto finite = [](double v) { return std::isfinite(v); };
    std::visit(
        [&](const auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, GammaLaw>) {
                if (!(l.shape > 0.0 && finite(l.shape)) || !(l.scale > 0.0 && finite(l.scale)))
                    fail("gamma: shape and scale must be positive");
            } else if constexpr (std::is_same_v<T, UniformLaw>) {
                if (!finite(l.lo) || !finite(l.hi) || !(l.lo <= l.hi)) fail("uniform: need lo <= hi");
            } else if constexpr (std::is_same_v<T, NormalLaw>) {
                if (!finite(l.mean) || !(l.sd >= 0.0 && finite(l.sd))) fail("normal: sd must be non-negative");
            } else if constexpr (std::is_same_v<T, PoissonLaw>) {
                if (!(l.mean >= 0.0 && finite(l.mean))) fail("poisson: mean must be non-negative");
            } else if constexpr (std::is_same_v<T, BinomialLaw>) {
                if (l.trials < 0) fail("binomial: trials must be non-negative");
                if (!(l.p >= 0.0 && l.p <= 1.0)) fail("binomial: probability outside [0,1]");
            } else if constexpr (std::is_same_v<T, NegBinomialLaw>) {
                if (!(l.r > 0.0 && finite(l.r))) fail("negative binomial: r must be positive");
                if (!(l.p > 0.0 && l.p <= 1.0)) fail("negative binomial: probability outside (0,1]");
            } else if constexpr (std::is_same_v<T, ExponentialLaw>) {
                if (!(l.rate > 0.0 && finite(l.rate))) fail("exponential: rate must be positive");
            } else if constexpr (std::is_same_v<T, PointMassLaw>) {
                if (!finite(l.value)) fail("point mass: value must be finite");
            }
        },
        law);
}

/// Analytic mean of a law.
inline double law_mean(const Law& law) {
    return std::visit(
        [](const auto& l) -> double {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, GammaLaw>) return l.shape * l.scale;
            else if constexpr (std::is_same_v<T, UniformLaw>) return 0.5 * (l.lo + l.hi);
            else if constexpr (std::is_same_v<T, NormalLaw>) return l.mean;
            else if constexpr (std::is_same_v<T, PoissonLaw>) return l.mean;
            else if constexpr (std::is_same_v<T, BinomialLaw>) return static_cast<double>(l.trials) * l.p;
            else if constexpr (std::is_same_v<T, NegBinomialLaw>) return l.r * (1.0 - l.p) / l.p;
            else if constexpr (std::is_same_v<T, ExponentialLaw>) return 1.0 / l.rate;
            else return l.value;
        },
        law);
}

/// Analytic variance of a law.
inline double law_variance(const Law& law) {
    return std::visit(
        [](const auto& l) -> double {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, GammaLaw>) return l.shape * l.scale * l.scale;
            else if constexpr (std::is_same_v<T, UniformLaw>) return (l.hi - l.lo) * (l.hi - l.lo) / 12.0;
            else if constexpr (std::is_same_v<T, NormalLaw>) return l.sd * l.sd;
            else if constexpr (std::is_same_v<T, PoissonLaw>) return l.mean;
            else if constexpr (std::is_same_v<T, BinomialLaw>) return static_cast<double>(l.trials) * l.p * (1.0 - l.p);
            else if constexpr (std::is_same_v<T, NegBinomialLaw>) return l.r * (1.0 - l.p) / (l.p * l.p);
            else if constexpr (std::is_same_v<T, ExponentialLaw>) return 1.0 / (l.rate * l.rate);
            else return 0.0;
        },
        law);
}

/// One draw from `law`. Parameters are assumed valid; see validate().
template <class Engine>
double draw(const Law& law, Engine& eng) {
    return std::visit(
        [&](const auto& l) -> double {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, GammaLaw>) {
                return std::gamma_distribution<double>(l.shape, l.scale)(eng);
            } else if constexpr (std::is_same_v<T, UniformLaw>) {
                if (l.lo == l.hi) return l.lo;
                return std::uniform_real_distribution<double>(l.lo, l.hi)(eng);
            } else if constexpr (std::is_same_v<T, NormalLaw>) {
                if (l.sd == 0.0) return l.mean;
                return std::normal_distribution<double>(l.mean, l.sd)(eng);
            } else if constexpr (std::is_same_v<T, PoissonLaw>) {
                // libstdc++ requires a strictly positive mean
                if (l.mean <= 0.0) return 0.0;
                return static_cast<double>(std::poisson_distribution<long>(l.mean)(eng));
            } else if constexpr (std::is_same_v<T, BinomialLaw>) {
                return static_cast<double>(std::binomial_distribution<long>(l.trials, l.p)(eng));
            } else if constexpr (std::is_same_v<T, NegBinomialLaw>) {
                if (l.p >= 1.0) return 0.0;
                // gamma-Poisson mixture handles non-integer r
                const double rate = std::gamma_distribution<double>(l.r, (1.0 - l.p) / l.p)(eng);
                if (rate <= 0.0) return 0.0;
                return static_cast<double>(std::poisson_distribution<long>(rate)(eng));
            } else if constexpr (std::is_same_v<T, ExponentialLaw>) {
                return std::exponential_distribution<double>(l.rate)(eng);
            } else {
                return l.value;
            }
        },
        law);
}

/// n i.i.d. draws from `law` on the given stream.
inline std::vector<double> sample_distribution(const Law& law, std::size_t n, const RngStream& rng) {
    validate(law);
    auto eng = rng.engine();
    std::vector<double> out(n);
    for (auto& v : out) v = draw(law, eng);
    return out;
}

}  // namespace poisimex
