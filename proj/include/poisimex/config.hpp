#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "poisimex/distributions.hpp"
#include "poisimex/errors.hpp"
#include "poisimex/extrapolant.hpp"
#include "poisimex/rng.hpp"
#include "poisimex/scenario.hpp"
#include "poisimex/simex.hpp"

// JSON mapping of the scenario / SIMEX configuration types. Field names follow
// the domain types one-to-one so the files stay hand-editable.

namespace poisimex {

using json = nlohmann::json;

inline json to_json_value(const Law& law) {
    return std::visit(
        [](const auto& l) -> json {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, GammaLaw>) return {{"law", "gamma"}, {"shape", l.shape}, {"scale", l.scale}};
            else if constexpr (std::is_same_v<T, UniformLaw>) return {{"law", "uniform"}, {"lo", l.lo}, {"hi", l.hi}};
            else if constexpr (std::is_same_v<T, NormalLaw>) return {{"law", "normal"}, {"mean", l.mean}, {"sd", l.sd}};
            else if constexpr (std::is_same_v<T, PoissonLaw>) return {{"law", "poisson"}, {"mean", l.mean}};
            else if constexpr (std::is_same_v<T, BinomialLaw>) return {{"law", "binomial"}, {"trials", l.trials}, {"p", l.p}};
            else if constexpr (std::is_same_v<T, NegBinomialLaw>) return {{"law", "negbinomial"}, {"r", l.r}, {"p", l.p}};
            else if constexpr (std::is_same_v<T, ExponentialLaw>) return {{"law", "exponential"}, {"rate", l.rate}};
            else return {{"law", "point"}, {"value", l.value}};
        },
        law);
}

inline Law law_from_json(const json& j) {
    const auto kind = j.at("law").get<std::string>();
    if (kind == "gamma") return GammaLaw{j.at("shape").get<double>(), j.at("scale").get<double>()};
    if (kind == "uniform") return UniformLaw{j.at("lo").get<double>(), j.at("hi").get<double>()};
    if (kind == "normal") return NormalLaw{j.at("mean").get<double>(), j.at("sd").get<double>()};
    if (kind == "poisson") return PoissonLaw{j.at("mean").get<double>()};
    if (kind == "binomial") return BinomialLaw{j.at("trials").get<long>(), j.at("p").get<double>()};
    if (kind == "negbinomial") return NegBinomialLaw{j.at("r").get<double>(), j.at("p").get<double>()};
    if (kind == "exponential") return ExponentialLaw{j.at("rate").get<double>()};
    if (kind == "point") return PointMassLaw{j.at("value").get<double>()};
    throw ValidationError("unknown law '" + kind + "'");
}

inline json to_json_value(const ScenarioSpec& s) {
    json surrogate;
    switch (s.surrogate.kind) {
        case SurrogateKind::Poisson: surrogate = {{"law", "poisson"}}; break;
        case SurrogateKind::Binomial: surrogate = {{"law", "binomial"}, {"trials", s.surrogate.trials}}; break;
        case SurrogateKind::NegBinomial: surrogate = {{"law", "negbinomial"}, {"size", s.surrogate.size}}; break;
    }
    json j{
        {"id", s.id},
        {"x_law", to_json_value(s.x_law)},
        {"x_scale_from_z", s.x_scale_from_z},
        {"z_law", s.z_law ? to_json_value(*s.z_law) : json(nullptr)},
        {"surrogate_law", surrogate},
        {"truth", {{"beta0", s.truth.beta0}, {"beta_x", s.truth.beta_x}, {"beta_z", s.truth.beta_z}, {"sigma_eps", s.truth.sigma_eps}}},
        {"response_kind", s.response == ResponseKind::Linear ? "linear" : "lognormal-aft"},
        {"censoring_rate", s.censoring_rate},
        {"censoring_mode", s.censoring_mode == CensoringMode::Exponential ? "exponential" : "random-flag"},
        {"n", s.n},
        {"area", s.area},
    };
    return j;
}

inline ScenarioSpec scenario_from_json(const json& j) {
    ScenarioSpec s;
    s.id = j.value("id", std::string("custom"));
    s.x_law = law_from_json(j.at("x_law"));
    s.x_scale_from_z = j.value("x_scale_from_z", false);
    if (j.contains("z_law") && !j.at("z_law").is_null()) s.z_law = law_from_json(j.at("z_law"));
    else s.z_law.reset();
    const auto& sl = j.at("surrogate_law");
    const auto kind = sl.at("law").get<std::string>();
    if (kind == "poisson") s.surrogate.kind = SurrogateKind::Poisson;
    else if (kind == "binomial") s.surrogate = {SurrogateKind::Binomial, sl.at("trials").get<long>(), 0.0};
    else if (kind == "negbinomial") s.surrogate = {SurrogateKind::NegBinomial, 0, sl.at("size").get<double>()};
    else throw ValidationError("unknown surrogate law '" + kind + "'");
    const auto& t = j.at("truth");
    s.truth.beta0 = t.at("beta0").get<double>();
    s.truth.beta_x = t.at("beta_x").get<double>();
    s.truth.beta_z = t.value("beta_z", std::vector<double>{});
    s.truth.sigma_eps = t.at("sigma_eps").get<double>();
    const auto resp = j.value("response_kind", std::string("linear"));
    if (resp == "linear") s.response = ResponseKind::Linear;
    else if (resp == "lognormal-aft" || resp == "aft") s.response = ResponseKind::LognormalAft;
    else throw ValidationError("unknown response kind '" + resp + "'");
    s.censoring_rate = j.value("censoring_rate", 0.0);
    const auto mode = j.value("censoring_mode", std::string("exponential"));
    if (mode == "exponential") s.censoring_mode = CensoringMode::Exponential;
    else if (mode == "random-flag") s.censoring_mode = CensoringMode::RandomFlag;
    else throw ValidationError("unknown censoring mode '" + mode + "'");
    s.n = j.at("n").get<std::size_t>();
    s.area = j.value("area", 1.0);
    validate(s);
    return s;
}

inline json to_json_value(const SimexConfig& c) {
    return {
        {"lambda_grid", c.lambda_grid},
        {"B", c.B},
        {"extrapolant", std::string(to_string(c.extrapolant))},
        {"variance_method", std::string(to_string(c.variance_method))},
        {"bootstrap_reps", c.bootstrap_reps},
        {"seed", c.seed},
    };
}

inline SimexConfig simex_config_from_json(const json& j) {
    SimexConfig c;
    c.lambda_grid = j.value("lambda_grid", c.lambda_grid);
    c.B = j.value("B", c.B);
    c.extrapolant = parse_extrapolant(j.value("extrapolant", std::string("quadratic")));
    c.variance_method = parse_variance_method(j.value("variance_method", std::string("none")));
    c.bootstrap_reps = j.value("bootstrap_reps", c.bootstrap_reps);
    c.seed = j.value("seed", c.seed);
    validate(c);
    return c;
}

/// 16-hex-digit FNV-1a hash of a JSON document's canonical dump.
inline std::string config_hash(const json& j) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
    return buf;
}

}  // namespace poisimex
