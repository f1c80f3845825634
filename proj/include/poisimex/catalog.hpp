#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "poisimex/errors.hpp"
#include "poisimex/scenario.hpp"

namespace poisimex {

namespace detail {

inline ScenarioSpec linear_scenario(std::string id, Law x_law, bool scale_from_z, std::size_t n,
                                    SurrogateLaw surrogate = {}) {
    ScenarioSpec s;
    s.id = std::move(id);
    s.x_law = x_law;
    s.x_scale_from_z = scale_from_z;
    s.z_law = UniformLaw{0.5, 9.0};
    s.surrogate = surrogate;
    s.truth = {2.0, 1.0, {0.5}, 5.0};
    s.n = n;
    return s;
}

}  // namespace detail

/// The built-in simulation settings, keyed by id.
///
/// table1..3: the three gamma scenarios at N = 50/100/200; table4: variance
/// ratios 0.9/0.75/0.5 at N = 100; table5: censored log-normal AFT;
/// appendix1..4: binomial(40), binomial(60), negative binomial(5) and (10)
/// surrogates for each of the three gamma scenarios at N = 100.
inline const std::map<std::string, ScenarioSpec>& scenario_catalog() {
    static const std::map<std::string, ScenarioSpec> catalog = [] {
        std::map<std::string, ScenarioSpec> c;
        auto add = [&](ScenarioSpec s) { c.emplace(s.id, std::move(s)); };
        for (std::size_t n : {50u, 100u, 200u}) {
            const auto ns = "_n" + std::to_string(n);
            add(detail::linear_scenario("table1_gamma_1_2" + ns, GammaLaw{1.0, 2.0}, false, n));
            add(detail::linear_scenario("table2_gamma_1_10" + ns, GammaLaw{1.0, 10.0}, false, n));
            add(detail::linear_scenario("table3_gamma_2_z" + ns, GammaLaw{2.0, 1.0}, true, n));

            ScenarioSpec aft = detail::linear_scenario("table5_aft" + ns, GammaLaw{1.0, 2.0}, false, n);
            aft.truth.sigma_eps = 2.0;
            aft.response = ResponseKind::LognormalAft;
            aft.censoring_rate = 0.2;
            aft.censoring_mode = CensoringMode::RandomFlag;
            add(aft);
        }
        add(detail::linear_scenario("table4_ratio_0_9", GammaLaw{0.1, 9.0}, false, 100));
        add(detail::linear_scenario("table4_ratio_0_75", GammaLaw{2.0 / 3.0, 3.0}, false, 100));
        add(detail::linear_scenario("table4_ratio_0_5", GammaLaw{2.0, 1.0}, false, 100));

        const std::vector<std::pair<std::string, SurrogateLaw>> misspec{
            {"appendix1_binom40", {SurrogateKind::Binomial, 40, 5.0}},
            {"appendix2_binom60", {SurrogateKind::Binomial, 60, 5.0}},
            {"appendix3_negbin5", {SurrogateKind::NegBinomial, 40, 5.0}},
            {"appendix4_negbin10", {SurrogateKind::NegBinomial, 40, 10.0}},
        };
        for (const auto& [prefix, law] : misspec) {
            add(detail::linear_scenario(prefix + "_gamma_1_2", GammaLaw{1.0, 2.0}, false, 100, law));
            add(detail::linear_scenario(prefix + "_gamma_1_10", GammaLaw{1.0, 10.0}, false, 100, law));
            add(detail::linear_scenario(prefix + "_gamma_2_z", GammaLaw{2.0, 1.0}, true, 100, law));
        }
        return c;
    }();
    return catalog;
}

/// Short names accepted in place of full ids.
inline const std::map<std::string, std::string>& scenario_aliases() {
    static const std::map<std::string, std::string> aliases{
        {"table1", "table1_gamma_1_2_n100"},       {"table2", "table2_gamma_1_10_n200"},
        {"table3", "table3_gamma_2_z_n100"},       {"table4", "table4_ratio_0_5"},
        {"table5", "table5_aft_n100"},             {"appendix1", "appendix1_binom40_gamma_1_2"},
        {"appendix2", "appendix2_binom60_gamma_1_2"}, {"appendix3", "appendix3_negbin5_gamma_1_2"},
        {"appendix4", "appendix4_negbin10_gamma_1_2"}, {"appendix4_negbin10", "appendix4_negbin10_gamma_1_2"},
    };
    return aliases;
}

/// Looks up a scenario by id or alias; unknown ids list the catalog.
inline ScenarioSpec find_scenario(std::string_view id) {
    const auto& cat = scenario_catalog();
    std::string key(id);
    if (auto a = scenario_aliases().find(key); a != scenario_aliases().end()) key = a->second;
    if (auto it = cat.find(key); it != cat.end()) return it->second;
    std::string msg = "unknown scenario '" + std::string(id) + "'; available:";
    for (const auto& [name, _] : cat) msg += " " + name;
    for (const auto& [name, _] : scenario_aliases()) msg += " " + name;
    throw ValidationError(msg);
}

}  // namespace poisimex
