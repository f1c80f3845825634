#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cctype>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "poisimex/config.hpp"
#include "poisimex/errors.hpp"
#include "poisimex/linear_model.hpp"
#include "poisimex/parallel.hpp"
#include "poisimex/scenario.hpp"
#include "poisimex/simex.hpp"

namespace poisimex {

enum class Method { AdjLM, NaiveLM, PoiSimex, TrueLM, NaiveAFT, SimexAFT, TrueAFT };

inline std::string_view to_string(Method m) {
    switch (m) {
        case Method::AdjLM: return "Adj-LM";
        case Method::NaiveLM: return "Naive-LM";
        case Method::PoiSimex: return "POI-SIMEX";
        case Method::TrueLM: return "True-LM";
        case Method::NaiveAFT: return "Naive-AFT";
        case Method::SimexAFT: return "SIMEX-AFT";
        case Method::TrueAFT: return "True-AFT";
    }
    return "?";
}

inline Method parse_method(std::string_view s) {
    for (Method m : {Method::AdjLM, Method::NaiveLM, Method::PoiSimex, Method::TrueLM, Method::NaiveAFT, Method::SimexAFT,
                     Method::TrueAFT}) {
        std::string a(to_string(m)), b(s);
        auto lower = [](std::string& x) {
            for (auto& c : x) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        };
        lower(a);
        lower(b);
        if (a == b) return m;
    }
    throw ParameterError("unknown method '" + std::string(s) +
                         "' (Adj-LM, Naive-LM, POI-SIMEX, True-LM, Naive-AFT, SIMEX-AFT, True-AFT)");
}

inline bool is_aft(Method m) { return m == Method::NaiveAFT || m == Method::SimexAFT || m == Method::TrueAFT; }

inline std::vector<Method> default_methods(const ScenarioSpec& s) {
    if (s.response == ResponseKind::LognormalAft) return {Method::NaiveAFT, Method::SimexAFT, Method::TrueAFT};
    return {Method::AdjLM, Method::NaiveLM, Method::PoiSimex, Method::TrueLM};
}

struct StudySpec {
    ScenarioSpec scenario;
    std::vector<Method> methods;
    std::size_t replicates = 1000;
    std::size_t batches = 10;
    SimexConfig simex = [] {
        SimexConfig c;
        c.variance_method = VarianceMethod::None;
        return c;
    }();
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

inline void validate(const StudySpec& s) {
    validate(s.scenario);
    validate(s.simex);
    if (s.replicates == 0) throw ParameterError("study: replicates must be positive");
    if (s.batches < 2) throw ParameterError("study: need at least 2 batches");
    if (s.replicates % s.batches != 0) throw ArityError("study: replicates must be divisible by batches");
    const bool aft = s.scenario.response == ResponseKind::LognormalAft;
    for (Method m : s.methods) {
        if (is_aft(m) != aft)
            throw ParameterError(std::string("study: method ") + std::string(to_string(m)) +
                                 (aft ? " needs a linear-response scenario" : " needs an AFT scenario"));
    }
}

inline json to_json_value(const StudySpec& s) {
    json methods = json::array();
    for (Method m : s.methods) methods.push_back(std::string(to_string(m)));
    return {{"scenario", to_json_value(s.scenario)}, {"methods", methods},         {"replicates", s.replicates},
            {"batches", s.batches},                  {"simex", to_json_value(s.simex)}, {"seed", s.seed}};
}

inline StudySpec study_from_json(const json& j) {
    StudySpec s;
    s.scenario = scenario_from_json(j.at("scenario"));
    if (j.contains("methods"))
        for (const auto& m : j.at("methods")) s.methods.push_back(parse_method(m.get<std::string>()));
    else
        s.methods = default_methods(s.scenario);
    s.replicates = j.value("replicates", s.replicates);
    s.batches = j.value("batches", s.batches);
    if (j.contains("simex")) s.simex = simex_config_from_json(j.at("simex"));
    s.seed = j.value("seed", s.seed);
    validate(s);
    return s;
}

/// Per-batch statistics and their Monte Carlo standard error.
struct BatchMeans {
    std::vector<double> batch_statistics;
    double mcse = 0.0;
};

using BatchStatistic = std::function<double(std::span<const double>)>;

inline double sample_mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Splits the replicates, in order, into `batches` equal blocks, evaluates
/// `statistic` on each and returns sd(block statistics) / sqrt(batches).
/// NaN entries mark excluded replicates and are skipped within their block;
/// a block left empty is dropped.
inline BatchMeans batch_mean_mcse(std::span<const double> values, std::size_t batches,
                                  const BatchStatistic& statistic = sample_mean) {
    if (batches < 2) throw ParameterError("batch means: need at least 2 batches");
    if (values.empty() || values.size() % batches != 0)
        throw ArityError("batch means: " + std::to_string(values.size()) + " values do not split into " +
                         std::to_string(batches) + " equal batches");
    const std::size_t len = values.size() / batches;
    BatchMeans out;
    std::vector<double> block;
    for (std::size_t b = 0; b < batches; ++b) {
        block.clear();
        for (std::size_t i = b * len; i < (b + 1) * len; ++i)
            if (!std::isnan(values[i])) block.push_back(values[i]);
        if (!block.empty()) out.batch_statistics.push_back(statistic(block));
    }
    const std::size_t k = out.batch_statistics.size();
    if (k < 2) {
        out.mcse = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    const double m = sample_mean(out.batch_statistics);
    double ss = 0.0;
    for (double s : out.batch_statistics) ss += (s - m) * (s - m);
    out.mcse = std::sqrt(ss / static_cast<double>(k - 1)) / std::sqrt(static_cast<double>(k));
    return out;
}

/// One (parameter, method) cell of a simulation table.
struct MCCell {
    std::string parameter;
    std::string method;
    double truth = 0.0;
    double estimate = 0.0;
    double bias = 0.0;
    double mse = 0.0;
    double bias_mcse = 0.0;
    double mse_mcse = 0.0;
    std::size_t n_excluded = 0;
};

struct MCSummary {
    std::string scenario_id;
    std::uint64_t seed = 0;
    std::string spec_hash;
    std::size_t replicates = 0;
    std::vector<MCCell> cells;
    /// estimates[cell][replicate]; NaN where the method failed.
    std::vector<std::vector<double>> estimates;

    const MCCell* find(std::string_view parameter, std::string_view method) const {
        for (const auto& c : cells)
            if (c.parameter == parameter && c.method == method) return &c;
        return nullptr;
    }
};

/// Aggregates per-replicate estimates of one parameter into a table cell.
inline MCCell summarize_cell(std::string parameter, std::string method, double truth, std::span<const double> values,
                             std::size_t batches) {
    MCCell c{std::move(parameter), std::move(method), truth};
    std::vector<double> ok;
    for (double v : values)
        if (!std::isnan(v)) ok.push_back(v);
    c.n_excluded = values.size() - ok.size();
    if (ok.empty()) {
        c.estimate = c.bias = c.mse = c.bias_mcse = c.mse_mcse = std::numeric_limits<double>::quiet_NaN();
        return c;
    }
    c.estimate = sample_mean(ok);
    c.bias = c.estimate - truth;
    double mse = 0.0;
    for (double v : ok) mse += (v - truth) * (v - truth);
    c.mse = mse / static_cast<double>(ok.size());
    c.bias_mcse = batch_mean_mcse(values, batches, [truth](std::span<const double> v) { return sample_mean(v) - truth; }).mcse;
    c.mse_mcse = batch_mean_mcse(values, batches, [truth](std::span<const double> v) {
                     double s = 0.0;
                     for (double x : v) s += (x - truth) * (x - truth);
                     return s / static_cast<double>(v.size());
                 }).mcse;
    return c;
}

namespace detail {

// Reported parameters: the coefficients, plus sigma for AFT methods.
inline std::vector<double> method_estimates(Method m, const Dataset& ds, const SimexConfig& simex, const RngStream& rng,
                                            std::size_t n_coef) {
    auto coefs = [&](const ModelFit& f, bool with_scale) {
        if (!f.converged) throw ConvergenceError("fit did not converge");
        auto v = f.coefficients;
        if (with_scale) v.push_back(f.scale);
        return v;
    };
    switch (m) {
        case Method::AdjLM: return coefs(fit_corrected_lm(ds), false);
        case Method::NaiveLM: return coefs(fit_ols(ds, CovariateSource::SurrogateDensity), false);
        case Method::TrueLM: return coefs(fit_ols(ds, CovariateSource::HiddenTruth), false);
        case Method::NaiveAFT: return coefs(fit_aft_lognormal(ds, CovariateSource::SurrogateDensity), true);
        case Method::TrueAFT: return coefs(fit_aft_lognormal(ds, CovariateSource::HiddenTruth), true);
        case Method::PoiSimex:
        case Method::SimexAFT: {
            const auto r = run_simex(ds, m == Method::PoiSimex ? Fitter::LinearModel : Fitter::AftLognormal, simex, rng);
            auto v = r.estimate;
            if (m == Method::PoiSimex) v.resize(n_coef);
            return v;
        }
    }
    throw ParameterError("unknown method");
}

}  // namespace detail

inline std::vector<std::string> study_parameter_names(const ScenarioSpec& s) {
    auto names = coefficient_names(std::vector<std::string>{"z"}, s.z_dim());
    if (s.response == ResponseKind::LognormalAft) names.push_back("sigma");
    return names;
}

/// Runs every requested method on `replicates` simulated datasets.
///
/// Replicate r draws its data from stream (seed, scenario id, r) and its SIMEX
/// noise from a child of that stream, so the summary is the same for any
/// thread count. A method that fails on a replicate is excluded from that
/// method's cells for that replicate only.
inline MCSummary run_study(const StudySpec& raw) {
    validate(raw);
    StudySpec spec = raw;
    spec.scenario = prepare_scenario(spec.scenario);
    spec.simex.threads = 1;

    MCSummary out;
    out.scenario_id = spec.scenario.id;
    out.seed = spec.seed;
    out.spec_hash = config_hash(to_json_value(raw));
    out.replicates = spec.replicates;
    if (spec.methods.empty()) return out;

    const auto names = study_parameter_names(spec.scenario);
    const std::size_t n_coef = 2 + spec.scenario.z_dim();
    const std::size_t np = names.size(), nm = spec.methods.size();
    // est[(method * np + param) * reps + r]
    std::vector<double> est(nm * np * spec.replicates, std::numeric_limits<double>::quiet_NaN());

    parallel_for(spec.replicates, spec.threads, [&](std::size_t r) {
        const RngStream stream(spec.seed, spec.scenario.id, r);
        const Dataset ds = generate_dataset(spec.scenario, stream.child("data"));
        for (std::size_t k = 0; k < nm; ++k) {
            std::vector<double> v;
            try {
                v = detail::method_estimates(spec.methods[k], ds, spec.simex, stream.child("simex"), n_coef);
            } catch (const Error&) {
                continue;
            }
            bool finite = v.size() == np;
            for (double x : v) finite = finite && std::isfinite(x);
            if (!finite) continue;
            for (std::size_t j = 0; j < np; ++j) est[(k * np + j) * spec.replicates + r] = v[j];
        }
    });

    const auto& t = spec.scenario.truth;
    std::vector<double> truth{t.beta0, t.beta_x};
    truth.insert(truth.end(), t.beta_z.begin(), t.beta_z.end());
    if (np > n_coef) truth.push_back(t.sigma_eps);

    // rows grouped by parameter, methods in requested order
    for (std::size_t j = 0; j < np; ++j) {
        for (std::size_t k = 0; k < nm; ++k) {
            std::span<const double> vals(est.data() + (k * np + j) * spec.replicates, spec.replicates);
            out.cells.push_back(summarize_cell(names[j], std::string(to_string(spec.methods[k])), truth[j], vals, spec.batches));
            out.estimates.emplace_back(vals.begin(), vals.end());
        }
    }
    return out;
}

enum class TableFormat { Csv, Text };

namespace detail {

inline std::string fixed4(double v) {
    if (std::isnan(v)) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    // avoid "-0.0000"
    if (std::string(buf) == "-0.0000") return "0.0000";
    return buf;
}

}  // namespace detail

inline constexpr std::string_view kTableHeader = "parameter,method,estimate,mse,mse_mcse,bias,bias_mcse,n_excluded";

/// Renders a summary as CSV (fixed schema, 4 decimals) or as an aligned text
/// table in the familiar Estimate / MSE(MCSE) / Bias(MCSE) layout.
inline std::string emit_table(const MCSummary& s, TableFormat format) {
    using detail::fixed4;
    std::ostringstream os;
    if (format == TableFormat::Csv) {
        os << kTableHeader << '\n';
        for (const auto& c : s.cells)
            os << c.parameter << ',' << c.method << ',' << fixed4(c.estimate) << ',' << fixed4(c.mse) << ','
               << fixed4(c.mse_mcse) << ',' << fixed4(c.bias) << ',' << fixed4(c.bias_mcse) << ',' << c.n_excluded << '\n';
        return os.str();
    }
    os << "scenario: " << s.scenario_id << "  replicates: " << s.replicates << "  seed: " << s.seed
       << "  spec hash: " << s.spec_hash << '\n';
    char line[256];
    std::snprintf(line, sizeof line, "%-10s %-10s %10s %20s %20s %9s\n", "Parameter", "Method", "Estimate", "MSE(MCSE)",
                  "Bias(MCSE)", "Excluded");
    os << line;
    for (const auto& c : s.cells) {
        const std::string mse = fixed4(c.mse) + "(" + fixed4(c.mse_mcse) + ")";
        const std::string bias = fixed4(c.bias) + "(" + fixed4(c.bias_mcse) + ")";
        std::snprintf(line, sizeof line, "%-10s %-10s %10s %20s %20s %9zu\n", c.parameter.c_str(), c.method.c_str(),
                      fixed4(c.estimate).c_str(), mse.c_str(), bias.c_str(), c.n_excluded);
        os << line;
    }
    return os.str();
}

/// Parses CSV written by emit_table. Truth is not part of the schema and is
/// left at 0.
inline std::vector<MCCell> parse_table_csv(std::string_view text) {
    std::istringstream is{std::string(text)};
    std::string line;
    if (!std::getline(is, line) || line != kTableHeader) throw ValidationError("table: missing or unexpected header", 1);
    std::vector<MCCell> cells;
    std::size_t row = 1;
    auto num = [&](const std::string& f, const char* col) {
        if (f == "NA") return std::numeric_limits<double>::quiet_NaN();
        try {
            std::size_t used = 0;
            const double v = std::stod(f, &used);
            if (used != f.size()) throw std::invalid_argument(f);
            return v;
        } catch (const std::exception&) {
            throw ValidationError("table: bad number '" + f + "'", static_cast<long>(row), col);
        }
    };
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() != 8) throw ValidationError("table: expected 8 fields", static_cast<long>(row));
        MCCell c;
        c.parameter = f[0];
        c.method = f[1];
        c.estimate = num(f[2], "estimate");
        c.mse = num(f[3], "mse");
        c.mse_mcse = num(f[4], "mse_mcse");
        c.bias = num(f[5], "bias");
        c.bias_mcse = num(f[6], "bias_mcse");
        c.n_excluded = static_cast<std::size_t>(num(f[7], "n_excluded"));
        cells.push_back(std::move(c));
    }
    return cells;
}

}  // namespace poisimex
