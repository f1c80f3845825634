#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "poisimex/catalog.hpp"
#include "poisimex/config.hpp"
#include "poisimex/errors.hpp"
#include "poisimex/io.hpp"
#include "poisimex/linear_model.hpp"
#include "poisimex/normal.hpp"
#include "poisimex/simex.hpp"
#include "poisimex/study.hpp"
#include "poisimex/survival.hpp"

#ifndef POISIMEX_VERSION
#define POISIMEX_VERSION "0.1.0"
#endif

// Library side of the command-line tool. Each command reads its inputs,
// writes its outputs plus a "<output>.provenance" side-car, and returns an
// exit code: 0 success, 1 validation error, 2 numerical failure.

namespace poisimex {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitNumerical = 2 };

namespace detail {

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << text;
    if (!out) throw ValidationError("error writing '" + path + "'");
}

inline std::string provenance_text(const std::string& command, std::uint64_t seed, const json& config,
                                   const std::string& status, const std::vector<std::string>& warnings) {
    std::ostringstream os;
    os << "tool: poisimex " << POISIMEX_VERSION << '\n'
       << "command: " << command << '\n'
       << "seed: " << seed << '\n'
       << "config_hash: " << config_hash(config) << '\n'
       << "config: " << config.dump() << '\n'
       << "status: " << status << '\n';
    for (const auto& w : warnings) os << "warning: " << w << '\n';
    return os.str();
}

inline std::string num(double v) {
    if (std::isnan(v)) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.8g", v);
    return buf;
}

}  // namespace detail

/// Maps an exception to the documented exit code and prints a diagnostic.
template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const ValidationError& e) {
        err << "error";
        if (e.row() >= 0) err << " (line " << e.row();
        if (!e.column().empty()) err << (e.row() >= 0 ? ", " : " (") << "column '" << e.column() << "'";
        if (e.row() >= 0 || !e.column().empty()) err << ")";
        err << ": " << e.what() << '\n';
        return kExitValidation;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const json::exception& e) {
        err << "error: malformed configuration: " << e.what() << '\n';
        return kExitValidation;
    }
}

// ---------------------------------------------------------------- fit

enum class Correction { None, PoiSimex };

struct FitOptions {
    std::string input;
    std::string output;
    InputSchema schema;
    ModelKind model = ModelKind::Aft;
    Correction correction = Correction::PoiSimex;
    SimexConfig simex = [] {
        SimexConfig c;
        c.variance_method = VarianceMethod::Difference;
        return c;
    }();
    /// Adds the bootstrap standard error column (simex.bootstrap_reps resamples).
    bool bootstrap = false;
};

/// One row of the coefficient table.
struct FitRow {
    std::string parameter;
    double naive_estimate = 0.0;
    double naive_se = 0.0;
    double naive_p = 1.0;
    double estimate = 0.0;
    double se = 0.0;
    double se_bootstrap = std::numeric_limits<double>::quiet_NaN();
    double p = 1.0;
    double abs_rel_pct_change = 0.0;
};

struct FitReport {
    std::vector<FitRow> rows;
    std::size_t n = 0;
    std::size_t events = 0;
    bool converged = true;
    std::vector<std::string> warnings;

    const FitRow& row(std::string_view name) const {
        for (const auto& r : rows)
            if (r.parameter == name) return r;
        throw ValidationError("no parameter '" + std::string(name) + "' in report");
    }

    /// Naive and corrected columns side by side; the scale row carries no p-value.
    std::string to_csv() const {
        using detail::num;
        std::ostringstream os;
        os << "parameter,naive_estimate,naive_se,naive_p,estimate,se,se_bootstrap,p,abs_rel_pct_change\n";
        for (const auto& r : rows)
            os << r.parameter << ',' << num(r.naive_estimate) << ',' << num(r.naive_se) << ',' << num(r.naive_p) << ','
               << num(r.estimate) << ',' << num(r.se) << ',' << num(r.se_bootstrap) << ',' << num(r.p) << ','
               << num(r.abs_rel_pct_change) << '\n';
        return os.str();
    }
};

inline double wald_p(double estimate, double se) {
    if (!(se > 0.0) || !std::isfinite(se)) return std::numeric_limits<double>::quiet_NaN();
    return normal::two_sided_p(estimate / se);
}

/// Fits the naive model and, when requested, its POI-SIMEX correction.
///
/// Corrected SEs come from the difference-extrapolation variance; when that is
/// unavailable (fewer than three positive differences) the column is NA and
/// the bootstrap SE, if computed, is used for the p-value.
inline FitReport fit_report(const Dataset& ds, ModelKind model, Correction correction, const SimexConfig& simex_cfg,
                            bool bootstrap) {
    const Fitter fitter = model == ModelKind::Aft ? Fitter::AftLognormal : Fitter::LinearModel;
    if (model == ModelKind::Aft && ds.event_count() == 0) throw PreconditionError("all observations are censored");
    FitReport rep;
    rep.n = ds.size();
    rep.events = ds.event_count();
    const ModelFit naive = fit_model(fitter, ds, CovariateSource::SurrogateDensity);
    rep.converged = naive.converged;
    if (!naive.converged) rep.warnings.push_back("naive fit did not converge");
    const auto names = naive.parameter_names();
    const auto est0 = naive.parameters();
    const auto var0 = naive.parameter_variances();

    std::vector<double> est = est0, var = var0, var_boot(names.size(), std::numeric_limits<double>::quiet_NaN());
    if (correction == Correction::PoiSimex) {
        SimexConfig cfg = simex_cfg;
        validate(cfg);
        const VarianceMethod wanted = cfg.variance_method;
        cfg.variance_method = VarianceMethod::None;
        const SimexResult r = run_simex(ds, fitter, cfg);
        rep.warnings.insert(rep.warnings.end(), r.warnings.begin(), r.warnings.end());
        est = r.estimate;
        var.assign(names.size(), std::numeric_limits<double>::quiet_NaN());
        if (wanted != VarianceMethod::None) {
            try {
                var = simex_variance_difference(r, cfg, &rep.warnings);
            } catch (const NumericalError& e) {
                rep.warnings.push_back(e.what());
            }
        }
        if (bootstrap || wanted == VarianceMethod::Bootstrap)
            var_boot = simex_variance_bootstrap(ds, fitter, cfg, RngStream(cfg.seed, "simex", 0));
    }

    for (std::size_t j = 0; j < names.size(); ++j) {
        FitRow row;
        row.parameter = names[j];
        row.naive_estimate = est0[j];
        row.naive_se = std::sqrt(var0[j]);
        row.estimate = est[j];
        row.se = std::sqrt(var[j]);
        row.se_bootstrap = std::sqrt(var_boot[j]);
        const bool is_scale = j + 1 == names.size();
        row.naive_p = is_scale ? std::numeric_limits<double>::quiet_NaN() : wald_p(row.naive_estimate, row.naive_se);
        const double se_for_p = std::isfinite(row.se) ? row.se : row.se_bootstrap;
        row.p = is_scale ? std::numeric_limits<double>::quiet_NaN() : wald_p(row.estimate, se_for_p);
        row.abs_rel_pct_change =
            est0[j] != 0.0 ? 100.0 * std::abs((est[j] - est0[j]) / est0[j]) : std::numeric_limits<double>::quiet_NaN();
        rep.rows.push_back(row);
    }
    return rep;
}

inline json to_json_value(const InputSchema& s) {
    auto opt = [](const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); };
    return {{"response", opt(s.response)}, {"time", opt(s.time)},       {"event", opt(s.event)},
            {"count", s.count},            {"area", opt(s.area)},       {"constant_area", s.constant_area},
            {"covariates", s.covariates},  {"group", opt(s.group)}};
}

inline json to_json_value(const FitOptions& o) {
    json simex = to_json_value(o.simex);
    return {{"input", o.input},
            {"schema", to_json_value(o.schema)},
            {"model", o.model == ModelKind::Aft ? "aft" : "lm"},
            {"correction", o.correction == Correction::PoiSimex ? "poi-simex" : "none"},
            {"simex", simex},
            {"bootstrap", o.bootstrap}};
}

/// `fit`: coefficient report for one dataset.
inline int cmd_fit(const FitOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (opt.correction == Correction::PoiSimex) validate(opt.simex);
        if (opt.output.empty()) throw ValidationError("an output path is required");
        const CsvTable table = read_csv_file(opt.input);
        InputSchema schema = opt.schema;
        schema.group.reset();
        schema.truth.reset();
        const BoundInput in = bind_input(table, schema, opt.model);
        const json config = to_json_value(opt);
        FitReport rep;
        int code = kExitOk;
        std::string status = "ok";
        try {
            rep = fit_report(in.data, opt.model, opt.correction, opt.simex, opt.bootstrap);
        } catch (const NumericalError& e) {
            detail::write_file(opt.output + ".provenance",
                               detail::provenance_text("fit", opt.simex.seed, config, std::string("failed: ") + e.what(), {}));
            throw;
        }
        if (!rep.converged) {
            status = "not converged (partial report)";
            code = kExitNumerical;
        }
        detail::write_file(opt.output, rep.to_csv());
        detail::write_file(opt.output + ".provenance", detail::provenance_text("fit", opt.simex.seed, config, status, rep.warnings));
        for (const auto& w : rep.warnings) err << "warning: " << w << '\n';
        out << "fitted " << rep.n << " units (" << rep.events << " events); report written to " << opt.output << '\n';
        return code;
    });
}

// ----------------------------------------------------------- simulate

struct SimulateOptions {
    std::string scenario;  ///< catalog id or alias, or a JSON spec file path
    std::optional<std::size_t> n;
    std::optional<std::size_t> replicates;
    std::optional<std::size_t> batches;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> B;
    std::vector<std::string> methods;
    unsigned threads = 1;
    std::string output;
    bool text = false;  ///< also write "<output>.txt" with the aligned table
};

/// Resolves a scenario argument: catalog id/alias, or a JSON file holding a
/// study spec ({"scenario": ...}) or a bare scenario spec.
inline StudySpec resolve_study(const std::string& arg) {
    StudySpec spec;
    std::ifstream f(arg);
    if (f && arg.find(".json") != std::string::npos) {
        const json j = json::parse(f);
        if (j.contains("scenario")) return study_from_json(j);
        spec.scenario = scenario_from_json(j);
    } else {
        spec.scenario = find_scenario(arg);
    }
    spec.methods = default_methods(spec.scenario);
    return spec;
}

/// `simulate`: Monte Carlo study of one scenario.
inline int cmd_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (opt.output.empty()) throw ValidationError("an output path is required");
        StudySpec spec = resolve_study(opt.scenario);
        if (opt.n) spec.scenario.n = *opt.n;
        if (opt.replicates) spec.replicates = *opt.replicates;
        if (opt.batches) spec.batches = *opt.batches;
        if (opt.seed) spec.seed = *opt.seed;
        if (opt.B) spec.simex.B = *opt.B;
        if (!opt.methods.empty()) {
            spec.methods.clear();
            for (const auto& m : opt.methods) spec.methods.push_back(parse_method(m));
        }
        spec.threads = opt.threads;
        validate(spec);
        const MCSummary s = run_study(spec);
        detail::write_file(opt.output, emit_table(s, TableFormat::Csv));
        if (opt.text) detail::write_file(opt.output + ".txt", emit_table(s, TableFormat::Text));
        std::vector<std::string> notes;
        for (const auto& c : s.cells)
            if (c.n_excluded > 0)
                notes.push_back(c.method + "/" + c.parameter + ": " + std::to_string(c.n_excluded) + " replicates excluded");
        detail::write_file(opt.output + ".provenance", detail::provenance_text("simulate", spec.seed, to_json_value(spec), "ok", notes));
        out << emit_table(s, TableFormat::Text);
        return kExitOk;
    });
}

// ----------------------------------------------------------------- km

struct KmOptions {
    std::string input;
    std::string time = "time";
    std::string event = "event";
    std::optional<std::string> group;
    std::string output;  ///< prefix: <prefix>_<group>.csv and <prefix>_summary.csv
};

struct KmSummary {
    std::vector<std::string> labels;
    std::vector<SurvivalCurve> curves;
    std::optional<LogrankResult> logrank;
    std::vector<std::string> warnings;

    std::string to_csv() const {
        std::ostringstream os;
        os << "group,n,events,median\n";
        for (std::size_t g = 0; g < labels.size(); ++g) {
            const std::size_t n = curves[g].n_subjects;
            std::size_t ev = 0;
            for (auto e : curves[g].n_event) ev += e;
            os << labels[g] << ',' << n << ',' << ev << ',' << (curves[g].median ? detail::num(*curves[g].median) : "NA") << '\n';
        }
        if (logrank)
            os << "# logrank statistic=" << detail::num(logrank->statistic) << " df=" << logrank->df
               << " p=" << detail::num(logrank->p_value) << '\n';
        return os.str();
    }
};

/// Curves per group (a single pooled curve without a group column) and the
/// log-rank test across groups.
inline KmSummary km_summary(const SurvivalInput& in) {
    KmSummary s;
    std::map<std::string, SurvivalSample> groups;
    if (in.groups.empty()) {
        groups["all"] = {"all", in.times, in.events};
    } else {
        for (std::size_t i = 0; i < in.times.size(); ++i) {
            auto& g = groups[in.groups[i]];
            g.label = in.groups[i];
            g.times.push_back(in.times[i]);
            g.events.push_back(in.events[i]);
        }
    }
    std::vector<SurvivalSample> samples;
    for (auto& [label, g] : groups) {
        s.labels.push_back(label);
        s.curves.push_back(km_curve(g.times, g.events));
        samples.push_back(std::move(g));
    }
    if (samples.size() >= 2) s.logrank = logrank_test(samples);
    else if (!in.groups.empty()) s.warnings.push_back("only one group present; log-rank test skipped");
    return s;
}

inline int cmd_km(const KmOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (opt.output.empty()) throw ValidationError("an output prefix is required");
        const CsvTable table = read_csv_file(opt.input);
        const SurvivalInput in = bind_survival(table, opt.time, opt.event, opt.group);
        const KmSummary s = km_summary(in);
        for (std::size_t g = 0; g < s.labels.size(); ++g)
            detail::write_file(opt.output + "_" + s.labels[g] + ".csv", curve_csv(s.curves[g]));
        detail::write_file(opt.output + "_summary.csv", s.to_csv());
        const json config{{"input", opt.input}, {"time", opt.time}, {"event", opt.event},
                          {"group", opt.group ? json(*opt.group) : json(nullptr)}};
        detail::write_file(opt.output + "_summary.csv.provenance", detail::provenance_text("km", 0, config, "ok", s.warnings));
        for (const auto& w : s.warnings) err << "warning: " << w << '\n';
        out << s.to_csv();
        return kExitOk;
    });
}

// -------------------------------------------------------- attenuation

struct AttenuationOptions {
    double shape = 1.0;
    double scale = 2.0;
    double area = 1.0;
    double beta_x = 1.0;
};

inline int cmd_attenuation(const AttenuationOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const double w = attenuation_factor(gamma_attenuation_inputs(opt.shape, opt.scale, opt.area));
        out << "omega," << detail::num(w) << '\n' << "beta_x," << detail::num(opt.beta_x) << '\n'
            << "naive_slope_limit," << detail::num(w * opt.beta_x) << '\n';
        return kExitOk;
    });
}

// ----------------------------------------------------- gen-synthetic

struct GenSyntheticOptions {
    SyntheticCohortSpec spec;
    std::uint64_t seed = 1;
    std::string output;
};

inline json to_json_value(const SyntheticCohortSpec& s) {
    return {{"n", s.n},
            {"x_shape", s.x_shape},
            {"x_scale", s.x_scale},
            {"core_radius", s.core_radius},
            {"two_core_fraction", s.two_core_fraction},
            {"beta0", s.beta0},
            {"beta_x", s.beta_x},
            {"beta_age60", s.beta_age60},
            {"beta_debulk_yes", s.beta_debulk_yes},
            {"beta_debulk_na", s.beta_debulk_na},
            {"beta_figo34", s.beta_figo34},
            {"sigma", s.sigma},
            {"censoring_fraction", s.censoring_fraction}};
}

inline int cmd_gen_synthetic(const GenSyntheticOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (opt.output.empty()) throw ValidationError("an output path is required");
        const SyntheticCohort c = generate_synthetic_cohort(opt.spec, RngStream(opt.seed, "synthetic-cohort", 0));
        detail::write_file(opt.output, c.to_csv());
        detail::write_file(opt.output + ".provenance",
                           detail::provenance_text("gen-synthetic", opt.seed, to_json_value(opt.spec), "ok", {}));
        out << "wrote " << c.rows.size() << " rows to " << opt.output << '\n';
        return kExitOk;
    });
}

}  // namespace poisimex
