#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "poisimex/dataset.hpp"
#include "poisimex/errors.hpp"
#include "poisimex/rng.hpp"
#include "poisimex/scenario.hpp"

namespace poisimex {

/// A parsed CSV file: header plus string cells. Row numbers in diagnostics are
/// 1-based file lines (the header is line 1).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<long> lines;

    std::optional<std::size_t> column(std::string_view name) const {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return j;
        return std::nullopt;
    }
    std::size_t require_column(std::string_view name) const {
        if (auto j = column(name)) return *j;
        throw ValidationError("column '" + std::string(name) + "' not found in header", 1, std::string(name));
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, long lineno) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw ValidationError("unterminated quoted field", lineno);
    out.push_back(std::move(cur));
    return out;
}

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

inline CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    long lineno = 0;
    if (!std::getline(in, line)) throw ValidationError("empty input: a header row is required", 1);
    ++lineno;
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    for (auto& h : detail::split_csv_line(line, lineno)) t.header.push_back(detail::trim(h));
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split_csv_line(line, lineno);
        if (cells.size() != t.header.size())
            throw ValidationError("expected " + std::to_string(t.header.size()) + " fields, found " +
                                      std::to_string(cells.size()),
                                  lineno);
        for (auto& c : cells) c = detail::trim(c);
        t.rows.push_back(std::move(cells));
        t.lines.push_back(lineno);
    }
    return t;
}

inline CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    return read_csv(in);
}

/// Which CSV columns feed which model role.
struct InputSchema {
    std::optional<std::string> response;  ///< linear model response
    std::optional<std::string> time;      ///< survival time (> 0)
    std::optional<std::string> event;     ///< 1 = event, 0 = censored
    std::string count = "count";
    std::optional<std::string> area;      ///< per-row area column
    double constant_area = 1.0;           ///< used when `area` is empty
    std::vector<std::string> covariates;
    std::optional<std::string> group;
    std::optional<std::string> truth;     ///< true density, simulation files only
};

namespace detail {

inline double parse_real(const CsvTable& t, std::size_t r, std::size_t c) {
    const std::string& s = t.rows[r][c];
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
        throw ValidationError("'" + s + "' is not a number", t.lines[r], t.header[c]);
    return v;
}

}  // namespace detail

/// Input bound to the model roles.
struct BoundInput {
    Dataset data;
    std::vector<double> times;       ///< survival times (empty for linear data)
    std::vector<std::string> groups; ///< group labels when a group column is bound
};

enum class ModelKind { Linear, Aft };

/// Builds a dataset from a table. Every violation names the file line and
/// column: non-numeric cells, negative or fractional counts, non-positive
/// areas or times, event flags other than 0/1.
inline BoundInput bind_input(const CsvTable& t, const InputSchema& s, ModelKind model) {
    if (t.rows.empty()) throw ValidationError("no data rows");
    const std::size_t c_count = t.require_column(s.count);
    std::optional<std::size_t> c_area, c_resp, c_time, c_event, c_group, c_truth;
    if (s.area) c_area = t.require_column(*s.area);
    else if (!(s.constant_area > 0.0)) throw ValidationError("constant area must be positive");
    if (model == ModelKind::Linear) {
        if (!s.response) throw ValidationError("linear model needs a response column");
        c_resp = t.require_column(*s.response);
    } else {
        if (!s.time || !s.event) throw ValidationError("AFT model needs time and event columns");
        c_time = t.require_column(*s.time);
        c_event = t.require_column(*s.event);
    }
    if (s.group) c_group = t.require_column(*s.group);
    if (s.truth) c_truth = t.require_column(*s.truth);
    std::vector<std::size_t> c_z;
    for (const auto& name : s.covariates) c_z.push_back(t.require_column(name));

    BoundInput out{Dataset(s.covariates), {}, {}};
    std::vector<double> truth;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        ObservedUnit u;
        const double w = detail::parse_real(t, r, c_count);
        if (w < 0.0 || w != std::floor(w) || w > 9.0e15)
            throw ValidationError("count must be a non-negative integer, got '" + t.rows[r][c_count] + "'", t.lines[r],
                                  t.header[c_count]);
        u.w = static_cast<long>(w);
        u.a = c_area ? detail::parse_real(t, r, *c_area) : s.constant_area;
        if (!(u.a > 0.0)) throw ValidationError("area must be positive", t.lines[r], c_area ? t.header[*c_area] : "area");
        if (c_resp) {
            u.y = detail::parse_real(t, r, *c_resp);
        } else {
            const double time = detail::parse_real(t, r, *c_time);
            if (!(time > 0.0)) throw ValidationError("time must be positive", t.lines[r], t.header[*c_time]);
            const double ev = detail::parse_real(t, r, *c_event);
            if (ev != 0.0 && ev != 1.0) throw ValidationError("event must be 0 or 1", t.lines[r], t.header[*c_event]);
            u.y = std::log(time);
            u.event = static_cast<int>(ev);
            out.times.push_back(time);
        }
        for (std::size_t c : c_z) u.z.push_back(detail::parse_real(t, r, c));
        if (c_truth) truth.push_back(detail::parse_real(t, r, *c_truth));
        if (c_group) out.groups.push_back(t.rows[r][*c_group]);
        out.data.push_back(u);
    }
    if (c_truth) out.data.set_truth(std::move(truth));
    return out;
}

/// Survival columns only (time, event, optional group), for KM summaries.
struct SurvivalInput {
    std::vector<double> times;
    std::vector<int> events;
    std::vector<std::string> groups;
};

inline SurvivalInput bind_survival(const CsvTable& t, const std::string& time_col, const std::string& event_col,
                                   const std::optional<std::string>& group_col) {
    const std::size_t ct = t.require_column(time_col), ce = t.require_column(event_col);
    std::optional<std::size_t> cg;
    if (group_col) cg = t.require_column(*group_col);
    SurvivalInput out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const double time = detail::parse_real(t, r, ct);
        if (!(time > 0.0)) throw ValidationError("time must be positive", t.lines[r], t.header[ct]);
        const double ev = detail::parse_real(t, r, ce);
        if (ev != 0.0 && ev != 1.0) throw ValidationError("event must be 0 or 1", t.lines[r], t.header[ce]);
        out.times.push_back(time);
        out.events.push_back(static_cast<int>(ev));
        if (cg) out.groups.push_back(t.rows[r][*cg]);
    }
    if (out.times.empty()) throw ValidationError("no data rows");
    return out;
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_exact(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Settings of the synthetic cohort generator.
///
/// The layout mimics a tumour-microarray survival cohort: one or two 0.6 mm
/// cores per patient, an immune-cell count per core set, binary clinical
/// covariates, and log-normal survival with exponential censoring.
struct SyntheticCohortSpec {
    std::size_t n = 716;
    double x_shape = 10.0;        ///< true density ~ Gamma(shape, scale), cells per mm^2
    double x_scale = 10.0;
    double core_radius = 0.3;     ///< mm
    double two_core_fraction = 0.5;
    double beta0 = 4.8;
    double beta_x = 0.015;
    double beta_age60 = -0.21;
    double beta_debulk_yes = -0.60;
    double beta_debulk_na = -0.47;
    double beta_figo34 = -0.66;
    double sigma = 1.06;
    double p_age60 = 416.0 / 716.0;
    double p_debulk_yes = 286.0 / 716.0;
    double p_debulk_na = 164.0 / 716.0;
    double p_figo34 = 584.0 / 716.0;
    double censoring_fraction = 209.0 / 716.0;
};

inline const std::vector<std::string>& synthetic_covariates() {
    static const std::vector<std::string> names{"age60", "debulk_yes", "debulk_na", "figo34"};
    return names;
}

/// Schema matching the generator's columns.
inline InputSchema synthetic_schema() {
    InputSchema s;
    s.time = "time";
    s.event = "event";
    s.count = "count";
    s.area = "area";
    s.covariates = synthetic_covariates();
    s.group = "marker_high";
    s.truth = "x_true";
    return s;
}

struct SyntheticCohort {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::string to_csv() const {
        std::string out;
        for (std::size_t j = 0; j < header.size(); ++j) out += (j ? "," : "") + header[j];
        out += '\n';
        for (const auto& r : rows) {
            for (std::size_t j = 0; j < r.size(); ++j) out += (j ? "," : "") + format_exact(r[j]);
            out += '\n';
        }
        return out;
    }
};

/// Simulates a cohort with known biomarker effect `beta_x`.
inline SyntheticCohort generate_synthetic_cohort(const SyntheticCohortSpec& spec, const RngStream& rng) {
    if (spec.n == 0) throw ParameterError("synthetic cohort: n must be positive");
    validate(Law{GammaLaw{spec.x_shape, spec.x_scale}});
    if (!(spec.sigma > 0.0) || !(spec.core_radius > 0.0)) throw ParameterError("synthetic cohort: sigma and radius must be positive");
    if (!(spec.censoring_fraction >= 0.0 && spec.censoring_fraction < 1.0))
        throw ParameterError("synthetic cohort: censoring fraction must lie in [0,1)");
    const double core_area = std::numbers::pi * spec.core_radius * spec.core_radius;
    auto eng = rng.child("cohort").engine();
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> norm(0.0, 1.0);
    std::gamma_distribution<double> gamma(spec.x_shape, spec.x_scale);

    struct Latent {
        double x, area, log_t;
        long w;
        int age, dyes, dna, figo;
    };
    std::vector<Latent> units(spec.n);
    std::vector<double> log_times(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        Latent& u = units[i];
        u.age = unif(eng) < spec.p_age60;
        const double d = unif(eng);
        u.dyes = d < spec.p_debulk_yes;
        u.dna = !u.dyes && d < spec.p_debulk_yes + spec.p_debulk_na;
        u.figo = unif(eng) < spec.p_figo34;
        u.x = gamma(eng);
        u.area = core_area * (unif(eng) < spec.two_core_fraction ? 2.0 : 1.0);
        u.w = std::poisson_distribution<long>(u.x * u.area)(eng);
        u.log_t = spec.beta0 + spec.beta_x * u.x + spec.beta_age60 * u.age + spec.beta_debulk_yes * u.dyes +
                  spec.beta_debulk_na * u.dna + spec.beta_figo34 * u.figo + spec.sigma * norm(eng);
        log_times[i] = u.log_t;
    }
    // censoring rate calibrated on this cohort's own latent times
    const double rate = spec.censoring_fraction > 0.0 ? exponential_censoring_rate(log_times, spec.censoring_fraction) : 0.0;
    auto ceng = rng.child("censoring").engine();
    // marker_high: observed density above the cohort median
    std::vector<double> dens(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) dens[i] = static_cast<double>(units[i].w) / units[i].area;
    std::vector<double> sorted = dens;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(spec.n / 2), sorted.end());
    const double median = sorted[spec.n / 2];
    SyntheticCohort out;
    out.header = {"id", "time", "event", "count", "area", "age60", "debulk_yes", "debulk_na", "figo34", "marker_high", "x_true"};
    for (std::size_t i = 0; i < spec.n; ++i) {
        const Latent& u = units[i];
        double time = std::exp(u.log_t);
        int event = 1;
        if (rate > 0.0) {
            const double c = std::exponential_distribution<double>(rate)(ceng);
            if (c < time) {
                time = std::max(c, 1e-12);
                event = 0;
            }
        }
        out.rows.push_back({static_cast<double>(i + 1), time, static_cast<double>(event), static_cast<double>(u.w), u.area,
                            static_cast<double>(u.age), static_cast<double>(u.dyes), static_cast<double>(u.dna),
                            static_cast<double>(u.figo), dens[i] > median ? 1.0 : 0.0, u.x});
    }
    return out;
}

}  // namespace poisimex
