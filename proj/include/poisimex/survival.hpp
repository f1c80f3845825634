#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "poisimex/errors.hpp"

namespace poisimex {

/// Product-limit survival curve, one row per distinct event time.
struct SurvivalCurve {
    std::vector<double> time;
    std::vector<std::size_t> n_risk;
    std::vector<std::size_t> n_event;
    std::vector<double> survival;
    std::vector<double> variance;  // Greenwood
    std::vector<double> lower95;
    std::vector<double> upper95;
    std::optional<double> median;
    std::size_t n_subjects = 0;

    std::size_t steps() const noexcept { return time.size(); }

    /// S(t), right-continuous step function.
    double survival_at(double t) const {
        const auto it = std::upper_bound(time.begin(), time.end(), t);
        if (it == time.begin()) return 1.0;
        return survival[static_cast<std::size_t>(it - time.begin()) - 1];
    }
};

namespace detail {

inline void check_survival_input(std::span<const double> times, std::span<const int> events) {
    if (times.empty()) throw PreconditionError("survival: empty input");
    if (times.size() != events.size()) throw ArityError("survival: times and events differ in length");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] > 0.0) || !std::isfinite(times[i])) throw PreconditionError("survival: times must be positive");
        if (events[i] != 0 && events[i] != 1) throw PreconditionError("survival: event flags must be 0 or 1");
    }
}

}  // namespace detail

/// Kaplan-Meier estimate with Greenwood variance and a 95% log-minus-log band.
/// At tied times events are counted before censorings.
inline SurvivalCurve km_curve(std::span<const double> times, std::span<const int> events) {
    detail::check_survival_input(times, events);
    std::vector<std::size_t> order(times.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

    SurvivalCurve c;
    c.n_subjects = times.size();
    const double z = 1.959963984540054;
    double s = 1.0, gw = 0.0;
    std::size_t at_risk = times.size();
    for (std::size_t i = 0; i < order.size();) {
        const double t = times[order[i]];
        std::size_t d = 0, m = 0;
        for (; i < order.size() && times[order[i]] == t; ++i, ++m) d += static_cast<std::size_t>(events[order[i]]);
        if (d > 0) {
            const double n = static_cast<double>(at_risk), dd = static_cast<double>(d);
            s *= 1.0 - dd / n;
            gw += d < at_risk ? dd / (n * (n - dd)) : std::numeric_limits<double>::infinity();
            c.time.push_back(t);
            c.n_risk.push_back(at_risk);
            c.n_event.push_back(d);
            c.survival.push_back(s);
            if (s > 0.0 && std::isfinite(gw)) {
                c.variance.push_back(s * s * gw);
                const double se = std::sqrt(gw) / std::abs(std::log(s));
                // S^exp(+-z se) on the log(-log S) scale
                c.lower95.push_back(std::pow(s, std::exp(z * se)));
                c.upper95.push_back(std::pow(s, std::exp(-z * se)));
            } else {
                c.variance.push_back(0.0);
                c.lower95.push_back(0.0);
                c.upper95.push_back(0.0);
            }
            if (!c.median && s <= 0.5) c.median = t;
        }
        at_risk -= m;
    }
    return c;
}

/// Times and event flags of one group.
struct SurvivalSample {
    std::string label;
    std::vector<double> times;
    std::vector<int> events;
};

struct LogrankResult {
    double statistic = 0.0;
    std::size_t df = 0;
    double p_value = 1.0;
    std::vector<double> observed;
    std::vector<double> expected;
};

/// Upper tail of the chi-square distribution.
inline double chi_square_sf(double x, double df) {
    if (!(x > 0.0)) return 1.0;
    return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

/// k-sample log-rank test: (O - E)' V^-1 (O - E) on the first k-1 groups,
/// referred to chi-square with k-1 degrees of freedom.
inline LogrankResult logrank_test(std::span<const SurvivalSample> groups) {
    if (groups.size() < 2) throw PreconditionError("log-rank: need at least two groups");
    struct Obs {
        double t;
        int event;
        std::size_t g;
    };
    std::vector<Obs> all;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        detail::check_survival_input(groups[g].times, groups[g].events);
        for (std::size_t i = 0; i < groups[g].times.size(); ++i) all.push_back({groups[g].times[i], groups[g].events[i], g});
    }
    std::stable_sort(all.begin(), all.end(), [](const Obs& a, const Obs& b) { return a.t < b.t; });

    const std::size_t k = groups.size();
    std::vector<double> at_risk(k);
    for (std::size_t g = 0; g < k; ++g) at_risk[g] = static_cast<double>(groups[g].times.size());
    Eigen::VectorXd o_minus_e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    LogrankResult r;
    r.observed.assign(k, 0.0);
    r.expected.assign(k, 0.0);
    double total_events = 0.0;

    std::vector<double> d_g(k), leaving(k);
    for (std::size_t i = 0; i < all.size();) {
        const double t = all[i].t;
        std::fill(d_g.begin(), d_g.end(), 0.0);
        std::fill(leaving.begin(), leaving.end(), 0.0);
        for (; i < all.size() && all[i].t == t; ++i) {
            d_g[all[i].g] += all[i].event;
            leaving[all[i].g] += 1.0;
        }
        const double n = std::accumulate(at_risk.begin(), at_risk.end(), 0.0);
        const double d = std::accumulate(d_g.begin(), d_g.end(), 0.0);
        if (d > 0.0) {
            total_events += d;
            const double f = n > 1.0 ? d * (n - d) / (n - 1.0) : 0.0;
            for (std::size_t g = 0; g < k; ++g) {
                const double e = d * at_risk[g] / n;
                r.observed[g] += d_g[g];
                r.expected[g] += e;
                o_minus_e(static_cast<Eigen::Index>(g)) += d_g[g] - e;
                for (std::size_t h = 0; h < k; ++h) {
                    const double delta = g == h ? 1.0 : 0.0;
                    v(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(h)) +=
                        f * (at_risk[g] / n) * (delta - at_risk[h] / n);
                }
            }
        }
        for (std::size_t g = 0; g < k; ++g) at_risk[g] -= leaving[g];
    }
    if (total_events == 0.0) throw PreconditionError("log-rank: no events in any group");

    const auto m = static_cast<Eigen::Index>(k - 1);
    const Eigen::VectorXd u = o_minus_e.head(m);
    const Eigen::MatrixXd vv = v.topLeftCorner(m, m);
    // pseudo-inverse tolerates a group that is never at risk at an event time
    const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(vv);
    const double stat = u.dot(cod.solve(u));
    r.statistic = std::max(0.0, stat);
    if (r.statistic < 1e-12 * std::max(1.0, total_events)) r.statistic = 0.0;
    r.df = k - 1;
    r.p_value = chi_square_sf(r.statistic, static_cast<double>(r.df));
    return r;
}

/// Curve export: time,n_risk,n_event,survival,lower95,upper95.
inline std::string curve_csv(const SurvivalCurve& c) {
    std::ostringstream os;
    os << "time,n_risk,n_event,survival,lower95,upper95\n";
    char buf[256];
    for (std::size_t i = 0; i < c.steps(); ++i) {
        std::snprintf(buf, sizeof buf, "%.10g,%zu,%zu,%.6f,%.6f,%.6f\n", c.time[i], c.n_risk[i], c.n_event[i], c.survival[i],
                      c.lower95[i], c.upper95[i]);
        os << buf;
    }
    return os.str();
}

}  // namespace poisimex
