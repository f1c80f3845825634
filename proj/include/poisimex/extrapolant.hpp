#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "poisimex/errors.hpp"

namespace poisimex {

enum class ExtrapolantKind { Linear, Quadratic, Rational };

inline std::string_view to_string(ExtrapolantKind k) {
    switch (k) {
        case ExtrapolantKind::Linear: return "linear";
        case ExtrapolantKind::Quadratic: return "quadratic";
        case ExtrapolantKind::Rational: return "nonlinear";
    }
    return "?";
}

inline ExtrapolantKind parse_extrapolant(std::string_view s) {
    if (s == "linear") return ExtrapolantKind::Linear;
    if (s == "quadratic") return ExtrapolantKind::Quadratic;
    if (s == "nonlinear" || s == "rational" || s == "nonlinear-rational") return ExtrapolantKind::Rational;
    throw ParameterError("unknown extrapolant '" + std::string(s) + "' (linear|quadratic|nonlinear)");
}

inline std::size_t parameter_count(ExtrapolantKind k) { return k == ExtrapolantKind::Linear ? 2 : 3; }

/// A fitted extrapolation curve.
///
/// linear:    c0 + c1 l
/// quadratic: c0 + c1 l + c2 l^2
/// rational:  c0 + c1 / (c2 + l)
struct Curve {
    ExtrapolantKind kind = ExtrapolantKind::Quadratic;
    std::vector<double> c;
};

struct ExtrapolantPoint {
    double lambda = 0.0;
    double value = 0.0;
};

/// Thrown when the rational fit does not converge; carries the linear fit.
class ExtrapolationError : public ConvergenceError {
public:
    ExtrapolationError(const std::string& what, Curve fallback) : ConvergenceError(what), fallback_(std::move(fallback)) {}
    const Curve& fallback() const noexcept { return fallback_; }

private:
    Curve fallback_;
};

/// Evaluates the curve at `lambda` (default: the error-free point -1).
inline double extrapolate(const Curve& curve, double lambda = -1.0) {
    const auto& c = curve.c;
    if (c.size() != parameter_count(curve.kind)) throw ArityError("extrapolate: curve has the wrong number of coefficients");
    switch (curve.kind) {
        case ExtrapolantKind::Linear: return c[0] + c[1] * lambda;
        case ExtrapolantKind::Quadratic: return c[0] + c[1] * lambda + c[2] * lambda * lambda;
        case ExtrapolantKind::Rational: {
            const double den = c[2] + lambda;
            if (std::abs(den) <= 1e-12 * std::max(1.0, std::abs(c[2])))
                throw SingularityError("rational extrapolant has a pole at the target lambda");
            return c[0] + c[1] / den;
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

namespace detail {

inline Curve polynomial_fit(std::span<const ExtrapolantPoint> pts, int degree, ExtrapolantKind kind) {
    const auto n = static_cast<Eigen::Index>(pts.size());
    Eigen::MatrixXd v(n, degree + 1);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double pw = 1.0;
        for (int k = 0; k <= degree; ++k, pw *= pts[static_cast<std::size_t>(i)].lambda) v(i, k) = pw;
        y(i) = pts[static_cast<std::size_t>(i)].value;
    }
    const Eigen::VectorXd c = v.colPivHouseholderQr().solve(y);
    return Curve{kind, std::vector<double>(c.data(), c.data() + c.size())};
}

struct RationalProfile {
    double c0 = 0.0, c1 = 0.0, rss = std::numeric_limits<double>::infinity();
};

// For fixed pole offset c2 the model is linear in (c0, c1).
inline RationalProfile rational_profile(std::span<const ExtrapolantPoint> pts, double c2) {
    double s1 = 0, su = 0, suu = 0, sy = 0, suy = 0;
    for (const auto& p : pts) {
        const double u = 1.0 / (c2 + p.lambda);
        s1 += 1.0;
        su += u;
        suu += u * u;
        sy += p.value;
        suy += u * p.value;
    }
    RationalProfile r;
    const double det = s1 * suu - su * su;
    if (!(std::abs(det) > 1e-300)) return r;
    r.c1 = (s1 * suy - su * sy) / det;
    r.c0 = (sy - r.c1 * su) / s1;
    r.rss = 0.0;
    for (const auto& p : pts) {
        const double e = p.value - r.c0 - r.c1 / (c2 + p.lambda);
        r.rss += e * e;
    }
    return r;
}

}  // namespace detail

/// Least-squares fit of the extrapolant through (lambda, value) points.
///
/// The rational form is fitted by variable projection: c2 is profiled over a
/// log-spaced grid of offsets beyond the smallest lambda, refined by golden
/// section, then (c0, c1, c2) are polished jointly by Gauss-Newton. An optimum
/// on the grid boundary (curve indistinguishable from a line, or a pole at the
/// data) is reported as non-convergence with the linear fit attached.
inline Curve fit_extrapolant(std::span<const ExtrapolantPoint> pts, ExtrapolantKind kind) {
    std::vector<double> distinct;
    for (const auto& p : pts) {
        if (!std::isfinite(p.lambda) || !std::isfinite(p.value)) throw ParameterError("extrapolant: non-finite point");
        if (std::find(distinct.begin(), distinct.end(), p.lambda) == distinct.end()) distinct.push_back(p.lambda);
    }
    if (distinct.size() < parameter_count(kind))
        throw ArityError("extrapolant '" + std::string(to_string(kind)) + "' needs at least " +
                         std::to_string(parameter_count(kind)) + " distinct lambda values");
    switch (kind) {
        case ExtrapolantKind::Linear: return detail::polynomial_fit(pts, 1, kind);
        case ExtrapolantKind::Quadratic: return detail::polynomial_fit(pts, 2, kind);
        case ExtrapolantKind::Rational: break;
    }

    const Curve linear = detail::polynomial_fit(pts, 1, ExtrapolantKind::Linear);
    const double lmin = *std::min_element(distinct.begin(), distinct.end());
    const double lmax = *std::max_element(distinct.begin(), distinct.end());
    const double span = std::max(lmax - lmin, 1e-8);
    // offset d = c2 + lmin > 0 keeps the pole left of every data point
    const double log_lo = std::log(1e-4 * span), log_hi = std::log(1e4 * span);
    auto rss_at = [&](double t) { return detail::rational_profile(pts, std::exp(t) - lmin).rss; };

    constexpr int grid = 400;
    int best_k = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= grid; ++k) {
        const double t = log_lo + (log_hi - log_lo) * k / grid;
        const double r = rss_at(t);
        if (r < best) {
            best = r;
            best_k = k;
        }
    }
    double total = 0.0, mean = 0.0;
    for (const auto& p : pts) mean += p.value / static_cast<double>(pts.size());
    for (const auto& p : pts) total += (p.value - mean) * (p.value - mean);
    const bool flat = total <= 1e-28 * std::max(1.0, mean * mean);
    if (flat) return Curve{ExtrapolantKind::Rational, {mean, 0.0, 1.0 - lmin + span}};
    if (best_k == 0 || best_k == grid)
        throw ExtrapolationError("rational extrapolant did not converge (optimum at the search boundary)", linear);

    const double step = (log_hi - log_lo) / grid;
    double a = log_lo + step * (best_k - 1), b = log_lo + step * (best_k + 1);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = rss_at(x1), f2 = rss_at(x2);
    for (int it = 0; it < 200 && b - a > 1e-14 * std::max(1.0, std::abs(a)); ++it) {
        if (f1 < f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - gr * (b - a); f1 = rss_at(x1);
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + gr * (b - a); f2 = rss_at(x2);
        }
    }
    double c2 = std::exp(0.5 * (a + b)) - lmin;
    auto prof = detail::rational_profile(pts, c2);
    Eigen::Vector3d c(prof.c0, prof.c1, c2);

    // Gauss-Newton polish on all three coefficients
    double rss = prof.rss;
    for (int it = 0; it < 50; ++it) {
        const auto n = static_cast<Eigen::Index>(pts.size());
        Eigen::MatrixXd jac(n, 3);
        Eigen::VectorXd r(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double den = c(2) + pts[static_cast<std::size_t>(i)].lambda;
            r(i) = pts[static_cast<std::size_t>(i)].value - (c(0) + c(1) / den);
            jac(i, 0) = 1.0;
            jac(i, 1) = 1.0 / den;
            jac(i, 2) = -c(1) / (den * den);
        }
        const Eigen::Vector3d delta = jac.colPivHouseholderQr().solve(r);
        if (!delta.allFinite()) break;
        Eigen::Vector3d trial = c + delta;
        if (trial(2) + lmin <= 0.0) break;
        double trial_rss = 0.0;
        for (const auto& p : pts) {
            const double e = p.value - (trial(0) + trial(1) / (trial(2) + p.lambda));
            trial_rss += e * e;
        }
        if (!(trial_rss <= rss)) break;
        const bool done = delta.norm() <= 1e-15 * (1.0 + c.norm());
        c = trial;
        rss = trial_rss;
        if (done) break;
    }
    return Curve{ExtrapolantKind::Rational, {c(0), c(1), c(2)}};
}

}  // namespace poisimex
