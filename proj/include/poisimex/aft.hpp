#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "poisimex/dataset.hpp"
#include "poisimex/errors.hpp"
#include "poisimex/linear_model.hpp"
#include "poisimex/normal.hpp"

namespace poisimex {

struct AftOptions {
    int max_iterations = 500;
    double gradient_tolerance = 1e-8;
};

namespace detail {

/// Right-censored normal log-likelihood on the log-time scale, parameters
/// (beta, log sigma), with analytic gradient and Hessian.
class LognormalAftObjective {
public:
    LognormalAftObjective(const Eigen::MatrixXd& x, std::span<const double> y, std::span<const int> event)
        : x_(x), y_(y), event_(event) {}

    Eigen::Index dim() const { return x_.cols() + 1; }

    double value(const Eigen::VectorXd& theta) const {
        const Eigen::Index p = x_.cols();
        const double tau = theta(p);
        const double sigma = std::exp(tau);
        const Eigen::VectorXd mu = x_ * theta.head(p);
        double ll = 0.0;
        for (Eigen::Index i = 0; i < x_.rows(); ++i) {
            const double z = (y_[static_cast<std::size_t>(i)] - mu(i)) / sigma;
            ll += event_[static_cast<std::size_t>(i)] ? normal::log_pdf(z) - tau : normal::log_sf(z);
        }
        return ll;
    }

    double evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const {
        const Eigen::Index p = x_.cols();
        const double tau = theta(p);
        const double sigma = std::exp(tau);
        const Eigen::VectorXd mu = x_ * theta.head(p);
        grad.setZero(p + 1);
        hess.setZero(p + 1, p + 1);
        Eigen::VectorXd w_mm(x_.rows());
        Eigen::VectorXd w_mt(x_.rows());
        double ll = 0.0, g_tau = 0.0, h_tt = 0.0;
        Eigen::VectorXd d_mu(x_.rows());
        for (Eigen::Index i = 0; i < x_.rows(); ++i) {
            const double z = (y_[static_cast<std::size_t>(i)] - mu(i)) / sigma;
            if (event_[static_cast<std::size_t>(i)]) {
                ll += normal::log_pdf(z) - tau;
                d_mu(i) = z / sigma;
                g_tau += z * z - 1.0;
                w_mm(i) = -1.0 / (sigma * sigma);
                w_mt(i) = -2.0 * z / sigma;
                h_tt += -2.0 * z * z;
            } else {
                ll += normal::log_sf(z);
                const double h = normal::hazard(z);
                const double hp = h * (h - z);
                d_mu(i) = h / sigma;
                g_tau += h * z;
                w_mm(i) = -hp / (sigma * sigma);
                w_mt(i) = (-z * hp - h) / sigma;
                h_tt += -z * (hp * z + h);
            }
        }
        grad.head(p) = x_.transpose() * d_mu;
        grad(p) = g_tau;
        hess.topLeftCorner(p, p) = x_.transpose() * w_mm.asDiagonal() * x_;
        const Eigen::VectorXd cross = x_.transpose() * w_mt;
        hess.block(0, p, p, 1) = cross;
        hess.block(p, 0, 1, p) = cross.transpose();
        hess(p, p) = h_tt;
        return ll;
    }

private:
    const Eigen::MatrixXd& x_;
    std::span<const double> y_;
    std::span<const int> event_;
};

/// Damped Newton ascent. Returns true when the gradient test is met.
inline bool newton_ascent(const LognormalAftObjective& f, Eigen::VectorXd& theta, const AftOptions& opt, int& iters) {
    const Eigen::Index d = f.dim();
    Eigen::VectorXd g(d);
    Eigen::MatrixXd h(d, d);
    double ll = f.evaluate(theta, g, h);
    if (!std::isfinite(ll)) return false;
    for (; iters < opt.max_iterations; ++iters) {
        if (g.norm() < opt.gradient_tolerance) return true;
        Eigen::MatrixXd info = -h;
        double damping = 0.0;
        Eigen::VectorXd step;
        for (int attempt = 0; attempt < 60; ++attempt) {
            Eigen::MatrixXd m = info;
            m.diagonal().array() += damping;
            Eigen::LLT<Eigen::MatrixXd> llt(m);
            if (llt.info() == Eigen::Success) {
                step = llt.solve(g);
                break;
            }
            damping = damping == 0.0 ? 1e-8 * std::max(1.0, info.diagonal().cwiseAbs().maxCoeff()) : damping * 10.0;
        }
        if (step.size() == 0 || !step.allFinite()) return false;
        // cap the log-sigma move so a bad step cannot overflow exp()
        const double cap = std::abs(step(d - 1)) > 5.0 ? 5.0 / std::abs(step(d - 1)) : 1.0;
        double t = cap;
        bool improved = false;
        Eigen::VectorXd trial;
        for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
            trial = theta + t * step;
            const double v = f.value(trial);
            if (std::isfinite(v) && v >= ll - 1e-12 * std::abs(ll)) {
                improved = true;
                break;
            }
        }
        if (!improved) return g.norm() < 1e-5;
        theta = trial;
        const double prev = ll;
        ll = f.evaluate(theta, g, h);
        if (!std::isfinite(ll)) return false;
        if (std::abs(ll - prev) <= 1e-15 * std::max(1.0, std::abs(ll)) && (t * step).norm() < 1e-14)
            return g.norm() < 1e-5;
    }
    return g.norm() < opt.gradient_tolerance;
}

/// Nelder-Mead maximisation, used only when Newton fails from the OLS start.
inline void simplex_ascent(const LognormalAftObjective& f, Eigen::VectorXd& theta, int max_evals) {
    const Eigen::Index d = f.dim();
    std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(d + 1), theta);
    std::vector<double> val(static_cast<std::size_t>(d + 1));
    for (Eigen::Index k = 0; k < d; ++k) pts[static_cast<std::size_t>(k + 1)](k) += std::max(0.1, 0.1 * std::abs(theta(k)));
    auto neg = [&](const Eigen::VectorXd& t) {
        const double v = f.value(t);
        return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
    };
    for (std::size_t k = 0; k < pts.size(); ++k) val[k] = neg(pts[k]);
    std::vector<std::size_t> order(pts.size());
    for (int evals = 0; evals < max_evals;) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return val[a] < val[b]; });
        const auto best = order.front(), worst = order.back(), second = order[order.size() - 2];
        if (std::abs(val[worst] - val[best]) < 1e-10 * (1.0 + std::abs(val[best]))) break;
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
        for (std::size_t k = 0; k + 1 < order.size(); ++k) centroid += pts[order[k]];
        centroid /= static_cast<double>(d);
        const Eigen::VectorXd refl = centroid + (centroid - pts[worst]);
        const double fr = neg(refl);
        ++evals;
        if (fr < val[best]) {
            const Eigen::VectorXd exp = centroid + 2.0 * (centroid - pts[worst]);
            const double fe = neg(exp);
            ++evals;
            if (fe < fr) { pts[worst] = exp; val[worst] = fe; }
            else { pts[worst] = refl; val[worst] = fr; }
        } else if (fr < val[second]) {
            pts[worst] = refl;
            val[worst] = fr;
        } else {
            const Eigen::VectorXd con = centroid + 0.5 * (pts[worst] - centroid);
            const double fc = neg(con);
            ++evals;
            if (fc < val[worst]) {
                pts[worst] = con;
                val[worst] = fc;
            } else {
                for (std::size_t k = 0; k < pts.size(); ++k) {
                    if (k == best) continue;
                    pts[k] = pts[best] + 0.5 * (pts[k] - pts[best]);
                    val[k] = neg(pts[k]);
                    ++evals;
                }
            }
        }
    }
    theta = pts[static_cast<std::size_t>(std::min_element(val.begin(), val.end()) - val.begin())];
}

}  // namespace detail

/// Maximum-likelihood fit of the right-censored log-normal AFT model
/// log T = beta0 + beta_x v + beta_z' z + sigma * eps, eps ~ N(0,1).
///
/// `d.y` holds log observed times. Starts from OLS on the uncensored units and
/// runs damped Newton on (beta, log sigma); a Nelder-Mead restart is tried if
/// Newton stalls. Variances come from the observed information; the scale
/// variance is the delta-method transform of Var(log sigma).
inline ModelFit fit_aft_lognormal(const DesignView& d, const AftOptions& opt = {}) {
    const std::size_t n = d.rows();
    const std::size_t p = d.cols();
    if (d.event.size() != n) throw ValidationError("aft: event column length mismatch");
    std::size_t events = 0;
    for (int e : d.event) events += static_cast<std::size_t>(e != 0);
    if (events == 0) throw PreconditionError("aft: all observations are censored");
    if (n <= p) throw PreconditionError("aft: need more observations than coefficients");
    auto names = coefficient_names(d.z_names, p - 2);
    const Eigen::MatrixXd x = detail::design_matrix(d);
    detail::require_full_rank(x, names);

    // OLS start on the uncensored units, falling back to all units
    Eigen::VectorXd theta(static_cast<Eigen::Index>(p + 1));
    {
        std::vector<Eigen::Index> rows;
        for (std::size_t i = 0; i < n; ++i)
            if (d.event[i]) rows.push_back(static_cast<Eigen::Index>(i));
        Eigen::MatrixXd xs;
        Eigen::VectorXd ys;
        auto use_rows = [&](bool all) {
            const auto m = all ? static_cast<Eigen::Index>(n) : static_cast<Eigen::Index>(rows.size());
            xs.resize(m, static_cast<Eigen::Index>(p));
            ys.resize(m);
            for (Eigen::Index r = 0; r < m; ++r) {
                const Eigen::Index i = all ? r : rows[static_cast<std::size_t>(r)];
                xs.row(r) = x.row(i);
                ys(r) = d.y[static_cast<std::size_t>(i)];
            }
        };
        use_rows(false);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xs);
        qr.setThreshold(1e-10);
        if (xs.rows() <= static_cast<Eigen::Index>(p) || qr.rank() < static_cast<Eigen::Index>(p)) {
            use_rows(true);
            qr.compute(xs);
        }
        const Eigen::VectorXd b = qr.solve(ys);
        const double rss = (ys - xs * b).squaredNorm();
        const double s = std::sqrt(std::max(rss / static_cast<double>(xs.rows()), 1e-8));
        theta.head(static_cast<Eigen::Index>(p)) = b;
        theta(static_cast<Eigen::Index>(p)) = std::log(s);
    }

    const detail::LognormalAftObjective f(x, d.y, d.event);
    int iterations = 0;
    const Eigen::VectorXd start = theta;
    bool converged = detail::newton_ascent(f, theta, opt, iterations);
    if (!converged) {
        theta = start;
        detail::simplex_ascent(f, theta, 400 * static_cast<int>(p + 1));
        int more = 0;
        converged = detail::newton_ascent(f, theta, opt, more);
        iterations += more;
    }

    Eigen::VectorXd g;
    Eigen::MatrixXd h;
    const double ll = f.evaluate(theta, g, h);
    const Eigen::MatrixXd info = -h;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(info.rows(), info.cols(), std::numeric_limits<double>::quiet_NaN());
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() == Eigen::Success) cov = llt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
    else converged = false;

    ModelFit fit;
    fit.names = std::move(names);
    fit.coefficients.assign(theta.data(), theta.data() + p);
    fit.coefficient_variances.resize(p);
    for (std::size_t k = 0; k < p; ++k) fit.coefficient_variances[k] = std::max(0.0, cov(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)));
    fit.scale = std::exp(theta(static_cast<Eigen::Index>(p)));
    fit.scale_variance = fit.scale * fit.scale * std::max(0.0, cov(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)));
    fit.loglik = ll;
    fit.converged = converged;
    fit.iterations = iterations;
    return fit;
}

/// Dataset overload; `supplied` is read only for CovariateSource::Supplied.
inline ModelFit fit_aft_lognormal(const Dataset& ds, CovariateSource source, std::span<const double> supplied = {},
                                  const AftOptions& opt = {}) {
    std::vector<double> v;
    if (source == CovariateSource::Supplied) v.assign(supplied.begin(), supplied.end());
    else v = covariate_column(ds, source);
    return fit_aft_lognormal(make_view(ds, v), opt);
}

}  // namespace poisimex
