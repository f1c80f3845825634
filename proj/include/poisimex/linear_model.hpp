#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "poisimex/dataset.hpp"
#include "poisimex/errors.hpp"

namespace poisimex {

/// Result of one regression fit.
///
/// Coefficients are ordered (beta0, beta_x, beta_<z>...). `scale` is the
/// residual standard deviation (linear model) or the AFT scale sigma.
struct ModelFit {
    std::vector<std::string> names;
    std::vector<double> coefficients;
    std::vector<double> coefficient_variances;
    double scale = 0.0;
    double scale_variance = 0.0;
    double loglik = std::numeric_limits<double>::quiet_NaN();
    bool converged = true;
    int iterations = 0;

    /// Coefficients followed by the scale: the vector SIMEX extrapolates.
    std::vector<double> parameters() const {
        auto p = coefficients;
        p.push_back(scale);
        return p;
    }
    std::vector<double> parameter_variances() const {
        auto v = coefficient_variances;
        v.push_back(scale_variance);
        return v;
    }
    std::vector<std::string> parameter_names() const {
        auto n = names;
        n.push_back("sigma");
        return n;
    }
};

/// Which column plays the role of the error-prone covariate.
enum class CovariateSource {
    SurrogateDensity,  ///< W_i / A_i
    HiddenTruth,       ///< simulated X_i
    Supplied           ///< caller-provided column (pseudo data)
};

/// Borrowed view of the columns a fitter needs.
struct DesignView {
    std::span<const double> y;
    std::span<const double> v;
    const std::vector<std::vector<double>>* z = nullptr;
    std::span<const int> event;
    std::span<const std::string> z_names;

    std::size_t rows() const noexcept { return y.size(); }
    std::size_t cols() const noexcept { return 2 + (z ? z->size() : 0); }
};

inline std::vector<std::string> coefficient_names(std::span<const std::string> z_names, std::size_t z_dim) {
    std::vector<std::string> names{"beta0", "beta_x"};
    for (std::size_t j = 0; j < z_dim; ++j)
        names.push_back("beta_" + (j < z_names.size() ? z_names[j] : "z" + std::to_string(j + 1)));
    return names;
}

inline std::vector<double> covariate_column(const Dataset& ds, CovariateSource source) {
    switch (source) {
        case CovariateSource::SurrogateDensity: return ds.surrogate_densities();
        case CovariateSource::HiddenTruth: return ds.x_true();
        case CovariateSource::Supplied: break;
    }
    throw PreconditionError("supplied covariate source needs an explicit column");
}

inline DesignView make_view(const Dataset& ds, std::span<const double> v) {
    if (v.size() != ds.size()) throw ValidationError("covariate column length does not match dataset");
    return DesignView{ds.y(), v, &ds.z_columns(), ds.event(), ds.z_names()};
}

namespace detail {

inline Eigen::MatrixXd design_matrix(const DesignView& d) {
    const auto n = static_cast<Eigen::Index>(d.rows());
    const auto p = static_cast<Eigen::Index>(d.cols());
    Eigen::MatrixXd x(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i, 0) = 1.0;
        x(i, 1) = d.v[static_cast<std::size_t>(i)];
    }
    if (d.z)
        for (std::size_t j = 0; j < d.z->size(); ++j)
            for (Eigen::Index i = 0; i < n; ++i) x(i, static_cast<Eigen::Index>(j) + 2) = (*d.z)[j][static_cast<std::size_t>(i)];
    return x;
}

/// Throws SingularityError naming the columns pivoted out by a rank-revealing QR.
inline void require_full_rank(const Eigen::MatrixXd& x, const std::vector<std::string>& names) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    if (qr.rank() == x.cols()) return;
    std::vector<std::string> bad;
    const auto& perm = qr.colsPermutation().indices();
    std::string msg = "design matrix is rank deficient; collinear column(s):";
    for (Eigen::Index k = qr.rank(); k < x.cols(); ++k) {
        bad.push_back(names[static_cast<std::size_t>(perm(k))]);
        msg += " " + bad.back();
    }
    throw SingularityError(msg, bad);
}

}  // namespace detail

/// Ordinary least squares of y on (1, v, z) with the classical homoscedastic
/// covariance, residual variance on N - p degrees of freedom.
inline ModelFit fit_ols(const DesignView& d) {
    const std::size_t n = d.rows();
    const std::size_t p = d.cols();
    auto names = coefficient_names(d.z_names, p - 2);
    if (n <= p) throw PreconditionError("ols: need more observations than coefficients");
    const Eigen::MatrixXd x = detail::design_matrix(d);
    detail::require_full_rank(x, names);
    const Eigen::Map<const Eigen::VectorXd> y(d.y.data(), static_cast<Eigen::Index>(n));

    const Eigen::MatrixXd xtx = x.transpose() * x;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
    const Eigen::VectorXd beta = ldlt.solve(x.transpose() * y);
    const double rss = (y - x * beta).squaredNorm();
    const double dof = static_cast<double>(n - p);
    const double s2 = rss / dof;
    const Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)));

    ModelFit fit;
    fit.names = std::move(names);
    fit.coefficients.assign(beta.data(), beta.data() + beta.size());
    fit.coefficient_variances.resize(p);
    for (std::size_t k = 0; k < p; ++k)
        fit.coefficient_variances[k] = std::max(0.0, s2 * inv(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)));
    fit.scale = std::sqrt(s2);
    fit.scale_variance = s2 / (2.0 * dof);
    return fit;
}

inline ModelFit fit_ols(const Dataset& ds, CovariateSource source) {
    const auto v = covariate_column(ds, source);
    return fit_ols(make_view(ds, v));
}

/// Corrected-score linear regression for a conditionally Poisson surrogate.
///
/// Normal equations with X -> V = W/A and X^2 -> V^2 - V/A, which are
/// conditionally unbiased for X and X^2 given E[W|X] = XA, Var[W|X] = XA.
/// Variances use the sandwich form of the corrected estimating equations.
inline ModelFit fit_corrected_lm(const Dataset& ds) {
    const std::size_t n = ds.size();
    const std::size_t p = 2 + ds.z_dim();
    auto names = coefficient_names(ds.z_names(), ds.z_dim());
    if (n <= p) throw PreconditionError("corrected lm: need more observations than coefficients");
    const auto v = ds.surrogate_densities();
    const auto& a = ds.a();
    const DesignView d = make_view(ds, v);
    const Eigen::MatrixXd x = detail::design_matrix(d);
    detail::require_full_rank(x, names);
    const Eigen::Map<const Eigen::VectorXd> y(ds.y().data(), static_cast<Eigen::Index>(n));

    double correction = 0.0;
    for (std::size_t i = 0; i < n; ++i) correction += v[i] / a[i];
    Eigen::MatrixXd m = x.transpose() * x;
    m(1, 1) -= correction;
    const Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success)
        throw SingularityError("corrected cross-product matrix is not positive definite; "
                               "the corrected score needs a larger sample");
    const Eigen::VectorXd beta = llt.solve(x.transpose() * y);

    // per-unit corrected score: x_i (y_i - x_i'b) + b_x V_i / A_i on the x row
    const Eigen::VectorXd resid = y - x * beta;
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    double rss_corrected = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        Eigen::VectorXd psi = x.row(row).transpose() * resid(row);
        psi(1) += beta(1) * v[i] / a[i];
        meat.noalias() += psi * psi.transpose();
        rss_corrected += resid(row) * resid(row) - beta(1) * beta(1) * v[i] / a[i];
    }
    const Eigen::MatrixXd bread = llt.solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)));
    const Eigen::MatrixXd cov = bread * meat * bread;

    ModelFit fit;
    fit.names = std::move(names);
    fit.coefficients.assign(beta.data(), beta.data() + beta.size());
    fit.coefficient_variances.resize(p);
    for (std::size_t k = 0; k < p; ++k)
        fit.coefficient_variances[k] = std::max(0.0, cov(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)));
    const double dof = static_cast<double>(n - p);
    const double s2 = std::max(0.0, rss_corrected / dof);
    fit.scale = std::sqrt(s2);
    fit.scale_variance = s2 / (2.0 * dof);
    return fit;
}

/// Moments entering the asymptotic attenuation of the naive slope.
struct AttenuationInputs {
    double mean_x = 0.0;
    double var_x = 0.0;
    double mean_x_over_a = 0.0;
};

/// omega = Var[X] / (Var[X] + E[X/A]); naive slope -> omega * beta_x when Z is
/// independent of X (or absent).
inline double attenuation_factor(const AttenuationInputs& in) {
    if (!(in.var_x >= 0.0)) throw ParameterError("attenuation: Var[X] must be non-negative");
    if (!(in.var_x + in.mean_x_over_a > 0.0)) throw ParameterError("attenuation: Var[X] + E[X/A] must be positive");
    return in.var_x / (in.var_x + in.mean_x_over_a);
}

/// Attenuation inputs for X ~ Gamma(shape, scale) observed over a fixed area.
inline AttenuationInputs gamma_attenuation_inputs(double shape, double scale, double area) {
    if (!(shape > 0.0) || !(scale > 0.0) || !(area > 0.0))
        throw ParameterError("attenuation: shape, scale and area must be positive");
    return {shape * scale, shape * scale * scale, shape * scale / area};
}

}  // namespace poisimex
