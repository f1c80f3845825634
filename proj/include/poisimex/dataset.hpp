#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "poisimex/errors.hpp"

namespace poisimex {

/// One subject: response, surrogate count over a core area, error-free covariates.
///
/// For survival data `y` holds the log of the observed time and `event` is the
/// censoring flag (1 = event, 0 = right-censored). Linear-model data always has
/// event = 1.
struct ObservedUnit {
    double y = 0.0;
    long w = 0;
    double a = 1.0;
    std::vector<double> z;
    int event = 1;
};

/// W/A, the observed density standing in for the true covariate.
inline double surrogate_density(const ObservedUnit& u) { return static_cast<double>(u.w) / u.a; }

inline void validate(const ObservedUnit& u) {
    if (u.w < 0) throw ValidationError("surrogate count must be non-negative");
    if (!(u.a > 0.0) || !std::isfinite(u.a)) throw ValidationError("area must be positive");
    if (u.event != 0 && u.event != 1) throw ValidationError("event flag must be 0 or 1");
    if (!std::isfinite(u.y)) throw ValidationError("response must be finite");
}

/// Column-oriented collection of units.
///
/// The hidden truth column (true densities) is only filled by the simulators
/// and is read exclusively by the True-LM/True-AFT comparators.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::vector<std::string> z_names) : z_names_(std::move(z_names)), z_(z_names_.size()) {}

    std::size_t size() const noexcept { return y_.size(); }
    bool empty() const noexcept { return y_.empty(); }
    std::size_t z_dim() const noexcept { return z_.size(); }

    void reserve(std::size_t n) {
        y_.reserve(n);
        w_.reserve(n);
        a_.reserve(n);
        event_.reserve(n);
        for (auto& c : z_) c.reserve(n);
    }

    void push_back(const ObservedUnit& u) {
        if (has_truth()) throw PreconditionError("dataset carries truth; use push_back(unit, x)");
        append(u);
    }

    void push_back(const ObservedUnit& u, double x_true) {
        if (!empty() && !has_truth()) throw PreconditionError("dataset has no truth column");
        append(u);
        if (!x_) x_.emplace();
        x_->push_back(x_true);
    }

    ObservedUnit unit(std::size_t i) const {
        ObservedUnit u;
        u.y = y_.at(i);
        u.w = w_[i];
        u.a = a_[i];
        u.event = event_[i];
        u.z.resize(z_.size());
        for (std::size_t j = 0; j < z_.size(); ++j) u.z[j] = z_[j][i];
        return u;
    }

    const std::vector<double>& y() const noexcept { return y_; }
    const std::vector<long>& w() const noexcept { return w_; }
    const std::vector<double>& a() const noexcept { return a_; }
    const std::vector<int>& event() const noexcept { return event_; }
    const std::vector<double>& z(std::size_t j) const { return z_.at(j); }
    const std::vector<std::vector<double>>& z_columns() const noexcept { return z_; }
    const std::vector<std::string>& z_names() const noexcept { return z_names_; }

    bool has_truth() const noexcept { return x_.has_value(); }
    const std::vector<double>& x_true() const {
        if (!x_) throw PreconditionError("dataset carries no hidden truth");
        return *x_;
    }

    /// W_i / A_i for every unit.
    std::vector<double> surrogate_densities() const {
        std::vector<double> v(size());
        for (std::size_t i = 0; i < size(); ++i) v[i] = static_cast<double>(w_[i]) / a_[i];
        return v;
    }

    std::size_t event_count() const noexcept {
        std::size_t n = 0;
        for (int e : event_) n += static_cast<std::size_t>(e);
        return n;
    }

    /// Dataset made of the units at `rows` (with repetition), truth included.
    Dataset subset(const std::vector<std::size_t>& rows) const {
        Dataset out(z_names_);
        out.reserve(rows.size());
        std::vector<double> xs;
        for (std::size_t r : rows) {
            out.y_.push_back(y_.at(r));
            out.w_.push_back(w_[r]);
            out.a_.push_back(a_[r]);
            out.event_.push_back(event_[r]);
            for (std::size_t j = 0; j < z_.size(); ++j) out.z_[j].push_back(z_[j][r]);
            if (x_) xs.push_back((*x_)[r]);
        }
        if (x_) out.x_ = std::move(xs);
        return out;
    }

    void set_z_names(std::vector<std::string> names) {
        if (names.size() != z_.size()) throw ValidationError("covariate name count mismatch");
        z_names_ = std::move(names);
    }

    void set_truth(std::vector<double> x) {
        if (x.size() != size()) throw ValidationError("truth column length mismatch");
        x_ = std::move(x);
    }

    void drop_truth() noexcept { x_.reset(); }

private:
    void append(const ObservedUnit& u) {
        validate(u);
        if (empty() && z_.empty() && !u.z.empty()) {
            z_.resize(u.z.size());
            z_names_.clear();
            for (std::size_t j = 0; j < u.z.size(); ++j) z_names_.push_back("z" + std::to_string(j + 1));
        }
        if (u.z.size() != z_.size()) throw ValidationError("all units must share the same covariate dimension");
        y_.push_back(u.y);
        w_.push_back(u.w);
        a_.push_back(u.a);
        event_.push_back(u.event);
        for (std::size_t j = 0; j < z_.size(); ++j) z_[j].push_back(u.z[j]);
    }

    std::vector<double> y_;
    std::vector<long> w_;
    std::vector<double> a_;
    std::vector<int> event_;
    std::vector<std::string> z_names_;
    std::vector<std::vector<double>> z_;
    std::optional<std::vector<double>> x_;
};

}  // namespace poisimex
