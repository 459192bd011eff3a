#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "itolab/cadlag_path.hpp"
#include "itolab/functional.hpp"
#include "itolab/numerics.hpp"
#include "itolab/time_grid.hpp"

namespace itolab {

/// Geometric step ladder h_k = h0 * ratio^k, k = 0 .. count-1.
struct StepSchedule {
    double h0;
    double ratio;
    int count;

    StepSchedule(double h0_, double ratio_, int count_) : h0(h0_), ratio(ratio_), count(count_) {
        if (!(h0 > 0.0)) throw std::invalid_argument("StepSchedule: h0 must be positive");
        if (!(ratio > 0.0 && ratio < 1.0))
            throw std::invalid_argument("StepSchedule: ratio must lie in (0,1)");
        if (count < 3) throw std::invalid_argument("StepSchedule: need at least three steps");
    }

    static StepSchedule default_for(const TimeGrid& g) { return {8.0 * g.mesh(), 0.5, 6}; }

    std::vector<double> steps() const {
        std::vector<double> hs(static_cast<std::size_t>(count));
        double h = h0;
        for (auto& v : hs) {
            v = h;
            h *= ratio;
        }
        return hs;
    }
};

struct DerivativeEstimate {
    double value;
    std::vector<std::pair<double, double>> raw;  // (h, quotient)
    double error_indicator;
    bool converged;
};

namespace detail {

inline double checked_eval(const Functional& f, double t, const CadlagPath& p) {
    double v = f.eval(t, p);
    if (!std::isfinite(v)) throw std::runtime_error("derivative estimate: non-finite value of " + f.id);
    return v;
}

inline DerivativeEstimate extrapolate(std::vector<std::pair<double, double>> raw, double ratio,
                                      int leading_order, int order_step, double tol) {
    auto r = richardson(raw, ratio, leading_order, order_step);
    return {r.value, std::move(raw), r.error_indicator, r.error_indicator <= tol};
}

}  // namespace detail

/// Stopped-path time derivative: [f(t+h, stop(p,t)) - f(t,p)] / h, h > 0.
inline DerivativeEstimate horizontal(const Functional& f, double t, const CadlagPath& p,
                                     const StepSchedule& s, double tol = 1e-6) {
    double T = p.horizon();
    if (!(t < T)) throw std::domain_error("horizontal: t must be strictly before the horizon");
    if (!(t + s.h0 <= T)) throw std::domain_error("horizontal: t + h0 beyond horizon");
    CadlagPath st = stop(p, t);
    double base = detail::checked_eval(f, t, p);
    std::vector<std::pair<double, double>> raw;
    for (double h : s.steps())
        raw.emplace_back(h, (detail::checked_eval(f, t + h, st) - base) / h);
    return detail::extrapolate(std::move(raw), s.ratio, 1, 1, tol);
}

/// Displacement vertical derivative: symmetric average of the two one-sided
/// bump quotients at each step, so the even-order error expansion applies.
inline DerivativeEstimate dupire_vertical(const Functional& f, double t, const CadlagPath& p,
                                          const StepSchedule& s, double tol = 1e-6) {
    double base = detail::checked_eval(f, t, p);
    std::vector<std::pair<double, double>> raw;
    for (double h : s.steps()) {
        double up = (detail::checked_eval(f, t, bump(p, t, h)) - base) / h;
        double dn = (detail::checked_eval(f, t, bump(p, t, -h)) - base) / -h;
        raw.emplace_back(h, 0.5 * (up + dn));
    }
    return detail::extrapolate(std::move(raw), s.ratio, 2, 2, tol);
}

/// Second displacement derivative: central second difference / h^2.
inline DerivativeEstimate dupire_second(const Functional& f, double t, const CadlagPath& p,
                                        const StepSchedule& s, double tol = 1e-6) {
    double base = detail::checked_eval(f, t, p);
    std::vector<std::pair<double, double>> raw;
    for (double h : s.steps()) {
        double up = detail::checked_eval(f, t, bump(p, t, h));
        double dn = detail::checked_eval(f, t, bump(p, t, -h));
        raw.emplace_back(h, (up - 2.0 * base + dn) / (h * h));
    }
    return detail::extrapolate(std::move(raw), s.ratio, 2, 2, tol);
}

/// Ramp vertical derivative: [f(t+h, ramp(p,t,h)) - f(t+h, stop(p,t))] / h,
/// h > 0 only.
inline DerivativeEstimate chitashvili_vertical(const Functional& f, double t, const CadlagPath& p,
                                               const StepSchedule& s, double tol = 1e-6) {
    if (!(t + s.h0 <= p.horizon()))
        throw std::domain_error("chitashvili_vertical: t + h0 beyond horizon");
    CadlagPath st = stop(p, t);
    std::vector<std::pair<double, double>> raw;
    for (double h : s.steps()) {
        CadlagPath rp = ramp(p, t, h);
        double q = (detail::checked_eval(f, t + h, rp) - detail::checked_eval(f, t + h, st)) / h;
        raw.emplace_back(h, q);
    }
    return detail::extrapolate(std::move(raw), s.ratio, 1, 1, tol);
}

/// Second ramp derivative: the ramp estimator applied to the ramp-derivative
/// map itself, with an inner schedule one level finer than the outer one.
inline DerivativeEstimate chitashvili_second(const Functional& f, double t, const CadlagPath& p,
                                             const StepSchedule& s, double tol = 1e-6) {
    StepSchedule inner(s.h0 * s.ratio, s.ratio, s.count);
    if (!(t + s.h0 + inner.h0 <= p.horizon()))
        throw std::domain_error("chitashvili_second: t + h0 + inner h0 beyond horizon");
    bool inner_ok = true;
    Functional g;
    g.id = "ramp_derivative_of:" + f.id;
    g.eval = [&f, &inner, &inner_ok, tol](double u, const CadlagPath& q) {
        auto e = chitashvili_vertical(f, u, q, inner, tol);
        if (!e.converged) inner_ok = false;
        return e.value;
    };
    DerivativeEstimate est = chitashvili_vertical(g, t, p, s, tol);
    est.converged = est.converged && inner_ok;
    return est;
}

/// Pathwise time derivative along differentiable paths: same limit as the
/// stopped-path quotient.
inline DerivativeEstimate def4_time(const Functional& f, double t, const CadlagPath& p,
                                    const StepSchedule& s, double tol = 1e-6) {
    return horizontal(f, t, p, s, tol);
}

/// Pathwise space derivative along the path's own increments:
/// [f(t+h, p) - f(t+h, stop(p,t))] / (p(t+h) - p(t)). Requires a smooth
/// continuous part, no jumps after t, and a nonvanishing increment.
inline DerivativeEstimate def4_space(const Functional& f, double t, const CadlagPath& p,
                                     const StepSchedule& s, double tol = 1e-6) {
    if (!(t + s.h0 <= p.horizon())) throw std::domain_error("def4_space: t + h0 beyond horizon");
    for (const auto& e : p.jumps())
        if (p.grid()[e.index] > t)
            throw std::invalid_argument("def4_space: path must have no jumps after t");
    CadlagPath st = stop(p, t);
    double x0 = p.value(t);
    std::vector<std::pair<double, double>> raw;
    for (double h : s.steps()) {
        double dx = p.value(t + h) - x0;
        if (std::abs(dx) <= 1e-14 * std::max(1.0, std::abs(x0)))
            throw std::runtime_error("def4_space: degenerate path increment");
        double q = (detail::checked_eval(f, t + h, p) - detail::checked_eval(f, t + h, st)) / dx;
        raw.emplace_back(h, q);
    }
    return detail::extrapolate(std::move(raw), s.ratio, 1, 1, tol);
}

}  // namespace itolab
