#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "itolab/catalog.hpp"
#include "itolab/derivatives.hpp"
#include "itolab/functional.hpp"
#include "itolab/numerics.hpp"
#include "itolab/simulate.hpp"

namespace itolab {

/// Term-by-term account of the change-of-variable formula at one (f, path, t).
/// residual is the bookkeeping difference lhs - (time + stoch + qv + jump),
/// reported and never asserted: the formula's validity is the experiment's
/// subject. qv_term uses realized per-step quadratic variation of the
/// continuous component; qv_term_clock is the same sum against the sample's
/// clock increments, kept as a separate diagnostic and not part of residual.
struct ItoDecomposition {
    double lhs = 0.0;
    double time_term = 0.0;
    double stoch_term = 0.0;
    double qv_term = 0.0;
    double jump_term = 0.0;
    double residual = 0.0;
    double qv_term_clock = 0.0;
    double scale = 1.0;  // max(1, |lhs|), denominator for relative metrics
};

/// Left limit in time of s -> m(s, omega) at t, for an oracle map.
inline double eval_left_map(const PathMap& m, double t, const CadlagPath& p) {
    auto loc = p.grid().locate(t);
    if (loc.exact && p.jump_at(loc.index) != 0.0) return m(t, left_stop(p, t));
    return m(t, p);
}

namespace detail {

inline const PathMap& require_oracle(const PathMap& m, const std::string& id, const char* what) {
    if (!m)
        throw std::invalid_argument("functional '" + id + "' has no " + what + " oracle");
    return m;
}

inline double interp_clock(const std::vector<double>& clock, const TimeGrid& g, double t,
                           TimeGrid::Location loc) {
    if (loc.exact) return clock[loc.index];
    std::size_t i = loc.index;
    return clock[i] + (clock[i + 1] - clock[i]) * ((t - g[i]) / (g[i + 1] - g[i]));
}

}  // namespace detail

/// Evaluate every term of the change-of-variable formula for a semimartingale
/// sample on its grid: trapezoid time integral of f0, left-point (Ito) sums
/// of f1 against continuous increments plus f1(s-, X) times jump sizes,
/// half the f11-weighted realized quadratic variation, and the ledger's jump
/// compensation sum.
inline ItoDecomposition ito_decompose(const Functional& f, const SemimartingaleSample& x,
                                      double t) {
    const CadlagPath& p = x.x;
    const PathMap& f0 = detail::require_oracle(f.oracle.dt, f.id, "time (f0)");
    const PathMap& f1 = detail::require_oracle(f.oracle.chit_v, f.id, "vertical (f1)");
    const PathMap& f11 = detail::require_oracle(f.oracle.chit_vv, f.id, "second vertical (f11)");
    auto loc = p.grid().locate(t);

    KahanSum time_s, stoch_s, qv_s, qvc_s, jump_s;
    for (std::size_t i = 0; i + 1 <= loc.index; ++i) {
        double tl = p.grid()[i];
        double tr = p.grid()[i + 1];
        double dc = p.left_limit_at(i + 1) - p.value_at(i);
        time_s.add(0.5 * (f0(tl, p) + eval_left_map(f0, tr, p)) * (tr - tl));
        double f11l = f11(tl, p);
        stoch_s.add(f1(tl, p) * dc);
        qv_s.add(0.5 * f11l * dc * dc);
        qvc_s.add(0.5 * f11l * (x.clock[i + 1] - x.clock[i]));
        double jump = p.jump_at(i + 1);
        if (jump != 0.0) {
            double f1m = eval_left_map(f1, tr, p);
            stoch_s.add(f1m * jump);
            jump_s.add((f.eval(tr, p) - eval_left(f, tr, p)) - f1m * jump);
        }
    }
    if (!loc.exact) {
        std::size_t k = loc.index;
        double tk = p.grid()[k];
        double dc = p.value(t) - p.value_at(k);
        time_s.add(0.5 * (f0(tk, p) + f0(t, p)) * (t - tk));
        double f11l = f11(tk, p);
        stoch_s.add(f1(tk, p) * dc);
        qv_s.add(0.5 * f11l * dc * dc);
        qvc_s.add(0.5 * f11l *
                  (detail::interp_clock(x.clock, p.grid(), t, loc) - x.clock[k]));
    }

    ItoDecomposition d;
    d.lhs = f.eval(t, p) - f.eval(0.0, p);
    d.time_term = time_s.value();
    d.stoch_term = stoch_s.value();
    d.qv_term = qv_s.value();
    d.jump_term = jump_s.value();
    d.qv_term_clock = qvc_s.value();
    d.residual = d.lhs - (((d.time_term + d.stoch_term) + d.qv_term) + d.jump_term);
    d.scale = std::max(1.0, std::abs(d.lhs));
    return d;
}

/// Change of variable along a finite-variation path: time term, f1 against
/// the continuous part only, and the raw jump sum f(s) - f(s-); no quadratic
/// term. A functional outside the horizontally differentiable class (no time
/// oracle, e.g. the jump counterexample) contributes no time term, so the
/// residual then reports the formula's failure instead of refusing to run.
inline ItoDecomposition fv_change_of_variable(const Functional& f, const CadlagPath& p,
                                              double t) {
    const PathMap& f1 = detail::require_oracle(f.oracle.chit_v, f.id, "vertical (f1)");
    const PathMap& f0 = f.oracle.dt;
    auto loc = p.grid().locate(t);

    KahanSum time_s, stoch_s, jump_s;
    for (std::size_t i = 0; i + 1 <= loc.index; ++i) {
        double tl = p.grid()[i];
        double tr = p.grid()[i + 1];
        double dc = p.left_limit_at(i + 1) - p.value_at(i);
        if (f0) time_s.add(0.5 * (f0(tl, p) + eval_left_map(f0, tr, p)) * (tr - tl));
        stoch_s.add(f1(tl, p) * dc);
        double jump = p.jump_at(i + 1);
        if (jump != 0.0) jump_s.add(f.eval(tr, p) - eval_left(f, tr, p));
    }
    if (!loc.exact) {
        std::size_t k = loc.index;
        double dc = p.value(t) - p.value_at(k);
        if (f0) time_s.add(0.5 * (f0(p.grid()[k], p) + f0(t, p)) * (t - p.grid()[k]));
        stoch_s.add(f1(p.grid()[k], p) * dc);
    }

    ItoDecomposition d;
    d.lhs = f.eval(t, p) - f.eval(0.0, p);
    d.time_term = time_s.value();
    d.stoch_term = stoch_s.value();
    d.qv_term = 0.0;
    d.jump_term = jump_s.value();
    d.qv_term_clock = 0.0;
    d.residual = d.lhs - (((d.time_term + d.stoch_term) + d.qv_term) + d.jump_term);
    d.scale = std::max(1.0, std::abs(d.lhs));
    return d;
}

/// Copy of f whose missing f0/f1/f11 oracles are filled with the
/// finite-difference estimators at default schedules. Estimation times are
/// clamped away from the horizon so the one-sided quotients stay in domain;
/// near the horizon the fallback carries an O(mesh) evaluation-point shift.
inline Functional estimator_backed(const Functional& f) {
    Functional out = f;
    Functional base = f;
    if (!out.oracle.dt)
        out.oracle.dt = [base](double t, const CadlagPath& p) {
            StepSchedule s = StepSchedule::default_for(p.grid());
            double te = std::min(t, p.horizon() - s.h0 * 1.0000000001);
            return horizontal(base, std::max(0.0, te), p, s).value;
        };
    if (!out.oracle.chit_v)
        out.oracle.chit_v = [base](double t, const CadlagPath& p) {
            StepSchedule s = StepSchedule::default_for(p.grid());
            double te = std::min(t, p.horizon() - s.h0 * 1.0000000001);
            return chitashvili_vertical(base, std::max(0.0, te), p, s).value;
        };
    if (!out.oracle.chit_vv)
        out.oracle.chit_vv = [base](double t, const CadlagPath& p) {
            StepSchedule s = StepSchedule::default_for(p.grid());
            double te = std::min(t, p.horizon() - 1.5 * s.h0 * 1.0000000001);
            return chitashvili_second(base, std::max(0.0, te), p, s).value;
        };
    return out;
}

/// Metric per refinement level plus a fitted log-log rate.
struct ConvergenceReport {
    std::vector<std::pair<double, double>> levels;  // (level parameter, metric)
    double slope = 0.0;
    double tolerance = 0.0;
    bool pass = false;  // final level metric <= tolerance
};

namespace detail {

inline ConvergenceReport finish_report(std::vector<std::pair<double, double>> levels,
                                       double tol) {
    if (levels.empty()) throw std::invalid_argument("convergence report: no levels");
    ConvergenceReport r;
    r.levels = std::move(levels);
    r.tolerance = tol;
    if (r.levels.size() >= 2) {
        std::vector<double> xs, ys;
        for (const auto& [param, metric] : r.levels) {
            xs.push_back(param);
            ys.push_back(metric);
        }
        r.slope = loglog_slope(xs, ys);
    } else {
        r.slope = std::numeric_limits<double>::quiet_NaN();
    }
    r.pass = r.levels.back().second <= tol;
    return r;
}

template <class Fn>
std::vector<double> per_seed(std::size_t n_seeds, unsigned threads, Fn&& fn) {
    std::vector<double> out(n_seeds);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n_seeds; ++i) out[i] = fn(static_cast<Seed>(i));
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n_seeds) break;
                out[i] = fn(static_cast<Seed>(i));
            }
        });
    for (auto& th : pool) th.join();
    return out;
}

}  // namespace detail

/// Path generator description shared by the convergence drivers and the CLI.
struct GeneratorConfig {
    enum class Kind { brownian, jump_diffusion } kind = Kind::brownian;
    double drift = 0.0;
    JumpSpec jumps{};
    bool compensated = false;

    SemimartingaleSample make(const TimeGrid& g, Seed seed) const {
        if (kind == Kind::brownian) return brownian(g, seed);
        return jump_diffusion(g, seed, drift, jumps, compensated);
    }

    std::optional<JumpSpec> jump_law() const {
        if (kind == Kind::jump_diffusion) return jumps;
        return std::nullopt;
    }
};

/// Median over seeds of |residual| / scale at the horizon, per grid level.
inline ConvergenceReport ito_convergence(const Functional& f, const GeneratorConfig& gen,
                                         const std::vector<std::size_t>& grid_sizes,
                                         std::size_t n_seeds, double tol, double horizon = 1.0,
                                         unsigned threads = 1) {
    if (grid_sizes.size() < 3)
        throw std::invalid_argument("ito_convergence: need at least three grid levels");
    if (n_seeds == 0) throw std::invalid_argument("ito_convergence: need at least one seed");
    std::vector<std::pair<double, double>> levels;
    for (std::size_t size : grid_sizes) {
        TimeGrid g = TimeGrid::uniform(size, horizon);
        std::vector<double> ms = detail::per_seed(n_seeds, threads, [&](Seed seed) {
            ItoDecomposition d = ito_decompose(f, gen.make(g, seed), horizon);
            return std::abs(d.residual) / d.scale;
        });
        levels.emplace_back(static_cast<double>(size), median(std::move(ms)));
    }
    return detail::finish_report(std::move(levels), tol);
}

namespace detail {

inline bool is_zero_path(const CadlagPath& p) {
    if (!p.jumps().empty()) return false;
    for (double v : p.cont())
        if (v != 0.0) return false;
    return true;
}

}  // namespace detail

/// The smoothed finite-variation approximation V^n: drift part kept, large
/// jumps kept (with law-based compensation on the martingale side), the
/// continuous martingale replaced by its exponential smoothing.
inline CadlagPath wz_approximation(const SemimartingaleSample& x, int n,
                                   const std::optional<JumpSpec>& law) {
    const TimeGrid& g = x.x.grid();
    CadlagPath ad = truncate_jumps(x.a_disc, n);
    CadlagPath md = x.m_disc;
    if (!detail::is_zero_path(md)) {
        if (!law)
            throw std::invalid_argument(
                "wz_approximation: compensated jump part needs its jump law");
        md = truncate_jumps_compensated(md, n, *law);
    }
    CadlagPath yc = exp_smoother(x.m_cont, x.clock, n);
    std::vector<double> cont(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        cont[i] = ((x.a_cont.cont()[i] + ad.cont()[i]) + yc.cont()[i]) + md.cont()[i];
    std::vector<JumpEntry> jumps = ad.jumps();
    for (const auto& e : md.jumps()) jumps.push_back(e);
    return CadlagPath(g, std::move(cont), std::move(jumps));
}

/// Per n: ordinary (trapezoid) Stieltjes integral of f along V^n at the
/// horizon versus the Ito integral along X plus half the f1-weighted realized
/// quadratic variation (the Stratonovich correction); metric is their gap
/// over max(1, |target|).
inline ConvergenceReport wong_zakai(const Functional& f, const SemimartingaleSample& x,
                                    const std::vector<int>& ns, double tol,
                                    const std::optional<JumpSpec>& law = std::nullopt) {
    const PathMap& f1 = detail::require_oracle(f.oracle.chit_v, f.id, "vertical (f1)");
    const CadlagPath& p = x.x;
    double horizon = p.horizon();
    KahanSum corr;
    for (std::size_t i = 0; i + 1 < p.grid().size(); ++i) {
        double dc = p.left_limit_at(i + 1) - p.value_at(i);
        corr.add(0.5 * f1(p.grid()[i], p) * dc * dc);
    }
    double target = stieltjes_left(f, p, horizon) + corr.value();
    double scale = std::max(1.0, std::abs(target));
    std::vector<std::pair<double, double>> levels;
    for (int n : ns) {
        CadlagPath v = wz_approximation(x, n, law);
        double ordinary = stieltjes_trap(f, v, horizon);
        levels.emplace_back(static_cast<double>(n), std::abs(ordinary - target) / scale);
    }
    return detail::finish_report(std::move(levels), tol);
}

/// Median of the single-sample wong_zakai metric over seeds, per n.
inline ConvergenceReport wong_zakai_convergence(const Functional& f, const GeneratorConfig& gen,
                                                std::size_t grid_size, const std::vector<int>& ns,
                                                std::size_t n_seeds, double tol,
                                                double horizon = 1.0, unsigned threads = 1) {
    if (ns.empty()) throw std::invalid_argument("wong_zakai_convergence: no levels");
    if (n_seeds == 0) throw std::invalid_argument("wong_zakai_convergence: need seeds");
    TimeGrid g = TimeGrid::uniform(grid_size, horizon);
    std::vector<std::vector<double>> rows(n_seeds);
    detail::per_seed(n_seeds, threads, [&](Seed seed) {
        ConvergenceReport r = wong_zakai(f, gen.make(g, seed), ns, tol, gen.jump_law());
        std::vector<double> row;
        for (const auto& [n, metric] : r.levels) row.push_back(metric);
        rows[seed] = std::move(row);
        return 0.0;
    });
    std::vector<std::pair<double, double>> levels;
    for (std::size_t j = 0; j < ns.size(); ++j) {
        std::vector<double> col(n_seeds);
        for (std::size_t i = 0; i < n_seeds; ++i) col[i] = rows[i][j];
        levels.emplace_back(static_cast<double>(ns[j]), median(std::move(col)));
    }
    return detail::finish_report(std::move(levels), tol);
}

/// Largest estimator-vs-oracle deviations over a sample set.
struct PropReport {
    double max_time_dev = 0.0;   // horizontal estimate vs f0 (when f0 exists)
    double max_space_dev = 0.0;  // vertical estimate vs f1
    std::size_t used = 0;        // samples actually compared
    bool hypothesis_ok = true;   // prop3: d-infinity continuity of f
};

/// Horizontal estimate against f0 and ramp vertical estimate against f1 on
/// arbitrary cadlag samples. The time comparison is skipped for functionals
/// without a time oracle (the counterexample class has none to compare).
inline PropReport prop1_check(const Functional& f,
                              const std::vector<std::pair<double, CadlagPath>>& samples) {
    const PathMap& f1 = detail::require_oracle(f.oracle.chit_v, f.id, "vertical (f1)");
    PropReport r;
    for (const auto& [t, p] : samples) {
        StepSchedule s = StepSchedule::default_for(p.grid());
        if (f.oracle.dt)
            r.max_time_dev = std::max(
                r.max_time_dev, std::abs(horizontal(f, t, p, s).value - f.oracle.dt(t, p)));
        r.max_space_dev = std::max(
            r.max_space_dev, std::abs(chitashvili_vertical(f, t, p, s).value - f1(t, p)));
        ++r.used;
    }
    return r;
}

/// Displacement (bump) vertical estimate against f1, on samples continuous at
/// their evaluation time. hypothesis_ok reflects whether f is d-infinity
/// continuous: when it is not, the deviations are still reported but equality
/// is not the expected outcome.
inline PropReport prop3_check(const Functional& f,
                              const std::vector<std::pair<double, CadlagPath>>& samples) {
    const PathMap& f1 = detail::require_oracle(f.oracle.chit_v, f.id, "vertical (f1)");
    PropReport r;
    r.hypothesis_ok = f.dinf_continuous;
    for (const auto& [t, p] : samples) {
        auto loc = p.grid().locate(t);
        if (loc.exact && p.jump_at(loc.index) != 0.0) continue;  // not continuous at t
        StepSchedule s = StepSchedule::default_for(p.grid());
        r.max_space_dev = std::max(
            r.max_space_dev, std::abs(dupire_vertical(f, t, p, s).value - f1(t, p)));
        ++r.used;
    }
    return r;
}

/// |f(t,p) - f(0,p) - int f_t ds - int f_omega omega' ds| for a smooth path,
/// trapezoid quadrature at grid resolution.
inline double prop2_check(const Functional& f, const CadlagPath& p, double t) {
    if (!p.jumps().empty())
        throw std::domain_error("prop2_check: path must be continuous");
    const PathMap& f0 = detail::require_oracle(f.oracle.dt, f.id, "time (f0)");
    const PathMap& f1 = detail::require_oracle(f.oracle.chit_v, f.id, "vertical (f1)");
    auto loc = p.grid().locate(t);
    KahanSum time_s, space_s;
    for (std::size_t i = 0; i + 1 <= loc.index; ++i) {
        double tl = p.grid()[i];
        double tr = p.grid()[i + 1];
        double dc = p.cont()[i + 1] - p.cont()[i];
        time_s.add(0.5 * (f0(tl, p) + f0(tr, p)) * (tr - tl));
        space_s.add(0.5 * (f1(tl, p) + f1(tr, p)) * dc);
    }
    if (!loc.exact) {
        std::size_t k = loc.index;
        double dc = p.cont_at(t) - p.cont()[k];
        time_s.add(0.5 * (f0(p.grid()[k], p) + f0(t, p)) * (t - p.grid()[k]));
        space_s.add(0.5 * (f1(p.grid()[k], p) + f1(t, p)) * dc);
    }
    return std::abs((f.eval(t, p) - f.eval(0.0, p)) - time_s.value() - space_s.value());
}

/// Empirical check of the jump-defect bound |f(s) - f(s-) - slope * J| <=
/// K J^2 over the ledgers of the given paths, using the entry's declared
/// slope kind and constant K when present.
struct ConditionVReport {
    double max_ratio = 0.0;  // max |defect| / J^2 over all observed jumps
    std::size_t jumps_seen = 0;
    std::optional<double> bound;  // the entry's K, when declared
    bool pass = true;             // defect <= K J^2 + floor for every jump
};

inline ConditionVReport condition_v_report(const Functional& f,
                                           const std::vector<CadlagPath>& paths) {
    const PathMap& slope = (f.jump_slope == SlopeKind::dupire)
                               ? detail::require_oracle(f.oracle.dup_v, f.id, "bump vertical")
                               : detail::require_oracle(f.oracle.chit_v, f.id, "ramp vertical");
    ConditionVReport r;
    r.bound = f.jump_defect_K;
    constexpr double headroom = 1e-9;  // rounding allowance for tiny jumps
    for (const CadlagPath& p : paths) {
        for (const auto& e : p.jumps()) {
            double tau = p.grid()[e.index];
            double defect = std::abs(f.eval(tau, p) - eval_left(f, tau, p) -
                                     eval_left_map(slope, tau, p) * e.size);
            r.max_ratio = std::max(r.max_ratio, defect / (e.size * e.size));
            ++r.jumps_seen;
            if (r.bound && defect > *r.bound * e.size * e.size + headroom) r.pass = false;
        }
    }
    return r;
}

}  // namespace itolab
