#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "itolab/cadlag_path.hpp"
#include "itolab/time_grid.hpp"

namespace itolab {

using Seed = std::uint64_t;

namespace detail {

// Uniform in [0,1) resp. (0,1] from the top 53 bits; drawing our own
// variates keeps every sample bit-reproducible across library versions.
inline double u53(std::mt19937_64& eng) {
    return static_cast<double>(eng() >> 11) * 0x1p-53;
}

inline double u53_pos(std::mt19937_64& eng) {
    return (static_cast<double>(eng() >> 11) + 1.0) * 0x1p-53;
}

inline double std_normal(std::mt19937_64& eng) {
    double u1 = u53_pos(eng);
    double u2 = u53(eng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

inline unsigned poisson_count(std::mt19937_64& eng, double rate) {
    if (rate < 0.0) throw std::invalid_argument("poisson_count: negative rate");
    if (rate == 0.0) return 0;
    if (rate > 700.0) throw std::invalid_argument("poisson_count: rate too large for exact sampling");
    double limit = std::exp(-rate);
    unsigned k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= u53_pos(eng);
    } while (p > limit);
    return k - 1;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / 1.4142135623730950488016887242097); }

inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / 2.5066282746310005024157652848110;
}

}  // namespace detail

enum class JumpLaw { rademacher, uniform, normal };

/// Compound-Poisson jump description with analytic compensator data.
struct JumpSpec {
    double intensity = 0.0;
    JumpLaw law = JumpLaw::rademacher;
    double lo = -1.0;     // uniform support
    double hi = 1.0;
    double mu = 0.0;      // normal parameters
    double sigma = 1.0;

    static JumpSpec rademacher_pm1(double lambda) {
        JumpSpec s;
        s.intensity = check_lambda(lambda);
        s.law = JumpLaw::rademacher;
        return s;
    }

    static JumpSpec uniform_on(double lambda, double lo, double hi) {
        if (!(lo < hi)) throw std::invalid_argument("JumpSpec: uniform support needs lo < hi");
        JumpSpec s;
        s.intensity = check_lambda(lambda);
        s.law = JumpLaw::uniform;
        s.lo = lo;
        s.hi = hi;
        return s;
    }

    static JumpSpec normal_of(double lambda, double mu, double sigma) {
        if (!(sigma >= 0.0)) throw std::invalid_argument("JumpSpec: sigma must be nonnegative");
        JumpSpec s;
        s.intensity = check_lambda(lambda);
        s.law = JumpLaw::normal;
        s.mu = mu;
        s.sigma = sigma;
        return s;
    }

    double mean() const {
        switch (law) {
            case JumpLaw::rademacher: return 0.0;
            case JumpLaw::uniform: return 0.5 * (lo + hi);
            case JumpLaw::normal: return mu;
        }
        return 0.0;
    }

    /// E[J 1_{|J| <= c}]: the mean carried by jumps a 1/n-cutoff removes.
    double mean_small(double c) const {
        if (!(c >= 0.0)) throw std::invalid_argument("JumpSpec::mean_small: negative cutoff");
        switch (law) {
            case JumpLaw::rademacher:
                return 0.0;  // symmetric unit jumps: zero either way
            case JumpLaw::uniform: {
                double a = std::max(lo, -c);
                double b = std::min(hi, c);
                if (!(a < b)) return 0.0;
                return (b * b - a * a) / (2.0 * (hi - lo));
            }
            case JumpLaw::normal: {
                if (sigma == 0.0) return std::abs(mu) <= c ? mu : 0.0;
                double alpha = (-c - mu) / sigma;
                double beta = (c - mu) / sigma;
                return mu * (detail::normal_cdf(beta) - detail::normal_cdf(alpha)) -
                       sigma * (detail::normal_pdf(beta) - detail::normal_pdf(alpha));
            }
        }
        return 0.0;
    }

    double draw(std::mt19937_64& eng) const {
        switch (law) {
            case JumpLaw::rademacher: return (eng() & 1u) ? 1.0 : -1.0;
            case JumpLaw::uniform: return lo + (hi - lo) * detail::u53(eng);
            case JumpLaw::normal: return mu + sigma * detail::std_normal(eng);
        }
        return 0.0;
    }

private:
    static double check_lambda(double lambda) {
        if (!(lambda >= 0.0)) throw std::invalid_argument("JumpSpec: intensity must be nonnegative");
        return lambda;
    }
};

/// Semimartingale with its decomposition X = A^c + A^d + M^c + M^d and the
/// quadratic-variation clock of the continuous martingale part. X's
/// continuous values are the left-to-right fold of the parts' continuous
/// values, and its ledger is the union of the parts' ledgers, so the
/// decomposition identity is exact by construction.
struct SemimartingaleSample {
    CadlagPath x;
    CadlagPath a_cont;
    CadlagPath a_disc;
    CadlagPath m_cont;
    CadlagPath m_disc;
    std::vector<double> clock;
};

namespace detail {

inline CadlagPath zero_path(const TimeGrid& g) {
    return CadlagPath(g, std::vector<double>(g.size(), 0.0));
}

inline SemimartingaleSample assemble(const TimeGrid& g, CadlagPath a_cont, CadlagPath a_disc,
                                     CadlagPath m_cont, CadlagPath m_disc,
                                     std::vector<double> clock) {
    std::vector<double> cont(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        cont[i] = ((a_cont.cont()[i] + a_disc.cont()[i]) + m_cont.cont()[i]) + m_disc.cont()[i];
    std::vector<JumpEntry> jumps = a_disc.jumps();
    for (const auto& e : m_disc.jumps()) jumps.push_back(e);
    CadlagPath x(g, std::move(cont), std::move(jumps));
    return {std::move(x), std::move(a_cont), std::move(a_disc), std::move(m_cont),
            std::move(m_disc), std::move(clock)};
}

}  // namespace detail

/// Standard Brownian motion: normal increments of variance dt, clock t.
inline SemimartingaleSample brownian(const TimeGrid& g, Seed seed) {
    std::mt19937_64 eng(seed);
    std::vector<double> cont(g.size());
    cont[0] = 0.0;
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
        double dt = g[i + 1] - g[i];
        cont[i + 1] = cont[i] + std::sqrt(dt) * detail::std_normal(eng);
    }
    CadlagPath m_cont(g, std::move(cont));
    return detail::assemble(g, detail::zero_path(g), detail::zero_path(g), std::move(m_cont),
                            detail::zero_path(g), g.points());
}

/// Drift + Brownian + compound-Poisson jumps. Uncompensated mode puts the raw
/// jump sum in A^d; compensated mode puts the jumps in M^d together with the
/// analytic compensator -lambda*mean*t in its continuous part. Draw order:
/// Brownian increments, Poisson count, jump positions (distinct grid indices,
/// resampled on collision), jump sizes.
inline SemimartingaleSample jump_diffusion(const TimeGrid& g, Seed seed, double drift,
                                           const JumpSpec& spec, bool compensated = false) {
    std::mt19937_64 eng(seed);
    std::vector<double> mc(g.size());
    mc[0] = 0.0;
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
        double dt = g[i + 1] - g[i];
        mc[i + 1] = mc[i] + std::sqrt(dt) * detail::std_normal(eng);
    }

    double horizon = g.horizon();
    unsigned count = detail::poisson_count(eng, spec.intensity * horizon);
    std::size_t slots = g.size() - 1;
    if (count > slots)
        throw std::runtime_error("jump_diffusion: more jumps than grid slots; refine the grid");
    std::vector<bool> taken(g.size(), false);
    std::vector<std::size_t> indices;
    for (unsigned k = 0; k < count; ++k) {
        std::size_t idx;
        do {
            idx = 1 + static_cast<std::size_t>(detail::u53(eng) * static_cast<double>(slots));
            if (idx > slots) idx = slots;
        } while (taken[idx]);
        taken[idx] = true;
        indices.push_back(idx);
    }
    std::vector<JumpEntry> jumps;
    for (std::size_t idx : indices) jumps.push_back({idx, spec.draw(eng)});

    std::vector<double> ac(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) ac[i] = drift * g[i];
    CadlagPath a_cont(g, std::move(ac));
    CadlagPath m_cont(g, std::move(mc));

    if (compensated) {
        double rate = spec.intensity * spec.mean();
        std::vector<double> md(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) md[i] = -rate * g[i];
        CadlagPath m_disc(g, std::move(md), std::move(jumps));
        return detail::assemble(g, std::move(a_cont), detail::zero_path(g), std::move(m_cont),
                                std::move(m_disc), g.points());
    }
    CadlagPath a_disc(g, std::vector<double>(g.size(), 0.0), std::move(jumps));
    return detail::assemble(g, std::move(a_cont), std::move(a_disc), std::move(m_cont),
                            detail::zero_path(g), g.points());
}

/// Wrap a fixed path as a sample: its continuous part is finite-variation
/// "drift", its ledger is the uncompensated jump part, and the martingale
/// parts vanish (flat clock).
inline SemimartingaleSample deterministic_sample(const CadlagPath& p) {
    auto parts = decompose(p);
    const TimeGrid& g = p.grid();
    return detail::assemble(g, std::move(parts.continuous), std::move(parts.discontinuous),
                            detail::zero_path(g), detail::zero_path(g),
                            std::vector<double>(g.size(), 0.0));
}

namespace detail {

inline void check_smoother_input(const CadlagPath& m, const std::vector<double>& clock, int n) {
    if (!m.jumps().empty()) throw std::domain_error("exp_smoother: input must be continuous");
    if (m.cont()[0] != 0.0) throw std::domain_error("exp_smoother: input must start at 0");
    if (n < 1) throw std::invalid_argument("exp_smoother: n must be at least 1");
    if (clock.size() != m.grid().size())
        throw std::invalid_argument("exp_smoother: clock must match the grid");
    for (std::size_t i = 0; i + 1 < clock.size(); ++i)
        if (!(clock[i] <= clock[i + 1]))
            throw std::invalid_argument("exp_smoother: clock must be nondecreasing");
}

}  // namespace detail

/// Exponential smoother driven by the clock: the unique solution of
/// dY = n (M - Y) d<M> with Y_0 = 0, advanced by the exact one-step kernel
/// for M linear in the clock across each step. Unconditionally stable in
/// n * step.
inline CadlagPath exp_smoother(const CadlagPath& m, const std::vector<double>& clock, int n) {
    detail::check_smoother_input(m, clock, n);
    const auto& c = m.cont();
    std::vector<double> y(c.size());
    y[0] = 0.0;
    for (std::size_t i = 0; i + 1 < c.size(); ++i) {
        double a = static_cast<double>(n) * (clock[i + 1] - clock[i]);
        if (a == 0.0) {
            y[i + 1] = y[i];
            continue;
        }
        double em = std::exp(-a);
        double r = -std::expm1(-a) / a;  // (1 - e^-a) / a, accurate for small a
        double dm = c[i + 1] - c[i];
        y[i + 1] = c[i + 1] + (y[i] - c[i]) * em - dm * r;
    }
    return CadlagPath(m.grid(), std::move(y));
}

/// K^n_t = n * integral of (M - M^n)^2 d<M> over [0, t], left-point
/// quadrature; nondecreasing by construction.
inline CadlagPath k_process(const CadlagPath& m, const std::vector<double>& clock, int n) {
    detail::check_smoother_input(m, clock, n);
    CadlagPath y = exp_smoother(m, clock, n);
    const auto& c = m.cont();
    std::vector<double> k(c.size());
    k[0] = 0.0;
    for (std::size_t i = 0; i + 1 < c.size(); ++i) {
        double d = c[i] - y.cont()[i];
        k[i + 1] = k[i] + static_cast<double>(n) * d * d * (clock[i + 1] - clock[i]);
    }
    return CadlagPath(m.grid(), std::move(k));
}

namespace detail {

inline void check_pure_jump(const CadlagPath& p) {
    for (double v : p.cont())
        if (v != p.cont()[0]) throw std::domain_error("truncate_jumps: input must be pure jump");
}

}  // namespace detail

/// Drop ledger entries with |size| <= 1/n.
inline CadlagPath truncate_jumps(const CadlagPath& p, int n) {
    if (n < 1) throw std::invalid_argument("truncate_jumps: n must be at least 1");
    detail::check_pure_jump(p);
    double cutoff = 1.0 / static_cast<double>(n);
    std::vector<JumpEntry> kept;
    for (const auto& e : p.jumps())
        if (std::abs(e.size) > cutoff) kept.push_back(e);
    return CadlagPath(p.grid(), p.cont(), std::move(kept));
}

/// Compensated truncation: drop small jumps and return the removed mass's
/// analytic compensator to the continuous part, so the result remains the
/// compensated sum of the kept jumps. The input's continuous part is expected
/// to be the compensator line of its full ledger (as built by
/// jump_diffusion in compensated mode), not checked.
inline CadlagPath truncate_jumps_compensated(const CadlagPath& p, int n, const JumpSpec& spec) {
    if (n < 1) throw std::invalid_argument("truncate_jumps_compensated: n must be at least 1");
    double cutoff = 1.0 / static_cast<double>(n);
    std::vector<JumpEntry> kept;
    for (const auto& e : p.jumps())
        if (std::abs(e.size) > cutoff) kept.push_back(e);
    double rate = spec.intensity * spec.mean_small(cutoff);
    std::vector<double> cont = p.cont();
    for (std::size_t i = 0; i < cont.size(); ++i) cont[i] += rate * p.grid()[i];
    return CadlagPath(p.grid(), std::move(cont), std::move(kept));
}

}  // namespace itolab
