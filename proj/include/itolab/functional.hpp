#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "itolab/cadlag_path.hpp"
#include "itolab/numerics.hpp"

namespace itolab {

using PathMap = std::function<double(double, const CadlagPath&)>;

/// Reference derivatives, when known in closed form. Each field may be empty;
/// estimators fall back to finite differences where an oracle is missing.
struct DerivativeOracle {
    PathMap dt;       // horizontal (stopped-path time) derivative
    PathMap dup_v;    // vertical derivative, displacement bump
    PathMap dup_vv;   // second vertical, displacement bump
    PathMap chit_v;   // vertical derivative, continuous ramp (f1)
    PathMap chit_vv;  // second vertical, continuous ramp (f11)
    PathMap chit_t1;  // horizontal derivative of chit_v (f10)
};

/// Which vertical slope controls the jump defect f(t) - f(t-) - slope * J.
enum class SlopeKind { chit, dupire };

/// A non-anticipative functional of (t, omega): the value may depend on the
/// path only through its restriction to [0, t].
struct Functional {
    std::string id;
    PathMap eval;
    DerivativeOracle oracle;
    bool dinf_continuous = true;
    SlopeKind jump_slope = SlopeKind::chit;
    std::optional<double> jump_defect_K;  // |defect| <= K * J^2 when known

    double operator()(double t, const CadlagPath& p) const { return eval(t, p); }
};

/// Left limit in time of s -> f(s, omega) at t. When omega does not jump at
/// t the two evaluations coincide for any non-anticipative f, so the
/// left-frozen copy is materialized only at jump indices.
inline double eval_left(const Functional& f, double t, const CadlagPath& p) {
    auto loc = p.grid().locate(t);
    if (loc.exact && p.jump_at(loc.index) != 0.0) return f.eval(t, left_stop(p, t));
    return f.eval(t, p);
}

/// f must not see past t: evaluation on the path and on its stopped copy has
/// to agree bitwise.
inline bool check_nonanticipative(const Functional& f, double t, const CadlagPath& p) {
    return f.eval(t, p) == f.eval(t, stop(p, t));
}

inline bool check_nonanticipative(const Functional& f,
                                  const std::vector<std::pair<double, CadlagPath>>& samples) {
    if (samples.empty()) throw std::invalid_argument("check_nonanticipative: no samples");
    for (const auto& [t, p] : samples)
        if (!check_nonanticipative(f, t, p)) return false;
    return true;
}

/// sup_t |f(t, p) - f(t, q)| sampled at every grid point of either path,
/// through both the value and the left limit in time.
inline double uniform_functional_deviation(const Functional& f, const CadlagPath& p,
                                           const CadlagPath& q) {
    if (p.horizon() != q.horizon())
        throw std::domain_error("uniform_functional_deviation: paths must share a horizon");
    std::vector<double> cands = p.grid().points();
    const auto& qp = q.grid().points();
    cands.insert(cands.end(), qp.begin(), qp.end());
    std::sort(cands.begin(), cands.end());
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
    double m = 0.0;
    for (double s : cands) {
        m = std::max(m, std::abs(f.eval(s, p) - f.eval(s, q)));
        m = std::max(m, std::abs(eval_left(f, s, p) - eval_left(f, s, q)));
    }
    return m;
}

/// Per-element sup deviation of f along an approximating path sequence.
inline std::vector<double> uniform_functional_convergence(const Functional& f,
                                                          const std::vector<CadlagPath>& seq,
                                                          const CadlagPath& p) {
    std::vector<double> out;
    out.reserve(seq.size());
    for (const auto& q : seq) out.push_back(uniform_functional_deviation(f, q, p));
    return out;
}

/// Ito-style integral of f against omega over [0, t]: left-point rule on the
/// continuous part plus left-limit weights on the jumps.
inline double stieltjes_left(const Functional& f, const CadlagPath& p, double t) {
    auto loc = p.grid().locate(t);
    KahanSum s;
    for (std::size_t i = 0; i + 1 <= loc.index; ++i) {
        double dc = p.left_limit_at(i + 1) - p.value_at(i);
        s.add(f.eval(p.grid()[i], p) * dc);
        double jump = p.jump_at(i + 1);
        if (jump != 0.0) s.add(eval_left(f, p.grid()[i + 1], p) * jump);
    }
    if (!loc.exact) {
        double dc = p.value(t) - p.value_at(loc.index);
        s.add(f.eval(p.grid()[loc.index], p) * dc);
    }
    return s.value();
}

/// Ordinary Stieltjes integral of f against omega over [0, t]: trapezoid rule
/// on the continuous part (exact for integrands linear along each segment)
/// plus left-limit weights on the jumps.
inline double stieltjes_trap(const Functional& f, const CadlagPath& p, double t) {
    auto loc = p.grid().locate(t);
    KahanSum s;
    for (std::size_t i = 0; i + 1 <= loc.index; ++i) {
        double dc = p.left_limit_at(i + 1) - p.value_at(i);
        double fl = f.eval(p.grid()[i], p);
        double fr = eval_left(f, p.grid()[i + 1], p);
        s.add(0.5 * (fl + fr) * dc);
        double jump = p.jump_at(i + 1);
        if (jump != 0.0) s.add(fr * jump);
    }
    if (!loc.exact) {
        double dc = p.value(t) - p.value_at(loc.index);
        s.add(0.5 * (f.eval(p.grid()[loc.index], p) + f.eval(t, p)) * dc);
    }
    return s.value();
}

}  // namespace itolab
