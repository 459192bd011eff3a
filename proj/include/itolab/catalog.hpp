#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "itolab/functional.hpp"

namespace itolab {

namespace detail {

inline PathMap zero_map() {
    return [](double, const CadlagPath&) { return 0.0; };
}

inline PathMap const_map(double c) {
    return [c](double, const CadlagPath&) { return c; };
}

struct ScalarEntry {
    std::string name;
    double (*g)(double);
    double (*d1)(double);
    double (*d2)(double);
    std::optional<double> half_sup_d2;  // bounds the second-order jump defect
};

inline double s_id(double x) { return x; }
inline double s_one(double) { return 1.0; }
inline double s_zero(double) { return 0.0; }
inline double s_sqr(double x) { return x * x; }
inline double s_two_x(double x) { return 2.0 * x; }
inline double s_two(double) { return 2.0; }
inline double s_neg_sin(double x) { return -std::sin(x); }
inline double s_neg_cos(double x) { return -std::cos(x); }

inline const std::vector<ScalarEntry>& scalar_table() {
    static const std::vector<ScalarEntry> table = {
        {"id", s_id, s_one, s_zero, 0.0},
        {"sqr", s_sqr, s_two_x, s_two, 1.0},
        {"exp", std::exp, std::exp, std::exp, std::nullopt},
        {"sin", std::sin, std::cos, s_neg_sin, 0.5},
        {"cos", std::cos, s_neg_sin, s_neg_cos, 0.5},
    };
    return table;
}

inline const ScalarEntry* find_scalar(std::string_view name) {
    for (const auto& e : scalar_table())
        if (e.name == name) return &e;
    return nullptr;
}

}  // namespace detail

/// f(t, omega) = t.
inline Functional make_time_only() {
    Functional f;
    f.id = "time";
    f.eval = [](double t, const CadlagPath&) { return t; };
    f.oracle.dt = detail::const_map(1.0);
    f.oracle.dup_v = detail::zero_map();
    f.oracle.dup_vv = detail::zero_map();
    f.oracle.chit_v = detail::zero_map();
    f.oracle.chit_vv = detail::zero_map();
    f.oracle.chit_t1 = detail::zero_map();
    f.jump_defect_K = 0.0;
    return f;
}

/// f(t, omega) = g(omega_t).
inline Functional make_endpoint(const detail::ScalarEntry& s, std::string id) {
    Functional f;
    f.id = std::move(id);
    f.eval = [g = s.g](double t, const CadlagPath& p) { return g(p.value(t)); };
    f.oracle.dt = detail::zero_map();
    f.oracle.dup_v = [d1 = s.d1](double t, const CadlagPath& p) { return d1(p.value(t)); };
    f.oracle.dup_vv = [d2 = s.d2](double t, const CadlagPath& p) { return d2(p.value(t)); };
    f.oracle.chit_v = f.oracle.dup_v;
    f.oracle.chit_vv = f.oracle.dup_vv;
    f.oracle.chit_t1 = detail::zero_map();
    f.jump_defect_K = s.half_sup_d2;
    return f;
}

/// f(t, omega) = integral of omega_s ds over [0, t], exact for this path class.
inline Functional make_running_integral() {
    Functional f;
    f.id = "running_integral";
    f.eval = [](double t, const CadlagPath& p) {
        auto loc = p.grid().locate(t);
        KahanSum s;
        for (std::size_t i = 0; i + 1 <= loc.index; ++i)
            s.add(0.5 * (p.value_at(i) + p.left_limit_at(i + 1)) * (p.grid()[i + 1] - p.grid()[i]));
        if (!loc.exact)
            s.add(0.5 * (p.value_at(loc.index) + p.value(t)) * (t - p.grid()[loc.index]));
        return s.value();
    };
    f.oracle.dt = [](double t, const CadlagPath& p) { return p.value(t); };
    f.oracle.dup_v = detail::zero_map();
    f.oracle.dup_vv = detail::zero_map();
    f.oracle.chit_v = detail::zero_map();
    f.oracle.chit_vv = detail::zero_map();
    f.oracle.chit_t1 = detail::zero_map();
    f.jump_defect_K = 0.0;
    return f;
}

/// f(t, omega) = sup of omega over [0, t] (left limits included).
inline Functional make_running_max() {
    Functional f;
    f.id = "running_max";
    f.eval = [](double t, const CadlagPath& p) {
        auto loc = p.grid().locate(t);
        double m = p.value_at(0);
        for (std::size_t i = 1; i <= loc.index; ++i)
            m = std::max({m, p.left_limit_at(i), p.value_at(i)});
        if (!loc.exact) m = std::max(m, p.value(t));
        return m;
    };
    f.oracle.dt = detail::zero_map();
    // Subgradient choice on the diagonal: 1 exactly when the current value
    // is the running max. No second verticals: the max has a kink there.
    PathMap at_max = [f_eval = f.eval](double t, const CadlagPath& p) {
        return p.value(t) == f_eval(t, p) ? 1.0 : 0.0;
    };
    f.oracle.dup_v = at_max;
    f.oracle.chit_v = at_max;
    return f;
}

/// f(t, omega) = g(omega_t) - g(omega_{t-}): nonzero only at jump times.
inline Functional make_jump_functional(const detail::ScalarEntry& s) {
    Functional f;
    f.id = "jump:g=" + s.name;
    f.eval = [g = s.g](double t, const CadlagPath& p) {
        return g(p.value(t)) - g(p.left_limit(t));
    };
    // No dt: at a jump time the stopped-path quotient diverges like -f/h.
    f.oracle.dup_v = [d1 = s.d1](double t, const CadlagPath& p) { return d1(p.value(t)); };
    f.oracle.dup_vv = [d2 = s.d2](double t, const CadlagPath& p) { return d2(p.value(t)); };
    f.oracle.chit_v = detail::zero_map();
    f.oracle.chit_vv = detail::zero_map();
    f.oracle.chit_t1 = detail::zero_map();
    f.dinf_continuous = false;
    f.jump_slope = SlopeKind::dupire;
    f.jump_defect_K = s.half_sup_d2;
    return f;
}

/// F(t, omega) = Stieltjes integral of s -> inner(s-, omega) against omega.
inline Functional make_stieltjes(Functional inner) {
    Functional f;
    f.id = "stieltjes:f=" + inner.id;
    f.eval = [inner](double t, const CadlagPath& p) { return stieltjes_trap(inner, p, t); };
    f.oracle.dt = detail::zero_map();
    f.oracle.dup_v = [inner](double t, const CadlagPath& p) {
        return t == 0.0 ? 0.0 : eval_left(inner, t, p);
    };
    f.oracle.dup_vv = detail::zero_map();
    f.oracle.chit_v = [inner](double t, const CadlagPath& p) { return inner.eval(t, p); };
    f.oracle.chit_vv = inner.oracle.chit_v;
    f.oracle.chit_t1 = inner.oracle.dt;
    f.dinf_continuous = false;
    f.jump_defect_K = 0.0;
    return f;
}

/// Resolve a catalog id: time, identity, square, running_integral,
/// running_max, endpoint:g=N, jump:g=N, stieltjes:f=ID (ID resolved
/// recursively). Returns nothing for unknown ids.
inline std::optional<Functional> find_functional(const std::string& id) {
    using detail::find_scalar;
    if (id == "time") return make_time_only();
    if (id == "identity") return make_endpoint(*find_scalar("id"), "identity");
    if (id == "square") return make_endpoint(*find_scalar("sqr"), "square");
    if (id == "running_integral") return make_running_integral();
    if (id == "running_max") return make_running_max();
    constexpr std::string_view kEndpoint = "endpoint:g=";
    constexpr std::string_view kJump = "jump:g=";
    constexpr std::string_view kStieltjes = "stieltjes:f=";
    if (id.starts_with(kEndpoint)) {
        const auto* s = find_scalar(id.substr(kEndpoint.size()));
        if (!s) return std::nullopt;
        return make_endpoint(*s, id);
    }
    if (id.starts_with(kJump)) {
        const auto* s = find_scalar(id.substr(kJump.size()));
        if (!s) return std::nullopt;
        return make_jump_functional(*s);
    }
    if (id.starts_with(kStieltjes)) {
        auto inner = find_functional(id.substr(kStieltjes.size()));
        if (!inner) return std::nullopt;
        return make_stieltjes(std::move(*inner));
    }
    return std::nullopt;
}

/// Representative catalog, one entry per family.
inline std::vector<Functional> catalog() {
    std::vector<Functional> out;
    for (const char* id :
         {"time", "identity", "square", "running_integral", "running_max", "endpoint:g=exp",
          "endpoint:g=sin", "jump:g=id", "jump:g=sin", "stieltjes:f=identity"})
        out.push_back(*find_functional(id));
    return out;
}

}  // namespace itolab
