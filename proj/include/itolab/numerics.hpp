#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace itolab {

/// Compensated (Kahan) accumulator. Long sums of telescoping terms must not
/// drown the identities they verify in rounding noise.
class KahanSum {
public:
    void add(double x) {
        double y = x - c_;
        double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

struct RichardsonResult {
    double value;            // last extrapolation diagonal entry
    double error_indicator;  // |last - previous| diagonal entries
};

/// Richardson extrapolation of quotients q(h_k), h_k = h0 * ratio^k.
/// Assumes an error expansion q(h) = L + c1 h^p + c2 h^(p+step) + ...
/// One-sided difference quotients use p = 1, step = 1; symmetric central
/// quotients use p = 2, step = 2.
inline RichardsonResult richardson(std::span<const std::pair<double, double>> raw,
                                   double ratio, int leading_order, int order_step) {
    if (raw.size() < 2) throw std::invalid_argument("richardson: need at least two quotients");
    std::vector<double> col;
    col.reserve(raw.size());
    for (auto& [h, q] : raw) {
        (void)h;
        if (!std::isfinite(q)) throw std::runtime_error("richardson: non-finite quotient");
        col.push_back(q);
    }
    std::vector<double> diag;
    diag.push_back(col.front());
    int order = leading_order;
    while (col.size() > 1) {
        double r = std::pow(ratio, order);
        std::vector<double> next(col.size() - 1);
        for (std::size_t k = 0; k + 1 < col.size(); ++k)
            next[k] = (col[k + 1] - r * col[k]) / (1.0 - r);
        col = std::move(next);
        diag.push_back(col.front());
        order += order_step;
    }
    double value = diag.back();
    double indicator = std::abs(diag.back() - diag[diag.size() - 2]);
    return {value, indicator};
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of empty set");
    std::size_t m = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + m, v.end());
    double hi = v[m];
    if (v.size() % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + m - 1, v.begin() + m);
    return 0.5 * (v[m - 1] + hi);
}

/// Least-squares slope of log(y) against log(x). Metrics that are exactly
/// zero are clamped far below any meaningful tolerance first.
inline double loglog_slope(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("loglog_slope: need matching xs/ys, at least two points");
    double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double lx = std::log(xs[i]);
        double ly = std::log(std::max(ys[i], 1e-300));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw std::invalid_argument("loglog_slope: degenerate abscissae");
    return (n * sxy - sx * sy) / denom;
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

}  // namespace itolab
