#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "itolab/numerics.hpp"
#include "itolab/time_grid.hpp"

namespace itolab {

/// One discontinuity, keyed by grid index rather than by time so that jump
/// placement never depends on floating-point time comparisons.
struct JumpEntry {
    std::size_t index;
    double size;
    bool operator==(const JumpEntry&) const = default;
};

/// Cadlag path on a finite grid: a continuous piecewise-linear part sampled
/// at the grid points plus an explicit jump ledger. The path value at t_i is
/// cont_i plus the ledger prefix through i; left limits drop the jump at i.
///
/// Evaluation convention (kept bitwise-stable across all path surgery):
///   value_at(i)      = cont_[i] + fold(sizes with index <= i)
///   left_limit_at(i) = cont_[i] + fold(sizes with index <  i)
/// where fold() is the plain left-to-right sum of ledger sizes starting at 0.
class CadlagPath {
public:
    CadlagPath(TimeGrid grid, std::vector<double> cont, std::vector<JumpEntry> jumps = {})
        : grid_(std::move(grid)), cont_(std::move(cont)), jumps_(std::move(jumps)) {
        if (cont_.size() != grid_.size())
            throw std::invalid_argument("CadlagPath: cont values must match grid size");
        for (double v : cont_)
            if (!std::isfinite(v)) throw std::invalid_argument("CadlagPath: non-finite value");
        normalize_ledger();
        rebuild_prefix();
    }

    const TimeGrid& grid() const { return grid_; }
    double horizon() const { return grid_.horizon(); }
    const std::vector<double>& cont() const { return cont_; }
    const std::vector<JumpEntry>& jumps() const { return jumps_; }

    double jump_at(std::size_t i) const {
        auto it = find_jump(i);
        return it == jumps_.end() ? 0.0 : it->size;
    }

    double value_at(std::size_t i) const {
        check_index(i);
        return cont_[i] + prefix_through(i);
    }

    double left_limit_at(std::size_t i) const {
        check_index(i);
        if (i == 0) return cont_[0];
        return cont_[i] + prefix_before(i);
    }

    /// Continuous part at arbitrary t (linear interpolation). This single
    /// formula is shared by evaluation and by grid-point insertion, so a path
    /// and its refined copy agree bitwise wherever both are defined.
    double cont_at(double t) const {
        auto loc = grid_.locate(t);
        if (loc.exact) return cont_[loc.index];
        std::size_t i = loc.index;
        double t0 = grid_[i];
        double t1 = grid_[i + 1];
        return cont_[i] + (cont_[i + 1] - cont_[i]) * ((t - t0) / (t1 - t0));
    }

    double value(double t) const {
        auto loc = grid_.locate(t);
        return cont_at(t) + prefix_through(loc.index);
    }

    double left_limit(double t) const {
        auto loc = grid_.locate(t);
        if (loc.exact) return left_limit_at(loc.index);
        return value(t);
    }

    /// Copy of this path with t added as a grid point (no-op if present).
    CadlagPath with_time(double t) const {
        auto loc = grid_.locate(t);
        if (loc.exact) return *this;
        std::size_t k = loc.index + 1;
        std::vector<double> pts = grid_.points();
        std::vector<double> cont = cont_;
        pts.insert(pts.begin() + static_cast<std::ptrdiff_t>(k), t);
        cont.insert(cont.begin() + static_cast<std::ptrdiff_t>(k), cont_at(t));
        std::vector<JumpEntry> jumps = jumps_;
        for (auto& j : jumps)
            if (j.index >= k) ++j.index;
        return CadlagPath(TimeGrid(std::move(pts)), std::move(cont), std::move(jumps));
    }

    /// Vertical translation of the whole path (jump ledger untouched).
    CadlagPath shifted(double h) const {
        std::vector<double> cont = cont_;
        for (double& v : cont) v += h;
        return CadlagPath(grid_, std::move(cont), jumps_);
    }

    bool operator==(const CadlagPath& o) const {
        return grid_ == o.grid_ && cont_ == o.cont_ && jumps_ == o.jumps_;
    }

private:
    void check_index(std::size_t i) const {
        if (i >= grid_.size()) throw std::out_of_range("CadlagPath: grid index out of range");
    }

    std::vector<JumpEntry>::const_iterator find_jump(std::size_t i) const {
        auto it = std::lower_bound(jumps_.begin(), jumps_.end(), i,
                                   [](const JumpEntry& e, std::size_t v) { return e.index < v; });
        return (it != jumps_.end() && it->index == i) ? it : jumps_.end();
    }

    void normalize_ledger() {
        std::stable_sort(jumps_.begin(), jumps_.end(),
                         [](const JumpEntry& a, const JumpEntry& b) { return a.index < b.index; });
        std::vector<JumpEntry> merged;
        merged.reserve(jumps_.size());
        for (const auto& j : jumps_) {
            if (!std::isfinite(j.size)) throw std::invalid_argument("CadlagPath: non-finite jump");
            if (j.index == 0) throw std::invalid_argument("CadlagPath: jump at time zero");
            if (j.index >= grid_.size()) throw std::invalid_argument("CadlagPath: jump index out of range");
            if (!merged.empty() && merged.back().index == j.index)
                merged.back().size += j.size;
            else
                merged.push_back(j);
        }
        std::erase_if(merged, [](const JumpEntry& e) { return e.size == 0.0; });
        jumps_ = std::move(merged);
    }

    void rebuild_prefix() {
        prefix_.resize(jumps_.size());
        double s = 0.0;
        for (std::size_t k = 0; k < jumps_.size(); ++k) {
            s += jumps_[k].size;
            prefix_[k] = s;
        }
    }

    // Sum of jump sizes with index <= i (left fold, bitwise stable).
    double prefix_through(std::size_t i) const {
        auto it = std::upper_bound(jumps_.begin(), jumps_.end(), i,
                                   [](std::size_t v, const JumpEntry& e) { return v < e.index; });
        if (it == jumps_.begin()) return 0.0;
        return prefix_[static_cast<std::size_t>(it - jumps_.begin()) - 1];
    }

    double prefix_before(std::size_t i) const {
        return i == 0 ? 0.0 : prefix_through(i - 1);
    }

    TimeGrid grid_;
    std::vector<double> cont_;
    std::vector<JumpEntry> jumps_;
    std::vector<double> prefix_;
};

struct PathParts {
    CadlagPath continuous;
    CadlagPath discontinuous;
};

/// Split into the continuous part and the pure-jump part. Reconstruction
/// (value = continuous.value + discontinuous.value) is bitwise exact.
inline PathParts decompose(const CadlagPath& p) {
    CadlagPath c(p.grid(), p.cont(), {});
    CadlagPath d(p.grid(), std::vector<double>(p.grid().size(), 0.0), p.jumps());
    return {std::move(c), std::move(d)};
}

/// Path frozen at its time-t value: s -> omega(t ^ s).
inline CadlagPath stop(const CadlagPath& p, double t) {
    CadlagPath q = p.with_time(t);
    std::size_t k = q.grid().locate(t).index;
    std::vector<double> cont = q.cont();
    for (std::size_t j = k + 1; j < cont.size(); ++j) cont[j] = cont[k];
    std::vector<JumpEntry> jumps;
    for (const auto& e : q.jumps())
        if (e.index <= k) jumps.push_back(e);
    return CadlagPath(q.grid(), std::move(cont), std::move(jumps));
}

/// Path frozen at the left limit: equals omega before t, omega(t-) from t on.
inline CadlagPath left_stop(const CadlagPath& p, double t) {
    CadlagPath q = p.with_time(t);
    std::size_t k = q.grid().locate(t).index;
    std::vector<double> cont = q.cont();
    for (std::size_t j = k + 1; j < cont.size(); ++j) cont[j] = cont[k];
    std::vector<JumpEntry> jumps;
    for (const auto& e : q.jumps())
        if (e.index < k) jumps.push_back(e);
    return CadlagPath(q.grid(), std::move(cont), std::move(jumps));
}

/// omega + h * 1_{[t, T]}. At t = 0 this is a plain vertical shift.
inline CadlagPath bump(const CadlagPath& p, double t, double h) {
    if (t == 0.0) return p.shifted(h);
    CadlagPath q = p.with_time(t);
    std::size_t k = q.grid().locate(t).index;
    std::vector<JumpEntry> jumps = q.jumps();
    jumps.push_back({k, h});
    return CadlagPath(q.grid(), q.cont(), std::move(jumps));
}

/// Stopped path plus the continuous ramp rising from 0 at t to h at t + h and
/// staying there: omega(t ^ s) + (s - t) on (t, t+h], + h beyond.
inline CadlagPath ramp(const CadlagPath& p, double t, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("ramp: width must be positive");
    double t_end = t + h;
    if (!(t_end <= p.horizon())) throw std::domain_error("ramp: t + h beyond horizon");
    CadlagPath q = stop(p, t).with_time(t_end);
    std::size_t k = q.grid().locate(t).index;
    double c0 = q.cont()[k];
    std::vector<double> cont = q.cont();
    for (std::size_t j = k + 1; j < cont.size(); ++j) {
        double tj = q.grid()[j];
        cont[j] = tj < t_end ? c0 + (tj - t) : c0 + h;
    }
    return CadlagPath(q.grid(), std::move(cont), q.jumps());
}

/// Supremum of |omega| over the whole horizon. Extremes of a piecewise-linear
/// path with grid-indexed jumps occur at grid values or left limits.
inline double sup_norm(const CadlagPath& p) {
    double m = 0.0;
    for (std::size_t i = 0; i < p.grid().size(); ++i) {
        m = std::max(m, std::abs(p.value_at(i)));
        m = std::max(m, std::abs(p.left_limit_at(i)));
    }
    return m;
}

/// Distance between stopped trajectories: |t - t'| + sup_s |omega(t^s) - omega'(t'^s)|.
/// Both paths must share a horizon.
inline double d_infty(double t, const CadlagPath& p, double tp, const CadlagPath& q) {
    if (p.horizon() != q.horizon())
        throw std::domain_error("d_infty: paths must share a horizon");
    CadlagPath a = stop(p, t);
    CadlagPath b = stop(q, tp);
    std::vector<double> candidates = a.grid().points();
    const auto& bp = b.grid().points();
    candidates.insert(candidates.end(), bp.begin(), bp.end());
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    double m = 0.0;
    for (double s : candidates) {
        m = std::max(m, std::abs(a.value(s) - b.value(s)));
        m = std::max(m, std::abs(a.left_limit(s) - b.left_limit(s)));
    }
    return std::abs(t - tp) + m;
}

inline double total_variation(const CadlagPath& p) {
    KahanSum tv;
    const auto& c = p.cont();
    for (std::size_t i = 0; i + 1 < c.size(); ++i) tv.add(std::abs(c[i + 1] - c[i]));
    for (const auto& j : p.jumps()) tv.add(std::abs(j.size));
    return tv.value();
}

/// Realized quadratic variation of the continuous part over [0, t], along the
/// path's own grid; the final partial segment is included.
inline double realized_qv_continuous(const CadlagPath& p, double t) {
    auto loc = p.grid().locate(t);
    KahanSum qv;
    const auto& c = p.cont();
    for (std::size_t i = 0; i + 1 <= loc.index; ++i) {
        double d = c[i + 1] - c[i];
        qv.add(d * d);
    }
    if (!loc.exact) {
        double d = p.cont_at(t) - c[loc.index];
        qv.add(d * d);
    }
    return qv.value();
}

}  // namespace itolab
