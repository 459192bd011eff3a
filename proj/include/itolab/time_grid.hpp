#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace itolab {

/// Strictly increasing grid 0 = t_0 < t_1 < ... < t_N = T. Every path in this
/// library lives on such a grid; jump times are identified by grid index, so
/// two paths never disagree about "the same time" through float comparison.
class TimeGrid {
public:
    explicit TimeGrid(std::vector<double> pts) : pts_(std::move(pts)) {
        if (pts_.size() < 2) throw std::invalid_argument("TimeGrid: need at least two points");
        if (pts_.front() != 0.0) throw std::invalid_argument("TimeGrid: must start at 0");
        for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
            if (!(pts_[i] < pts_[i + 1]))
                throw std::invalid_argument("TimeGrid: points must be strictly increasing");
        }
        for (double t : pts_)
            if (!std::isfinite(t)) throw std::invalid_argument("TimeGrid: non-finite point");
    }

    static TimeGrid uniform(std::size_t n_steps, double horizon) {
        if (n_steps == 0) throw std::invalid_argument("TimeGrid::uniform: need at least one step");
        if (!(horizon > 0.0)) throw std::invalid_argument("TimeGrid::uniform: horizon must be positive");
        std::vector<double> pts(n_steps + 1);
        for (std::size_t i = 0; i <= n_steps; ++i)
            pts[i] = horizon * static_cast<double>(i) / static_cast<double>(n_steps);
        pts[n_steps] = horizon;
        return TimeGrid(std::move(pts));
    }

    std::size_t size() const { return pts_.size(); }
    double operator[](std::size_t i) const { return pts_[i]; }
    double horizon() const { return pts_.back(); }
    const std::vector<double>& points() const { return pts_; }

    double mesh() const {
        double m = 0.0;
        for (std::size_t i = 0; i + 1 < pts_.size(); ++i) m = std::max(m, pts_[i + 1] - pts_[i]);
        return m;
    }

    struct Location {
        std::size_t index;  // largest i with t_i <= t
        bool exact;         // t == t_index bitwise
    };

    /// Locate t in [0, T]. Throws if outside.
    Location locate(double t) const {
        if (!(t >= 0.0) || !(t <= pts_.back()))
            throw std::domain_error("TimeGrid::locate: time outside [0, horizon]");
        auto it = std::upper_bound(pts_.begin(), pts_.end(), t);
        std::size_t i = static_cast<std::size_t>(it - pts_.begin()) - 1;
        return {i, pts_[i] == t};
    }

    bool operator==(const TimeGrid& o) const { return pts_ == o.pts_; }

private:
    std::vector<double> pts_;
};

}  // namespace itolab
