// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#include "lorasim/piecewise.hpp"

#include <algorithm>
#include <stdexcept>

namespace lorasim {

PiecewiseLinear::PiecewiseLinear(std::vector<std::pair<double, double>> points) : points_(std::move(points)) {
    if (points_.empty()) throw std::invalid_argument("piecewise-linear curve needs at least one point");
    std::sort(points_.begin(), points_.end());
    for (std::size_t i = 1; i < points_.size(); ++i) {
        if (points_[i].first == points_[i - 1].first)
            throw std::invalid_argument("piecewise-linear curve has duplicate x values");
    }
}

bool PiecewiseLinear::in_domain(double x) const {
    return !points_.empty() && x >= points_.front().first && x <= points_.back().first;
}

std::optional<double> PiecewiseLinear::interpolate(double x) const {
    if (!in_domain(x)) return std::nullopt;
    auto hi = std::lower_bound(points_.begin(), points_.end(), x,
                               [](const std::pair<double, double>& p, double v) { return p.first < v; });
    if (hi->first == x) return hi->second;
    auto lo = hi - 1;
    const double t = (x - lo->first) / (hi->first - lo->first);
    return lo->second + t * (hi->second - lo->second);
}

double PiecewiseLinear::extrapolate(double x) const {
    if (auto v = interpolate(x)) return *v;
    if (points_.size() == 1) {
        const auto [x0, y0] = points_.front();
        return x0 == 0.0 ? y0 : y0 * x / x0;
    }
    const bool below = x < points_.front().first;
    const auto& a = below ? points_[0] : points_[points_.size() - 2];
    const auto& b = below ? points_[1] : points_.back();
    const double slope = (b.second - a.second) / (b.first - a.first);
    return a.second + slope * (x - a.first);
}

bool PiecewiseLinear::non_decreasing() const {
    for (std::size_t i = 1; i < points_.size(); ++i) {
        if (points_[i].second < points_[i - 1].second) return false;
    }
    return true;
}

}  // namespace lorasim
