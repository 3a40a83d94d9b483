// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lorasim {

/// Piecewise-linear interpolant through calibration points (x ascending, distinct).
class PiecewiseLinear {
public:
    PiecewiseLinear() = default;
    explicit PiecewiseLinear(std::vector<std::pair<double, double>> points);

    /// Interpolated value, or std::nullopt outside [front.x, back.x].
    std::optional<double> interpolate(double x) const;

    /// Linear continuation of the nearest end segment outside the domain. A
    /// single-point curve extrapolates proportionally through the origin.
    double extrapolate(double x) const;

    bool in_domain(double x) const;
    bool empty() const noexcept { return points_.empty(); }
    double min_x() const { return points_.front().first; }
    double max_x() const { return points_.back().first; }
    const std::vector<std::pair<double, double>>& points() const noexcept { return points_; }

    /// True when y never decreases as x grows.
    bool non_decreasing() const;

private:
    std::vector<std::pair<double, double>> points_;
};

}  // namespace lorasim
