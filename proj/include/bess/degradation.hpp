#pragma once

// Depth-of-discharge driven battery wear.
//
// Cycle life is modeled log-linear in depth, log10(cycles) = a + b*D, fitted by
// least squares on test points. A discharge from full to depth D consumes
// capital / cycles(D); a discharge between depths D1 and D2 costs the positive
// part of the difference. The optimizers use a piecewise-linear interpolant of
// capital / cycles(D) on uniform breakpoints, which is convex because b < 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "bess/core_model.hpp"
#include "bess/error.hpp"

namespace bess {

struct CycleLifeFit {
    double a = 0.0; ///< intercept of log10(cycles)
    double b = 0.0; ///< slope of log10(cycles) per unit depth, negative
};

inline CycleLifeFit fit_cycle_life(std::span<const CycleLifePoint> points)
{
    detail::require(points.size() >= 2, "cycle-life fit needs at least two points");
    double mean_d = 0.0;
    double mean_y = 0.0;
    for (const auto& p : points) {
        detail::require(p.depth > 0.0 && p.depth <= 1.0, "cycle-life depth must lie in (0, 1]");
        detail::require(p.cycles > 0.0, "cycle-life count must be positive");
        mean_d += p.depth;
        mean_y += std::log10(p.cycles);
    }
    const double n = static_cast<double>(points.size());
    mean_d /= n;
    mean_y /= n;
    double sdd = 0.0;
    double sdy = 0.0;
    for (const auto& p : points) {
        const double dd = p.depth - mean_d;
        sdd += dd * dd;
        sdy += dd * (std::log10(p.cycles) - mean_y);
    }
    detail::require(sdd > 0.0, "cycle-life fit is degenerate: all depths are identical");
    CycleLifeFit fit;
    fit.b = sdy / sdd;
    fit.a = mean_y - fit.b * mean_d;
    detail::require(fit.b < 0.0, "fitted cycle life does not decrease with depth");
    return fit;
}

inline double cycle_life(const CycleLifeFit& fit, double depth)
{
    detail::require(depth >= 0.0 && depth <= 1.0, "depth must lie in [0, 1]");
    return std::pow(10.0, fit.a + fit.b * depth);
}

/// Wear cost of discharging from depth d1 to depth d2; zero when d2 <= d1.
inline double discharge_cost(const CycleLifeFit& fit, double capital, double d1, double d2)
{
    detail::require(capital >= 0.0, "capital cost must be non-negative");
    const double diff = 1.0 / cycle_life(fit, d2) - 1.0 / cycle_life(fit, d1);
    return capital * std::max(0.0, diff);
}

struct SegmentLine {
    double slope;
    double intercept;
};

/// Piecewise-linear wear cost versus depth on breakpoints 0 = x_0 < ... < x_S = 1.
struct DegradationCurve {
    std::vector<double> dod_x;
    std::vector<double> cost_y;
    std::vector<SegmentLine> segment_lines;

    std::size_t segments() const { return segment_lines.size(); }

    /// True when every breakpoint costs nothing (the wear-blind curve).
    bool is_zero() const
    {
        return std::all_of(cost_y.begin(), cost_y.end(), [](double c) { return c == 0.0; });
    }
};

inline DegradationCurve build_curve(const CycleLifeFit& fit, double capital, std::size_t segments = 10)
{
    detail::require(segments >= 2, "degradation curve needs at least two segments");
    detail::require(capital >= 0.0, "capital cost must be non-negative");
    DegradationCurve curve;
    for (std::size_t j = 0; j <= segments; ++j) {
        const double d = static_cast<double>(j) / static_cast<double>(segments);
        curve.dod_x.push_back(d);
        curve.cost_y.push_back(capital / cycle_life(fit, d));
    }
    for (std::size_t j = 0; j < segments; ++j) {
        const double dx = curve.dod_x[j + 1] - curve.dod_x[j];
        const double slope = (curve.cost_y[j + 1] - curve.cost_y[j]) / dx;
        curve.segment_lines.push_back({slope, curve.cost_y[j] - slope * curve.dod_x[j]});
    }
    return curve;
}

/// A curve that charges nothing for wear, on the same breakpoints.
inline DegradationCurve zero_curve(std::size_t segments = 10)
{
    DegradationCurve curve;
    for (std::size_t j = 0; j <= segments; ++j) {
        curve.dod_x.push_back(static_cast<double>(j) / static_cast<double>(segments));
        curve.cost_y.push_back(0.0);
    }
    curve.segment_lines.assign(segments, SegmentLine{0.0, 0.0});
    return curve;
}

/// Linear interpolation between the bracketing breakpoints.
inline double pw_cost(const DegradationCurve& curve, double depth)
{
    detail::require(depth >= 0.0 && depth <= 1.0, "depth must lie in [0, 1]");
    const auto& x = curve.dod_x;
    const auto it = std::upper_bound(x.begin(), x.end(), depth);
    std::size_t j = it == x.begin() ? 0 : static_cast<std::size_t>(it - x.begin()) - 1;
    j = std::min(j, curve.segments() - 1);
    const double w = (depth - x[j]) / (x[j + 1] - x[j]);
    return curve.cost_y[j] + w * (curve.cost_y[j + 1] - curve.cost_y[j]);
}

/// Wear charged for one day whose deepest point reaches `max_depth`, starting
/// (and ending) at `initial_depth`.
inline double daily_degradation(const DegradationCurve& curve, double initial_depth, double max_depth)
{
    const double clamped = std::clamp(max_depth, 0.0, 1.0);
    return std::max(0.0, pw_cost(curve, clamped) - pw_cost(curve, std::clamp(initial_depth, 0.0, 1.0)));
}

/// Deepest depth reached along a state-of-energy trajectory.
inline double max_depth(std::span<const double> soe, double soe_max)
{
    if (soe_max <= 0.0) {
        return 0.0;
    }
    double lowest = soe_max;
    for (double e : soe) {
        lowest = std::min(lowest, e);
    }
    return std::clamp((soe_max - lowest) / soe_max, 0.0, 1.0);
}

} // namespace bess
