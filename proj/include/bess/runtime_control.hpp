#pragma once

// Moving-horizon dispatch without knowledge of the cycle's remaining loads.
//
// Each day the controller knows today's load, the realized peak so far and a
// set of sampled future peak days. It minimizes today's energy charge and wear
// plus the scenario average of the best achievable demand charge and wear on
// the future peak day. Only today's dispatch is applied.
//
// The two-stage program separates along today's peak T. Per scenario s the
// recourse value for a fixed floor K on the peak is
//   h_s(K) = min_{M >= K} p_d*M + g_s(M),
// where g_s(M) is the least wear that holds the scenario day under M. Least wear
// means least depth, found by bisection on the lowest state of energy with an
// exact reachable-interval test. h_s is convex and non-decreasing, so the whole
// problem reduces to a convex search over T with one capped day LP per step.
// build_two_stage_problem writes the same program as a single LP for checking.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "bess/core_model.hpp"
#include "bess/degradation.hpp"
#include "bess/design_phase.hpp"
#include "bess/error.hpp"
#include "bess/lp/simplex.hpp"
#include "bess/tariff.hpp"

namespace bess {

/// Gaussian kernel density over historical daily peaks (kW).
struct KdeModel {
    std::vector<double> sample_points;
    double bandwidth = 1.0;

    double density(double x) const
    {
        constexpr double inv_sqrt_2pi = 0.3989422804014327;
        double s = 0.0;
        for (double p : sample_points) {
            const double z = (x - p) / bandwidth;
            s += std::exp(-0.5 * z * z);
        }
        return s * inv_sqrt_2pi / (bandwidth * static_cast<double>(sample_points.size()));
    }

    double mean() const
    {
        double s = 0.0;
        for (double p : sample_points) {
            s += p;
        }
        return s / static_cast<double>(sample_points.size());
    }

    /// One draw from the mixture; never negative (negative draws are redrawn).
    double draw(std::mt19937_64& rng) const
    {
        std::uniform_int_distribution<std::size_t> pick(0, sample_points.size() - 1);
        std::normal_distribution<double> kernel(0.0, bandwidth);
        for (int attempt = 0; attempt < 10000; ++attempt) {
            const double x = sample_points[pick(rng)] + kernel(rng);
            if (x >= 0.0) {
                return x;
            }
        }
        throw ValidationError("KDE keeps producing negative peaks; check the training data");
    }
};

/// Silverman's rule, 1.06 * sd * n^(-1/5); 0.1 * |mean| + 1e-6 when the sample
/// has no spread.
inline KdeModel fit_peak_kde(std::span<const double> history)
{
    detail::require(!history.empty(), "KDE needs at least one historical peak");
    KdeModel m;
    m.sample_points.assign(history.begin(), history.end());
    for (double x : history) {
        detail::require(std::isfinite(x), "historical peaks must be finite");
    }
    const double n = static_cast<double>(history.size());
    const double mean = m.mean();
    double ss = 0.0;
    for (double x : history) {
        ss += (x - mean) * (x - mean);
    }
    const double sd = history.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    m.bandwidth = sd > 0.0 ? 1.06 * sd * std::pow(n, -0.2) : 0.1 * std::abs(mean) + 1e-6;
    return m;
}

/// Equally weighted future peak-day profiles.
struct ScenarioSet {
    std::vector<std::vector<double>> scenarios;
    std::vector<double> weights;

    std::size_t size() const { return scenarios.size(); }

    static ScenarioSet uniform(std::vector<std::vector<double>> days)
    {
        detail::require(!days.empty(), "scenario set needs at least one scenario");
        ScenarioSet s;
        s.weights.assign(days.size(), 1.0 / static_cast<double>(days.size()));
        s.scenarios = std::move(days);
        return s;
    }
};

/// Reference day scaled so its maximum equals each drawn peak.
inline ScenarioSet sample_scenarios(const KdeModel& kde, std::size_t n, std::span<const double> shape_day,
                                    unsigned long long seed)
{
    detail::require(n >= 1, "scenario count must be >= 1");
    const double top = shape_day.empty() ? 0.0 : *std::max_element(shape_day.begin(), shape_day.end());
    detail::require(top > 0.0, "scenario shape day must have a positive maximum");
    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> days;
    days.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        const double peak = kde.draw(rng);
        std::vector<double> d(shape_day.begin(), shape_day.end());
        for (auto& v : d) {
            v *= peak / top;
        }
        // Pin the maximum exactly; scaling can be off by an ulp.
        *std::max_element(d.begin(), d.end()) = peak;
        days.push_back(std::move(d));
    }
    return ScenarioSet::uniform(std::move(days));
}

inline std::vector<double> daily_peaks(const BillingCycle& cycle)
{
    std::vector<double> out;
    for (const auto& d : cycle.days) {
        out.push_back(d.empty() ? 0.0 : *std::max_element(d.begin(), d.end()));
    }
    return out;
}

/// The day holding the cycle's highest interval.
inline std::vector<double> peak_day(const BillingCycle& cycle)
{
    const auto peaks = daily_peaks(cycle);
    detail::require(!peaks.empty(), "billing cycle has no days");
    const auto it = std::max_element(peaks.begin(), peaks.end());
    return cycle.days[static_cast<std::size_t>(it - peaks.begin())];
}

struct RuntimeState {
    double historical_peak = 0.0; ///< realized cycle maximum so far (kW)
    int peak_hour = 0;
    std::size_t day_index = 0;
    double energy_cost = 0.0; ///< realized energy charge so far
    double degradation = 0.0; ///< realized wear so far
};

/// Everything solve_day needs besides the state, today's load and the scenarios.
struct DayPricing {
    std::vector<double> energy_price; ///< per slot, currency per kWh
    double hours_per_slot = 0.25;
    double demand_price = 0.0; ///< relaxed bound price

    static DayPricing from(const TariffModel& tariff, unsigned month, int interval_minutes, Bound bound)
    {
        const auto season = tariff.season_of(month);
        return {slot_energy_prices(tariff, season, interval_minutes), interval_minutes / 60.0,
                demand_price_bounds(tariff, season).pick(bound)};
    }
};

struct DayDecision {
    std::vector<double> power;      ///< today's battery power (kW)
    std::vector<double> soe;        ///< kWh at the end of each interval
    double degradation = 0.0;       ///< wear of today's dispatch
    double target_peak = 0.0;       ///< today's planned peak
    double expected_objective = 0.0; ///< today's cost plus expected future-peak cost
};

namespace detail {

/// Recourse on one scenario peak day.
class PeakDayRecourse {
public:
    PeakDayRecourse(std::span<const double> load, const BatterySpec& battery, const DegradationCurve& curve,
                    double dh, double demand_price)
        : load_(load.begin(), load.end()), battery_(battery), curve_(curve), dh_(dh), p_d_(demand_price)
    {
        peak_ = load_.empty() ? 0.0 : *std::max_element(load_.begin(), load_.end());
        pw0_ = battery_.soe_max > 0.0 ? pw_cost(curve_, battery_.initial_depth()) : 0.0;
        lowest_ = lowest_cap();
        best_ = optimal_cap();
    }

    /// Least wear that keeps every interval at or below `cap`; +inf if impossible.
    double wear(double cap) const
    {
        if (battery_.soe_max <= 0.0) {
            return cap >= peak_ ? 0.0 : std::numeric_limits<double>::infinity();
        }
        if (!feasible(cap, 0.0)) {
            return std::numeric_limits<double>::infinity();
        }
        const double top = battery_.soe_ini;
        if (feasible(cap, top)) {
            return 0.0;
        }
        double lo = 0.0;
        double hi = top;
        for (int it = 0; it < 100 && hi - lo > 1e-13 * std::max(1.0, top); ++it) {
            const double mid = 0.5 * (lo + hi);
            (feasible(cap, mid) ? lo : hi) = mid;
        }
        const double depth = std::clamp((battery_.soe_max - lo) / battery_.soe_max, 0.0, 1.0);
        return std::max(0.0, pw_cost(curve_, depth) - pw0_);
    }

    double cost(double cap) const { return p_d_ * cap + wear(cap); }

    /// h(K): best demand charge plus wear with the peak held at or above K.
    double value(double floor) const { return cost(std::max(floor, best_)); }

    double optimal_peak() const { return best_; }

private:
    /// Whether some dispatch keeps the state of energy in [floor, soe_max],
    /// net load under `cap`, and returns to soe_ini.
    bool feasible(double cap, double floor) const
    {
        const double eps = 1e-12 * std::max(1.0, battery_.soe_max);
        double lo = battery_.soe_ini;
        double hi = battery_.soe_ini;
        for (double l : load_) {
            const double room = std::min(battery_.p_max, cap - l);
            if (room < battery_.p_min) {
                return false;
            }
            const double up = room >= 0.0 ? battery_.round_trip_efficiency * room : room;
            lo = std::max(floor, lo + battery_.p_min * dh_);
            hi = std::min(battery_.soe_max, hi + up * dh_);
            if (lo > hi + eps) {
                return false;
            }
        }
        return battery_.soe_ini >= lo - eps && battery_.soe_ini <= hi + eps;
    }

    double lowest_cap() const
    {
        if (battery_.soe_max <= 0.0) {
            return peak_;
        }
        double lo = peak_ + std::min(0.0, battery_.p_min) - 1.0;
        double hi = peak_;
        for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, peak_); ++it) {
            const double mid = 0.5 * (lo + hi);
            (feasible(mid, 0.0) ? hi : lo) = mid;
        }
        return hi;
    }

    /// Minimizer of the convex cost over [lowest feasible cap, unshaved peak].
    double optimal_cap() const
    {
        if (battery_.soe_max <= 0.0 || p_d_ <= 0.0) {
            return peak_;
        }
        constexpr double inv_phi = 0.6180339887498949;
        double a = lowest_;
        double b = peak_;
        double c = b - inv_phi * (b - a);
        double d = a + inv_phi * (b - a);
        double fc = cost(c);
        double fd = cost(d);
        for (int it = 0; it < 200 && b - a > 1e-11 * std::max(1.0, peak_); ++it) {
            if (fc <= fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = cost(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = cost(d);
            }
        }
        // The interval ends are candidates too: the minimum of a piecewise-linear
        // cost is often at a kink or an end.
        double best = 0.5 * (a + b);
        double fbest = cost(best);
        for (double x : {lowest_, peak_, a, b}) {
            const double fx = cost(x);
            if (fx < fbest) {
                best = x;
                fbest = fx;
            }
        }
        return best;
    }

    std::vector<double> load_;
    const BatterySpec& battery_;
    const DegradationCurve& curve_;
    double dh_;
    double p_d_;
    double peak_ = 0.0;
    double pw0_ = 0.0;
    double lowest_ = 0.0;
    double best_ = 0.0;
};

} // namespace detail

/// Today's dispatch minimizing today's energy charge and wear plus the scenario
/// average of the future peak day's demand charge and wear.
inline DayDecision solve_day(const RuntimeState& state, std::span<const double> today_load,
                             const ScenarioSet& scenarios, const BatterySpec& battery, const DegradationCurve& curve,
                             const DayPricing& pricing)
{
    battery.validate();
    detail::require(scenarios.size() >= 1 && scenarios.weights.size() == scenarios.size(),
                    "scenario set needs at least one weighted scenario");
    detail::require(today_load.size() == pricing.energy_price.size(), "today's load and prices differ in length");
    const double dh = pricing.hours_per_slot;

    std::vector<detail::PeakDayRecourse> recourse;
    recourse.reserve(scenarios.size());
    double flat_until = std::numeric_limits<double>::infinity();
    for (const auto& sc : scenarios.scenarios) {
        detail::require(sc.size() == today_load.size(), "scenario length differs from today's");
        recourse.emplace_back(sc, battery, curve, dh, pricing.demand_price);
        flat_until = std::min(flat_until, recourse.back().optimal_peak());
    }
    const double hist = state.historical_peak;
    flat_until = std::max(flat_until, hist);
    auto future = [&](double today_peak) {
        const double floor = std::max(hist, today_peak);
        double s = 0.0;
        for (std::size_t k = 0; k < recourse.size(); ++k) {
            s += scenarios.weights[k] * recourse[k].value(floor);
        }
        return s;
    };

    const detail::DayModel model{std::vector<double>(today_load.begin(), today_load.end()), pricing.energy_price, dh,
                                 &battery, &curve};
    auto free = detail::solve_capped_day(model, lp::kInf);
    if (!free) {
        throw SolverError("today's dispatch LP is infeasible");
    }
    detail::DayResult chosen = *free;
    double best = free->cost + future(free->peak);

    // Below flat_until the expected future cost does not move, and today's own
    // cost only grows as its peak is pushed down.
    if (free->peak > flat_until) {
        double a = std::max(flat_until, detail::min_feasible_peak(model));
        double b = free->peak;
        auto total = [&](double cap, detail::DayResult* keep) {
            auto r = detail::solve_capped_day(model, cap);
            if (!r) {
                return std::numeric_limits<double>::infinity();
            }
            const double v = r->cost + future(cap);
            if (keep != nullptr) {
                *keep = std::move(*r);
            }
            return v;
        };
        constexpr double inv_phi = 0.6180339887498949;
        double c = b - inv_phi * (b - a);
        double d = a + inv_phi * (b - a);
        double fc = total(c, nullptr);
        double fd = total(d, nullptr);
        for (int it = 0; it < 200 && b - a > 1e-10 * std::max(1.0, b); ++it) {
            if (fc <= fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = total(c, nullptr);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = total(d, nullptr);
            }
        }
        for (double x : {a, 0.5 * (a + b), b}) {
            detail::DayResult r;
            const double v = total(x, &r);
            if (v < best) {
                best = v;
                chosen = std::move(r);
            }
        }
    }

    DayDecision out;
    out.power = std::move(chosen.power);
    out.soe = soe_path(out.power, battery, dh);
    out.degradation = battery.soe_max > 0.0
                          ? daily_degradation(curve, battery.initial_depth(), max_depth(out.soe, battery.soe_max))
                          : 0.0;
    out.target_peak = chosen.peak;
    out.expected_objective = best;
    return out;
}

/// The two-stage program as one LP: today's block, one recourse block and one
/// peak variable per scenario.
struct TwoStageProblem {
    lp::LinearProgram lp;
    std::vector<std::pair<std::size_t, std::size_t>> today_vars;
    std::vector<std::size_t> peak_vars;

    std::vector<double> today_power(const std::vector<double>& x) const
    {
        std::vector<double> p;
        for (const auto& [c, d] : today_vars) {
            p.push_back(c == d ? x[c] : x[c] + x[d]);
        }
        return p;
    }
};

inline TwoStageProblem build_two_stage_problem(const RuntimeState& state, std::span<const double> today_load,
                                               const ScenarioSet& scenarios, const BatterySpec& battery,
                                               const DegradationCurve& curve, const DayPricing& pricing)
{
    battery.validate();
    const double dh = pricing.hours_per_slot;
    TwoStageProblem tp;
    auto& prob = tp.lp;
    double top = 0.0;
    for (double l : today_load) {
        top = std::max(top, l);
    }
    for (const auto& sc : scenarios.scenarios) {
        for (double l : sc) {
            top = std::max(top, l);
        }
    }
    const double upper = std::max(top + battery.p_max, state.historical_peak);
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        tp.peak_vars.push_back(prob.add_variable(state.historical_peak, upper,
                                                 scenarios.weights[s] * pricing.demand_price,
                                                 "M" + std::to_string(s)));
    }
    std::vector<double> today_cost(today_load.size());
    for (std::size_t t = 0; t < today_cost.size(); ++t) {
        today_cost[t] = pricing.energy_price[t] * dh;
    }
    auto today = detail::add_day_block(prob, today_load, today_cost, battery, curve, dh, tp.peak_vars,
                                       DegradationEncoding::epigraph, "today");
    tp.today_vars = std::move(today.vars);
    const std::vector<double> no_cost(today_load.size(), 0.0);
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        const std::size_t peak[1] = {tp.peak_vars[s]};
        auto block = detail::add_day_block(prob, scenarios.scenarios[s], no_cost, battery, curve, dh, peak,
                                           DegradationEncoding::epigraph, "s" + std::to_string(s));
        prob.set_cost(block.degradation_var, scenarios.weights[s]);
    }
    return tp;
}

// ---------------------------------------------------------------------------
// Cycle loop

/// Scenarios for `day` given everything realized so far.
using ScenarioProvider = std::function<ScenarioSet(std::size_t day, const RuntimeState& state)>;

/// Scenario peak days drawn from a KDE around a reference shape, one seed per day.
struct KdeScenarioSource {
    KdeModel kde;
    std::vector<double> shape_day;
    std::size_t count = 20;
    unsigned long long seed = 1;

    ScenarioSet operator()(std::size_t day, const RuntimeState&) const
    {
        return sample_scenarios(kde, count, shape_day, seed * 1000003ULL + day);
    }
};

struct RuntimeOptions {
    Bound bound = Bound::hi;
    /// Relative standard deviation of the multiplicative error on today's forecast.
    double forecast_noise = 0.0;
    unsigned long long seed = 1;
};

struct RuntimeDay {
    double historical_peak_before = 0.0;
    double target_peak = 0.0;
    double realized_peak = 0.0;
    double expected_objective = 0.0;
    double degradation = 0.0;
};

struct RuntimeTrace {
    std::vector<RuntimeDay> days;
    DispatchPlan plan;
    BillBreakdown realized_bill; ///< exact bill of the realized net load
    double realized_relaxed_bill = 0.0;
    RuntimeState final_state;

    double degradation() const { return plan.total_degradation(); }
};

/// Runs the controller through one cycle. Day i sees only the actual load of
/// day i (through its forecast) and the state realized on days before it; the
/// last day has no future peak day, so its scenario is an all-zero day.
inline RuntimeTrace run_cycle(const BillingCycle& actual, const ScenarioProvider& provider,
                              const BatterySpec& battery, const DegradationCurve& curve, const TariffModel& tariff,
                              const RuntimeOptions& options = {})
{
    detail::require(!actual.days.empty(), "billing cycle has no days");
    const DayPricing pricing = DayPricing::from(tariff, actual.month, actual.interval_minutes, options.bound);
    const double dh = actual.hours_per_slot();
    RuntimeTrace trace;
    RuntimeState state;
    for (std::size_t i = 0; i < actual.days.size(); ++i) {
        state.day_index = i;
        std::vector<double> forecast = actual.days[i];
        if (options.forecast_noise > 0.0) {
            std::mt19937_64 rng(options.seed * 7919ULL + i);
            std::normal_distribution<double> err(0.0, options.forecast_noise);
            for (auto& v : forecast) {
                v = std::max(0.0, v * (1.0 + err(rng)));
            }
        }
        const bool last = i + 1 == actual.days.size();
        const ScenarioSet scenarios =
            last ? ScenarioSet::uniform({std::vector<double>(forecast.size(), 0.0)}) : provider(i, state);
        DayDecision dec;
        try {
            dec = solve_day(state, forecast, scenarios, battery, curve, pricing);
        } catch (const SolverError& e) {
            throw SolverError("cycle " + actual.label() + " day " + std::to_string(i + 1) + ": " + e.what());
        }

        RuntimeDay rec;
        rec.historical_peak_before = state.historical_peak;
        rec.target_peak = dec.target_peak;
        rec.expected_objective = dec.expected_objective;
        rec.degradation = dec.degradation;
        const auto zero = std::vector<double>(forecast.size(), 0.0);
        const auto net = net_load(actual.days[i], dec.power, zero);
        for (std::size_t t = 0; t < net.size(); ++t) {
            rec.realized_peak = std::max(rec.realized_peak, net[t]);
            if (net[t] > state.historical_peak || (i == 0 && t == 0)) {
                state.historical_peak = std::max(state.historical_peak, net[t]);
                state.peak_hour = actual.hour_of_slot(t);
            }
            state.energy_cost += pricing.energy_price[t] * net[t] * dh;
        }
        state.degradation += dec.degradation;

        trace.plan.battery_power.push_back(dec.power);
        trace.plan.hvac_pre.push_back(zero);
        trace.plan.hvac_post.push_back(zero);
        trace.plan.hvac_windows.push_back(std::nullopt);
        trace.days.push_back(rec);
    }
    reprice_degradation(trace.plan, battery, curve, dh);
    const BillingCycle net = actual.with_days(trace.plan.net_days(actual));
    trace.realized_bill = bill(tariff, net);
    trace.realized_relaxed_bill = relaxed_bill(tariff, net, options.bound);
    trace.final_state = state;
    return trace;
}

} // namespace bess
