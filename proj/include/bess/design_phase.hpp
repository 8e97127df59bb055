#pragma once

// Perfect-foresight optimization of one billing cycle: battery dispatch (and
// optionally fixed HVAC pre/post-cooling windows) minimizing energy charge,
// relaxed demand charge and battery wear, plus the annual assessment and
// payback arithmetic built on top of it.
//
// The cycle problem couples its days only through the cycle peak M. For a fixed
// cap M every day is an independent small LP whose optimal cost g_i(M) is convex
// and non-increasing in M, so the cycle optimum is min_M p_d*M + sum_i g_i(M).
// optimize_cycle minimizes that one-dimensional convex function with tangent
// cuts, using the reduced costs of the capped power variables as slopes.
// build_cycle_problem writes the same problem as one monolithic LP (or, with the
// SOS2 encoding, a MILP); it is exact but only practical on small instances.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bess/core_model.hpp"
#include "bess/degradation.hpp"
#include "bess/error.hpp"
#include "bess/lp/branch_and_bound.hpp"
#include "bess/lp/linear_program.hpp"
#include "bess/lp/simplex.hpp"
#include "bess/tariff.hpp"

namespace bess {

/// Start hours of one day's pre-cooling and post-cooling windows.
struct HvacWindow {
    int pre_start = 0;
    int post_start = 0;

    bool operator==(const HvacWindow&) const = default;
};

/// HVAC parameters plus the window chosen for every day of a cycle (nullopt: no
/// load shifting that day).
struct HvacSchedule {
    HvacParams params;
    std::vector<std::optional<HvacWindow>> windows;
};

struct HvacDelta {
    std::vector<double> pre;  ///< >= 0
    std::vector<double> post; ///< <= 0

    std::vector<double> total() const
    {
        std::vector<double> out(pre.size());
        for (std::size_t t = 0; t < out.size(); ++t) {
            out[t] = pre[t] + post[t];
        }
        return out;
    }
};

inline HvacDelta hvac_delta(std::span<const double> day_load, int interval_minutes, const HvacParams& hvac,
                            std::optional<HvacWindow> window)
{
    HvacDelta d{std::vector<double>(day_load.size(), 0.0), std::vector<double>(day_load.size(), 0.0)};
    if (!window) {
        return d;
    }
    detail::require(window->pre_start + hvac.pre_hours <= window->post_start,
                    "pre-cooling must end before post-cooling starts");
    detail::require(window->pre_start >= 0 && window->post_start + hvac.post_hours <= 24,
                    "HVAC windows must fit inside the day");
    for (std::size_t t = 0; t < day_load.size(); ++t) {
        const int minute = static_cast<int>(t) * interval_minutes;
        if (minute >= window->pre_start * 60 && minute < (window->pre_start + hvac.pre_hours) * 60) {
            d.pre[t] = hvac.pre_increase_pct / 100.0 * day_load[t];
        }
        if (minute >= window->post_start * 60 && minute < (window->post_start + hvac.post_hours) * 60) {
            d.post[t] = -hvac.post_decrease_pct / 100.0 * day_load[t];
        }
    }
    return d;
}

/// Battery and HVAC decisions for every day of a cycle.
struct DispatchPlan {
    std::vector<std::vector<double>> battery_power; ///< kW, positive charging
    std::vector<std::vector<double>> hvac_pre;      ///< kW
    std::vector<std::vector<double>> hvac_post;     ///< kW
    std::vector<double> per_day_degradation;        ///< currency
    std::vector<std::vector<double>> soe_trajectory; ///< kWh at the end of each interval
    std::vector<std::optional<HvacWindow>> hvac_windows;

    double total_degradation() const
    {
        double s = 0.0;
        for (double d : per_day_degradation) {
            s += d;
        }
        return s;
    }

    /// Net metered load of every day.
    std::vector<std::vector<double>> net_days(const BillingCycle& load) const
    {
        std::vector<std::vector<double>> out;
        out.reserve(load.days.size());
        for (std::size_t i = 0; i < load.days.size(); ++i) {
            std::vector<double> h(load.days[i].size());
            for (std::size_t t = 0; t < h.size(); ++t) {
                h[t] = hvac_pre[i][t] + hvac_post[i][t];
            }
            out.push_back(net_load(load.days[i], battery_power[i], h));
        }
        return out;
    }

    /// Energy moved through the battery on one day, charge plus discharge (kWh).
    double day_throughput(std::size_t day, double hours_per_slot) const
    {
        double e = 0.0;
        for (double p : battery_power[day]) {
            e += std::abs(p) * hours_per_slot;
        }
        return e;
    }
};

/// State of energy at the end of each interval, starting from soe_ini. The
/// round-trip efficiency is applied to charging power.
inline std::vector<double> soe_path(std::span<const double> power, const BatterySpec& battery, double hours_per_slot)
{
    std::vector<double> soe(power.size());
    double e = battery.soe_ini;
    for (std::size_t t = 0; t < power.size(); ++t) {
        const double p = power[t];
        e += (p > 0.0 ? battery.round_trip_efficiency * p : p) * hours_per_slot;
        soe[t] = e;
    }
    return soe;
}

/// Recompute every day's trajectory and wear charge from the battery power.
inline void reprice_degradation(DispatchPlan& plan, const BatterySpec& battery, const DegradationCurve& curve,
                                double hours_per_slot)
{
    plan.soe_trajectory.clear();
    plan.per_day_degradation.clear();
    for (const auto& day : plan.battery_power) {
        auto soe = soe_path(day, battery, hours_per_slot);
        plan.per_day_degradation.push_back(
            battery.soe_max > 0.0
                ? daily_degradation(curve, battery.initial_depth(), max_depth(soe, battery.soe_max))
                : 0.0);
        plan.soe_trajectory.push_back(std::move(soe));
    }
}

/// Largest violation of the power boxes, the energy boxes and the end-of-day
/// return to soe_ini.
struct PlanViolation {
    double power = 0.0;    ///< kW
    double energy = 0.0;   ///< kWh
    double terminal = 0.0; ///< kWh

    double max() const { return std::max({power, energy, terminal}); }
};

inline PlanViolation plan_violation(const DispatchPlan& plan, const BatterySpec& battery, double hours_per_slot)
{
    PlanViolation v;
    for (const auto& day : plan.battery_power) {
        for (double p : day) {
            v.power = std::max({v.power, p - battery.p_max, battery.p_min - p});
        }
        const auto soe = soe_path(day, battery, hours_per_slot);
        for (double e : soe) {
            v.energy = std::max({v.energy, e - battery.soe_max, -e});
        }
        if (!soe.empty()) {
            v.terminal = std::max(v.terminal, std::abs(soe.back() - battery.soe_ini));
        }
    }
    return v;
}

// ---------------------------------------------------------------------------
// Monolithic formulation

enum class DegradationEncoding { epigraph, sos2 };

struct CycleProblem {
    lp::LinearProgram lp;
    /// Per day and interval: charging variable and discharging variable. With a
    /// lossless battery both entries name the same signed power variable.
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> power_vars;
    std::vector<std::size_t> degradation_vars;
    std::size_t peak_var = 0;

    std::vector<std::vector<double>> battery_power(const std::vector<double>& x) const
    {
        std::vector<std::vector<double>> out;
        for (const auto& day : power_vars) {
            std::vector<double> p;
            for (const auto& [c, d] : day) {
                p.push_back(c == d ? x[c] : x[c] + x[d]);
            }
            out.push_back(std::move(p));
        }
        return out;
    }
};

namespace detail {

inline std::vector<std::vector<double>> adjusted_days(const BillingCycle& cycle, const HvacSchedule* hvac)
{
    std::vector<std::vector<double>> days = cycle.days;
    if (hvac == nullptr) {
        return days;
    }
    require(hvac->windows.size() == cycle.days.size(), "HVAC schedule must name a window for every day");
    for (std::size_t i = 0; i < days.size(); ++i) {
        const auto d = hvac_delta(cycle.days[i], cycle.interval_minutes, hvac->params, hvac->windows[i]);
        for (std::size_t t = 0; t < days[i].size(); ++t) {
            days[i][t] += d.pre[t] + d.post[t];
        }
    }
    return days;
}

/// Energy flowing into storage per interval as terms over the power variables.
inline std::vector<lp::Term> stored_terms(const std::pair<std::size_t, std::size_t>& v, double eta, double scale)
{
    if (v.first == v.second) {
        return {{v.first, scale}};
    }
    return {{v.first, eta * scale}, {v.second, scale}};
}

struct DayBlock {
    std::vector<std::pair<std::size_t, std::size_t>> vars;
    std::size_t degradation_var = 0;
};

/// One day of battery operation inside a larger program: power variables with
/// their boxes, prefix energy boxes, return to soe_ini, and a wear variable C
/// with C >= pw(deepest depth of the day) - pw(D0). Every listed peak variable
/// is constrained to cover the day's net load. `slot_cost` is the price of one
/// kW held for one slot; the constant part of the energy charge goes to the
/// program offset.
inline DayBlock add_day_block(lp::LinearProgram& prob, std::span<const double> load,
                              std::span<const double> slot_cost, const BatterySpec& battery,
                              const DegradationCurve& curve, double dh, std::span<const std::size_t> peak_vars,
                              DegradationEncoding encoding, const std::string& tag)
{
    const double eta = battery.round_trip_efficiency;
    const bool split = eta < 1.0;
    const bool empty = battery.soe_max <= 0.0;
    const double d0 = battery.initial_depth();
    const double pw0 = pw_cost(curve, d0);

    DayBlock block;
    auto& vars = block.vars;
    for (std::size_t t = 0; t < load.size(); ++t) {
        prob.add_offset(slot_cost[t] * load[t]);
        const std::string name = tag + "t" + std::to_string(t);
        if (split) {
            const auto c = prob.add_variable(0.0, empty ? 0.0 : battery.p_max, slot_cost[t], "pc_" + name);
            const auto d = prob.add_variable(empty ? 0.0 : battery.p_min, 0.0, slot_cost[t], "pd_" + name);
            vars.emplace_back(c, d);
            for (std::size_t m : peak_vars) {
                prob.add_ge({{m, 1.0}, {c, -1.0}, {d, -1.0}}, load[t]);
            }
        } else {
            const auto p = prob.add_variable(empty ? 0.0 : battery.p_min, empty ? 0.0 : battery.p_max, slot_cost[t],
                                             "p_" + name);
            vars.emplace_back(p, p);
            for (std::size_t m : peak_vars) {
                prob.add_ge({{m, 1.0}, {p, -1.0}}, load[t]);
            }
        }
    }
    const auto c_deg = prob.add_variable(0.0, lp::kInf, 1.0, "cdeg_" + tag);
    block.degradation_var = c_deg;

    // Energy boxes on every prefix, return to soe_ini at the end of the day.
    std::vector<lp::Term> prefix;
    for (std::size_t t = 0; t < load.size(); ++t) {
        for (const auto& term : stored_terms(vars[t], eta, dh)) {
            prefix.push_back(term);
        }
        if (t + 1 == load.size()) {
            prob.add_eq(prefix, 0.0);
        } else {
            prob.add_range(prefix, -battery.soe_ini, battery.soe_max - battery.soe_ini);
        }
    }
    if (empty) {
        return block;
    }

    if (encoding == DegradationEncoding::epigraph) {
        // C >= alpha_j * DoD_t + beta_j - pw(D0) with DoD_t = D0 - stored_t / soe_max.
        std::vector<lp::Term> stored;
        for (std::size_t t = 0; t < load.size(); ++t) {
            for (const auto& term : stored_terms(vars[t], eta, dh / battery.soe_max)) {
                stored.push_back(term);
            }
            for (const auto& line : curve.segment_lines) {
                std::vector<lp::Term> row{{c_deg, 1.0}};
                for (const auto& term : stored) {
                    row.push_back({term.var, line.slope * term.coef});
                }
                prob.add_ge(std::move(row), line.slope * d0 + line.intercept - pw0);
            }
        }
        return block;
    }

    // Adjacent-weight encoding of the deepest point of the day.
    const std::size_t s = curve.segments();
    const auto dmax = prob.add_variable(0.0, 1.0, 0.0, "dmax_" + tag);
    std::vector<lp::Term> stored;
    for (std::size_t t = 0; t < load.size(); ++t) {
        for (const auto& term : stored_terms(vars[t], eta, dh / battery.soe_max)) {
            stored.push_back(term);
        }
        std::vector<lp::Term> row{{dmax, 1.0}};
        row.insert(row.end(), stored.begin(), stored.end());
        prob.add_ge(std::move(row), d0);
    }
    std::vector<std::size_t> w(s + 1);
    std::vector<std::size_t> z(s);
    std::vector<lp::Term> sum_w;
    std::vector<lp::Term> depth{{dmax, -1.0}};
    std::vector<lp::Term> cost{{c_deg, 1.0}};
    for (std::size_t j = 0; j <= s; ++j) {
        w[j] = prob.add_variable(0.0, 1.0, 0.0);
        sum_w.push_back({w[j], 1.0});
        depth.push_back({w[j], curve.dod_x[j]});
        cost.push_back({w[j], -curve.cost_y[j]});
    }
    std::vector<lp::Term> sum_z;
    for (std::size_t k = 0; k < s; ++k) {
        z[k] = prob.add_binary();
        sum_z.push_back({z[k], 1.0});
    }
    prob.add_eq(sum_w, 1.0);
    prob.add_eq(sum_z, 1.0);
    prob.add_eq(depth, 0.0);
    prob.add_ge(cost, -pw0);
    for (std::size_t j = 0; j <= s; ++j) {
        std::vector<lp::Term> row{{w[j], 1.0}};
        if (j > 0) {
            row.push_back({z[j - 1], -1.0});
        }
        if (j < s) {
            row.push_back({z[j], -1.0});
        }
        prob.add_le(std::move(row), 0.0);
    }
    return block;
}

} // namespace detail

/// The whole cycle as one program: per-interval battery power, one wear
/// variable per day, one cycle peak variable. The objective constant carries the
/// energy charge of the (HVAC-adjusted) building load.
inline CycleProblem build_cycle_problem(const BillingCycle& cycle, const BatterySpec& battery,
                                        const DegradationCurve& curve, const TariffModel& tariff, Bound bound,
                                        const HvacSchedule* hvac = nullptr,
                                        DegradationEncoding encoding = DegradationEncoding::epigraph)
{
    battery.validate();
    const auto season = tariff.season_of(cycle.month);
    const double p_d = demand_price_bounds(tariff, season).pick(bound);
    const auto prices = slot_energy_prices(tariff, season, cycle.interval_minutes);
    const auto loads = detail::adjusted_days(cycle, hvac);
    const double dh = cycle.hours_per_slot();
    std::vector<double> slot_cost(prices.size());
    for (std::size_t t = 0; t < prices.size(); ++t) {
        slot_cost[t] = prices[t] * dh;
    }

    CycleProblem cp;
    double max_load = 0.0;
    for (const auto& day : loads) {
        for (double l : day) {
            max_load = std::max(max_load, l);
        }
    }
    cp.peak_var = cp.lp.add_variable(0.0, max_load + std::max(0.0, battery.p_max), p_d, "M");
    const std::size_t peak[1] = {cp.peak_var};
    for (std::size_t i = 0; i < loads.size(); ++i) {
        auto block = detail::add_day_block(cp.lp, loads[i], slot_cost, battery, curve, dh, peak, encoding,
                                           "d" + std::to_string(i));
        cp.power_vars.push_back(std::move(block.vars));
        cp.degradation_vars.push_back(block.degradation_var);
    }
    return cp;
}

// ---------------------------------------------------------------------------
// Decomposed solve

namespace detail {

/// One day of the cycle problem with the cycle peak replaced by a cap.
struct DayModel {
    std::vector<double> load; ///< building load including any HVAC adjustment
    std::vector<double> price;
    double dh = 0.25;
    const BatterySpec* battery = nullptr;
    const DegradationCurve* curve = nullptr;
};

struct DayResult {
    std::vector<double> power;
    double cost = 0.0;  ///< energy charge of the net load plus LP wear charge
    double slope = 0.0; ///< derivative of cost with respect to the cap (<= 0)
    double peak = 0.0;
};

inline double energy_of(const DayModel& m, std::span<const double> power)
{
    double e = 0.0;
    for (std::size_t t = 0; t < m.load.size(); ++t) {
        e += m.price[t] * (m.load[t] + power[t]) * m.dh;
    }
    return e;
}

/// The day LP. Without a peak price the cap enters as upper bounds on power.
/// With one, the day's peak is a variable charged at that price; `peak_only`
/// then zeroes every other cost (used to find the smallest attainable peak).
struct DayLp {
    lp::LinearProgram prob;
    std::vector<std::pair<std::size_t, std::size_t>> vars;
    std::vector<bool> capped; ///< per variable: upper bound comes from the cap
    std::size_t peak_var = static_cast<std::size_t>(-1);
    bool infeasible_bounds = false;
};

inline DayLp build_day_lp(const DayModel& m, double cap, std::optional<double> peak_price, bool peak_only = false)
{
    const BatterySpec& b = *m.battery;
    const DegradationCurve& curve = *m.curve;
    const double eta = b.round_trip_efficiency;
    const bool split = eta < 1.0;
    const bool empty = b.soe_max <= 0.0;
    const double pmin = empty ? 0.0 : b.p_min;
    const double pmax = empty ? 0.0 : b.p_max;
    const std::size_t h = m.load.size();

    DayLp d;
    auto& prob = d.prob;
    const bool peak_variable = peak_price.has_value();
    if (peak_variable) {
        d.peak_var = prob.add_variable(0.0, lp::kInf, *peak_price);
    }
    for (std::size_t t = 0; t < h; ++t) {
        const double room = cap - m.load[t];
        const double cost = peak_only ? 0.0 : m.price[t] * m.dh;
        if (split) {
            const double cu = std::min(pmax, std::max(0.0, room));
            const double du = std::min(0.0, room);
            if (du < pmin) {
                d.infeasible_bounds = true;
            }
            const auto c = prob.add_variable(0.0, cu, cost);
            const auto dv = prob.add_variable(pmin, std::max(pmin, du), cost);
            d.capped.resize(prob.num_variables(), false);
            d.capped[c] = room >= 0.0 && room < pmax;
            d.capped[dv] = room < 0.0;
            d.vars.emplace_back(c, dv);
            if (peak_variable) {
                prob.add_ge({{d.peak_var, 1.0}, {c, -1.0}, {dv, -1.0}}, m.load[t]);
            }
        } else {
            const double ub = std::min(pmax, room);
            if (ub < pmin) {
                d.infeasible_bounds = true;
            }
            const auto p = prob.add_variable(pmin, std::max(pmin, ub), cost);
            d.capped.resize(prob.num_variables(), false);
            d.capped[p] = room < pmax;
            d.vars.emplace_back(p, p);
            if (peak_variable) {
                prob.add_ge({{d.peak_var, 1.0}, {p, -1.0}}, m.load[t]);
            }
        }
    }
    if (empty) {
        return d;
    }
    // Depth beyond the starting depth, split along the curve's segments above it.
    // Each piece is measured in kWh per slot-hour so every row coefficient is 1.
    const double d0 = b.initial_depth();
    const double unit = b.soe_max / m.dh;
    std::vector<lp::Term> extra;
    for (std::size_t j = 0; j < curve.segments(); ++j) {
        const double lo = std::max(curve.dod_x[j], d0);
        const double hi = curve.dod_x[j + 1];
        if (hi <= lo) {
            continue;
        }
        const double slope = peak_only ? 0.0 : curve.segment_lines[j].slope / unit;
        const auto v = prob.add_variable(0.0, (hi - lo) * unit, slope);
        extra.push_back({v, 1.0});
    }
    d.capped.resize(prob.num_variables(), false);
    std::vector<lp::Term> prefix;
    for (std::size_t t = 0; t < h; ++t) {
        for (const auto& term : stored_terms(d.vars[t], eta, 1.0)) {
            prefix.push_back(term);
        }
        if (t + 1 == h) {
            prob.add_eq(prefix, 0.0);
        } else {
            prob.add_le(prefix, (b.soe_max - b.soe_ini) / m.dh);
            std::vector<lp::Term> low = prefix;
            low.insert(low.end(), extra.begin(), extra.end());
            prob.add_ge(std::move(low), 0.0);
        }
    }
    return d;
}

inline std::vector<double> day_power(const DayLp& d, const std::vector<double>& x)
{
    std::vector<double> p;
    p.reserve(d.vars.size());
    for (const auto& [c, dv] : d.vars) {
        p.push_back(c == dv ? x[c] : x[c] + x[dv]);
    }
    return p;
}

/// Cheapest dispatch of one day with every net-load interval at most `cap`.
/// nullopt when no dispatch meets the cap.
inline std::optional<DayResult> solve_capped_day(const DayModel& m, double cap)
{
    DayLp d = build_day_lp(m, cap, std::nullopt);
    if (d.infeasible_bounds) {
        return std::nullopt;
    }
    const lp::Solution sol = lp::solve_lp(d.prob);
    if (sol.status == lp::Status::infeasible) {
        return std::nullopt;
    }
    if (!sol.optimal()) {
        throw SolverError(std::string("day dispatch LP ended with status ") + lp::to_string(sol.status));
    }
    DayResult r;
    r.power = day_power(d, sol.x);
    double constant = 0.0;
    for (std::size_t t = 0; t < m.load.size(); ++t) {
        constant += m.price[t] * m.load[t] * m.dh;
    }
    r.cost = sol.objective_value + constant;
    for (std::size_t j = 0; j < d.capped.size(); ++j) {
        if (d.capped[j]) {
            r.slope += std::min(0.0, sol.reduced_costs[j]);
        }
    }
    r.peak = 0.0;
    for (std::size_t t = 0; t < m.load.size(); ++t) {
        r.peak = std::max(r.peak, m.load[t] + r.power[t]);
    }
    return r;
}

/// Smallest peak any feasible dispatch of the day can reach.
inline double min_feasible_peak(const DayModel& m)
{
    DayLp d = build_day_lp(m, lp::kInf, 1.0, true);
    const lp::Solution sol = lp::solve_lp(d.prob);
    if (!sol.optimal()) {
        throw SolverError(std::string("minimum-peak LP ended with status ") + lp::to_string(sol.status));
    }
    return sol.x[d.peak_var];
}

/// One-day cycle solved directly with the peak as a priced variable.
inline DayResult solve_single_day(const DayModel& m, double demand_price)
{
    DayLp d = build_day_lp(m, lp::kInf, demand_price);
    const lp::Solution sol = lp::solve_lp(d.prob);
    if (!sol.optimal()) {
        throw SolverError(std::string("single-day LP ended with status ") + lp::to_string(sol.status));
    }
    DayResult r;
    r.power = day_power(d, sol.x);
    for (std::size_t t = 0; t < m.load.size(); ++t) {
        r.peak = std::max(r.peak, m.load[t] + r.power[t]);
    }
    r.cost = sol.objective_value - demand_price * sol.x[d.peak_var] + energy_of(m, std::vector<double>(m.load.size()));
    return r;
}

struct CycleEval {
    double value = 0.0;
    double slope = 0.0;
    std::vector<DayResult> days;
};

/// Minimizes p_d * M + sum_i g_i(M) over the cycle cap M.
class CapSearch {
public:
    CapSearch(std::vector<DayModel> days, double demand_price)
        : days_(std::move(days)), p_d_(demand_price)
    {
    }

    CycleEval run()
    {
        free_.reserve(days_.size());
        double m_hi = 0.0;
        for (std::size_t i = 0; i < days_.size(); ++i) {
            auto r = solve_capped_day(days_[i], lp::kInf);
            if (!r) {
                throw SolverError("day " + std::to_string(i + 1) + " has no feasible dispatch");
            }
            m_hi = std::max(m_hi, r->peak);
            free_.push_back(std::move(*r));
        }
        CycleEval hi = evaluate(m_hi);
        if (p_d_ <= 0.0) {
            return hi;
        }
        double m_lo = lowest_cap(m_hi);
        if (m_lo >= m_hi) {
            return hi;
        }
        CycleEval lo = evaluate_lowest(m_lo, m_hi);
        if (lo.slope >= 0.0) {
            return lo;
        }
        double a = m_lo;
        double b = m_hi;
        CycleEval fa = lo;
        CycleEval fb = hi;
        CycleEval best = fa.value <= fb.value ? fa : fb;
        for (int iter = 0; iter < 200; ++iter) {
            // The two tangents meet at c; their common value bounds the minimum from below.
            double c = (fb.value - fa.value + fa.slope * a - fb.slope * b) / (fa.slope - fb.slope);
            c = std::clamp(c, a, b);
            const double lower_bound = fa.value + fa.slope * (c - a);
            const double width = b - a;
            c = std::clamp(c, a + 1e-3 * width, b - 1e-3 * width);
            const double scale = std::max(1.0, std::abs(best.value));
            if (best.value - lower_bound <= 1e-11 * scale || width <= 1e-10 * std::max(1.0, b)) {
                break;
            }
            CycleEval fc = evaluate(c);
            if (fc.value < best.value) {
                best = fc;
            }
            if (std::abs(fc.slope) <= 1e-12 * std::max(1.0, p_d_)) {
                break;
            }
            if (fc.slope > 0.0) {
                b = c;
                fb = std::move(fc);
            } else {
                a = c;
                fa = std::move(fc);
            }
        }
        return best;
    }

private:
    double lowest_cap(double m_hi)
    {
        std::vector<std::size_t> order(days_.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t x, std::size_t y) { return free_[x].peak > free_[y].peak; });
        double m_lo = 0.0;
        for (std::size_t i : order) {
            if (free_[i].peak <= m_lo) {
                break;
            }
            m_lo = std::max(m_lo, min_feasible_peak(days_[i]));
        }
        return std::min(m_lo, m_hi);
    }

    /// Evaluates at `cap`, nudging it upward when the minimum-peak LP landed a
    /// rounding error below a day's true minimum.
    CycleEval evaluate_lowest(double& cap, double m_hi)
    {
        for (double nudge = 1e-10;; nudge *= 10.0) {
            try {
                return evaluate(cap);
            } catch (const SolverError&) {
                if (nudge > 1e-6) {
                    throw;
                }
                cap = std::min(m_hi, cap + nudge * std::max(1.0, m_hi));
            }
        }
    }

    CycleEval evaluate(double cap)
    {
        CycleEval e;
        e.value = p_d_ * cap;
        e.slope = p_d_;
        for (std::size_t i = 0; i < days_.size(); ++i) {
            if (free_[i].peak <= cap) {
                e.value += free_[i].cost;
                e.days.push_back(free_[i]);
                continue;
            }
            auto r = solve_capped_day(days_[i], cap);
            if (!r) {
                throw SolverError("day " + std::to_string(i + 1) + " cannot meet peak cap " + std::to_string(cap));
            }
            e.value += r->cost;
            e.slope += r->slope;
            e.days.push_back(std::move(*r));
        }
        return e;
    }

    std::vector<DayModel> days_;
    double p_d_;
    std::vector<DayResult> free_;
};

} // namespace detail

struct CycleOutcome {
    DispatchPlan plan;
    Bound bound = Bound::hi;
    double demand_price = 0.0;    ///< relaxed price used by the optimizer
    double relaxed_objective = 0.0; ///< relaxed bill of the plan plus its wear
    BillBreakdown exact_bill;       ///< net load re-priced at the hour of its peak
    double exact_total = 0.0;       ///< exact bill plus wear
    bool verified = false;          ///< optimized peak lies in the peak window
};

inline CycleOutcome optimize_cycle(const BillingCycle& cycle, const BatterySpec& battery,
                                   const DegradationCurve& curve, const TariffModel& tariff, Bound bound,
                                   const HvacSchedule* hvac = nullptr)
{
    battery.validate();
    detail::require(!cycle.days.empty(), "billing cycle has no days");
    const auto season = tariff.season_of(cycle.month);
    const double p_d = demand_price_bounds(tariff, season).pick(bound);
    const auto prices = slot_energy_prices(tariff, season, cycle.interval_minutes);
    const auto loads = detail::adjusted_days(cycle, hvac);

    std::vector<detail::DayModel> models;
    for (const auto& load : loads) {
        models.push_back({load, prices, cycle.hours_per_slot(), &battery, &curve});
    }
    detail::CycleEval best;
    try {
        if (models.size() == 1) {
            best.days.push_back(detail::solve_single_day(models[0], p_d));
        } else {
            best = detail::CapSearch(std::move(models), p_d).run();
        }
    } catch (const SolverError& e) {
        throw SolverError("cycle " + cycle.label() + ": " + e.what());
    }

    CycleOutcome out;
    out.bound = bound;
    out.demand_price = p_d;
    auto& plan = out.plan;
    for (std::size_t i = 0; i < cycle.days.size(); ++i) {
        plan.battery_power.push_back(best.days[i].power);
        const auto window = hvac ? hvac->windows[i] : std::nullopt;
        const HvacParams params = hvac ? hvac->params : HvacParams{};
        auto d = hvac_delta(cycle.days[i], cycle.interval_minutes, params, window);
        plan.hvac_pre.push_back(std::move(d.pre));
        plan.hvac_post.push_back(std::move(d.post));
        plan.hvac_windows.push_back(window);
    }
    reprice_degradation(plan, battery, curve, cycle.hours_per_slot());
    const BillingCycle net = cycle.with_days(plan.net_days(cycle));
    out.relaxed_objective = relaxed_bill(tariff, net, bound) + plan.total_degradation();
    out.exact_bill = bill(tariff, net);
    out.exact_total = out.exact_bill.total + plan.total_degradation();
    out.verified = verify_peak_window(tariff, net);
    return out;
}

// ---------------------------------------------------------------------------
// HVAC window choice

struct HvacSearch {
    std::optional<HvacWindow> best; ///< nullopt: no pair beats leaving HVAC alone
    double best_objective = 0.0;
    double no_hvac_objective = 0.0;
    std::vector<std::pair<HvacWindow, double>> evaluated;
};

/// Every admissible (pre, post) pair, pre-start ascending then post-start ascending.
inline std::vector<HvacWindow> admissible_windows(const HvacParams& hvac)
{
    hvac.validate();
    auto pre = hvac.candidate_start_hours;
    auto post = hvac.candidate_post_start_hours;
    std::sort(pre.begin(), pre.end());
    std::sort(post.begin(), post.end());
    pre.erase(std::unique(pre.begin(), pre.end()), pre.end());
    post.erase(std::unique(post.begin(), post.end()), post.end());
    std::vector<HvacWindow> out;
    for (int s : pre) {
        const int pre_end = s + hvac.pre_hours;
        if (pre_end > 24) {
            continue;
        }
        if (post.empty()) {
            if (pre_end + hvac.post_hours <= 24) {
                out.push_back({s, pre_end});
            }
            continue;
        }
        for (int p : post) {
            if (p >= pre_end && p + hvac.post_hours <= 24) {
                out.push_back({s, p});
            }
        }
    }
    if (out.empty()) {
        throw ValidationError("no admissible HVAC window pair fits inside one day");
    }
    return out;
}

/// Best window pair for one day, each pair scored by optimizing the day as a
/// one-day cycle. Ties go to the earliest pre start, then the earliest post
/// start; leaving HVAC alone wins only when strictly cheaper.
inline HvacSearch enumerate_hvac_windows(const BillingCycle& one_day, const BatterySpec& battery,
                                         const DegradationCurve& curve, const TariffModel& tariff, Bound bound,
                                         const HvacParams& hvac)
{
    detail::require(one_day.days.size() == 1, "HVAC window search works on a single day");
    HvacSearch out;
    HvacSchedule schedule{hvac, {std::nullopt}};
    bool first = true;
    for (const HvacWindow& w : admissible_windows(hvac)) {
        schedule.windows[0] = w;
        const double obj = optimize_cycle(one_day, battery, curve, tariff, bound, &schedule).relaxed_objective;
        out.evaluated.emplace_back(w, obj);
        if (first || obj < out.best_objective) {
            out.best = w;
            out.best_objective = obj;
            first = false;
        }
    }
    out.no_hvac_objective = optimize_cycle(one_day, battery, curve, tariff, bound).relaxed_objective;
    if (out.no_hvac_objective < out.best_objective) {
        out.best = std::nullopt;
        out.best_objective = out.no_hvac_objective;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Annual assessment

struct CycleAssessment {
    std::string label;
    double baseline_hi = 0.0; ///< relaxed bill of the untouched load
    double baseline_lo = 0.0;
    double baseline_exact = 0.0;
    CycleOutcome hi;
    CycleOutcome lo;
    bool hvac_used_hi = false;
    bool hvac_used_lo = false;

    /// Bill reduction against the baseline under the same relaxed price, wear excluded.
    double saving_hi() const { return baseline_hi - (hi.relaxed_objective - hi.plan.total_degradation()); }
    double saving_lo() const { return baseline_lo - (lo.relaxed_objective - lo.plan.total_degradation()); }
    double degradation_hi() const { return hi.plan.total_degradation(); }
    double degradation_lo() const { return lo.plan.total_degradation(); }
};

struct AssessmentReport {
    std::vector<CycleAssessment> cycles;

    double annual_saving(Bound b) const
    {
        double s = 0.0;
        for (const auto& c : cycles) {
            s += b == Bound::hi ? c.saving_hi() : c.saving_lo();
        }
        return s;
    }

    double annual_degradation(Bound b) const
    {
        double s = 0.0;
        for (const auto& c : cycles) {
            s += b == Bound::hi ? c.degradation_hi() : c.degradation_lo();
        }
        return s;
    }

    std::vector<std::string> unverified_cycles(Bound b) const
    {
        std::vector<std::string> out;
        for (const auto& c : cycles) {
            if (!(b == Bound::hi ? c.hi.verified : c.lo.verified)) {
                out.push_back(c.label);
            }
        }
        return out;
    }
};

struct AssessmentOptions {
    /// Optimize as if wear were free, then charge the true wear of the result.
    bool degradation_blind = false;
    /// Enable HVAC load shifting with these parameters.
    std::optional<HvacParams> hvac;
};

namespace detail {

inline CycleOutcome assess_bound(const BillingCycle& cycle, const BatterySpec& battery, const DegradationCurve& curve,
                                 const TariffModel& tariff, Bound bound, const AssessmentOptions& options,
                                 bool& hvac_used)
{
    const DegradationCurve blind = zero_curve(curve.segments());
    const DegradationCurve& opt_curve = options.degradation_blind ? blind : curve;
    auto finish = [&](CycleOutcome o) {
        if (options.degradation_blind) {
            reprice_degradation(o.plan, battery, curve, cycle.hours_per_slot());
            const BillingCycle net = cycle.with_days(o.plan.net_days(cycle));
            o.relaxed_objective = relaxed_bill(tariff, net, bound) + o.plan.total_degradation();
            o.exact_total = o.exact_bill.total + o.plan.total_degradation();
        }
        return o;
    };
    CycleOutcome plain = optimize_cycle(cycle, battery, opt_curve, tariff, bound);
    hvac_used = false;
    if (!options.hvac) {
        return finish(std::move(plain));
    }
    HvacSchedule schedule{*options.hvac, {}};
    for (std::size_t i = 0; i < cycle.days.size(); ++i) {
        const BillingCycle one{cycle.year, cycle.month, cycle.interval_minutes, {cycle.days[i]}};
        schedule.windows.push_back(enumerate_hvac_windows(one, battery, opt_curve, tariff, bound, *options.hvac).best);
    }
    CycleOutcome shifted = optimize_cycle(cycle, battery, opt_curve, tariff, bound, &schedule);
    if (shifted.relaxed_objective < plain.relaxed_objective) {
        hvac_used = true;
        return finish(std::move(shifted));
    }
    return finish(std::move(plain));
}

} // namespace detail

inline CycleAssessment assess_cycle(const BillingCycle& cycle, const BatterySpec& battery,
                                    const DegradationCurve& curve, const TariffModel& tariff,
                                    const AssessmentOptions& options = {})
{
    CycleAssessment a;
    a.label = cycle.label();
    a.baseline_hi = relaxed_bill(tariff, cycle, Bound::hi);
    a.baseline_lo = relaxed_bill(tariff, cycle, Bound::lo);
    a.baseline_exact = bill(tariff, cycle).total;
    a.hi = detail::assess_bound(cycle, battery, curve, tariff, Bound::hi, options, a.hvac_used_hi);
    a.lo = detail::assess_bound(cycle, battery, curve, tariff, Bound::lo, options, a.hvac_used_lo);
    return a;
}

inline AssessmentReport annual_assessment(const LoadProfile& profile, const BatterySpec& battery,
                                          const DegradationCurve& curve, const TariffModel& tariff,
                                          const AssessmentOptions& options = {})
{
    tariff.validate();
    AssessmentReport report;
    for (const auto& cycle : slice_cycles(profile)) {
        report.cycles.push_back(assess_cycle(cycle, battery, curve, tariff, options));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Payback

struct Payback {
    bool none = true;     ///< net saving <= 0: the investment never pays back
    double years = 0.0;
    double salvage = 0.0; ///< fraction of battery value left at payback
};

inline Payback payback_for(double annual_saving, double annual_degradation, const BatterySpec& battery)
{
    Payback p;
    const double net = annual_saving - annual_degradation;
    if (!(net > 0.0)) {
        return p;
    }
    p.none = false;
    p.years = battery.total_capital() / net;
    if (battery.capital_cost_battery > 0.0) {
        p.salvage = std::clamp(1.0 - p.years * annual_degradation / battery.capital_cost_battery, 0.0, 1.0);
    } else {
        p.salvage = 1.0;
    }
    return p;
}

struct PaybackReport {
    Payback hi;
    Payback lo;
};

inline PaybackReport payback(const AssessmentReport& report, const BatterySpec& battery)
{
    return {payback_for(report.annual_saving(Bound::hi), report.annual_degradation(Bound::hi), battery),
            payback_for(report.annual_saving(Bound::lo), report.annual_degradation(Bound::lo), battery)};
}

} // namespace bess
