#pragma once

// Domain values shared by every module: the interval load series, its calendar
// slicing into monthly billing cycles, the battery and HVAC parameter sets, and
// net-load arithmetic.
//
// Sign convention: battery power is positive while charging (it adds to the
// metered load) and negative while discharging.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "bess/error.hpp"

namespace bess {

/// Naive local wall-clock time at minute resolution. No time zone or DST handling.
using Timestamp = std::chrono::sys_time<std::chrono::minutes>;

inline constexpr int kMinutesPerDay = 24 * 60;

inline std::string format_timestamp(Timestamp ts)
{
    using namespace std::chrono;
    const sys_days day = floor<days>(ts);
    const year_month_day ymd{day};
    const auto minute_of_day = (ts - day).count();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(minute_of_day / 60), static_cast<int>(minute_of_day % 60));
    return buf;
}

inline Timestamp make_timestamp(int y, unsigned m, unsigned d, int hour = 0, int minute = 0)
{
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{m}, day{d}};
    detail::require(ymd.ok(), "invalid calendar date");
    return sys_days{ymd} + hours{hour} + minutes{minute};
}

/// Fixed interval building load, whole days only.
class LoadProfile {
public:
    LoadProfile(Timestamp start, int interval_minutes, std::vector<double> values)
        : start_(start), interval_minutes_(interval_minutes), values_(std::move(values))
    {
        detail::require(interval_minutes_ > 0 && kMinutesPerDay % interval_minutes_ == 0,
                        "interval_minutes must be positive and divide 1440");
        detail::require(!values_.empty() && values_.size() % slots_per_day() == 0,
                        "load profile must cover a whole number of days");
        for (std::size_t k = 0; k < values_.size(); ++k) {
            if (!std::isfinite(values_[k]) || values_[k] < 0.0) {
                throw ValidationError("load value at " + format_timestamp(timestamp(k)) +
                                      " must be finite and non-negative");
            }
        }
    }

    Timestamp start() const { return start_; }
    int interval_minutes() const { return interval_minutes_; }
    const std::vector<double>& values() const { return values_; }

    std::size_t slots_per_day() const { return static_cast<std::size_t>(kMinutesPerDay / interval_minutes_); }
    std::size_t day_count() const { return values_.size() / slots_per_day(); }
    double hours_per_slot() const { return interval_minutes_ / 60.0; }

    std::span<const double> day(std::size_t i) const
    {
        return std::span<const double>(values_).subspan(i * slots_per_day(), slots_per_day());
    }

    Timestamp timestamp(std::size_t k) const
    {
        return start_ + std::chrono::minutes{static_cast<long>(k) * interval_minutes_};
    }

private:
    Timestamp start_;
    int interval_minutes_;
    std::vector<double> values_;
};

/// One calendar month of per-day interval values (load or net load).
struct BillingCycle {
    int year = 0;
    unsigned month = 1;
    int interval_minutes = 15;
    std::vector<std::vector<double>> days;

    std::size_t slots_per_day() const { return static_cast<std::size_t>(kMinutesPerDay / interval_minutes); }
    std::size_t interval_count() const { return days.size() * slots_per_day(); }
    double hours_per_slot() const { return interval_minutes / 60.0; }
    int hour_of_slot(std::size_t slot) const { return static_cast<int>(slot) * interval_minutes / 60; }

    double at(std::size_t k) const { return days[k / slots_per_day()][k % slots_per_day()]; }

    std::vector<double> flatten() const
    {
        std::vector<double> out;
        out.reserve(interval_count());
        for (const auto& d : days) {
            out.insert(out.end(), d.begin(), d.end());
        }
        return out;
    }

    /// Same calendar slot, different per-day values (e.g. net load after dispatch).
    BillingCycle with_days(std::vector<std::vector<double>> new_days) const
    {
        detail::require(new_days.size() == days.size(), "with_days: day count mismatch");
        for (const auto& d : new_days) {
            detail::require(d.size() == slots_per_day(), "with_days: slot count mismatch");
        }
        BillingCycle out{year, month, interval_minutes, std::move(new_days)};
        return out;
    }

    std::string label() const
    {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u", year, month);
        return buf;
    }
};

struct CycleLifePoint {
    double depth;  ///< DoD fraction in (0, 1]
    double cycles; ///< cycles to end of life at that depth
};

/// Battery and inverter ratings. Energies in kWh, powers in kW, costs in currency.
struct BatterySpec {
    double soe_max = 0.0;
    double p_min = 0.0;
    double p_max = 0.0;
    double soe_ini = 0.0;
    double capital_cost_battery = 0.0;
    double capital_cost_inverter = 0.0;
    std::vector<CycleLifePoint> cycle_life_points;
    double round_trip_efficiency = 1.0;

    double total_capital() const { return capital_cost_battery + capital_cost_inverter; }
    double initial_depth() const { return soe_max > 0.0 ? (soe_max - soe_ini) / soe_max : 0.0; }

    void validate() const
    {
        detail::require(std::isfinite(soe_max) && soe_max >= 0.0, "battery soe_max must be >= 0");
        detail::require(soe_ini >= 0.0 && soe_ini <= soe_max, "battery soe_ini must lie in [0, soe_max]");
        detail::require(p_min <= 0.0 && p_max >= 0.0, "battery power bounds must satisfy p_min <= 0 <= p_max");
        detail::require(capital_cost_battery >= 0.0 && capital_cost_inverter >= 0.0, "capital costs must be >= 0");
        detail::require(round_trip_efficiency > 0.0 && round_trip_efficiency <= 1.0,
                        "round_trip_efficiency must lie in (0, 1]");
        detail::require(cycle_life_points.size() >= 2, "at least two cycle-life points are required");
        for (std::size_t k = 0; k < cycle_life_points.size(); ++k) {
            const auto& p = cycle_life_points[k];
            detail::require(p.depth > 0.0 && p.depth <= 1.0, "cycle-life depth must lie in (0, 1]");
            detail::require(p.cycles > 0.0, "cycle-life count must be positive");
            if (k > 0) {
                detail::require(p.depth > cycle_life_points[k - 1].depth,
                                "cycle-life depths must be strictly increasing");
                detail::require(p.cycles < cycle_life_points[k - 1].cycles,
                                "cycle-life counts must be strictly decreasing");
            }
        }
    }
};

/// HVAC load shifting: +u% of the baseline load for x hours (pre-cooling), then
/// -v% for y hours (post-cooling), pre strictly before post.
struct HvacParams {
    int pre_hours = 2;
    double pre_increase_pct = 10.0;
    int post_hours = 2;
    double post_decrease_pct = 10.0;
    std::vector<int> candidate_start_hours;
    /// Allowed post-cooling start hours. Empty: post-cooling starts as pre-cooling ends.
    std::vector<int> candidate_post_start_hours;

    void validate() const
    {
        detail::require(pre_hours >= 1 && post_hours >= 1, "HVAC window lengths must be >= 1 hour");
        detail::require(pre_increase_pct >= 0.0 && pre_increase_pct <= 100.0, "pre_increase_pct must lie in [0, 100]");
        detail::require(post_decrease_pct >= 0.0 && post_decrease_pct <= 100.0,
                        "post_decrease_pct must lie in [0, 100]");
        detail::require(!candidate_start_hours.empty(), "HVAC needs at least one candidate pre-cooling start hour");
        for (int h : candidate_start_hours) {
            detail::require(h >= 0 && h < 24, "HVAC candidate start hours must lie in 0..23");
        }
        for (int h : candidate_post_start_hours) {
            detail::require(h >= 0 && h < 24, "HVAC candidate post start hours must lie in 0..23");
        }
    }
};

/// Split a profile into calendar-month billing cycles. The profile must start at
/// midnight on the first of a month and end on a month boundary.
inline std::vector<BillingCycle> slice_cycles(const LoadProfile& profile)
{
    using namespace std::chrono;
    const sys_days first_day = floor<days>(profile.start());
    if (profile.start() != first_day) {
        throw ValidationError("load profile must start at midnight, got " + format_timestamp(profile.start()));
    }
    year_month_day ymd{first_day};
    if (ymd.day() != day{1}) {
        throw ValidationError("load profile must start on the first day of a month, got " +
                              format_timestamp(profile.start()));
    }
    std::vector<BillingCycle> cycles;
    const std::size_t total_days = profile.day_count();
    std::size_t d = 0;
    while (d < total_days) {
        const year_month_day cur{first_day + days{static_cast<int>(d)}};
        const unsigned month_len =
            static_cast<unsigned>(year_month_day_last{cur.year(), month_day_last{cur.month()}}.day());
        if (d + month_len > total_days) {
            throw ValidationError("load profile ends inside " + std::to_string(static_cast<int>(cur.year())) + "-" +
                                  std::to_string(static_cast<unsigned>(cur.month())) +
                                  "; partial billing cycles are not supported");
        }
        BillingCycle cycle;
        cycle.year = static_cast<int>(cur.year());
        cycle.month = static_cast<unsigned>(cur.month());
        cycle.interval_minutes = profile.interval_minutes();
        for (unsigned k = 0; k < month_len; ++k) {
            const auto slice = profile.day(d + k);
            cycle.days.emplace_back(slice.begin(), slice.end());
        }
        cycles.push_back(std::move(cycle));
        d += month_len;
    }
    return cycles;
}

/// Metered load: building load plus battery power plus HVAC adjustment, elementwise.
inline std::vector<double> net_load(std::span<const double> day_load, std::span<const double> battery_power,
                                    std::span<const double> hvac_delta)
{
    detail::require(day_load.size() == battery_power.size() && day_load.size() == hvac_delta.size(),
                    "net_load: sequence lengths differ");
    std::vector<double> out(day_load.size());
    for (std::size_t t = 0; t < out.size(); ++t) {
        out[t] = day_load[t] + battery_power[t] + hvac_delta[t];
    }
    return out;
}

} // namespace bess
