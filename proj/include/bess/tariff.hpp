#pragma once

// Compound tariff: a time-of-use energy charge on every interval plus a demand
// charge on the single highest interval of the billing cycle, priced by the
// hour at which that peak occurs. The optimizers replace the hour-dependent
// demand price by its maximum or minimum over the peak window.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "bess/core_model.hpp"
#include "bess/error.hpp"

namespace bess {

using HourlyPrices = std::array<double, 24>;

struct Season {
    std::string name;
    std::vector<unsigned> months;
};

/// Inclusive range of hour-of-day indices.
struct PeakWindow {
    int first_hour = 7;
    int last_hour = 20;

    bool contains(int hour) const { return hour >= first_hour && hour <= last_hour; }
};

enum class Bound { hi, lo };

inline const char* to_string(Bound b) { return b == Bound::hi ? "hi" : "lo"; }

struct DemandPriceBounds {
    double lo;
    double hi;

    double pick(Bound b) const { return b == Bound::hi ? hi : lo; }
};

struct TariffModel {
    std::vector<Season> seasons;
    std::map<std::string, HourlyPrices> energy_price; ///< currency per kWh
    std::map<std::string, HourlyPrices> demand_price; ///< currency per kW
    PeakWindow peak_window{};

    void validate() const
    {
        detail::require(!seasons.empty(), "tariff needs at least one season");
        std::array<int, 13> covered{};
        for (const auto& s : seasons) {
            detail::require(energy_price.count(s.name) == 1, "missing energy prices for season " + s.name);
            detail::require(demand_price.count(s.name) == 1, "missing demand prices for season " + s.name);
            for (double p : energy_price.at(s.name)) {
                detail::require(std::isfinite(p) && p >= 0.0, "energy prices must be finite and >= 0");
            }
            for (double p : demand_price.at(s.name)) {
                detail::require(std::isfinite(p) && p >= 0.0, "demand prices must be finite and >= 0");
            }
            for (unsigned m : s.months) {
                detail::require(m >= 1 && m <= 12, "season months must lie in 1..12");
                ++covered[m];
            }
        }
        for (unsigned m = 1; m <= 12; ++m) {
            detail::require(covered[m] == 1, "every month must belong to exactly one season (month " +
                                                 std::to_string(m) + ")");
        }
        detail::require(peak_window.first_hour >= 0 && peak_window.last_hour <= 23 &&
                            peak_window.first_hour <= peak_window.last_hour,
                        "peak window must be a non-empty hour range within 0..23");
    }

    const std::string& season_of(unsigned month) const
    {
        for (const auto& s : seasons) {
            if (std::find(s.months.begin(), s.months.end(), month) != s.months.end()) {
                return s.name;
            }
        }
        throw ValidationError("no season covers month " + std::to_string(month));
    }

    const HourlyPrices& energy_prices(const std::string& season) const
    {
        const auto it = energy_price.find(season);
        if (it == energy_price.end()) {
            throw ValidationError("missing energy prices for season " + season);
        }
        return it->second;
    }

    const HourlyPrices& demand_prices(const std::string& season) const
    {
        const auto it = demand_price.find(season);
        if (it == demand_price.end()) {
            throw ValidationError("missing demand prices for season " + season);
        }
        return it->second;
    }
};

struct BillBreakdown {
    double energy_charge = 0.0;
    double demand_charge = 0.0;
    double peak_kw = 0.0;
    std::size_t peak_interval_index = 0;
    int peak_hour = 0;
    double total = 0.0;
};

/// Per-slot energy price of one day in the given season.
inline std::vector<double> slot_energy_prices(const TariffModel& tariff, const std::string& season,
                                              int interval_minutes)
{
    const auto& prices = tariff.energy_prices(season);
    const std::size_t slots = static_cast<std::size_t>(kMinutesPerDay / interval_minutes);
    std::vector<double> out(slots);
    for (std::size_t t = 0; t < slots; ++t) {
        out[t] = prices[static_cast<std::size_t>(t) * interval_minutes / 60];
    }
    return out;
}

inline double energy_charge(const TariffModel& tariff, const BillingCycle& cycle)
{
    const auto prices = slot_energy_prices(tariff, tariff.season_of(cycle.month), cycle.interval_minutes);
    const double dh = cycle.hours_per_slot();
    double total = 0.0;
    for (const auto& day : cycle.days) {
        for (std::size_t t = 0; t < day.size(); ++t) {
            total += prices[t] * day[t] * dh;
        }
    }
    return total;
}

struct CyclePeak {
    double kw;
    std::size_t index;
    int hour;
};

/// Highest interval of the cycle; ties go to the earliest interval.
inline CyclePeak find_cycle_peak(const BillingCycle& cycle)
{
    detail::require(cycle.interval_count() > 0, "billing cycle is empty");
    CyclePeak peak{cycle.days[0][0], 0, 0};
    const std::size_t slots = cycle.slots_per_day();
    for (std::size_t d = 0; d < cycle.days.size(); ++d) {
        for (std::size_t t = 0; t < slots; ++t) {
            if (cycle.days[d][t] > peak.kw) {
                peak = {cycle.days[d][t], d * slots + t, cycle.hour_of_slot(t)};
            }
        }
    }
    return peak;
}

/// Demand charge at the hour-dependent price of the actual peak. Energy fields
/// of the result are left at zero.
inline BillBreakdown demand_charge_exact(const TariffModel& tariff, const BillingCycle& cycle)
{
    const CyclePeak peak = find_cycle_peak(cycle);
    const auto& prices = tariff.demand_prices(tariff.season_of(cycle.month));
    BillBreakdown out;
    out.peak_kw = peak.kw;
    out.peak_interval_index = peak.index;
    out.peak_hour = peak.hour;
    out.demand_charge = prices[static_cast<std::size_t>(peak.hour)] * peak.kw;
    out.total = out.demand_charge;
    return out;
}

inline DemandPriceBounds demand_price_bounds(const TariffModel& tariff, const std::string& season)
{
    const auto& prices = tariff.demand_prices(season);
    DemandPriceBounds b{prices[static_cast<std::size_t>(tariff.peak_window.first_hour)],
                        prices[static_cast<std::size_t>(tariff.peak_window.first_hour)]};
    for (int h = tariff.peak_window.first_hour; h <= tariff.peak_window.last_hour; ++h) {
        b.lo = std::min(b.lo, prices[static_cast<std::size_t>(h)]);
        b.hi = std::max(b.hi, prices[static_cast<std::size_t>(h)]);
    }
    return b;
}

inline bool verify_peak_window(const TariffModel& tariff, const BillingCycle& net)
{
    return tariff.peak_window.contains(find_cycle_peak(net).hour);
}

inline BillBreakdown bill(const TariffModel& tariff, const BillingCycle& net)
{
    BillBreakdown out = demand_charge_exact(tariff, net);
    out.energy_charge = energy_charge(tariff, net);
    out.total = out.energy_charge + out.demand_charge;
    return out;
}

/// Bill with the demand price replaced by the peak-window bound.
inline double relaxed_bill(const TariffModel& tariff, const BillingCycle& net, Bound bound)
{
    const double price = demand_price_bounds(tariff, tariff.season_of(net.month)).pick(bound);
    return energy_charge(tariff, net) + price * find_cycle_peak(net).kw;
}

} // namespace bess
