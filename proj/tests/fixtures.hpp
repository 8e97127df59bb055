#pragma once

#include <vector>

#include "bess/core_model.hpp"
#include "bess/degradation.hpp"
#include "bess/tariff.hpp"

namespace bess::testing {

/// Single-season tariff with constant energy and demand prices.
inline TariffModel flat_tariff(double energy = 0.1, double demand = 20.0)
{
    TariffModel t;
    t.seasons = {{"all", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}}};
    HourlyPrices e{};
    HourlyPrices d{};
    e.fill(energy);
    d.fill(demand);
    t.energy_price["all"] = e;
    t.demand_price["all"] = d;
    return t;
}

/// Summer (Jun-Sep) / winter split with a stepped demand price inside 7..20.
inline TariffModel stepped_tariff()
{
    TariffModel t;
    t.seasons = {{"summer", {6, 7, 8, 9}}, {"winter", {1, 2, 3, 4, 5, 10, 11, 12}}};
    HourlyPrices es{};
    HourlyPrices ew{};
    HourlyPrices ds{};
    HourlyPrices dw{};
    for (int h = 0; h < 24; ++h) {
        const bool on = h >= 8 && h < 22;
        es[h] = on ? 0.15 : 0.05;
        ew[h] = on ? 0.12 : 0.05;
        ds[h] = h < 7 || h > 20 ? 10.0 : (h >= 8 && h <= 17 ? 41.95 : 30.0);
        dw[h] = h < 7 || h > 20 ? 8.0 : (h >= 8 && h <= 17 ? 25.0 : 18.0);
    }
    t.energy_price["summer"] = es;
    t.energy_price["winter"] = ew;
    t.demand_price["summer"] = ds;
    t.demand_price["winter"] = dw;
    return t;
}

inline BatterySpec small_battery(double soe_max = 10.0, double power = 10.0, double capital = 3500.0)
{
    BatterySpec b;
    b.soe_max = soe_max;
    b.soe_ini = soe_max;
    b.p_min = -power;
    b.p_max = power;
    b.capital_cost_battery = capital;
    b.capital_cost_inverter = 800.0;
    b.cycle_life_points = {{0.2, 3981.0717055349733}, {0.5, 1000.0}, {1.0, 100.0}};
    return b;
}

inline BillingCycle cycle_of(std::vector<std::vector<double>> days, unsigned month = 7, int interval_minutes = 15)
{
    BillingCycle c;
    c.year = 2015;
    c.month = month;
    c.interval_minutes = interval_minutes;
    c.days = std::move(days);
    return c;
}

} // namespace bess::testing
