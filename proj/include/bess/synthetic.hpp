#pragma once

// Synthetic office-building load. Not measured data: a daily temperature
// process (seasonal sinusoid plus AR(1) weather noise) drives an afternoon
// cooling bump on top of an occupancy schedule, with small per-interval noise.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "bess/core_model.hpp"

namespace bess::synthetic {

struct OfficeOptions {
    int year = 2015;
    int years = 1;
    int interval_minutes = 15;
    unsigned long long seed = 2015;
    double night_kw = 120.0;
    double occupied_kw = 300.0;
    double weekend_kw = 160.0;
    double cooling_kw_per_degree = 16.0;
    double heating_kw_per_degree = 3.0;
    double mean_temp_c = 12.5;
    double temp_amplitude_c = 12.0;
    double weather_sd_c = 3.0;
    double weather_persistence = 0.6;
    double noise_fraction = 0.015;
};

/// Daily mean outdoor temperature for every day of the span.
inline std::vector<double> daily_temperatures(const OfficeOptions& o, std::size_t days, std::mt19937_64& rng)
{
    std::normal_distribution<double> shock(0.0, o.weather_sd_c);
    std::vector<double> temps(days);
    double anomaly = 0.0;
    for (std::size_t d = 0; d < days; ++d) {
        // Warmest around day 200 (late July).
        const double season = std::cos(2.0 * std::numbers::pi * (static_cast<double>(d % 365) - 200.0) / 365.0);
        anomaly = o.weather_persistence * anomaly + shock(rng);
        temps[d] = o.mean_temp_c + o.temp_amplitude_c * season + anomaly;
    }
    return temps;
}

inline LoadProfile office_profile(const OfficeOptions& o)
{
    using namespace std::chrono;
    const sys_days first{year{o.year} / January / 1};
    const sys_days last{year{o.year + o.years} / January / 1};
    const auto days = static_cast<std::size_t>((last - first).count());
    const std::size_t slots = static_cast<std::size_t>(kMinutesPerDay / o.interval_minutes);

    std::mt19937_64 rng(o.seed);
    const auto temps = daily_temperatures(o, days, rng);
    std::normal_distribution<double> noise(0.0, o.noise_fraction);
    std::normal_distribution<double> peak_shift(0.0, 0.75);

    std::vector<double> values;
    values.reserve(days * slots);
    for (std::size_t d = 0; d < days; ++d) {
        const weekday wd{first + std::chrono::days{static_cast<int>(d)}};
        const bool workday = wd != Saturday && wd != Sunday;
        const double cooling = o.cooling_kw_per_degree * std::max(0.0, temps[d] - 18.0);
        const double heating = o.heating_kw_per_degree * std::max(0.0, 10.0 - temps[d]);
        const double peak_hour = 15.0 + peak_shift(rng);
        for (std::size_t t = 0; t < slots; ++t) {
            const double hour = (static_cast<double>(t) + 0.5) * o.interval_minutes / 60.0;
            // Smooth occupancy ramp 6-8 h up, 18-20 h down.
            const double up = std::clamp((hour - 6.0) / 2.0, 0.0, 1.0);
            const double down = std::clamp((20.0 - hour) / 2.0, 0.0, 1.0);
            const double occupancy = std::min(up, down);
            const double level = workday ? o.occupied_kw : o.weekend_kw;
            double kw = o.night_kw + (level - o.night_kw) * occupancy;
            const double bump = std::exp(-0.5 * std::pow((hour - peak_hour) / 2.5, 2.0));
            kw += cooling * (0.3 + 0.7 * occupancy) * (workday ? 1.0 : 0.6) * (0.4 + 0.6 * bump);
            kw += heating * (0.5 + 0.5 * occupancy);
            kw *= 1.0 + noise(rng);
            values.push_back(std::max(0.0, kw));
        }
    }
    return LoadProfile(sys_days{first}, o.interval_minutes, std::move(values));
}

} // namespace bess::synthetic
