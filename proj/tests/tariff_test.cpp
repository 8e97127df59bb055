#include <gtest/gtest.h>

#include <random>

#include "bess/tariff.hpp"
#include "fixtures.hpp"

namespace {

using bess::testing::cycle_of;

std::vector<std::vector<double>> constant_days(std::size_t days, double kw, std::size_t slots = 96)
{
    return std::vector<std::vector<double>>(days, std::vector<double>(slots, kw));
}

TEST(EnergyCharge, FlatRateDay)
{
    const auto t = bess::testing::flat_tariff(0.13, 10.0);
    EXPECT_NEAR(bess::energy_charge(t, cycle_of(constant_days(1, 1.0))), 24 * 0.13, 1e-12);
    EXPECT_EQ(bess::energy_charge(t, cycle_of(constant_days(1, 0.0))), 0.0);
}

TEST(EnergyCharge, TwoRateDay)
{
    auto t = bess::testing::flat_tariff(0.0, 10.0);
    for (int h = 0; h < 24; ++h) {
        t.energy_price["all"][h] = h < 12 ? 0.07 : 0.21;
    }
    EXPECT_NEAR(bess::energy_charge(t, cycle_of(constant_days(1, 1.0))), 12 * 0.07 + 12 * 0.21, 1e-12);
}

TEST(EnergyCharge, MissingSeasonPrices)
{
    auto t = bess::testing::flat_tariff();
    t.energy_price.clear();
    EXPECT_THROW(bess::energy_charge(t, cycle_of(constant_days(1, 1.0))), bess::ValidationError);
}

TEST(DemandCharge, FlatSummerMonth)
{
    const auto t = bess::testing::flat_tariff(0.1, 41.95);
    const auto b = bess::demand_charge_exact(t, cycle_of(constant_days(30, 100.0), 7));
    EXPECT_NEAR(b.demand_charge, 4195.0, 1e-9);
    EXPECT_EQ(b.peak_interval_index, 0u);
    EXPECT_EQ(b.peak_hour, 0);
}

TEST(DemandCharge, SingleSpike)
{
    const auto t = bess::testing::stepped_tariff();
    auto days = constant_days(30, 10.0);
    days[12][4 * 15 + 2] = 50.0; // 15:30 on day 13
    const auto b = bess::demand_charge_exact(t, cycle_of(days, 7));
    EXPECT_NEAR(b.demand_charge, 50.0 * 41.95, 1e-9);
    EXPECT_EQ(b.peak_hour, 15);
    EXPECT_EQ(b.peak_interval_index, 12u * 96 + 62);
}

TEST(DemandCharge, EarliestTieWins)
{
    const auto t = bess::testing::stepped_tariff();
    auto days = constant_days(30, 10.0);
    days[3][4 * 19] = 60.0; // 19:00, price 30
    days[3][4 * 9] = 60.0;  // 09:00, price 41.95 -- earlier in the day
    days[1][4 * 19] = 60.0; // 19:00 on an earlier day -- earliest overall
    const auto b = bess::demand_charge_exact(t, cycle_of(days, 7));
    EXPECT_EQ(b.peak_hour, 19);
    EXPECT_EQ(b.peak_interval_index, 96u + 76);
    EXPECT_NEAR(b.demand_charge, 60.0 * 30.0, 1e-9);
}

TEST(DemandPriceBounds, Examples)
{
    const auto flat = bess::testing::flat_tariff(0.1, 17.0);
    const auto fb = bess::demand_price_bounds(flat, "all");
    EXPECT_EQ(fb.lo, 17.0);
    EXPECT_EQ(fb.hi, 17.0);

    auto t = bess::testing::flat_tariff(0.1, 5.0);
    t.peak_window = {7, 9};
    t.demand_price["all"][7] = 30.0;
    t.demand_price["all"][8] = 41.95;
    t.demand_price["all"][9] = 35.0;
    const auto b = bess::demand_price_bounds(t, "all");
    EXPECT_EQ(b.lo, 30.0);
    EXPECT_EQ(b.hi, 41.95);
}

TEST(DemandPriceBounds, BracketExactChargeWhenPeakInWindow)
{
    const auto t = bess::testing::stepped_tariff();
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const unsigned month = 1 + trial % 12;
        auto days = constant_days(28, 0.0);
        for (auto& d : days) {
            for (auto& v : d) {
                v = u(rng);
            }
        }
        const auto cycle = cycle_of(days, month);
        if (!bess::verify_peak_window(t, cycle)) {
            continue;
        }
        ++checked;
        const auto exact = bess::demand_charge_exact(t, cycle);
        const auto bounds = bess::demand_price_bounds(t, t.season_of(month));
        EXPECT_LE(bounds.lo * exact.peak_kw, exact.demand_charge + 1e-9);
        EXPECT_GE(bounds.hi * exact.peak_kw, exact.demand_charge - 1e-9);
    }
    EXPECT_GT(checked, 50);
}

TEST(VerifyPeakWindow, Examples)
{
    const auto t = bess::testing::stepped_tariff();
    auto days = constant_days(30, 10.0);
    days[5][4 * 11] = 40.0;
    EXPECT_TRUE(bess::verify_peak_window(t, cycle_of(days, 7)));
    days[6][4 * 3] = 80.0;
    EXPECT_FALSE(bess::verify_peak_window(t, cycle_of(days, 7)));
    EXPECT_FALSE(bess::verify_peak_window(t, cycle_of(constant_days(30, 10.0), 7)));
}

TEST(Bill, ZeroLoad)
{
    const auto b = bess::bill(bess::testing::stepped_tariff(), cycle_of(constant_days(30, 0.0), 7));
    EXPECT_EQ(b.energy_charge, 0.0);
    EXPECT_EQ(b.demand_charge, 0.0);
    EXPECT_EQ(b.total, 0.0);
}

TEST(Bill, FlatSummerComposition)
{
    const double p = 0.11;
    const auto t = bess::testing::flat_tariff(p, 41.95);
    const auto b = bess::bill(t, cycle_of(constant_days(30, 100.0), 7));
    EXPECT_NEAR(b.demand_charge, 4195.0, 1e-9);
    EXPECT_NEAR(b.energy_charge, 100.0 * 24 * 30 * p, 1e-7);
    EXPECT_NEAR(b.total, 4195.0 + 100.0 * 24 * 30 * p, 1e-7);
}

// Naive recomputation over a flat vector with explicit hour arithmetic.
double naive_bill(const bess::TariffModel& t, unsigned month, const std::vector<double>& flat, int interval)
{
    const std::string season = month >= 6 && month <= 9 ? "summer" : "winter";
    const int slots = 1440 / interval;
    double energy = 0.0;
    double peak = -1.0;
    int peak_hour = 0;
    for (std::size_t k = 0; k < flat.size(); ++k) {
        const int minute = static_cast<int>(k % slots) * interval;
        const int hour = minute / 60;
        energy += t.energy_price.at(season)[hour] * flat[k] * interval / 60.0;
        if (flat[k] > peak) {
            peak = flat[k];
            peak_hour = hour;
        }
    }
    return energy + t.demand_price.at(season)[peak_hour] * peak;
}

TEST(Bill, MatchesNaiveOracleOnRandomCycles)
{
    const auto t = bess::testing::stepped_tariff();
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 300.0);
    for (int trial = 0; trial < 40; ++trial) {
        const unsigned month = 1 + trial % 12;
        const int interval = trial % 2 ? 15 : 60;
        auto days = constant_days(30, 0.0, 1440 / interval);
        for (auto& d : days) {
            for (auto& v : d) {
                v = u(rng);
            }
        }
        const auto c = cycle_of(days, month, interval);
        const auto b = bess::bill(t, c);
        EXPECT_NEAR(b.total, naive_bill(t, month, c.flatten(), interval), 1e-6);
        EXPECT_NEAR(b.total, b.energy_charge + b.demand_charge, 1e-9);
    }
}

TEST(Bill, MonotoneInAnySingleInterval)
{
    // Holds for both relaxed bills under any tariff, and for the exact bill when
    // the demand price does not depend on the hour.
    const auto stepped = bess::testing::stepped_tariff();
    const auto flat = bess::testing::flat_tariff(0.1, 30.0);
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    std::uniform_int_distribution<std::size_t> pick(0, 30 * 96 - 1);
    for (int trial = 0; trial < 100; ++trial) {
        auto days = constant_days(30, 0.0);
        for (auto& d : days) {
            for (auto& v : d) {
                v = u(rng);
            }
        }
        const auto c0 = cycle_of(days, 8);
        const std::size_t k = pick(rng);
        days[k / 96][k % 96] += u(rng);
        const auto c1 = cycle_of(days, 8);
        EXPECT_GE(bess::bill(flat, c1).total, bess::bill(flat, c0).total - 1e-9);
        for (auto bound : {bess::Bound::hi, bess::Bound::lo}) {
            EXPECT_GE(bess::relaxed_bill(stepped, c1, bound), bess::relaxed_bill(stepped, c0, bound) - 1e-9);
        }
    }
}

TEST(Bill, ExactBillCanDropWhenPeakMovesToCheaperHour)
{
    const auto t = bess::testing::stepped_tariff();
    auto days = constant_days(30, 10.0);
    days[4][4 * 15] = 100.0; // 15:00 at 41.95/kW
    const double before = bess::bill(t, cycle_of(days, 7)).total;
    days[9][4 * 3] = 101.0; // 03:00 at 10/kW becomes the peak
    const double after = bess::bill(t, cycle_of(days, 7)).total;
    EXPECT_LT(after, before);
}

TEST(TariffModel, Validation)
{
    auto t = bess::testing::stepped_tariff();
    EXPECT_NO_THROW(t.validate());
    t.peak_window = {21, 7};
    EXPECT_THROW(t.validate(), bess::ValidationError);
    t = bess::testing::stepped_tariff();
    t.seasons[0].months.push_back(1);
    EXPECT_THROW(t.validate(), bess::ValidationError);
}

} // namespace
