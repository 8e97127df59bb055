// End-to-end acceptance run: one PASS/FAIL line per criterion, exit status 1
// if any criterion fails. Reads the shipped data from BESS_DATA_DIR.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <mutex>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "bess/harness.hpp"
#include "bess/lp/branch_and_bound.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace bess;

namespace {

const fs::path data_dir = BESS_DATA_DIR;

/// Worst violation of the daily battery constraints over every plan checked.
struct InvariantLedger {
    std::mutex mu;
    std::size_t plans = 0;
    PlanViolation worst;

    void check(const DispatchPlan& plan, const BatterySpec& b, double dh)
    {
        const auto v = plan_violation(plan, b, dh);
        std::lock_guard<std::mutex> lock(mu);
        ++plans;
        worst.power = std::max(worst.power, v.power);
        worst.energy = std::max(worst.energy, v.energy);
        worst.terminal = std::max(worst.terminal, v.terminal);
    }
};

InvariantLedger ledger;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int n, const char* name, double limit_s, const std::function<Outcome()>& body)
{
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_s > 0.0 && s > limit_s) {
        o.pass = false;
        o.detail += " [over time limit " + std::to_string(static_cast<int>(limit_s)) + " s]";
    }
    failures += o.pass ? 0 : 1;
    std::printf("criterion %2d %s  %-34s %s (%.1f s)\n", n, o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), s);
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

DegradationCurve curve_for(const BatterySpec& b, std::size_t segments = 10)
{
    return build_curve(fit_cycle_life(b.cycle_life_points), b.capital_cost_battery, segments);
}

struct Shipped {
    LoadProfile train = io::ingest_load_csv(data_dir / "load_2014.csv");
    LoadProfile run = io::ingest_load_csv(data_dir / "load_2015.csv");
    TariffModel tariff = io::tariff_from_json(io::read_json(data_dir / "tariff.json"));
    io::BatteryConfig battery = io::battery_from_json(io::read_json(data_dir / "battery.json"), data_dir);
    HvacParams hvac = io::hvac_from_json(io::read_json(data_dir / "hvac.json"));
    DegradationCurve curve = curve_for(battery.spec, battery.segments);
};

void check_report(const AssessmentReport& r, const BatterySpec& b, int interval)
{
    for (const auto& c : r.cycles) {
        ledger.check(c.hi.plan, b, interval / 60.0);
        ledger.check(c.lo.plan, b, interval / 60.0);
    }
}

// 1 -------------------------------------------------------------------------
Outcome relaxation_bracketing(const Shipped& s)
{
    std::mt19937_64 rng(101);
    const auto cycles = slice_cycles(s.run);
    std::uniform_int_distribution<std::size_t> month(0, 11);
    std::uniform_int_distribution<int> len(3, 6);
    std::uniform_real_distribution<double> scale(0.6, 1.6);
    std::uniform_real_distribution<double> size(5.0, 40.0);
    std::size_t checked = 0;
    std::size_t tried = 0;
    double worst = 0.0;
    while (checked < 60 && tried < 400) {
        ++tried;
        const auto& src = cycles[month(rng)];
        const std::size_t n = static_cast<std::size_t>(len(rng));
        std::uniform_int_distribution<std::size_t> first(0, src.days.size() - n);
        const std::size_t f = first(rng);
        BillingCycle c{src.year, src.month, src.interval_minutes, {}};
        const double k = scale(rng);
        for (std::size_t d = f; d < f + n; ++d) {
            auto day = src.days[d];
            for (auto& v : day) {
                v *= k;
            }
            c.days.push_back(std::move(day));
        }
        auto b = s.battery.spec;
        b.soe_max = size(rng);
        b.soe_ini = b.soe_max;
        b.p_max = 0.5 * b.soe_max;
        b.p_min = -b.p_max;
        const auto curve = curve_for(b);
        const auto hi = optimize_cycle(c, b, curve, s.tariff, Bound::hi);
        const auto lo = optimize_cycle(c, b, curve, s.tariff, Bound::lo);
        ledger.check(hi.plan, b, c.hours_per_slot());
        ledger.check(lo.plan, b, c.hours_per_slot());
        if (!hi.verified) {
            continue;
        }
        ++checked;
        const double eps = 1e-6 * std::abs(hi.relaxed_objective);
        worst = std::max({worst, lo.relaxed_objective - eps - hi.exact_total, hi.exact_total - hi.relaxed_objective - eps});
    }
    return {checked >= 50 && worst <= 0.0,
            fmt("%zu verified cycles of %zu, worst excursion %.3g", checked, tried, std::max(worst, 0.0))};
}

// 2 -------------------------------------------------------------------------
Outcome epigraph_equals_sos2()
{
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto tariff = [] {
        TariffModel t;
        t.seasons = {{"all", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}}};
        HourlyPrices e{};
        HourlyPrices d{};
        for (int h = 0; h < 24; ++h) {
            e[h] = h >= 8 && h < 22 ? 0.15 : 0.05;
            d[h] = h >= 7 && h <= 20 ? 25.0 : 8.0;
        }
        t.energy_price["all"] = e;
        t.demand_price["all"] = d;
        return t;
    }();
    double worst = 0.0;
    int n = 0;
    for (int trial = 0; trial < 24; ++trial) {
        static constexpr int horizons[] = {4, 6, 8, 10, 12};
        const int slots = horizons[trial % 5];
        BillingCycle c{2015, 7, kMinutesPerDay / slots, {}};
        const int days = 1 + trial % 3;
        for (int d = 0; d < days; ++d) {
            std::vector<double> day(static_cast<std::size_t>(slots));
            for (auto& v : day) {
                v = 20.0 + 30.0 * u(rng);
            }
            c.days.push_back(std::move(day));
        }
        BatterySpec b;
        b.soe_max = 5.0 + 20.0 * u(rng);
        b.soe_ini = b.soe_max * (0.5 + 0.5 * u(rng));
        b.p_max = 2.0 + 8.0 * u(rng);
        b.p_min = -b.p_max;
        b.capital_cost_battery = 200.0 + 2000.0 * u(rng);
        b.cycle_life_points = {{0.2, 3981.0717055349733}, {0.5, 1000.0}, {1.0, 100.0}};
        b.round_trip_efficiency = trial % 4 == 0 ? 0.9 : 1.0;
        const auto curve = curve_for(b, 2 + trial % 3);
        const auto epi = build_cycle_problem(c, b, curve, tariff, Bound::hi, nullptr, DegradationEncoding::epigraph);
        const auto sos = build_cycle_problem(c, b, curve, tariff, Bound::hi, nullptr, DegradationEncoding::sos2);
        const auto a = lp::solve_lp(epi.lp);
        const auto m = lp::solve_milp(sos.lp);
        if (!a.optimal() || !m.optimal()) {
            return {false, fmt("trial %d did not solve", trial)};
        }
        worst = std::max(worst, std::abs(a.objective_value - m.objective_value) /
                                    std::max(1.0, std::abs(m.objective_value)));
        ++n;
    }
    return {n >= 20 && worst <= 1e-6, fmt("%d instances (H<=12, <=3 days, S<=4), worst rel gap %.2g", n, worst)};
}

// 3 -------------------------------------------------------------------------
Outcome solver_oracles()
{
    std::mt19937_64 rng(303);
    double lp_worst = 0.0;
    int lp_n = 0;
    int lp_bad = 0;
    for (int trial = 0; trial < 150; ++trial) {
        const std::size_t n = 2 + trial % 5;
        const std::size_t r = 1 + trial % 4;
        const auto p = testing::random_lp(rng, n, r, trial % 3 == 0);
        const auto oracle = testing::vertex_enumeration_minimum(p);
        const auto s = lp::solve_lp(p);
        if (!oracle || !s.optimal()) {
            lp_bad += oracle.has_value() != s.optimal();
            continue;
        }
        ++lp_n;
        lp_worst = std::max(lp_worst, std::abs(s.objective_value - *oracle) / std::max(1.0, std::abs(*oracle)));
    }
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double milp_worst = 0.0;
    int milp_n = 0;
    int milp_bad = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t k = 1 + trial % 8;
        lp::LinearProgram p;
        std::vector<std::size_t> bins;
        for (std::size_t i = 0; i < k; ++i) {
            bins.push_back(p.add_binary(u(rng)));
        }
        const auto y0 = p.add_variable(-1.0, 2.0, u(rng));
        const auto y1 = p.add_variable(0.0, 3.0, u(rng));
        for (int r = 0; r < 3; ++r) {
            std::vector<lp::Term> terms{{y0, u(rng)}, {y1, u(rng)}};
            for (auto b : bins) {
                terms.push_back({b, u(rng)});
            }
            p.add_le(terms, 0.5 + std::abs(u(rng)));
        }
        const auto oracle = testing::binary_enumeration_minimum(p);
        const auto s = lp::solve_milp(p);
        if (!oracle || !s.optimal()) {
            milp_bad += oracle.has_value() != s.optimal();
            continue;
        }
        ++milp_n;
        milp_worst = std::max(milp_worst, std::abs(s.objective_value - *oracle) / std::max(1.0, std::abs(*oracle)));
    }
    return {lp_n >= 100 && lp_bad == 0 && lp_worst <= 1e-6 && milp_bad == 0 && milp_worst <= 1e-6,
            fmt("LP %d vs vertices (worst %.2g, status mismatches %d); MILP %d vs 2^k (worst %.2g, mismatches %d)",
                lp_n, lp_worst, lp_bad, milp_n, milp_worst, milp_bad)};
}

// 4 -------------------------------------------------------------------------
Outcome blind_versus_aware(const Shipped& s, const AssessmentReport& aware)
{
    AssessmentOptions o;
    o.degradation_blind = true;
    const auto blind = harness::assess(s.run, s.battery.spec, s.curve, s.tariff, o);
    check_report(blind, s.battery.spec, s.run.interval_minutes());
    bool pass = true;
    std::string detail;
    for (auto b : {Bound::hi, Bound::lo}) {
        const double bs = blind.annual_saving(b);
        const double bd = blind.annual_degradation(b);
        const double as = aware.annual_saving(b);
        const double ad = aware.annual_degradation(b);
        pass = pass && bd > bs && ad <= 0.15 * as;
        detail += fmt("[%s] blind deg %.0f vs saving %.0f, aware deg/saving %.1f%%  ", to_string(b), bd, bs,
                      100.0 * ad / as);
    }
    return {pass, detail};
}

// 5 -------------------------------------------------------------------------
Outcome sparse_operation(const Shipped& s)
{
    auto c = slice_cycles(s.run)[6];
    const auto peaks = daily_peaks(c);
    const std::size_t top = static_cast<std::size_t>(std::max_element(peaks.begin(), peaks.end()) - peaks.begin());
    for (auto& v : c.days[top]) {
        v *= 1.15;
    }
    bool pass = true;
    std::string detail;
    for (auto b : {Bound::hi, Bound::lo}) {
        const auto out = optimize_cycle(c, s.battery.spec, s.curve, s.tariff, b);
        ledger.check(out.plan, s.battery.spec, c.hours_per_slot());
        std::size_t active = 0;
        bool peak_day_active = false;
        for (std::size_t d = 0; d < c.days.size(); ++d) {
            if (out.plan.day_throughput(d, c.hours_per_slot()) > 1e-7) {
                ++active;
                peak_day_active = peak_day_active || d == top;
            }
        }
        pass = pass && active <= 3 && peak_day_active;
        detail += fmt("[%s] %zu of %zu days active, peak day %s  ", to_string(b), active, c.days.size(),
                      peak_day_active ? "active" : "idle");
    }
    return {pass, detail};
}

// 6 -------------------------------------------------------------------------
Outcome hvac_uplift(const Shipped& s, const AssessmentReport& aware)
{
    AssessmentOptions o;
    o.hvac = s.hvac;
    const auto with = harness::assess(s.run, s.battery.spec, s.curve, s.tariff, o);
    check_report(with, s.battery.spec, s.run.interval_minutes());
    bool pass = true;
    std::string detail;
    for (auto b : {Bound::hi, Bound::lo}) {
        const double s0 = aware.annual_saving(b);
        const double s1 = with.annual_saving(b);
        const double d0 = aware.annual_degradation(b);
        const double d1 = with.annual_degradation(b);
        const double change = d0 > 0.0 ? (d1 - d0) / d0 : 0.0;
        pass = pass && s1 > s0 && std::abs(change) <= 0.10;
        detail += fmt("[%s] saving %.0f -> %.0f, degradation %.1f -> %.1f (%+.1f%%)  ", to_string(b), s0, s1, d0, d1,
                      100.0 * change);
    }
    return {pass, detail};
}

// 7 -------------------------------------------------------------------------
Outcome runtime_gap(const Shipped& s)
{
    harness::ComparisonOptions o;
    o.scenarios = 20;
    o.seed = 1;
    const BatterySpec battery = s.battery.spec;
    o.on_plan = [&battery](const BillingCycle& c, const DispatchPlan& p) { ledger.check(p, battery, c.hours_per_slot()); };
    const auto r = harness::compare_runtime(s.run, s.train, s.battery.spec, s.curve, s.tariff, o);
    bool pass = true;
    std::string detail;
    for (auto b : o.bounds) {
        double excess = 0.0;
        for (const auto& row : r.rows) {
            const auto& c = row.bounds.at(b);
            excess = std::max(excess, c.runtime_saving() - c.design_saving() - 1e-6 * c.baseline);
        }
        pass = pass && r.ratio(b) >= 0.60 && excess <= 0.0;
        detail += fmt("[%s] runtime %.0f / design %.0f = %.3f, max monthly excess %.2g  ", to_string(b),
                      r.runtime_total(b), r.design_total(b), r.ratio(b), excess);
    }
    return {pass, detail};
}

// 8 -------------------------------------------------------------------------
Outcome physical_invariants()
{
    const auto& w = ledger.worst;
    return {ledger.plans > 0 && w.power <= 1e-12 && w.energy <= 1e-7 && w.terminal <= 1e-7,
            fmt("%zu plans; worst power %.2g kW, energy %.2g kWh, terminal %.2g kWh", ledger.plans, w.power, w.energy,
                w.terminal)};
}

// 9 -------------------------------------------------------------------------
Outcome kde_and_saa(const Shipped& s)
{
    const auto train = slice_cycles(s.train);
    double worst_mass = 1.0;
    for (const auto& c : train) {
        const auto kde = fit_peak_kde(daily_peaks(c));
        const double lo = kde.mean() - 8.0 * kde.bandwidth;
        const double hi = kde.mean() + 8.0 * kde.bandwidth;
        const int n = 20000;
        const double h = (hi - lo) / n;
        double sum = 0.5 * (kde.density(lo) + kde.density(hi));
        for (int i = 1; i < n; ++i) {
            sum += kde.density(lo + i * h);
        }
        worst_mass = std::min(worst_mass, sum * h);
    }

    const auto& t = train[6];
    const auto kde = fit_peak_kde(daily_peaks(t));
    const auto shape = peak_day(t);
    const auto today = slice_cycles(s.run)[6].days[0];
    const auto pricing = DayPricing::from(s.tariff, 7, s.run.interval_minutes(), Bound::hi);
    const RuntimeState st;
    std::vector<double> var;
    for (std::size_t n : {5u, 20u, 80u}) {
        std::vector<double> vals;
        for (unsigned long long seed = 1; seed <= 10; ++seed) {
            vals.push_back(solve_day(st, today, sample_scenarios(kde, n, shape, seed), s.battery.spec, s.curve, pricing)
                               .expected_objective);
        }
        const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(vals.size());
        double ss = 0.0;
        for (double v : vals) {
            ss += (v - mean) * (v - mean);
        }
        var.push_back(ss / static_cast<double>(vals.size() - 1));
    }
    const double r1 = var[0] / var[1];
    const double r2 = var[1] / var[2];
    return {worst_mass >= 0.999 && r1 >= 2.0 && r2 >= 2.0,
            fmt("min density mass %.5f over 12 months; variance ratio 5->20 %.2f, 20->80 %.2f", worst_mass, r1, r2)};
}

// 10 ------------------------------------------------------------------------
Outcome fit_and_payback()
{
    const double a = 4.3;
    const double b = -2.7;
    std::vector<CycleLifePoint> pts;
    for (double d : {0.1, 0.25, 0.4, 0.65, 0.8, 1.0}) {
        pts.push_back({d, std::pow(10.0, a + b * d)});
    }
    const auto fit = fit_cycle_life(pts);
    const double fit_err = std::max(std::abs(fit.a - a), std::abs(fit.b - b));

    double identity = 0.0;
    double salvage = 0.0;
    BatterySpec batt;
    for (const auto& [cap_b, cap_i, saving, deg] : std::vector<std::array<double, 4>>{
             {3500.0, 800.0, 2461.0, 317.0}, {10000.0, 0.0, 1200.0, 90.0}, {500.0, 250.0, 75.0, 12.5}}) {
        batt.capital_cost_battery = cap_b;
        batt.capital_cost_inverter = cap_i;
        const auto p = payback_for(saving, deg, batt);
        identity = std::max(identity, std::abs(p.years * (saving - deg) - batt.total_capital()) / batt.total_capital());
        salvage = std::max(salvage, std::abs(p.salvage - (1.0 - p.years * deg / cap_b)));
    }
    const bool none_ok = payback_for(100.0, 150.0, batt).none;
    return {fit_err <= 1e-9 && identity <= 1e-9 && salvage <= 1e-9 && none_ok,
            fmt("fit error %.2g; payback identity %.2g; salvage %.2g; net<=0 gives none: %s", fit_err, identity,
                salvage, none_ok ? "yes" : "no")};
}

} // namespace

int main()
{
    std::printf("acceptance run on %s (synthetic data)\n", data_dir.string().c_str());
    std::optional<Shipped> shipped;
    try {
        shipped.emplace();
    } catch (const std::exception& e) {
        std::printf("cannot load shipped data: %s\n", e.what());
        return 1;
    }
    const Shipped& s = *shipped;

    report(1, "relaxation bracketing", 60.0, [&] { return relaxation_bracketing(s); });
    report(2, "epigraph equals SOS2", 60.0, epigraph_equals_sos2);
    report(3, "solver oracles", 120.0, solver_oracles);

    AssessmentReport aware;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        aware = harness::assess(s.run, s.battery.spec, s.curve, s.tariff, {});
        check_report(aware, s.battery.spec, s.run.interval_minutes());
    } catch (const std::exception& e) {
        std::printf("degradation-aware assessment failed: %s\n", e.what());
        return 1;
    }
    const double aware_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(4, "degradation blind vs aware", 300.0 - aware_s, [&] { return blind_versus_aware(s, aware); });
    report(5, "sparse peak-day operation", 0.0, [&] { return sparse_operation(s); });
    report(6, "HVAC uplift", 0.0, [&] { return hvac_uplift(s, aware); });
    report(7, "runtime vs design gap", 600.0, [&] { return runtime_gap(s); });
    report(9, "KDE and SAA", 0.0, [&] { return kde_and_saa(s); });
    report(10, "fit recovery and payback", 0.0, fit_and_payback);
    report(8, "physical invariants", 0.0, physical_invariants);

    std::printf("%s: %d criterion(s) failed\n", failures ? "FAILED" : "ALL PASSED", failures);
    return failures ? 1 : 0;
}
