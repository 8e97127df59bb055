// bess_cli: battery payback assessment and runtime-controller experiments.
//
// Exit codes: 0 success, 2 invalid input or configuration, 3 solver failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bess/harness.hpp"

namespace fs = std::filesystem;
using namespace bess;

namespace {

struct CommonArgs {
    std::string config;
    std::optional<unsigned long long> seed;
    std::optional<std::string> bound;
    std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonArgs& a)
{
    cmd->add_option("--config", a.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", a.seed, "random seed, overrides the config");
    cmd->add_option("--bound", a.bound, "demand price bound: hi, lo or both")
        ->check(CLI::IsMember({"hi", "lo", "both"}));
    cmd->add_option("--out", a.out, "output directory, overrides the config");
}

io::RunConfig resolve(const CommonArgs& a)
{
    auto c = io::load_run_config(a.config);
    if (a.seed) {
        c.seed = *a.seed;
    }
    if (a.bound) {
        c.bound = io::parse_bound_selection(*a.bound);
    }
    if (a.out) {
        c.out = *a.out;
    }
    fs::create_directories(c.out);
    return c;
}

DegradationCurve curve_of(const io::BatteryConfig& b)
{
    return build_curve(fit_cycle_life(b.spec.cycle_life_points), b.spec.capital_cost_battery, b.segments);
}

void run_fit(const CommonArgs& a)
{
    const auto c = resolve(a);
    std::vector<CycleLifePoint> points;
    double capital = 0.0;
    std::size_t segments = 10;
    if (!c.battery.empty()) {
        const auto b = io::load_battery(c);
        points = b.spec.cycle_life_points;
        capital = b.spec.capital_cost_battery;
        segments = b.segments;
    }
    if (!c.cycle_life.empty()) {
        points = io::ingest_cycle_life_csv(c.cycle_life);
    }
    detail::require(!points.empty(), "config needs 'battery' or 'cycle_life'");
    const auto r = harness::fit_degradation(points, capital, segments);
    harness::write_fit(c.out, r);
    std::printf("log10(cycles) = %.6g %+.6g * depth\n", r.fit.a, r.fit.b);
    for (const auto& p : points) {
        std::printf("  depth %.3f: %.1f cycles (fitted %.1f)\n", p.depth, p.cycles, cycle_life(r.fit, p.depth));
    }
    std::printf("wrote %s\n", (c.out / "degradation_curve.csv").string().c_str());
}

void run_bill(const CommonArgs& a)
{
    const auto c = resolve(a);
    const auto tariff = io::load_tariff(c);
    const auto cycles = slice_cycles(io::ingest_load_csv(c.load_csv));
    const auto t = harness::bill_table(cycles, tariff);
    t.save(c.out / "bill.csv");
    double total = 0.0;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        total += t.number(i, "total");
        std::printf("%s  energy %10.2f  demand %10.2f  total %10.2f  peak %8.1f kW at %02d:00\n",
                    t.text(i, "cycle").c_str(), t.number(i, "energy_charge"), t.number(i, "demand_charge"),
                    t.number(i, "total"), t.number(i, "peak_kw"), static_cast<int>(t.number(i, "peak_hour")));
    }
    harness::save_json(c.out / "summary.json", {{"cycles", t.rows.size()}, {"total", total}});
    std::printf("total %.2f\n", total);
}

void run_assess(const CommonArgs& a, bool blind_flag)
{
    const auto c = resolve(a);
    const auto tariff = io::load_tariff(c);
    const auto battery = io::load_battery(c);
    const auto profile = io::ingest_load_csv(c.load_csv);
    AssessmentOptions options;
    options.degradation_blind = c.degradation_blind || blind_flag;
    options.hvac = c.hvac;
    const auto report = harness::assess(profile, battery.spec, curve_of(battery), tariff, options);
    const auto bounds = io::bounds_of(c.bound);
    harness::assessment_table(report, bounds).save(c.out / "assessment.csv");
    const auto summary = harness::assessment_summary(report, battery.spec, bounds, options);
    harness::save_json(c.out / "summary.json", summary);

    for (auto b : bounds) {
        const auto p = payback_for(report.annual_saving(b), report.annual_degradation(b), battery.spec);
        std::printf("[%s] annual saving %.2f  degradation %.2f  ", to_string(b), report.annual_saving(b),
                    report.annual_degradation(b));
        if (p.none) {
            std::printf("payback: none\n");
        } else {
            std::printf("payback %.2f years  salvage %.1f%%\n", p.years, 100.0 * p.salvage);
        }
        for (const auto& label : report.unverified_cycles(b)) {
            std::fprintf(stderr, "WARNING [%s] %s: optimized peak falls outside the peak window; its relaxed bill "
                                 "is not a certified bound\n",
                         to_string(b), label.c_str());
        }
    }
    std::printf("wrote %s\n", (c.out / "assessment.csv").string().c_str());
}

void run_runtime(const CommonArgs& a, std::optional<std::size_t> scenarios)
{
    auto c = resolve(a);
    if (scenarios) {
        c.scenarios = *scenarios;
        c.validate();
    }
    detail::require(!c.training_csv.empty(), "config needs 'training_csv' for the runtime controller");
    const auto tariff = io::load_tariff(c);
    const auto battery = io::load_battery(c);
    harness::ComparisonOptions o;
    o.bounds = io::bounds_of(c.bound);
    o.scenarios = c.scenarios;
    o.seed = c.seed;
    o.forecast_noise = c.forecast_noise;
    const auto report = harness::compare_runtime(io::ingest_load_csv(c.load_csv), io::ingest_load_csv(c.training_csv),
                                                 battery.spec, curve_of(battery), tariff, o);
    harness::comparison_table(report).save(c.out / "comparison.csv");
    harness::monthly_cost_table(report).save(c.out / "monthly_costs.csv");
    harness::save_json(c.out / "summary.json", harness::comparison_summary(report, o));
    for (auto b : o.bounds) {
        std::printf("[%s] design saving %.2f  runtime saving %.2f  ratio %.3f\n", to_string(b),
                    report.design_total(b), report.runtime_total(b), report.ratio(b));
    }
    std::printf("wrote %s\n", (c.out / "comparison.csv").string().c_str());
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Battery storage payback assessment and runtime control"};
    app.require_subcommand(1);

    CommonArgs fit_args;
    CommonArgs bill_args;
    CommonArgs assess_args;
    CommonArgs runtime_args;
    bool blind = false;
    std::optional<std::size_t> scenarios;

    auto* fit = app.add_subcommand("fit-degradation", "fit cycle life and write the degradation curve");
    add_common(fit, fit_args);
    auto* bill_cmd = app.add_subcommand("bill", "price the load under the tariff");
    add_common(bill_cmd, bill_args);
    auto* assess = app.add_subcommand("assess", "design-phase savings, degradation and payback");
    add_common(assess, assess_args);
    assess->add_flag("--degradation-blind", blind, "optimize as if wear were free");
    auto* runtime = app.add_subcommand("runtime", "runtime controller against the design-phase optimum");
    add_common(runtime, runtime_args);
    runtime->add_option("--scenarios", scenarios, "scenario count per day")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*fit) {
            run_fit(fit_args);
        } else if (*bill_cmd) {
            run_bill(bill_args);
        } else if (*assess) {
            run_assess(assess_args, blind);
        } else if (*runtime) {
            run_runtime(runtime_args, scenarios);
        }
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const SolverError& e) {
        std::fprintf(stderr, "solver failure: %s\n", e.what());
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
