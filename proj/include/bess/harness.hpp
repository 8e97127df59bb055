#pragma once

// Experiment orchestration and report tables: annual assessment at the chosen
// bounds, the runtime-versus-design comparison, and CSV/JSON emission.

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bess/design_phase.hpp"
#include "bess/io.hpp"
#include "bess/runtime_control.hpp"

namespace bess::harness {

/// Runs fn(0..n-1) on up to hardware_concurrency threads. The first failure
/// by index is rethrown after every job has finished.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn)
{
    const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
    std::vector<std::exception_ptr> errors(n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

// ---------------------------------------------------------------------------
// Tables

/// String cells with numeric helpers; numbers are written in shortest
/// round-trip form so a table re-reads into identical doubles.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    static std::string cell(double v) { return io::detail::format_double(v); }
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    static std::string cell(bool b) { return b ? "true" : "false"; }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(std::size_t v) { return std::to_string(v); }

    template <class... Ts>
    void add(const Ts&... values)
    {
        rows.push_back({cell(values)...});
        detail::require(rows.back().size() == columns.size(), "table row has the wrong number of cells");
    }

    std::size_t column(const std::string& name) const
    {
        const auto it = std::find(columns.begin(), columns.end(), name);
        detail::require(it != columns.end(), "table has no column '" + name + "'");
        return static_cast<std::size_t>(it - columns.begin());
    }

    double number(std::size_t row, const std::string& name) const
    {
        const auto v = io::detail::parse_double(rows.at(row).at(column(name)));
        detail::require(v.has_value(), "cell " + name + " of row " + std::to_string(row) + " is not a number");
        return *v;
    }

    const std::string& text(std::size_t row, const std::string& name) const { return rows.at(row).at(column(name)); }

    void write(std::ostream& out) const
    {
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t k = 0; k < cells.size(); ++k) {
                out << (k ? "," : "") << cells[k];
            }
            out << '\n';
        };
        line(columns);
        for (const auto& r : rows) {
            line(r);
        }
    }

    static Table read(std::istream& in, const std::string& source = "<table>")
    {
        auto split = [](const std::string& s) {
            std::vector<std::string> out;
            std::stringstream ss(s);
            std::string c;
            while (std::getline(ss, c, ',')) {
                out.emplace_back(io::detail::trim(c));
            }
            if (!s.empty() && s.back() == ',') {
                out.emplace_back();
            }
            return out;
        };
        Table t;
        std::string line;
        if (!std::getline(in, line)) {
            throw ValidationError(source + ": empty table");
        }
        t.columns = split(line);
        std::size_t n = 1;
        while (std::getline(in, line)) {
            ++n;
            if (io::detail::trim(line).empty()) {
                continue;
            }
            t.rows.push_back(split(line));
            if (t.rows.back().size() != t.columns.size()) {
                throw ValidationError(source + ":" + std::to_string(n) + ": expected " +
                                      std::to_string(t.columns.size()) + " cells");
            }
        }
        return t;
    }

    void save(const std::filesystem::path& path) const
    {
        std::ofstream out(path);
        if (!out) {
            throw ValidationError("cannot write " + path.string());
        }
        write(out);
    }

    static Table load(const std::filesystem::path& path)
    {
        auto in = io::detail::open_input(path);
        return read(in, path.string());
    }
};

inline void save_json(const std::filesystem::path& path, const io::json& j)
{
    std::ofstream out(path);
    if (!out) {
        throw ValidationError("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Degradation fit

struct FitReport {
    CycleLifeFit fit;
    DegradationCurve curve;
    std::vector<CycleLifePoint> points;
};

inline FitReport fit_degradation(const std::vector<CycleLifePoint>& points, double capital, std::size_t segments)
{
    const auto fit = fit_cycle_life(points);
    return {fit, build_curve(fit, capital, segments), points};
}

inline Table curve_table(const FitReport& r)
{
    Table t{{"dod", "cycle_life", "cost", "segment_slope", "segment_intercept"}, {}};
    for (std::size_t j = 0; j < r.curve.dod_x.size(); ++j) {
        const bool last = j + 1 == r.curve.dod_x.size();
        t.add(r.curve.dod_x[j], cycle_life(r.fit, r.curve.dod_x[j]), r.curve.cost_y[j],
              last ? std::string() : Table::cell(r.curve.segment_lines[j].slope),
              last ? std::string() : Table::cell(r.curve.segment_lines[j].intercept));
    }
    return t;
}

inline void write_fit(const std::filesystem::path& dir, const FitReport& r)
{
    std::filesystem::create_directories(dir);
    curve_table(r).save(dir / "degradation_curve.csv");
    io::json pts = io::json::array();
    for (const auto& p : r.points) {
        pts.push_back({{"depth", p.depth}, {"cycles", p.cycles}, {"fitted", cycle_life(r.fit, p.depth)}});
    }
    save_json(dir / "summary.json", {{"a", r.fit.a}, {"b", r.fit.b}, {"segments", r.curve.segments()}, {"points", pts}});
}

// ---------------------------------------------------------------------------
// Bill

inline Table bill_table(const std::vector<BillingCycle>& cycles, const TariffModel& tariff)
{
    Table t{{"cycle", "energy_charge", "demand_charge", "total", "peak_kw", "peak_hour", "peak_in_window",
             "relaxed_hi", "relaxed_lo"},
            {}};
    for (const auto& c : cycles) {
        const auto b = bill(tariff, c);
        t.add(c.label(), b.energy_charge, b.demand_charge, b.total, b.peak_kw, b.peak_hour,
              verify_peak_window(tariff, c), relaxed_bill(tariff, c, Bound::hi), relaxed_bill(tariff, c, Bound::lo));
    }
    return t;
}

// ---------------------------------------------------------------------------
// Assessment

/// Annual assessment with one job per billing cycle.
inline AssessmentReport assess(const LoadProfile& profile, const BatterySpec& battery, const DegradationCurve& curve,
                               const TariffModel& tariff, const AssessmentOptions& options)
{
    tariff.validate();
    const auto cycles = slice_cycles(profile);
    AssessmentReport report;
    report.cycles.resize(cycles.size());
    parallel_for(cycles.size(), [&](std::size_t i) {
        report.cycles[i] = assess_cycle(cycles[i], battery, curve, tariff, options);
    });
    return report;
}

inline Table assessment_table(const AssessmentReport& r, const std::vector<Bound>& bounds)
{
    Table t;
    t.columns = {"cycle", "baseline_exact"};
    for (auto b : bounds) {
        const std::string s = to_string(b);
        for (const char* c : {"baseline_", "objective_", "saving_", "degradation_", "net_saving_", "exact_bill_",
                              "peak_verified_", "hvac_used_"}) {
            t.columns.push_back(c + s);
        }
    }
    for (const auto& c : r.cycles) {
        std::vector<std::string> row{c.label, Table::cell(c.baseline_exact)};
        for (auto b : bounds) {
            const bool hi = b == Bound::hi;
            const auto& o = hi ? c.hi : c.lo;
            const double saving = hi ? c.saving_hi() : c.saving_lo();
            const double deg = hi ? c.degradation_hi() : c.degradation_lo();
            for (const auto& v : {Table::cell(hi ? c.baseline_hi : c.baseline_lo), Table::cell(o.relaxed_objective),
                                  Table::cell(saving), Table::cell(deg), Table::cell(saving - deg),
                                  Table::cell(o.exact_bill.total), Table::cell(o.verified),
                                  Table::cell(hi ? c.hvac_used_hi : c.hvac_used_lo)}) {
                row.push_back(v);
            }
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline io::json payback_json(const Payback& p)
{
    if (p.none) {
        return {{"years", "none"}, {"salvage", nullptr}};
    }
    return {{"years", p.years}, {"salvage", p.salvage}};
}

inline io::json assessment_summary(const AssessmentReport& r, const BatterySpec& battery,
                                   const std::vector<Bound>& bounds, const AssessmentOptions& options)
{
    io::json j;
    j["degradation_blind"] = options.degradation_blind;
    j["hvac"] = options.hvac ? io::hvac_to_json(*options.hvac) : io::json(nullptr);
    j["total_capital"] = battery.total_capital();
    for (auto b : bounds) {
        const double s = r.annual_saving(b);
        const double d = r.annual_degradation(b);
        j[to_string(b)] = {{"annual_saving", s},
                           {"annual_degradation", d},
                           {"annual_net_saving", s - d},
                           {"payback", payback_json(payback_for(s, d, battery))},
                           {"unverified_cycles", r.unverified_cycles(b)}};
    }
    return j;
}

// ---------------------------------------------------------------------------
// Runtime versus design

struct BoundComparison {
    double baseline = 0.0;           ///< relaxed bill of the original load
    double design_objective = 0.0;   ///< relaxed bill plus wear, perfect foresight
    double design_degradation = 0.0;
    double runtime_bill = 0.0;       ///< relaxed bill of the realized net load
    double runtime_degradation = 0.0;
    double runtime_exact_bill = 0.0;

    double design_saving() const { return baseline - design_objective; }
    double runtime_saving() const { return baseline - runtime_bill - runtime_degradation; }
};

/// Runtime over design saving. Both zero counts as 1.
inline double saving_ratio(double runtime, double design)
{
    if (design == 0.0) {
        if (runtime == 0.0) {
            return 1.0;
        }
        return runtime < 0.0 ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    }
    return runtime / design;
}

struct ComparisonRow {
    std::string label;
    std::map<Bound, BoundComparison> bounds;
};

/// Savings here are net of wear on both sides, so perfect foresight is an upper bound.
struct ComparisonReport {
    std::vector<Bound> bounds;
    std::vector<ComparisonRow> rows;

    double design_total(Bound b) const
    {
        double s = 0.0;
        for (const auto& r : rows) {
            s += r.bounds.at(b).design_saving();
        }
        return s;
    }

    double runtime_total(Bound b) const
    {
        double s = 0.0;
        for (const auto& r : rows) {
            s += r.bounds.at(b).runtime_saving();
        }
        return s;
    }

    double ratio(Bound b) const { return saving_ratio(runtime_total(b), design_total(b)); }
};

struct ComparisonOptions {
    std::vector<Bound> bounds{Bound::hi, Bound::lo};
    std::size_t scenarios = 20;
    unsigned long long seed = 1;
    double forecast_noise = 0.0;
    /// Called with every design and runtime plan; may run on several threads at once.
    std::function<void(const BillingCycle&, const DispatchPlan&)> on_plan;
};

/// Same-month cycle of the training period.
inline const BillingCycle& training_cycle_for(const std::vector<BillingCycle>& training, const BillingCycle& c)
{
    for (const auto& t : training) {
        if (t.month == c.month) {
            detail::require(t.interval_minutes == c.interval_minutes,
                            "training and run data use different intervals (" + t.label() + ")");
            return t;
        }
    }
    throw ValidationError("training data has no cycle for month " + std::to_string(c.month) + " (needed by " +
                          c.label() + ")");
}

inline ComparisonRow compare_cycle(const BillingCycle& cycle, const ScenarioProvider& provider,
                                   const BatterySpec& battery, const DegradationCurve& curve,
                                   const TariffModel& tariff, const ComparisonOptions& options)
{
    ComparisonRow row;
    row.label = cycle.label();
    for (auto b : options.bounds) {
        BoundComparison cmp;
        cmp.baseline = relaxed_bill(tariff, cycle, b);
        const auto design = optimize_cycle(cycle, battery, curve, tariff, b);
        cmp.design_objective = design.relaxed_objective;
        cmp.design_degradation = design.plan.total_degradation();
        RuntimeOptions ro;
        ro.bound = b;
        ro.forecast_noise = options.forecast_noise;
        ro.seed = options.seed;
        const auto trace = run_cycle(cycle, provider, battery, curve, tariff, ro);
        cmp.runtime_bill = trace.realized_relaxed_bill;
        cmp.runtime_degradation = trace.degradation();
        cmp.runtime_exact_bill = trace.realized_bill.total;
        if (options.on_plan) {
            options.on_plan(cycle, design.plan);
            options.on_plan(cycle, trace.plan);
        }
        row.bounds[b] = cmp;
    }
    return row;
}

/// Controller on `run` with KDE scenarios fitted to the same month of `training`.
inline ComparisonReport compare_runtime(const LoadProfile& run, const LoadProfile& training,
                                        const BatterySpec& battery, const DegradationCurve& curve,
                                        const TariffModel& tariff, const ComparisonOptions& options)
{
    tariff.validate();
    const auto cycles = slice_cycles(run);
    const auto train = slice_cycles(training);
    ComparisonReport report;
    report.bounds = options.bounds;
    report.rows.resize(cycles.size());
    parallel_for(cycles.size(), [&](std::size_t i) {
        const auto& t = training_cycle_for(train, cycles[i]);
        const KdeScenarioSource src{fit_peak_kde(daily_peaks(t)), peak_day(t), options.scenarios,
                                    options.seed * 131ULL + cycles[i].month};
        report.rows[i] = compare_cycle(cycles[i], src, battery, curve, tariff, options);
    });
    return report;
}

inline Table comparison_table(const ComparisonReport& r)
{
    Table t;
    t.columns = {"cycle"};
    for (auto b : r.bounds) {
        const std::string s = to_string(b);
        for (const char* c : {"design_saving_", "runtime_saving_", "ratio_", "design_degradation_",
                              "runtime_degradation_"}) {
            t.columns.push_back(c + s);
        }
    }
    for (const auto& row : r.rows) {
        std::vector<std::string> cells{row.label};
        for (auto b : r.bounds) {
            const auto& c = row.bounds.at(b);
            for (double v : {c.design_saving(), c.runtime_saving(), saving_ratio(c.runtime_saving(), c.design_saving()),
                             c.design_degradation, c.runtime_degradation}) {
                cells.push_back(Table::cell(v));
            }
        }
        t.rows.push_back(std::move(cells));
    }
    return t;
}

/// Monthly cost series for plotting: baseline, design and runtime, per bound.
inline Table monthly_cost_table(const ComparisonReport& r)
{
    Table t{{"cycle", "bound", "baseline_cost", "design_cost", "runtime_cost"}, {}};
    for (const auto& row : r.rows) {
        for (auto b : r.bounds) {
            const auto& c = row.bounds.at(b);
            t.add(row.label, to_string(b), c.baseline, c.design_objective, c.runtime_bill + c.runtime_degradation);
        }
    }
    return t;
}

inline io::json comparison_summary(const ComparisonReport& r, const ComparisonOptions& o)
{
    io::json j{{"scenarios", o.scenarios}, {"seed", o.seed}, {"forecast_noise", o.forecast_noise}};
    for (auto b : r.bounds) {
        const double ratio = r.ratio(b);
        j[to_string(b)] = {{"design_saving", r.design_total(b)},
                           {"runtime_saving", r.runtime_total(b)},
                           {"ratio", std::isfinite(ratio) ? io::json(ratio) : io::json(nullptr)}};
    }
    return j;
}

} // namespace bess::harness
