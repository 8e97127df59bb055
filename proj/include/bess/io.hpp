#pragma once

// File formats: interval load CSV, cycle-life CSV and the JSON configuration
// files (tariff, battery, HVAC, run). Every reader is strict and reports the
// offending line or key.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bess/core_model.hpp"
#include "bess/degradation.hpp"
#include "bess/tariff.hpp"

namespace bess::io {

using nlohmann::json;

namespace detail {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::optional<double> parse_double(std::string_view s)
{
    s = trim(s);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        return std::nullopt;
    }
    return v;
}

inline std::optional<int> parse_int(std::string_view s)
{
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        return std::nullopt;
    }
    return v;
}

/// Shortest text that reads back to the same double.
inline std::string format_double(double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline std::string at_line(const std::string& source, std::size_t line)
{
    return source + ":" + std::to_string(line) + ": ";
}

inline std::ifstream open_input(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open " + path.string());
    }
    return in;
}

} // namespace detail

/// `YYYY-MM-DDTHH:MM`, optionally with `:00` seconds and a space in place of `T`.
inline std::optional<Timestamp> parse_timestamp(std::string_view s)
{
    s = detail::trim(s);
    if (s.size() == 19 && s.substr(16) == ":00") {
        s = s.substr(0, 16);
    }
    if (s.size() != 16 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':') {
        return std::nullopt;
    }
    const auto y = detail::parse_int(s.substr(0, 4));
    const auto mo = detail::parse_int(s.substr(5, 2));
    const auto d = detail::parse_int(s.substr(8, 2));
    const auto h = detail::parse_int(s.substr(11, 2));
    const auto mi = detail::parse_int(s.substr(14, 2));
    if (!y || !mo || !d || !h || !mi || *h > 23 || *mi > 59 || *mo < 1 || *mo > 12 || *d < 1) {
        return std::nullopt;
    }
    const std::chrono::year_month_day ymd{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*mo)},
                                          std::chrono::day{static_cast<unsigned>(*d)}};
    if (!ymd.ok()) {
        return std::nullopt;
    }
    return make_timestamp(*y, static_cast<unsigned>(*mo), static_cast<unsigned>(*d), *h, *mi);
}

/// Reads `timestamp,kw` rows at one uniform interval. Gaps, duplicates,
/// out-of-order rows, malformed fields and negative power are errors.
inline LoadProfile parse_load_csv(std::istream& in, const std::string& source = "<input>")
{
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) {
        throw ValidationError(source + ": empty file, expected header 'timestamp,kw'");
    }
    ++line_no;
    std::string_view header = line;
    if (header.substr(0, 3) == "\xEF\xBB\xBF") {
        header.remove_prefix(3);
    }
    if (detail::trim(header) != "timestamp,kw") {
        throw ValidationError(detail::at_line(source, 1) + "expected header 'timestamp,kw', got '" +
                              std::string(detail::trim(header)) + "'");
    }

    std::optional<Timestamp> start;
    std::optional<Timestamp> prev;
    int interval = 0;
    std::vector<double> values;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view row = detail::trim(line);
        if (row.empty()) {
            continue;
        }
        const auto comma = row.find(',');
        if (comma == std::string_view::npos || row.find(',', comma + 1) != std::string_view::npos) {
            throw ValidationError(detail::at_line(source, line_no) + "expected two fields 'timestamp,kw'");
        }
        const auto ts = parse_timestamp(row.substr(0, comma));
        if (!ts) {
            throw ValidationError(detail::at_line(source, line_no) + "malformed timestamp '" +
                                  std::string(row.substr(0, comma)) + "'");
        }
        const auto kw = detail::parse_double(row.substr(comma + 1));
        if (!kw || !std::isfinite(*kw)) {
            throw ValidationError(detail::at_line(source, line_no) + "malformed power '" +
                                  std::string(row.substr(comma + 1)) + "'");
        }
        if (*kw < 0.0) {
            throw ValidationError(detail::at_line(source, line_no) + "negative power " + detail::format_double(*kw) +
                                  " kW at " + format_timestamp(*ts));
        }
        if (prev) {
            const auto step = static_cast<int>((*ts - *prev).count());
            if (step == 0) {
                throw ValidationError(detail::at_line(source, line_no) + "duplicate timestamp " +
                                      format_timestamp(*ts));
            }
            if (step < 0) {
                throw ValidationError(detail::at_line(source, line_no) + "timestamp " + format_timestamp(*ts) +
                                      " is earlier than the previous row");
            }
            if (interval == 0) {
                interval = step;
                if (kMinutesPerDay % interval != 0) {
                    throw ValidationError(detail::at_line(source, line_no) + "interval of " +
                                          std::to_string(interval) + " minutes does not divide a day");
                }
            } else if (step != interval) {
                const Timestamp missing = *prev + std::chrono::minutes{interval};
                if (step > interval) {
                    throw ValidationError(detail::at_line(source, line_no) + "gap: missing interval " +
                                          format_timestamp(missing));
                }
                throw ValidationError(detail::at_line(source, line_no) + "irregular spacing: expected " +
                                      format_timestamp(missing) + ", got " + format_timestamp(*ts));
            }
        } else {
            start = ts;
        }
        prev = ts;
        values.push_back(*kw);
    }
    if (values.empty()) {
        throw ValidationError(source + ": no data rows");
    }
    if (values.size() == 1) {
        throw ValidationError(source + ": a single row does not define an interval");
    }
    const std::size_t per_day = static_cast<std::size_t>(kMinutesPerDay / interval);
    if (values.size() % per_day != 0) {
        throw ValidationError(source + ": " + std::to_string(values.size()) + " rows at " + std::to_string(interval) +
                              " minutes do not cover whole days");
    }
    return LoadProfile(*start, interval, std::move(values));
}

inline LoadProfile ingest_load_csv(const std::filesystem::path& path)
{
    auto in = detail::open_input(path);
    return parse_load_csv(in, path.string());
}

inline void emit_load_csv(std::ostream& out, const LoadProfile& profile)
{
    out << "timestamp,kw\n";
    const auto& v = profile.values();
    for (std::size_t k = 0; k < v.size(); ++k) {
        out << format_timestamp(profile.timestamp(k)) << ',' << detail::format_double(v[k]) << '\n';
    }
}

inline void write_load_csv(const std::filesystem::path& path, const LoadProfile& profile)
{
    std::ofstream out(path);
    if (!out) {
        throw ValidationError("cannot write " + path.string());
    }
    emit_load_csv(out, profile);
}

/// `depth,cycles` rows.
inline std::vector<CycleLifePoint> parse_cycle_life_csv(std::istream& in, const std::string& source = "<input>")
{
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != "depth,cycles") {
        throw ValidationError(detail::at_line(source, 1) + "expected header 'depth,cycles'");
    }
    std::vector<CycleLifePoint> points;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view row = detail::trim(line);
        if (row.empty()) {
            continue;
        }
        const auto comma = row.find(',');
        const auto d = comma == std::string_view::npos ? std::nullopt : detail::parse_double(row.substr(0, comma));
        const auto c = comma == std::string_view::npos ? std::nullopt : detail::parse_double(row.substr(comma + 1));
        if (!d || !c) {
            throw ValidationError(detail::at_line(source, line_no) + "expected 'depth,cycles' numbers");
        }
        points.push_back({*d, *c});
    }
    return points;
}

inline std::vector<CycleLifePoint> ingest_cycle_life_csv(const std::filesystem::path& path)
{
    auto in = detail::open_input(path);
    return parse_cycle_life_csv(in, path.string());
}

// ---------------------------------------------------------------------------
// JSON

inline json read_json(const std::filesystem::path& path)
{
    auto in = detail::open_input(path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

namespace detail {

/// Required member with a type check; `where` names the file or object.
template <class T>
T get(const json& j, const char* key, const std::string& where)
{
    if (!j.is_object() || !j.contains(key)) {
        throw ValidationError(where + ": missing key '" + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(where + ": key '" + key + "' has the wrong type");
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where)
{
    return j.is_object() && j.contains(key) ? get<T>(j, key, where) : fallback;
}

inline HourlyPrices hourly(const json& j, const std::string& where)
{
    if (!j.is_array() || j.size() != 24) {
        throw ValidationError(where + ": expected 24 hourly prices");
    }
    HourlyPrices p{};
    for (std::size_t h = 0; h < 24; ++h) {
        if (!j[h].is_number()) {
            throw ValidationError(where + ": hour " + std::to_string(h) + " is not a number");
        }
        p[h] = j[h].get<double>();
    }
    return p;
}

} // namespace detail

inline TariffModel tariff_from_json(const json& j, const std::string& where = "tariff")
{
    TariffModel t;
    const auto seasons = detail::get<json>(j, "seasons", where);
    if (!seasons.is_array()) {
        throw ValidationError(where + ": 'seasons' must be an array");
    }
    for (const auto& s : seasons) {
        const auto name = detail::get<std::string>(s, "name", where + ".seasons");
        t.seasons.push_back({name, detail::get<std::vector<unsigned>>(s, "months", where + ".seasons." + name)});
        t.energy_price[name] =
            detail::hourly(detail::get<json>(detail::get<json>(j, "energy_price", where), name.c_str(),
                                             where + ".energy_price"),
                           where + ".energy_price." + name);
        t.demand_price[name] =
            detail::hourly(detail::get<json>(detail::get<json>(j, "demand_price", where), name.c_str(),
                                             where + ".demand_price"),
                           where + ".demand_price." + name);
    }
    if (j.contains("peak_window")) {
        const auto& w = j["peak_window"];
        t.peak_window.first_hour = detail::get<int>(w, "first_hour", where + ".peak_window");
        t.peak_window.last_hour = detail::get<int>(w, "last_hour", where + ".peak_window");
    }
    t.validate();
    return t;
}

inline json tariff_to_json(const TariffModel& t)
{
    json j;
    j["seasons"] = json::array();
    for (const auto& s : t.seasons) {
        j["seasons"].push_back({{"name", s.name}, {"months", s.months}});
        j["energy_price"][s.name] = t.energy_price.at(s.name);
        j["demand_price"][s.name] = t.demand_price.at(s.name);
    }
    j["peak_window"] = {{"first_hour", t.peak_window.first_hour}, {"last_hour", t.peak_window.last_hour}};
    return j;
}

/// Battery plus the number of degradation curve segments it should use.
struct BatteryConfig {
    BatterySpec spec;
    std::size_t segments = 10;
};

/// `cycle_life` is either an inline array of {depth, cycles} or a path to a
/// depth,cycles CSV relative to `base`.
inline BatteryConfig battery_from_json(const json& j, const std::filesystem::path& base = {},
                                       const std::string& where = "battery")
{
    BatteryConfig c;
    auto& b = c.spec;
    b.soe_max = detail::get<double>(j, "soe_max_kwh", where);
    b.soe_ini = detail::get_or<double>(j, "soe_ini_kwh", b.soe_max, where);
    b.p_max = detail::get<double>(j, "p_max_kw", where);
    b.p_min = detail::get_or<double>(j, "p_min_kw", -b.p_max, where);
    b.capital_cost_battery = detail::get<double>(j, "capital_cost_battery", where);
    b.capital_cost_inverter = detail::get_or<double>(j, "capital_cost_inverter", 0.0, where);
    b.round_trip_efficiency = detail::get_or<double>(j, "round_trip_efficiency", 1.0, where);
    c.segments = detail::get_or<std::size_t>(j, "segments", 10, where);
    const auto life = detail::get<json>(j, "cycle_life", where);
    if (life.is_string()) {
        b.cycle_life_points = ingest_cycle_life_csv(base / life.get<std::string>());
    } else if (life.is_array()) {
        for (const auto& p : life) {
            b.cycle_life_points.push_back(
                {detail::get<double>(p, "depth", where + ".cycle_life"), detail::get<double>(p, "cycles", where + ".cycle_life")});
        }
    } else {
        throw ValidationError(where + ": 'cycle_life' must be a CSV path or an array");
    }
    b.validate();
    return c;
}

inline json battery_to_json(const BatteryConfig& c)
{
    const auto& b = c.spec;
    json life = json::array();
    for (const auto& p : b.cycle_life_points) {
        life.push_back({{"depth", p.depth}, {"cycles", p.cycles}});
    }
    return {{"soe_max_kwh", b.soe_max},
            {"soe_ini_kwh", b.soe_ini},
            {"p_min_kw", b.p_min},
            {"p_max_kw", b.p_max},
            {"capital_cost_battery", b.capital_cost_battery},
            {"capital_cost_inverter", b.capital_cost_inverter},
            {"round_trip_efficiency", b.round_trip_efficiency},
            {"segments", c.segments},
            {"cycle_life", life}};
}

inline HvacParams hvac_from_json(const json& j, const std::string& where = "hvac")
{
    HvacParams h;
    h.pre_hours = detail::get<int>(j, "pre_hours", where);
    h.pre_increase_pct = detail::get<double>(j, "pre_increase_pct", where);
    h.post_hours = detail::get<int>(j, "post_hours", where);
    h.post_decrease_pct = detail::get<double>(j, "post_decrease_pct", where);
    h.candidate_start_hours = detail::get<std::vector<int>>(j, "candidate_start_hours", where);
    h.candidate_post_start_hours =
        detail::get_or<std::vector<int>>(j, "candidate_post_start_hours", {}, where);
    h.validate();
    return h;
}

inline json hvac_to_json(const HvacParams& h)
{
    return {{"pre_hours", h.pre_hours},
            {"pre_increase_pct", h.pre_increase_pct},
            {"post_hours", h.post_hours},
            {"post_decrease_pct", h.post_decrease_pct},
            {"candidate_start_hours", h.candidate_start_hours},
            {"candidate_post_start_hours", h.candidate_post_start_hours}};
}

enum class BoundSelection { hi, lo, both };

inline BoundSelection parse_bound_selection(const std::string& s)
{
    if (s == "hi") {
        return BoundSelection::hi;
    }
    if (s == "lo") {
        return BoundSelection::lo;
    }
    if (s == "both") {
        return BoundSelection::both;
    }
    throw ValidationError("bound must be one of hi, lo, both; got '" + s + "'");
}

inline std::vector<Bound> bounds_of(BoundSelection s)
{
    switch (s) {
    case BoundSelection::hi: return {Bound::hi};
    case BoundSelection::lo: return {Bound::lo};
    case BoundSelection::both: break;
    }
    return {Bound::hi, Bound::lo};
}

/// One run of any subcommand. Relative paths resolve against the config file.
struct RunConfig {
    std::filesystem::path load_csv;
    std::filesystem::path training_csv;
    std::filesystem::path tariff;
    std::filesystem::path battery;
    std::filesystem::path cycle_life; ///< for fit-degradation without a battery file
    std::optional<HvacParams> hvac;
    std::optional<double> soe_max_kwh; ///< overrides; power and capital scale with nothing
    std::optional<double> p_max_kw;
    bool degradation_blind = false;
    std::size_t scenarios = 20;
    double forecast_noise = 0.0;
    unsigned long long seed = 1;
    BoundSelection bound = BoundSelection::both;
    std::filesystem::path out = "out";

    void validate() const
    {
        ::bess::detail::require(scenarios >= 1, "scenario count must be >= 1");
        ::bess::detail::require(forecast_noise >= 0.0, "forecast_noise must be >= 0");
    }
};

inline RunConfig run_config_from_json(const json& j, const std::filesystem::path& base = {},
                                      const std::string& where = "config")
{
    auto path = [&](const char* key) -> std::filesystem::path {
        if (!j.contains(key)) {
            return {};
        }
        const std::filesystem::path p = detail::get<std::string>(j, key, where);
        return p.is_absolute() ? p : base / p;
    };
    RunConfig c;
    c.load_csv = path("load_csv");
    c.training_csv = path("training_csv");
    c.tariff = path("tariff");
    c.battery = path("battery");
    c.cycle_life = path("cycle_life");
    if (j.contains("hvac") && !j["hvac"].is_null()) {
        const auto& h = j["hvac"];
        c.hvac = h.is_string() ? hvac_from_json(read_json(path("hvac")), path("hvac").string())
                               : hvac_from_json(h, where + ".hvac");
    }
    if (j.contains("soe_max_kwh")) {
        c.soe_max_kwh = detail::get<double>(j, "soe_max_kwh", where);
    }
    if (j.contains("p_max_kw")) {
        c.p_max_kw = detail::get<double>(j, "p_max_kw", where);
    }
    c.degradation_blind = detail::get_or<bool>(j, "degradation_blind", false, where);
    c.scenarios = detail::get_or<std::size_t>(j, "scenarios", 20, where);
    c.forecast_noise = detail::get_or<double>(j, "forecast_noise", 0.0, where);
    c.seed = detail::get_or<unsigned long long>(j, "seed", 1, where);
    c.bound = parse_bound_selection(detail::get_or<std::string>(j, "bound", "both", where));
    if (j.contains("out")) {
        c.out = path("out");
    }
    c.validate();
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path)
{
    return run_config_from_json(read_json(path), path.parent_path(), path.string());
}

/// Battery file plus the config's size overrides.
inline BatteryConfig load_battery(const RunConfig& c)
{
    ::bess::detail::require(!c.battery.empty(), "config has no 'battery' file");
    auto b = battery_from_json(read_json(c.battery), c.battery.parent_path(), c.battery.string());
    if (c.soe_max_kwh) {
        const double frac = b.spec.soe_max > 0.0 ? b.spec.soe_ini / b.spec.soe_max : 1.0;
        b.spec.soe_max = *c.soe_max_kwh;
        b.spec.soe_ini = frac * b.spec.soe_max;
    }
    if (c.p_max_kw) {
        b.spec.p_max = *c.p_max_kw;
        b.spec.p_min = -*c.p_max_kw;
    }
    b.spec.validate();
    return b;
}

inline TariffModel load_tariff(const RunConfig& c)
{
    ::bess::detail::require(!c.tariff.empty(), "config has no 'tariff' file");
    return tariff_from_json(read_json(c.tariff), c.tariff.string());
}

} // namespace bess::io
