// bess_synth: writes a synthetic office-building load CSV.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "bess/io.hpp"
#include "bess/synthetic.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Synthetic office load generator (not measured data)"};
    bess::synthetic::OfficeOptions o;
    std::string out;
    app.add_option("--year", o.year, "first calendar year");
    app.add_option("--years", o.years, "number of years")->check(CLI::PositiveNumber);
    app.add_option("--interval", o.interval_minutes, "minutes per interval");
    app.add_option("--seed", o.seed, "random seed");
    app.add_option("--peak-scale", o.cooling_kw_per_degree, "cooling load per degree C above 18");
    app.add_option("--out", out, "output CSV")->required();
    CLI11_PARSE(app, argc, argv);

    try {
        const auto profile = bess::synthetic::office_profile(o);
        bess::io::write_load_csv(out, profile);
        std::printf("wrote %zu intervals to %s\n", profile.values().size(), out.c_str());
    } catch (const bess::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
