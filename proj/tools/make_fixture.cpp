// Generate the bundled synthetic two-country dataset plus a pipeline
// configuration, for demos and smoke runs.

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "gridweaver/fixture.hpp"

int main(int argc, char** argv) {
    CLI::App app{"write the synthetic demo dataset"};
    std::string dir = "fixture";
    gridweaver::FixtureOptions opt;
    app.add_option("--dir", dir, "target directory");
    app.add_option("--seed", opt.seed, "generator seed");
    app.add_option("--k", opt.k, "cluster count in the generated config");
    app.add_option("--hours", opt.hours, "hours of weather / snapshots");
    CLI11_PARSE(app, argc, argv);

    try {
        const std::string config = gridweaver::write_fixture(dir, opt);
        std::cerr << "fixture written, config at " << config << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
