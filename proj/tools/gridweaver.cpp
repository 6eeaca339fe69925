// gridweaver: build an energy-system model from open geodata and solve
// a joint capacity-expansion and dispatch problem on it.
//
//   gridweaver <stage> --config <path> [--force] [--export-mps <path>]
//
// Stages run in order: ingest, build, cluster, profiles, eligibility,
// optimize, report. `all` runs the full chain. Logs go to stderr;
// machine-readable outputs only to files under the configured output
// directory. Exit codes: 0 success, 1 user error, 2 internal error.

#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "gridweaver/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"transmission-grid energy system modelling pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string export_mps;
    bool force = false;

    std::vector<CLI::App*> stage_cmds;
    for (gridweaver::Stage stage : gridweaver::stage_order()) {
        CLI::App* cmd = app.add_subcommand(gridweaver::to_string(stage),
                                           "run the " + gridweaver::to_string(stage) + " stage");
        cmd->add_option("--config", config_path, "pipeline configuration file")->required();
        cmd->add_flag("--force", force, "rerun even when inputs are unchanged");
        if (stage == gridweaver::Stage::optimize)
            cmd->add_option("--export-mps", export_mps, "also write the LP as free-format MPS");
        stage_cmds.push_back(cmd);
    }
    CLI::App* all_cmd = app.add_subcommand("all", "run every stage in order");
    all_cmd->add_option("--config", config_path, "pipeline configuration file")->required();
    all_cmd->add_flag("--force", force, "rerun even when inputs are unchanged");
    all_cmd->add_option("--export-mps", export_mps, "also write the LP as free-format MPS");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        gridweaver::PipelineConfig config = gridweaver::load_config(config_path);
        gridweaver::Pipeline pipeline(std::move(config), std::cerr);
        if (all_cmd->parsed()) {
            for (gridweaver::Stage stage : gridweaver::stage_order())
                pipeline.run(stage, force,
                             stage == gridweaver::Stage::optimize ? export_mps : "");
            return 0;
        }
        for (std::size_t i = 0; i < stage_cmds.size(); ++i) {
            if (!stage_cmds[i]->parsed()) continue;
            const gridweaver::Stage stage = gridweaver::stage_order()[i];
            pipeline.run(stage, force,
                         stage == gridweaver::Stage::optimize ? export_mps : "");
            return 0;
        }
        std::cerr << "error: no stage selected\n";
        return 1;
    } catch (const gridweaver::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const gridweaver::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const gridweaver::ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}
