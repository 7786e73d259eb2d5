#include "cuplab/harness.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <utility>

int main(int argc, char** argv) {
    CLI::App app{"cuplab: constrained MDP bound verification and conservative policy training"};
    app.require_subcommand(1);

    cuplab::CommandOptions options;
    std::string output;
    std::string dump_dp;
    std::string dump_batch;
    bool no_stamp = false;
    const std::pair<const char*, const char*> commands[] = {
        {"verify-bounds", "run the randomized bound campaign, exit 1 on any hard violation"},
        {"train", "train CUP (and optionally the Lagrangian baseline) and write the log"},
        {"describe", "print the resolved config and the uniform policy's exact values"}};
    for (const auto& [name, description] : commands) {
        CLI::App* sub = app.add_subcommand(name, description);
        sub->add_option("--config", options.config_path, "experiment JSON")->required();
        sub->add_option("--output", output, "CSV path, overrides output_path");
        sub->add_option("--dump-dp", dump_dp, "write exact solutions of the policy as JSON");
        sub->add_option("--dump-batch", dump_batch, "write the first sampled batch as JSON lines");
        sub->add_flag("--no-stamp", no_stamp, "omit the leading '#' timestamp line");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cuplab::exit_config;
    }
    options.stamp = !no_stamp;
    if (!output.empty()) options.output_path = output;
    if (!dump_dp.empty()) options.dump_dp_path = dump_dp;
    if (!dump_batch.empty()) options.dump_batch_path = dump_batch;
    return cuplab::run_command(app.get_subcommands().front()->get_name(), options, std::cout, std::cerr);
}
