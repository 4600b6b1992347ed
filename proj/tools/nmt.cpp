#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nmt/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"dictionary-augmented neural machine translation pipeline"};
    app.require_subcommand(1);

    const std::vector<std::string> stages = {"clean",   "learn-bpe", "count-freq",
                                             "ingest-dict", "augment",   "train",
                                             "translate", "evaluate",  "heatmap"};
    struct Options {
        std::string config;
        std::vector<std::string> overrides;
    };
    std::vector<Options> opts(stages.size());
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        auto* sub = app.add_subcommand(stages[i]);
        sub->add_option("--config", opts[i].config, "config file")->required();
        sub->add_option("--override", opts[i].overrides,
                        "override a config value as section.key=value");
        subs.push_back(sub);
    }

    CLI11_PARSE(app, argc, argv);

    for (std::size_t i = 0; i < stages.size(); ++i) {
        if (!subs[i]->parsed()) continue;
        try {
            auto cfg = nmt::pipeline::load_config(opts[i].config, opts[i].overrides);
            return nmt::pipeline::run_stage_exit(cfg, stages[i]);
        } catch (const nmt::ConfigError& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return nmt::kExitConfigError;
        }
    }
    return nmt::kExitInternal;
}
