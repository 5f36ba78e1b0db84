#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "conclab/config.hpp"
#include "conclab/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"verification and simulation harness for concentration on weakly dependent finite systems"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    int threads = 0;
    bool seed_set = false, out_set = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config file")->required();
        sub->add_option("--out", out_dir, "output directory (overrides experiment.out)")
            ->each([&](const std::string&) { out_set = true; });
        sub->add_option("--seed", seed, "master seed (overrides experiment.seed)")
            ->each([&](const std::string&) { seed_set = true; });
        sub->add_option("--threads", threads, "worker cap (CONCLAB_THREADS as fallback)");
    };
    const char* names[] = {"verify", "certify", "tails", "constants", "scan"};
    for (const char* name : names) add_common(app.add_subcommand(name));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        conclab::ExperimentConfig cfg = conclab::parse_config(config_path);
        std::string sub = app.get_subcommands().front()->get_name();
        if (conclab::parse_kind(sub) != cfg.kind)
            throw conclab::config_error("config declares kind `" + std::string(conclab::kind_name(cfg.kind)) +
                                        "` but the `" + sub + "` subcommand was invoked");
        if (seed_set) cfg.seed = seed;
        if (out_set) cfg.out_dir = out_dir;
        if (threads > 0)
            cfg.threads = threads;
        else if (const char* env = std::getenv("CONCLAB_THREADS"))
            cfg.threads = std::max(1, std::atoi(env));
        if ((cfg.kind == conclab::ExperimentKind::tails || cfg.kind == conclab::ExperimentKind::scan) && !cfg.seed)
            throw conclab::config_error("a master seed is required for tails and scan runs");
        return conclab::run_experiment(cfg, std::cout);
    } catch (const conclab::config_error& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const conclab::error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
