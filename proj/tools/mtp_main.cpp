// mtp — model-targeted poisoning experiments on linear classifiers.
//
// Every subcommand reads one JSON experiment config and writes its artifacts
// under the configured output directory.  All randomness flows from the config
// seed (or --seed); identical configs produce byte-identical outputs.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "mtp/experiment.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out_dir, "output directory (overrides config and MTP_OUT_DIR)");
    cmd->add_option("--seed", args.seed, "master seed override")
        ->each([&args](const std::string&) { args.seed_set = true; });
}

mtp::ExperimentConfig load(const CommonArgs& args) {
    auto cfg = mtp::load_config(args.config_path);
    mtp::apply_overrides(cfg, args.out_dir, args.seed_set ? &args.seed : nullptr);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"model-targeted data poisoning for linear classifiers"};
    app.require_subcommand(1);

    CommonArgs args;
    auto* cluster = app.add_subcommand("cluster", "cluster the data and report subpopulations");
    auto* train = app.add_subcommand("train", "train and store the clean model");
    auto* gen_target = app.add_subcommand("gen-target", "search for a target model");
    auto* attack = app.add_subcommand("attack", "run the full poisoning pipeline");
    auto* baseline = app.add_subcommand("baseline", "run the label-flip baseline");
    auto* certify = app.add_subcommand("certify", "lower-bound the poisoning cost of a model");
    auto* evaluate = app.add_subcommand("evaluate", "report metrics for a stored model");
    for (auto* cmd : {cluster, train, gen_target, attack, baseline, certify, evaluate})
        add_common(cmd, args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (cluster->parsed()) mtp::cmd_cluster(load(args));
        if (train->parsed()) mtp::cmd_train(load(args));
        if (gen_target->parsed()) mtp::cmd_gen_target(load(args));
        if (attack->parsed()) mtp::cmd_attack(load(args));
        if (baseline->parsed()) mtp::cmd_baseline(load(args));
        if (certify->parsed()) mtp::cmd_certify(load(args));
        if (evaluate->parsed()) mtp::cmd_evaluate(load(args));
    } catch (const mtp::MtpError& e) {
        std::fprintf(stderr, "error: %s: %s\n", e.code().c_str(), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: internal: %s\n", e.what());
        return 2;
    }
    return 0;
}
