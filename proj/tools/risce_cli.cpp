// Command-line front end: run Monte Carlo sweeps from a config document or
// a named preset bundle and write CSV/SVG results.
//
// Exit codes: 0 success, 1 configuration or I/O error, 2 experiment abort
// (more than half the trials of some cell failed).

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "risce/risce.hpp"

namespace {

std::vector<risce::Method> parse_method_list(const std::string& list) {
    std::vector<risce::Method> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(risce::method_from_name(item));
    if (out.empty()) throw risce::config_error("empty method list");
    return out;
}

struct RunFlags {
    std::string config_path;
    std::string preset_name;
    std::string out_dir;
    std::string methods;
    std::string alignment;
    int trials = 0; // 0 keeps the config's value
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 1;
    bool per_trial = false;
    bool timings = false;
};

int do_run(const RunFlags& flags) {
    std::vector<risce::PresetEntry> entries;
    if (!flags.config_path.empty()) {
        risce::PresetEntry entry;
        entry.config = risce::parse_config(risce::read_text_file(flags.config_path));
        entry.label = entry.config.output_path;
        entries.push_back(std::move(entry));
    } else {
        entries = risce::preset(flags.preset_name);
        for (risce::PresetEntry& e : entries) e.config.output_path = "results_" + e.label;
    }

    for (risce::PresetEntry& entry : entries) {
        risce::ExperimentConfig& cfg = entry.config;
        if (flags.trials > 0) cfg.trials = flags.trials;
        if (flags.seed_set) cfg.master_seed = flags.seed;
        if (!flags.methods.empty()) cfg.methods = parse_method_list(flags.methods);
        if (!flags.alignment.empty()) cfg.alignment = risce::align_mode_from_name(flags.alignment);
        cfg.collect_timings = flags.timings;

        std::filesystem::path base = cfg.output_path;
        if (!flags.out_dir.empty()) base = std::filesystem::path(flags.out_dir) / base;
        if (base.has_parent_path()) std::filesystem::create_directories(base.parent_path());

        std::vector<risce::TrialRecord> records;
        const risce::ResultTable table =
            risce::run_experiment(cfg, flags.workers, flags.per_trial ? &records : nullptr);

        const std::string csv_path = base.string() + ".csv";
        const std::string svg_path = base.string() + ".svg";
        risce::emit_outputs(table, risce::OutputFormat::csv, csv_path);
        risce::emit_outputs(table, risce::OutputFormat::svg, svg_path, entry.label);
        std::printf("%s: wrote %s and %s\n", entry.label.c_str(), csv_path.c_str(),
                    svg_path.c_str());
        if (flags.per_trial) {
            const std::string trials_path = base.string() + "_trials.csv";
            risce::write_text_file(trials_path, risce::trials_csv(records));
            std::printf("%s: wrote %s\n", entry.label.c_str(), trials_path.c_str());
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"RIS-assisted downlink: joint channel estimation and signal recovery"};
    app.require_subcommand(1);

    RunFlags flags;
    CLI::App* run = app.add_subcommand("run", "run a Monte Carlo sweep and write CSV/SVG results");
    CLI::Option* config_opt = run->add_option("--config", flags.config_path, "config document path");
    CLI::Option* preset_opt = run->add_option("--preset", flags.preset_name, "preset bundle name");
    config_opt->excludes(preset_opt);
    preset_opt->excludes(config_opt);
    run->add_option("--trials", flags.trials, "override the trial count");
    CLI::Option* seed_opt = run->add_option("--seed", flags.seed, "override the master seed");
    run->add_option("--out", flags.out_dir, "output directory (created if missing)");
    run->add_option("--methods", flags.methods, "comma-separated method subset");
    run->add_option("--workers", flags.workers, "worker thread count");
    run->add_option("--alignment", flags.alignment,
                    "factor-ambiguity convention: diagonal_ls or first_row_normalization");
    run->add_flag("--per-trial", flags.per_trial, "also write raw per-trial records");
    run->add_flag("--timings", flags.timings, "collect wall-clock timings into the results");

    CLI::App* presets_cmd = app.add_subcommand("presets", "list the preset bundles");
    CLI::App* version_cmd = app.add_subcommand("version", "print the version");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (version_cmd->parsed()) {
            std::printf("risce %s\n", risce::version_string);
            return 0;
        }
        if (presets_cmd->parsed()) {
            for (const std::string& name : risce::preset_names()) {
                std::printf("%s\n", name.c_str());
                for (const risce::PresetEntry& e : risce::preset(name)) {
                    const risce::SceneConfig& s = e.config.scene;
                    std::printf("  %-12s users=%td ris=%td bs=%td slots=%td phases=%td "
                                "sparsity=%.2f trials=%d\n",
                                e.label.c_str(), s.users, s.ris_elements, s.bs_antennas, s.slots,
                                s.phase_configs, s.sparsity, e.config.trials);
                }
            }
            return 0;
        }
        if (flags.config_path.empty() && flags.preset_name.empty())
            throw risce::config_error("run needs --config or --preset");
        flags.seed_set = seed_opt->count() > 0;
        return do_run(flags);
    } catch (const risce::experiment_abort& e) {
        std::fprintf(stderr, "experiment aborted: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
