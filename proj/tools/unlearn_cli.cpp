// Command-line front end: finetune, unlearn, eval, sweep, report.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "unlearn/commands.h"
#include "unlearn/errors.h"

namespace fs = std::filesystem;
using namespace unlearn;

namespace {

int fail(const std::string& message, int code) {
    std::cerr << "error: " << message << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Context-aware machine unlearning toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool offline = false;
    bool quiet = false;

    auto common = [&](CLI::App* cmd, bool with_config) {
        if (with_config) cmd->add_option("--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
        cmd->add_option("--seed", seed, "Override training.seed");
        cmd->add_flag("--offline-judge", offline, "Use the offline judge, no network calls");
        cmd->add_flag("-q,--quiet", quiet, "No per-epoch progress lines");
    };

    auto* ft = app.add_subcommand("finetune", "Fine-tune a model on the full dataset");
    common(ft, true);
    ft->add_option("--out", out_dir, "Override output_dir");

    auto* ul = app.add_subcommand("unlearn", "Run one unlearning job");
    common(ul, true);
    ul->add_option("--out", out_dir, "Override output_dir");

    auto* ev = app.add_subcommand("eval", "Evaluate checkpoints of an existing run");
    std::string run_dir;
    std::string epoch_arg = "all";
    ev->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    ev->add_option("--epoch", epoch_arg, "Epoch number, 0 for the starting model, or 'all'");
    ev->add_flag("--offline-judge", offline, "Use the offline judge, no network calls");

    auto* sw = app.add_subcommand("sweep", "Sweep lambda_c and select the context-aware variant");
    common(sw, true);
    sw->add_option("--out", out_dir, "Override output_dir");
    std::vector<double> lambdas;
    sw->add_option("--lambdas", lambdas, "Comma-separated lambda_c values; include 0 for the vanilla baseline")
        ->required()
        ->delimiter(',');

    auto* rp = app.add_subcommand("report", "Tables and curve data from run or sweep directories");
    std::vector<std::string> runs;
    rp->add_option("--runs", runs, "Run or sweep directories")->required();
    rp->add_option("--out", out_dir, "Report directory")->required();

    CLI11_PARSE(app, argc, argv);

    CommandOverrides overrides;
    if (ft->count("--seed") || ul->count("--seed") || sw->count("--seed")) overrides.seed = seed;
    if (!out_dir.empty()) overrides.out = out_dir;
    overrides.offline_judge = offline;
    overrides.quiet = quiet;

    try {
        if (*ft || *ul || *sw) {
            const RunConfig config = load_run_config(config_path);
            if (*ft) {
                std::cout << cmd_finetune(config, overrides).string() << "\n";
            } else if (*ul) {
                std::cout << cmd_unlearn(config, overrides).string() << "\n";
            } else {
                auto result = cmd_sweep(config, lambdas, overrides);
                for (const auto& c : result.candidates) std::cout << c.to_json().dump() << "\n";
                if (result.selected) {
                    std::cout << "selected lambda_c=" << result.selected->lambda_c << " (" << result.selected->run_id
                              << ")\n";
                } else if (!result.failure.empty()) {
                    std::cout << "selection failed: " << result.failure << "\n";
                }
                std::cout << result.dir.string() << "\n";
            }
        } else if (*ev) {
            std::optional<std::size_t> epoch;
            if (epoch_arg != "all") {
                try {
                    epoch = std::stoul(epoch_arg);
                } catch (const std::exception&) {
                    return fail("--epoch must be a number or 'all'", 2);
                }
            }
            for (const auto& r : cmd_eval(run_dir, epoch, overrides)) std::cout << r.to_json().dump() << "\n";
        } else if (*rp) {
            std::vector<fs::path> dirs(runs.begin(), runs.end());
            std::cout << cmd_report(dirs, out_dir).string() << "\n";
        }
    } catch (const ValidationError& e) {
        return fail(e.what(), 2);
    } catch (const ConfigError& e) {
        return fail(e.what(), 2);
    } catch (const NotFoundError& e) {
        return fail(e.what(), 3);
    } catch (const std::exception& e) {
        return fail(e.what(), 1);
    }
    return 0;
}
