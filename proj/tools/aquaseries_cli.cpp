// aquaseries command-line front end. Thin wrapper over the C API: every
// subcommand loads a JSON config, applies overrides and invokes the
// matching aq_run_* entry point. Exit codes: 0 success, 2 config error,
// 3 data error, 4 training divergence.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aquaseries.h"

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;  // key=value (value is a JSON literal)
    std::string parameter;
    std::string output_dir;
    std::string matchup_csv;
    long long seed = -1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON run configuration")->required();
    cmd->add_option("--set", opts.overrides,
                    "override a config entry, e.g. --set training.epochs=50");
    cmd->add_option("--param", opts.parameter, "target parameter: chla, ss or turbidity");
    cmd->add_option("--out", opts.output_dir, "output directory override");
    cmd->add_option("--matchup", opts.matchup_csv, "match-up CSV override");
    cmd->add_option("--seed", opts.seed, "RNG seed override");
}

int fail(aq_status status) {
    std::fprintf(stderr, "error: %s\n", aq_last_error());
    return static_cast<int>(status);
}

int apply_and_run(const CommonOpts& opts, aq_status (*run)(const aq_config*)) {
    aq_config* config = nullptr;
    aq_status st = aq_config_load(opts.config_path.c_str(), &config);
    if (st != AQ_OK) return fail(st);

    auto set = [&](const std::string& key, const std::string& value) -> aq_status {
        return aq_config_set(config, key.c_str(), value.c_str());
    };
    if (!opts.parameter.empty() &&
        (st = set("parameter", "\"" + opts.parameter + "\"")) != AQ_OK) {
        aq_config_free(config);
        return fail(st);
    }
    if (!opts.output_dir.empty() &&
        (st = set("paths.output_dir", "\"" + opts.output_dir + "\"")) != AQ_OK) {
        aq_config_free(config);
        return fail(st);
    }
    if (!opts.matchup_csv.empty() &&
        (st = set("paths.matchup_csv", "\"" + opts.matchup_csv + "\"")) != AQ_OK) {
        aq_config_free(config);
        return fail(st);
    }
    if (opts.seed >= 0 && (st = set("seed", std::to_string(opts.seed))) != AQ_OK) {
        aq_config_free(config);
        return fail(st);
    }
    for (const auto& kv : opts.overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
            aq_config_free(config);
            return static_cast<int>(AQ_ERR_CONFIG);
        }
        if ((st = set(kv.substr(0, eq), kv.substr(eq + 1))) != AQ_OK) {
            aq_config_free(config);
            return fail(st);
        }
    }

    st = run(config);
    aq_config_free(config);
    return st == AQ_OK ? 0 : fail(st);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"aquaseries: Sentinel-2 water-quality LSTM pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", aq_version());

    struct Sub {
        const char* name;
        const char* help;
        aq_status (*run)(const aq_config*);
    };
    const std::vector<Sub> subs = {
        {"ingest", "validate a match-up CSV and write its normalized form", aq_run_ingest},
        {"extract", "extract spectra from .sgrid scenes at in-situ points", aq_run_extract},
        {"screen", "Tukey's-fences screening of training targets", aq_run_screen},
        {"features", "evaluate the candidate predictor space to CSV", aq_run_features},
        {"select", "correlation-ranked feature selection with CV", aq_run_select},
        {"train", "train the LSTM and write a model snapshot", aq_run_train},
        {"evaluate", "score a trained snapshot on the validation split", aq_run_evaluate},
        {"report", "full run emitting monthly plot data", aq_run_report},
        {"run", "full pipeline: ingest through report", aq_run_pipeline},
    };

    std::vector<CommonOpts> opts(subs.size());
    std::vector<CLI::App*> cmds;
    for (std::size_t i = 0; i < subs.size(); ++i) {
        CLI::App* cmd = app.add_subcommand(subs[i].name, subs[i].help);
        add_common(cmd, opts[i]);
        cmds.push_back(cmd);
    }

    CLI11_PARSE(app, argc, argv);

    for (std::size_t i = 0; i < subs.size(); ++i) {
        if (cmds[i]->parsed()) {
            return apply_and_run(opts[i], subs[i].run);
        }
    }
    return 0;
}
