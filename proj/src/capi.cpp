#include "aquaseries.h"

#include <cstring>
#include <new>
#include <string>

#include "errors.hpp"
#include "pipeline.hpp"

struct aq_config {
    aqua::RunConfig cfg;
};

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) {
    g_last_error = msg;
}

template <typename Fn>
aq_status guard(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return AQ_OK;
    } catch (const aqua::ConfigError& e) {
        set_error(e.what());
        return AQ_ERR_CONFIG;
    } catch (const aqua::DivergenceError& e) {
        set_error(e.what());
        return AQ_ERR_DIVERGENCE;
    } catch (const aqua::DataError& e) {
        set_error(e.what());
        return AQ_ERR_DATA;
    } catch (const std::exception& e) {
        set_error(e.what());
        return AQ_ERR_INTERNAL;
    } catch (...) {
        set_error("unknown error");
        return AQ_ERR_INTERNAL;
    }
}

aq_status run_stage(const aq_config* config, void (*stage)(const aqua::RunConfig&)) {
    if (!config) {
        set_error("null config handle");
        return AQ_ERR_ARGUMENT;
    }
    return guard([&] { stage(config->cfg); });
}

}  // namespace

extern "C" {

const char* aq_version(void) {
    return "aquaseries 1.0.0";
}

const char* aq_last_error(void) {
    return g_last_error.c_str();
}

aq_status aq_config_load(const char* path, aq_config** out) {
    if (!path || !out) {
        set_error("null argument");
        return AQ_ERR_ARGUMENT;
    }
    return guard([&] { *out = new aq_config{aqua::RunConfig::load(path)}; });
}

aq_status aq_config_from_string(const char* json_text, aq_config** out) {
    if (!json_text || !out) {
        set_error("null argument");
        return AQ_ERR_ARGUMENT;
    }
    return guard(
        [&] { *out = new aq_config{aqua::RunConfig::from_json_text(json_text, "<string>")}; });
}

void aq_config_free(aq_config* config) {
    delete config;
}

aq_status aq_config_set(aq_config* config, const char* dotted_key, const char* json_value) {
    if (!config || !dotted_key || !json_value) {
        set_error("null argument");
        return AQ_ERR_ARGUMENT;
    }
    return guard([&] { config->cfg.set_override(dotted_key, json_value); });
}

aq_status aq_config_dump(const aq_config* config, char** out) {
    if (!config || !out) {
        set_error("null argument");
        return AQ_ERR_ARGUMENT;
    }
    return guard([&] {
        std::string text = config->cfg.canonical_json();
        *out = new char[text.size() + 1];
        std::memcpy(*out, text.c_str(), text.size() + 1);
    });
}

void aq_string_free(char* s) {
    delete[] s;
}

aq_status aq_run_ingest(const aq_config* config) {
    return run_stage(config, aqua::stage_ingest);
}

aq_status aq_run_extract(const aq_config* config) {
    return run_stage(config, aqua::stage_extract);
}

aq_status aq_run_screen(const aq_config* config) {
    return run_stage(config, aqua::stage_screen);
}

aq_status aq_run_features(const aq_config* config) {
    return run_stage(config, aqua::stage_features);
}

aq_status aq_run_select(const aq_config* config) {
    return run_stage(config, aqua::stage_select);
}

aq_status aq_run_train(const aq_config* config) {
    return run_stage(config, aqua::stage_train);
}

aq_status aq_run_evaluate(const aq_config* config) {
    return run_stage(config, aqua::stage_evaluate);
}

aq_status aq_run_report(const aq_config* config) {
    return run_stage(config, aqua::stage_report);
}

aq_status aq_run_pipeline(const aq_config* config) {
    if (!config) {
        set_error("null config handle");
        return AQ_ERR_ARGUMENT;
    }
    return guard([&] { aqua::run_pipeline(config->cfg); });
}

}  // extern "C"
