/* aquaseries — C API for the water-quality time-series pipeline.
 *
 * Opaque handles and integer status codes; every function is safe to call
 * from C. Error details for the calling thread are available through
 * aq_last_error() until the next API call on that thread.
 */
#ifndef AQUASERIES_H
#define AQUASERIES_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum aq_status {
    AQ_OK = 0,
    AQ_ERR_CONFIG = 2,     /* bad configuration or missing path */
    AQ_ERR_DATA = 3,       /* malformed or inconsistent input data */
    AQ_ERR_DIVERGENCE = 4, /* training produced a non-finite loss */
    AQ_ERR_INTERNAL = 5,
    AQ_ERR_ARGUMENT = 6    /* null handle or bad argument */
} aq_status;

/* Opaque run configuration. */
typedef struct aq_config aq_config;

const char* aq_version(void);

/* Message for the most recent failure on this thread; never NULL. */
const char* aq_last_error(void);

/* Loads a JSON config file. The AQUASERIES_SEED environment variable, when
 * set, overrides the configured seed. */
aq_status aq_config_load(const char* path, aq_config** out);

/* Parses a JSON config document from memory. */
aq_status aq_config_from_string(const char* json_text, aq_config** out);

void aq_config_free(aq_config* config);

/* Dotted-path override, value as a JSON literal, e.g.
 * aq_config_set(c, "training.epochs", "50")
 * aq_config_set(c, "parameter", "\"ss\"") */
aq_status aq_config_set(aq_config* config, const char* dotted_key, const char* json_value);

/* Canonical JSON form of the config; caller frees with aq_string_free. */
aq_status aq_config_dump(const aq_config* config, char** out);

void aq_string_free(char* s);

/* Pipeline stages. Each reads inputs named by the config and writes its
 * artifacts under paths.output_dir. */
aq_status aq_run_ingest(const aq_config* config);
aq_status aq_run_extract(const aq_config* config);
aq_status aq_run_screen(const aq_config* config);
aq_status aq_run_features(const aq_config* config);
aq_status aq_run_select(const aq_config* config);
aq_status aq_run_train(const aq_config* config);
aq_status aq_run_evaluate(const aq_config* config);
aq_status aq_run_report(const aq_config* config);

/* Full pipeline: ingest, screen, features, select, train, evaluate,
 * report. */
aq_status aq_run_pipeline(const aq_config* config);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* AQUASERIES_H */
