#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bands.hpp"
#include "lstm.hpp"
#include "matchup.hpp"
#include "metrics.hpp"

namespace aqua {

struct ScreeningPolicy {
    double fence_k = 1.5;
    std::string variable = "target";  // what Tukey's fences screens
};

struct SelectionPolicy {
    std::size_t k_min = 4;
    std::size_t k_max = 12;
    std::size_t cv_folds = 5;
    std::size_t cv_epochs = 30;  // reduced epochs for the k sweep
};

struct ExtractPolicy {
    double buffer_radius_m = 20.0;
    double min_land_distance_m = 200.0;
};

struct RunConfig {
    std::filesystem::path matchup_csv;
    std::filesystem::path scene_dir;
    std::filesystem::path insitu_csv;
    std::filesystem::path output_dir;
    ParameterId parameter = ParameterId::ChlA;
    int boundary_year = 2020;
    IngestPolicy ingest;
    ScreeningPolicy screening;
    SelectionPolicy selection;
    ExtractPolicy extract;
    TrainConfig training;

    // Parses the JSON document; AQUASERIES_SEED (when set) overrides the
    // configured seed. Unknown keys are config errors.
    static RunConfig from_json_text(const std::string& text, const std::string& origin);
    static RunConfig load(const std::filesystem::path& path);

    // Dotted-path override, value given as a JSON literal (e.g.
    // "training.epochs" = "50", "parameter" = "\"ss\"").
    void set_override(const std::string& dotted_key, const std::string& json_value);

    std::string canonical_json() const;
    std::string digest() const;  // over the canonical form
};

struct EvalReport {
    ParameterId parameter = ParameterId::ChlA;
    std::string split;
    std::size_t n = 0;
    double r = 0.0;
    double r2 = 0.0;
    double rmse = 0.0;
    double mae = 0.0;
    double smape = 0.0;  // percent
    std::string config_digest;
    std::vector<std::string> selected_features;
};

// CSV row matching the report table column order.
inline constexpr const char* kReportCsvHeader = "parameter,method,n,r,rmse,mae,smape";
std::string report_csv_row(const EvalReport& rep, const std::string& method = "LSTM");

struct MonthlyAggregate {
    int year = 0;
    int month = 0;
    std::optional<double> station_mean;
    std::optional<double> estimate_mean;
    std::size_t station_n = 0;   // contributing samples
    std::size_t estimate_n = 0;  // contributing images
};

struct DatedValue {
    Date date;
    double value = 0.0;
};

// Groups the two series by calendar month independently; estimates are
// averaged per image (per distinct date) first, then across images in the
// month. One row per month in the union, sorted.
std::vector<MonthlyAggregate> aggregate_monthly(const std::vector<DatedValue>& measurements,
                                                const std::vector<DatedValue>& estimates);

// Columns: year,month,station_mean,estimate_mean,station_n,estimate_n,split.
std::string plot_data_csv(const std::vector<MonthlyAggregate>& aggregates, int boundary_year,
                          int boundary_month = 1);

struct PipelineResult {
    EvalReport train_report;
    EvalReport validation_report;
    SelectionResult selection;
    std::vector<double> loss_history;
    std::string report_json;  // the serialized EvalReport document
};

// Full run: ingest, split, screen, features, select, sequences, train,
// evaluate, aggregate. Writes all artifacts under config.output_dir; on
// failure drops a RUN.failed marker naming the stage.
PipelineResult run_pipeline(const RunConfig& config);

// Individual CLI stages. Each validates its inputs, recomputes the
// deterministic prefix it needs and writes that stage's artifacts.
void stage_ingest(const RunConfig& config);
void stage_extract(const RunConfig& config);
void stage_screen(const RunConfig& config);
void stage_features(const RunConfig& config);
void stage_select(const RunConfig& config);
void stage_train(const RunConfig& config);
void stage_evaluate(const RunConfig& config);  // loads the train-stage snapshot
void stage_report(const RunConfig& config);

}  // namespace aqua
