#include "pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "errors.hpp"
#include "screening.hpp"
#include "util.hpp"

namespace aqua {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ConfigError(where + ": unknown key '" + it.key() + "'");
        }
    }
}

ordered_json config_to_json(const RunConfig& c) {
    ordered_json j;
    j["paths"] = {
        {"matchup_csv", c.matchup_csv.string()},
        {"scene_dir", c.scene_dir.string()},
        {"insitu_csv", c.insitu_csv.string()},
        {"output_dir", c.output_dir.string()},
    };
    j["parameter"] = parameter_name(c.parameter);
    j["boundary_year"] = c.boundary_year;
    j["ingest"] = {
        {"reject_below", c.ingest.reject_below},
        {"clamp_negatives", c.ingest.clamp_negatives},
    };
    j["screening"] = {
        {"fence_k", c.screening.fence_k},
        {"variable", c.screening.variable},
    };
    j["selection"] = {
        {"k_min", c.selection.k_min},
        {"k_max", c.selection.k_max},
        {"cv_folds", c.selection.cv_folds},
        {"cv_epochs", c.selection.cv_epochs},
    };
    j["extract"] = {
        {"buffer_radius_m", c.extract.buffer_radius_m},
        {"min_land_distance_m", c.extract.min_land_distance_m},
    };
    j["training"] = {
        {"learning_rate", c.training.learning_rate},
        {"decay_rate", c.training.decay_rate},
        {"beta1", c.training.beta1},
        {"beta2", c.training.beta2},
        {"epsilon", c.training.epsilon},
        {"epochs", c.training.epochs},
        {"batch_size", c.training.batch_size},
        {"window", c.training.window},
        {"dropout_rate", c.training.dropout_rate},
        {"hidden_dim", c.training.hidden_dim},
        {"pad_windows", c.training.pad_windows},
        {"seed", c.training.seed},
    };
    return j;
}

RunConfig config_from_json(const json& j, const std::string& origin) {
    RunConfig c;
    check_keys(j, {"paths", "parameter", "boundary_year", "seed", "ingest", "screening",
                   "selection", "extract", "training"},
               origin);

    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        check_keys(p, {"matchup_csv", "scene_dir", "insitu_csv", "output_dir"},
                   origin + ".paths");
        if (p.contains("matchup_csv")) c.matchup_csv = p.at("matchup_csv").get<std::string>();
        if (p.contains("scene_dir")) c.scene_dir = p.at("scene_dir").get<std::string>();
        if (p.contains("insitu_csv")) c.insitu_csv = p.at("insitu_csv").get<std::string>();
        if (p.contains("output_dir")) c.output_dir = p.at("output_dir").get<std::string>();
    }
    if (j.contains("parameter")) {
        auto name = j.at("parameter").get<std::string>();
        auto p = parameter_from_name(name);
        if (!p) {
            throw ConfigError(origin + ": unknown parameter '" + name +
                              "' (expected chla, ss or turbidity)");
        }
        c.parameter = *p;
    }
    if (j.contains("boundary_year")) c.boundary_year = j.at("boundary_year").get<int>();
    if (j.contains("seed")) c.training.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("ingest")) {
        const auto& s = j.at("ingest");
        check_keys(s, {"reject_below", "clamp_negatives"}, origin + ".ingest");
        if (s.contains("reject_below")) c.ingest.reject_below = s.at("reject_below").get<double>();
        if (s.contains("clamp_negatives")) {
            c.ingest.clamp_negatives = s.at("clamp_negatives").get<bool>();
        }
    }
    if (j.contains("screening")) {
        const auto& s = j.at("screening");
        check_keys(s, {"fence_k", "variable"}, origin + ".screening");
        if (s.contains("fence_k")) c.screening.fence_k = s.at("fence_k").get<double>();
        if (s.contains("variable")) c.screening.variable = s.at("variable").get<std::string>();
        if (c.screening.variable != "target") {
            throw ConfigError(origin + ": screening.variable '" + c.screening.variable +
                              "' unsupported (only 'target')");
        }
    }
    if (j.contains("selection")) {
        const auto& s = j.at("selection");
        check_keys(s, {"k_min", "k_max", "cv_folds", "cv_epochs"}, origin + ".selection");
        if (s.contains("k_min")) c.selection.k_min = s.at("k_min").get<std::size_t>();
        if (s.contains("k_max")) c.selection.k_max = s.at("k_max").get<std::size_t>();
        if (s.contains("cv_folds")) c.selection.cv_folds = s.at("cv_folds").get<std::size_t>();
        if (s.contains("cv_epochs")) c.selection.cv_epochs = s.at("cv_epochs").get<std::size_t>();
    }
    if (j.contains("extract")) {
        const auto& s = j.at("extract");
        check_keys(s, {"buffer_radius_m", "min_land_distance_m"}, origin + ".extract");
        if (s.contains("buffer_radius_m")) {
            c.extract.buffer_radius_m = s.at("buffer_radius_m").get<double>();
        }
        if (s.contains("min_land_distance_m")) {
            c.extract.min_land_distance_m = s.at("min_land_distance_m").get<double>();
        }
    }
    if (j.contains("training")) {
        const auto& t = j.at("training");
        check_keys(t,
                   {"learning_rate", "decay_rate", "beta1", "beta2", "epsilon", "epochs",
                    "batch_size", "window", "dropout_rate", "hidden_dim", "pad_windows", "seed"},
                   origin + ".training");
        auto& tc = c.training;
        if (t.contains("learning_rate")) tc.learning_rate = t.at("learning_rate").get<double>();
        if (t.contains("decay_rate")) tc.decay_rate = t.at("decay_rate").get<double>();
        if (t.contains("beta1")) tc.beta1 = t.at("beta1").get<double>();
        if (t.contains("beta2")) tc.beta2 = t.at("beta2").get<double>();
        if (t.contains("epsilon")) tc.epsilon = t.at("epsilon").get<double>();
        if (t.contains("epochs")) tc.epochs = t.at("epochs").get<std::size_t>();
        if (t.contains("batch_size")) tc.batch_size = t.at("batch_size").get<std::size_t>();
        if (t.contains("window")) tc.window = t.at("window").get<std::size_t>();
        if (t.contains("dropout_rate")) tc.dropout_rate = t.at("dropout_rate").get<double>();
        if (t.contains("hidden_dim")) tc.hidden_dim = t.at("hidden_dim").get<std::size_t>();
        if (t.contains("pad_windows")) tc.pad_windows = t.at("pad_windows").get<bool>();
        if (t.contains("seed")) tc.seed = t.at("seed").get<std::uint64_t>();
    }
    c.training.validate();
    return c;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": invalid JSON: " + e.what());
    }
    RunConfig c = config_from_json(j, origin);
    if (const char* env = std::getenv("AQUASERIES_SEED")) {
        std::uint64_t seed = 0;
        auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), seed);
        if (ec != std::errc{} || *ptr != '\0') {
            throw ConfigError("AQUASERIES_SEED is not an integer: '" + std::string(env) + "'");
        }
        c.training.seed = seed;
    }
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    return from_json_text(text, path.string());
}

void RunConfig::set_override(const std::string& dotted_key, const std::string& json_value) {
    json value;
    try {
        value = json::parse(json_value);
    } catch (const json::exception&) {
        value = json_value;  // bare strings are convenient on a CLI
    }
    json j = json::parse(canonical_json());
    json* node = &j;
    std::string key = dotted_key;
    for (auto pos = key.find('.'); pos != std::string::npos; pos = key.find('.')) {
        node = &(*node)[key.substr(0, pos)];
        key = key.substr(pos + 1);
    }
    (*node)[key] = value;
    *this = config_from_json(j, "override " + dotted_key);
}

std::string RunConfig::canonical_json() const {
    return config_to_json(*this).dump(2) + "\n";
}

std::string RunConfig::digest() const {
    return hex64(fnv1a64(canonical_json()));
}

std::string report_csv_row(const EvalReport& rep, const std::string& method) {
    std::string row = parameter_name(rep.parameter);
    row += ',' + method;
    row += ',' + std::to_string(rep.n);
    row += ',' + format_double(rep.r);
    row += ',' + format_double(rep.rmse);
    row += ',' + format_double(rep.mae);
    row += ',' + format_double(rep.smape);
    return row;
}

std::vector<MonthlyAggregate> aggregate_monthly(const std::vector<DatedValue>& measurements,
                                                const std::vector<DatedValue>& estimates) {
    using MonthKey = std::pair<int, int>;
    std::map<MonthKey, std::pair<double, std::size_t>> station_acc;  // sum, count
    for (const auto& m : measurements) {
        auto& acc = station_acc[{m.date.year, m.date.month}];
        acc.first += m.value;
        acc.second += 1;
    }

    // Estimates: mean per image (distinct date) first, then across images.
    std::map<Date, std::pair<double, std::size_t>> per_image;
    for (const auto& e : estimates) {
        auto& acc = per_image[e.date];
        acc.first += e.value;
        acc.second += 1;
    }
    std::map<MonthKey, std::pair<double, std::size_t>> estimate_acc;  // sum of image means
    for (const auto& [date, acc] : per_image) {
        auto& month = estimate_acc[{date.year, date.month}];
        month.first += acc.first / static_cast<double>(acc.second);
        month.second += 1;
    }

    std::set<MonthKey> months;
    for (const auto& [k, v] : station_acc) months.insert(k);
    for (const auto& [k, v] : estimate_acc) months.insert(k);

    std::vector<MonthlyAggregate> out;
    for (const auto& [year, month] : months) {
        MonthlyAggregate agg;
        agg.year = year;
        agg.month = month;
        if (auto it = station_acc.find({year, month}); it != station_acc.end()) {
            agg.station_mean = it->second.first / static_cast<double>(it->second.second);
            agg.station_n = it->second.second;
        }
        if (auto it = estimate_acc.find({year, month}); it != estimate_acc.end()) {
            agg.estimate_mean = it->second.first / static_cast<double>(it->second.second);
            agg.estimate_n = it->second.second;
        }
        out.push_back(agg);
    }
    return out;
}

std::string plot_data_csv(const std::vector<MonthlyAggregate>& aggregates, int boundary_year,
                          int boundary_month) {
    std::string out = "year,month,station_mean,estimate_mean,station_n,estimate_n,split\n";
    for (const auto& agg : aggregates) {
        out += std::to_string(agg.year);
        out += ',' + std::to_string(agg.month);
        out += ',';
        if (agg.station_mean) out += format_double(*agg.station_mean);
        out += ',';
        if (agg.estimate_mean) out += format_double(*agg.estimate_mean);
        out += ',' + std::to_string(agg.station_n);
        out += ',' + std::to_string(agg.estimate_n);
        bool validation = agg.year > boundary_year ||
                          (agg.year == boundary_year && agg.month >= boundary_month);
        out += validation ? ",validation\n" : ",train\n";
    }
    return out;
}

namespace {

// Everything the deterministic pipeline prefix produces, shared by the
// stage commands and the full run.
struct Prepared {
    MatchupTable table;
    MatchupTable train;       // screened
    MatchupTable validation;
    FenceResult fence;
    std::size_t train_before_screen = 0;
    std::vector<FeatureExpr> candidates;
    FeatureMatrix train_features;  // raw values
    FeatureMatrix val_features;
    std::vector<double> train_targets;
    std::vector<double> val_targets;
    FeatureEvalLog eval_log;
};

// Drops records without the run's target parameter.
MatchupTable filter_with_target(const MatchupTable& table, ParameterId p) {
    MatchupTable out;
    for (const auto& rec : table.records) {
        if (rec.target(p)) out.records.push_back(rec);
    }
    finalize_table(out);
    return out;
}

std::vector<double> target_column(const MatchupTable& table, ParameterId p) {
    std::vector<double> out;
    out.reserve(table.records.size());
    for (const auto& rec : table.records) {
        out.push_back(*rec.target(p));
    }
    return out;
}

void require_file(const std::filesystem::path& p, const std::string& what) {
    if (p.empty()) {
        throw ConfigError("missing required path: " + what);
    }
    if (!std::filesystem::exists(p)) {
        throw ConfigError(what + " does not exist: " + p.string());
    }
}

Prepared prepare(const RunConfig& config) {
    require_file(config.matchup_csv, "paths.matchup_csv");

    Prepared prep;
    prep.table = ingest_matchup_table(config.matchup_csv, config.ingest);

    auto [train_all, validation_all] = split_by_year(prep.table, config.boundary_year);
    MatchupTable train = filter_with_target(train_all, config.parameter);
    prep.validation = filter_with_target(validation_all, config.parameter);
    if (train.records.empty() || prep.validation.records.empty()) {
        throw DataError("no records carry target '" + parameter_name(config.parameter) +
                        "' on one side of the split");
    }
    prep.train_before_screen = train.records.size();

    // Tukey screening on the target variable, training period only.
    prep.fence = tukey_fences(target_column(train, config.parameter), config.screening.fence_k);
    MatchupTable screened;
    for (std::size_t idx : prep.fence.kept) {
        screened.records.push_back(train.records[idx]);
    }
    finalize_table(screened);
    prep.train = std::move(screened);

    prep.candidates = enumerate_candidates();
    prep.train_features = evaluate_features(prep.train, prep.candidates, &prep.eval_log);
    prep.val_features = evaluate_features(prep.validation, prep.candidates);
    prep.train_targets = target_column(prep.train, config.parameter);
    prep.val_targets = target_column(prep.validation, config.parameter);
    return prep;
}

FeatureMatrix subset_columns(const FeatureMatrix& m, const std::vector<std::size_t>& cols) {
    FeatureMatrix out;
    out.rows = m.rows;
    out.cols = cols.size();
    out.stations = m.stations;
    out.dates = m.dates;
    out.values.resize(out.rows * out.cols);
    for (std::size_t c = 0; c < cols.size(); ++c) {
        out.names.push_back(m.names[cols[c]]);
        for (std::size_t r = 0; r < m.rows; ++r) {
            out.values[r * out.cols + c] = m.at(r, cols[c]);
        }
    }
    return out;
}

// Mean forward-chained CV RMSE (raw target units) for a candidate subset.
double cv_subset_rmse(const Prepared& prep, const RunConfig& config,
                      const std::vector<std::size_t>& cols) {
    FeatureMatrix sub = subset_columns(prep.train_features, cols);
    TrainConfig tc = config.training;
    tc.epochs = config.selection.cv_epochs;
    fit_normalization(sub, prep.train_targets, tc);
    FeatureMatrix normed = apply_feature_normalization(sub, tc);
    std::vector<double> norm_targets = normalize_targets(prep.train_targets, tc);
    SequenceSet seqs = build_sequences(normed, norm_targets, tc.window, tc.pad_windows);

    FoldPlan plan = time_series_folds(seqs.sequences.size(), config.selection.cv_folds);
    double total = 0.0;
    std::size_t fold_index = 0;
    for (const auto& fold : plan.folds) {
        SequenceSet fold_train, fold_test;
        fold_train.window_len = fold_test.window_len = seqs.window_len;
        for (std::size_t i : fold.train) fold_train.sequences.push_back(seqs.sequences[i]);
        for (std::size_t i : fold.test) fold_test.sequences.push_back(seqs.sequences[i]);

        TrainConfig fold_cfg = tc;
        fold_cfg.seed = tc.seed + fold_index;  // independent per-fold streams
        LstmModel model = make_lstm(cols.size(), fold_cfg.hidden_dim, fold_cfg.dropout_rate,
                                    fold_cfg.seed);
        train(model, fold_train, fold_cfg);

        std::vector<double> preds = denormalize_targets(predict(model, fold_test), tc);
        std::vector<double> truth;
        for (const auto& s : fold_test.sequences) {
            truth.push_back(s.target * tc.target_std + tc.target_mean);
        }
        total += rmse(truth, preds);
        ++fold_index;
    }
    return total / static_cast<double>(plan.folds.size());
}

struct TrainedRun {
    SelectionResult selection;
    LstmModel model;
    TrainConfig train_cfg;
    TrainResult history;
    SequenceSet train_seqs;  // normalized
    SequenceSet val_seqs;
};

TrainedRun select_and_train(const Prepared& prep, const RunConfig& config) {
    TrainedRun run;
    run.selection = select_features(
        prep.train_features, prep.train_targets, config.selection.k_min, config.selection.k_max,
        [&](const std::vector<std::size_t>& cols) { return cv_subset_rmse(prep, config, cols); });

    FeatureMatrix train_sub = subset_columns(prep.train_features, run.selection.column_indices);
    FeatureMatrix val_sub = subset_columns(prep.val_features, run.selection.column_indices);

    run.train_cfg = config.training;
    fit_normalization(train_sub, prep.train_targets, run.train_cfg);
    FeatureMatrix train_norm = apply_feature_normalization(train_sub, run.train_cfg);
    FeatureMatrix val_norm = apply_feature_normalization(val_sub, run.train_cfg);
    std::vector<double> train_t = normalize_targets(prep.train_targets, run.train_cfg);
    std::vector<double> val_t = normalize_targets(prep.val_targets, run.train_cfg);

    run.train_seqs = build_sequences(train_norm, train_t, run.train_cfg.window,
                                     run.train_cfg.pad_windows);
    run.val_seqs = build_sequences(val_norm, val_t, run.train_cfg.window,
                                   run.train_cfg.pad_windows);
    if (run.val_seqs.sequences.empty()) {
        throw DataError("validation split yields no sequences at window " +
                        std::to_string(run.train_cfg.window) +
                        " (consider training.pad_windows)");
    }

    run.model = make_lstm(run.selection.k, run.train_cfg.hidden_dim, run.train_cfg.dropout_rate,
                          run.train_cfg.seed);
    run.history = train(run.model, run.train_seqs, run.train_cfg);
    return run;
}

EvalReport make_report(const RunConfig& config, const std::string& split,
                       const std::vector<double>& y, const std::vector<double>& yhat,
                       const SelectionResult& selection) {
    EvalReport rep;
    rep.parameter = config.parameter;
    rep.split = split;
    rep.n = y.size();
    rep.r = pearson_r(y, yhat);
    rep.r2 = r_squared(y, yhat);
    rep.rmse = rmse(y, yhat);
    rep.mae = mae(y, yhat);
    rep.smape = smape(y, yhat);
    rep.config_digest = config.digest();
    rep.selected_features = selection.names;
    return rep;
}

ordered_json report_to_json(const EvalReport& rep) {
    ordered_json j;
    j["parameter"] = parameter_name(rep.parameter);
    j["units"] = parameter_units(rep.parameter);
    j["split"] = rep.split;
    j["n"] = rep.n;
    j["r"] = rep.r;
    j["r2"] = rep.r2;
    j["rmse"] = rep.rmse;
    j["mae"] = rep.mae;
    j["smape_percent"] = rep.smape;
    j["config_digest"] = rep.config_digest;
    j["selected_features"] = rep.selected_features;
    return j;
}

// Every default standing in for a value the source method leaves
// unspecified; audited by a checklist test.
ordered_json manifest_json(const RunConfig& config, const Prepared& prep,
                           const TrainedRun& run) {
    ordered_json m;
    m["format"] = "aquaseries-run-manifest-v1";
    m["config_digest"] = config.digest();
    m["config"] = ordered_json::parse(config.canonical_json());
    ordered_json d;
    d["central_wavelengths_nm"] = ordered_json::object();
    for (BandId b : kAllBands) {
        d["central_wavelengths_nm"][band_name(b)] = central_wavelength_nm(b);
    }
    d["wavelength_source"] = "nominal";
    d["consecutive_bands_over_retained_ordering"] = true;
    d["b8_excluded_from_enumeration"] = true;
    d["norm_ratio_ordered_pairs"] = true;
    d["undefined_value_policy"] = "substitute_zero_and_count";
    d["negative_reflectance_policy"] = {
        {"reject_below", config.ingest.reject_below},
        {"clamp_negatives_to_zero", config.ingest.clamp_negatives},
    };
    d["timestamp_tie_break"] = "station_id_lexicographic";
    d["date_resolution"] = "day";
    d["fence_k"] = config.screening.fence_k;
    d["fence_quantile_method"] = "linear_interpolation";
    d["screening_variable"] = config.screening.variable;
    d["screening_split"] = "train_only";
    d["mndwi_water_threshold"] = "strictly_greater_than_zero";
    d["scene_coordinates"] = "local_planar_meters";
    d["temporal_match_policy"] = "nearest_date_tie_earlier_at_most_once";
    d["momentum_read_as_adam_beta1"] = true;
    d["beta2"] = config.training.beta2;
    d["epsilon"] = config.training.epsilon;
    d["epochs"] = config.training.epochs;
    d["batch_size"] = config.training.batch_size;
    d["dropout_rate"] = config.training.dropout_rate;
    d["sequence_window"] = config.training.window;
    d["pad_windows"] = config.training.pad_windows;
    d["dropout_placement"] = "final_hidden_state_only";
    d["loss"] = "mean_squared_error";
    d["normalization"] = "zscore_training_split_stats";
    d["cv_normalization"] = "training_split_stats";
    d["lr_decay"] = "per_epoch_exponential";
    d["smape_variant"] = "0_200_factor2_zero_denominator_contributes_zero";
    d["selection_tie_break"] = "smaller_k";
    d["selection_ranking_split"] = "train_only";
    d["monthly_aggregation"] = "per_image_mean_then_month_mean_union_of_months";
    m["defaults"] = d;
    m["screening"] = {
        {"train_rows_before", prep.train_before_screen},
        {"train_rows_after", prep.train.records.size()},
        {"rejected", prep.fence.rejected.size()},
        {"lower_fence", prep.fence.lower_fence},
        {"upper_fence", prep.fence.upper_fence},
    };
    m["feature_evaluation"] = {
        {"candidates", prep.candidates.size()},
        {"undefined_substitutions", prep.eval_log.undefined_substitutions},
    };
    m["selection"] = {
        {"k", run.selection.k},
        {"cv_rmse", run.selection.cv_rmse},
        {"cv_rmse_by_k", run.selection.cv_rmse_by_k},
        {"skipped_constant", run.selection.skipped_constant},
        {"dropped_collinear", run.selection.dropped_collinear.size()},
        {"selected", run.selection.names},
    };
    return m;
}

std::string loss_history_csv(const TrainResult& history) {
    std::string out = "epoch,mse\n";
    for (std::size_t e = 0; e < history.epoch_loss.size(); ++e) {
        out += std::to_string(e) + ',' + format_double(history.epoch_loss[e]) + '\n';
    }
    return out;
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& config) {
    if (config.output_dir.empty()) {
        throw ConfigError("missing required path: paths.output_dir");
    }
    std::filesystem::create_directories(config.output_dir);
    const std::string pname = parameter_name(config.parameter);
    std::string stage = "ingest";
    try {
        Prepared prep = prepare(config);

        stage = "select+train";
        TrainedRun run = select_and_train(prep, config);

        stage = "evaluate";
        std::vector<double> train_pred =
            denormalize_targets(predict(run.model, run.train_seqs), run.train_cfg);
        std::vector<double> val_pred =
            denormalize_targets(predict(run.model, run.val_seqs), run.train_cfg);
        std::vector<double> train_truth, val_truth;
        for (const auto& s : run.train_seqs.sequences) {
            train_truth.push_back(s.target * run.train_cfg.target_std +
                                  run.train_cfg.target_mean);
        }
        for (const auto& s : run.val_seqs.sequences) {
            val_truth.push_back(s.target * run.train_cfg.target_std + run.train_cfg.target_mean);
        }

        PipelineResult result;
        result.selection = run.selection;
        result.loss_history = run.history.epoch_loss;
        result.train_report = make_report(config, "train", train_truth, train_pred,
                                          run.selection);
        result.validation_report = make_report(config, "validation", val_truth, val_pred,
                                               run.selection);

        stage = "write-artifacts";
        auto out = config.output_dir;
        atomic_write_file(out / "matchup.normalized.csv", serialize_matchup_table(prep.table));
        ordered_json ingest_info = {
            {"digest", prep.table.provenance.digest},
            {"row_count", prep.table.provenance.row_count},
        };
        atomic_write_file(out / "ingest.json", ingest_info.dump(2) + "\n");

        ordered_json report_doc;
        report_doc["train"] = report_to_json(result.train_report);
        report_doc["validation"] = report_to_json(result.validation_report);
        result.report_json = report_doc.dump(2) + "\n";
        atomic_write_file(out / ("report_" + pname + ".json"), result.report_json);
        atomic_write_file(out / ("report_" + pname + ".csv"),
                          std::string(kReportCsvHeader) + "\n" +
                              report_csv_row(result.validation_report) + "\n");

        ordered_json selected = {
            {"parameter", pname},
            {"k", run.selection.k},
            {"cv_rmse", run.selection.cv_rmse},
            {"names", run.selection.names},
        };
        atomic_write_file(out / ("selected_features_" + pname + ".json"),
                          selected.dump(2) + "\n");
        atomic_write_file(out / ("loss_history_" + pname + ".csv"),
                          loss_history_csv(run.history));
        save_model(run.model, run.train_cfg, run.selection.names,
                   out / ("model_" + pname + ".lstm"));
        atomic_write_file(out / "run_manifest.json",
                          manifest_json(config, prep, run).dump(2) + "\n");

        stage = "report";
        std::vector<DatedValue> measurements;
        for (const auto& rec : prep.table.records) {
            if (auto t = rec.target(config.parameter)) {
                measurements.push_back({rec.timestamp, *t});
            }
        }
        std::vector<DatedValue> estimates;
        for (std::size_t i = 0; i < run.train_seqs.sequences.size(); ++i) {
            estimates.push_back({run.train_seqs.sequences[i].date, train_pred[i]});
        }
        for (std::size_t i = 0; i < run.val_seqs.sequences.size(); ++i) {
            estimates.push_back({run.val_seqs.sequences[i].date, val_pred[i]});
        }
        auto aggregates = aggregate_monthly(measurements, estimates);
        atomic_write_file(out / ("plot_" + pname + ".csv"),
                          plot_data_csv(aggregates, config.boundary_year));
        return result;
    } catch (const std::exception& e) {
        try {
            atomic_write_file(config.output_dir / "RUN.failed",
                              "stage: " + stage + "\nerror: " + e.what() + "\n");
        } catch (...) {
        }
        throw;
    }
}

void stage_ingest(const RunConfig& config) {
    require_file(config.matchup_csv, "paths.matchup_csv");
    if (config.output_dir.empty()) throw ConfigError("missing required path: paths.output_dir");
    MatchupTable table = ingest_matchup_table(config.matchup_csv, config.ingest);
    atomic_write_file(config.output_dir / "matchup.normalized.csv",
                      serialize_matchup_table(table));
    ordered_json info = {
        {"digest", table.provenance.digest},
        {"row_count", table.provenance.row_count},
    };
    atomic_write_file(config.output_dir / "ingest.json", info.dump(2) + "\n");
}

void stage_extract(const RunConfig& config) {
    require_file(config.insitu_csv, "paths.insitu_csv");
    require_file(config.scene_dir, "paths.scene_dir");
    if (config.output_dir.empty()) throw ConfigError("missing required path: paths.output_dir");

    // In-situ CSV: station_id,date,x,y,chla,ss,turbidity (x/y meters in
    // the scenes' local frame).
    struct Sample {
        std::string station;
        Date date;
        double x, y;
        std::array<std::optional<double>, kParameterCount> targets;
    };
    std::vector<Sample> samples;
    {
        std::istringstream in(read_file(config.insitu_csv));
        std::string line;
        if (!std::getline(in, line)) throw DataError("empty in-situ CSV");
        if (line != "station_id,date,x,y,chla,ss,turbidity" &&
            line != "station_id,date,x,y,chla,ss,turbidity\r") {
            throw DataError("in-situ CSV header must be station_id,date,x,y,chla,ss,turbidity");
        }
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            std::vector<std::string> cells;
            std::string cell;
            for (char ch : line) {
                if (ch == ',') {
                    cells.push_back(cell);
                    cell.clear();
                } else if (ch != '\r') {
                    cell += ch;
                }
            }
            cells.push_back(cell);
            if (cells.size() != 7) {
                throw DataError("in-situ CSV line " + std::to_string(line_no) +
                                ": expected 7 cells");
            }
            Sample s;
            s.station = cells[0];
            s.date = Date::parse(cells[1]);
            s.x = std::stod(cells[2]);
            s.y = std::stod(cells[3]);
            for (std::size_t p = 0; p < kParameterCount; ++p) {
                if (!cells[4 + p].empty()) s.targets[p] = std::stod(cells[4 + p]);
            }
            samples.push_back(std::move(s));
        }
    }

    std::vector<SceneGrid> scenes;
    std::vector<std::filesystem::path> scene_paths;
    for (const auto& entry : std::filesystem::directory_iterator(config.scene_dir)) {
        if (entry.path().extension() == ".sgrid") scene_paths.push_back(entry.path());
    }
    std::sort(scene_paths.begin(), scene_paths.end());
    for (const auto& p : scene_paths) scenes.push_back(load_scene(p));
    if (scenes.empty()) {
        throw DataError("no .sgrid scenes in " + config.scene_dir.string());
    }

    std::vector<DatedSample> sample_dates, scene_dates;
    for (std::size_t i = 0; i < samples.size(); ++i) sample_dates.push_back({i, samples[i].date});
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        scene_dates.push_back({i, scenes[i].scene_date});
    }
    std::vector<std::size_t> unmatched;
    auto pairs = temporal_match(sample_dates, scene_dates, &unmatched);

    MatchupTable table;
    std::size_t rejected_adjacency = 0, rejected_no_water = 0;
    for (const auto& pair : pairs) {
        const Sample& s = samples[pair.sample_id];
        auto result = extract_point(scenes[pair.scene_id], s.x, s.y,
                                    config.extract.buffer_radius_m,
                                    config.extract.min_land_distance_m);
        if (auto* rej = std::get_if<PointRejection>(&result)) {
            (rej->reason == RejectReason::Adjacency ? rejected_adjacency : rejected_no_water) +=
                1;
            continue;
        }
        MatchupRecord rec;
        rec.station_id = s.station;
        rec.timestamp = s.date;
        rec.lon = s.x;
        rec.lat = s.y;
        rec.spectrum = std::get<Spectrum>(result);
        rec.targets = s.targets;
        table.records.push_back(std::move(rec));
    }
    std::stable_sort(table.records.begin(), table.records.end(),
                     [](const MatchupRecord& a, const MatchupRecord& b) {
                         if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                         return a.station_id < b.station_id;
                     });
    finalize_table(table);

    atomic_write_file(config.output_dir / "matchup.extracted.csv",
                      serialize_matchup_table(table));
    ordered_json log = {
        {"samples", samples.size()},
        {"scenes", scenes.size()},
        {"matched", pairs.size()},
        {"unmatched", unmatched.size()},
        {"rejected_adjacency", rejected_adjacency},
        {"rejected_no_water_pixels", rejected_no_water},
        {"rows", table.records.size()},
    };
    atomic_write_file(config.output_dir / "extract.json", log.dump(2) + "\n");
}

void stage_screen(const RunConfig& config) {
    if (config.output_dir.empty()) throw ConfigError("missing required path: paths.output_dir");
    Prepared prep = prepare(config);
    ordered_json j = {
        {"parameter", parameter_name(config.parameter)},
        {"variable", config.screening.variable},
        {"k", config.screening.fence_k},
        {"q1", prep.fence.q1},
        {"q3", prep.fence.q3},
        {"lower_fence", prep.fence.lower_fence},
        {"upper_fence", prep.fence.upper_fence},
        {"kept", prep.fence.kept},
        {"rejected", prep.fence.rejected},
    };
    atomic_write_file(config.output_dir /
                          ("screen_" + parameter_name(config.parameter) + ".json"),
                      j.dump(2) + "\n");
}

void stage_features(const RunConfig& config) {
    require_file(config.matchup_csv, "paths.matchup_csv");
    if (config.output_dir.empty()) throw ConfigError("missing required path: paths.output_dir");
    MatchupTable table = ingest_matchup_table(config.matchup_csv, config.ingest);
    FeatureEvalLog log;
    FeatureMatrix m = evaluate_features(table, enumerate_candidates(), &log);
    atomic_write_file(config.output_dir / "features.csv", feature_matrix_csv(m));
    ordered_json info = {
        {"rows", m.rows},
        {"columns", m.cols},
        {"undefined_substitutions", log.undefined_substitutions},
    };
    atomic_write_file(config.output_dir / "features.json", info.dump(2) + "\n");
}

void stage_select(const RunConfig& config) {
    if (config.output_dir.empty()) throw ConfigError("missing required path: paths.output_dir");
    Prepared prep = prepare(config);
    SelectionResult sel = select_features(
        prep.train_features, prep.train_targets, config.selection.k_min, config.selection.k_max,
        [&](const std::vector<std::size_t>& cols) { return cv_subset_rmse(prep, config, cols); });
    ordered_json j = {
        {"parameter", parameter_name(config.parameter)},
        {"k", sel.k},
        {"cv_rmse", sel.cv_rmse},
        {"cv_rmse_by_k", sel.cv_rmse_by_k},
        {"names", sel.names},
        {"skipped_constant", sel.skipped_constant},
        {"dropped_collinear", sel.dropped_collinear.size()},
    };
    atomic_write_file(config.output_dir / ("selected_features_" +
                                           parameter_name(config.parameter) + ".json"),
                      j.dump(2) + "\n");
}

void stage_train(const RunConfig& config) {
    if (config.output_dir.empty()) throw ConfigError("missing required path: paths.output_dir");
    Prepared prep = prepare(config);
    TrainedRun run = select_and_train(prep, config);
    const std::string pname = parameter_name(config.parameter);
    save_model(run.model, run.train_cfg, run.selection.names,
               config.output_dir / ("model_" + pname + ".lstm"));
    atomic_write_file(config.output_dir / ("loss_history_" + pname + ".csv"),
                      loss_history_csv(run.history));
    atomic_write_file(config.output_dir / "run_manifest.json",
                      manifest_json(config, prep, run).dump(2) + "\n");
}

void stage_evaluate(const RunConfig& config) {
    if (config.output_dir.empty()) throw ConfigError("missing required path: paths.output_dir");
    const std::string pname = parameter_name(config.parameter);
    auto snapshot_path = config.output_dir / ("model_" + pname + ".lstm");
    require_file(snapshot_path, "model snapshot (run the train stage first)");
    ModelSnapshot snap = load_model(snapshot_path);

    Prepared prep = prepare(config);
    std::vector<FeatureExpr> exprs = parse_feature_list(snap.feature_names);
    FeatureMatrix val_sub = evaluate_features(prep.validation, exprs);
    FeatureMatrix val_norm = apply_feature_normalization(val_sub, snap.config);
    std::vector<double> val_t = normalize_targets(prep.val_targets, snap.config);
    SequenceSet val_seqs = build_sequences(val_norm, val_t, snap.config.window,
                                           snap.config.pad_windows);
    if (val_seqs.sequences.empty()) {
        throw DataError("validation split yields no sequences");
    }
    std::vector<double> preds = denormalize_targets(predict(snap.model, val_seqs), snap.config);
    std::vector<double> truth;
    for (const auto& s : val_seqs.sequences) {
        truth.push_back(s.target * snap.config.target_std + snap.config.target_mean);
    }

    SelectionResult sel;
    sel.names = snap.feature_names;
    EvalReport rep = make_report(config, "validation", truth, preds, sel);
    ordered_json doc;
    doc["validation"] = report_to_json(rep);
    atomic_write_file(config.output_dir / ("report_" + pname + ".json"), doc.dump(2) + "\n");
    atomic_write_file(config.output_dir / ("report_" + pname + ".csv"),
                      std::string(kReportCsvHeader) + "\n" + report_csv_row(rep) + "\n");
}

void stage_report(const RunConfig& config) {
    // Full deterministic run; the plot CSV is its last artifact.
    run_pipeline(config);
}

}  // namespace aqua
