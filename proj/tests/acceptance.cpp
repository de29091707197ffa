// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Criterion 8's real-dataset branch runs only when the
// AQUASERIES_MATCHUP environment variable names a match-up CSV.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "features.hpp"
#include "helpers.hpp"
#include "lstm.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"
#include "screening.hpp"
#include "util.hpp"

using namespace aqua;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    if (!pass) ++g_failures;
}

// ---------------------------------------------------------------------------
// 1. Feature formulas vs an independent long-double evaluator.

long double reference_eval(const FeatureExpr& e, const Spectrum& s) {
    auto r = [&](BandId b) { return static_cast<long double>(s[b]); };
    auto lambda = [](BandId b) { return static_cast<long double>(central_wavelength_nm(b)); };
    switch (e.kind) {
        case FeatureExpr::Kind::Band:
            return r(e.a);
        case FeatureExpr::Kind::Power: {
            long double v = r(e.a);
            return e.exponent == 2 ? v * v : v * v * v;
        }
        case FeatureExpr::Kind::NormRatio:
            return (r(e.a) - r(e.b)) / (r(e.a) + r(e.b));
        case FeatureExpr::Kind::ThreeBand:
            return (1.0L / r(e.a) - 1.0L / r(e.b)) * r(e.c);
        case FeatureExpr::Kind::LineHeight:
            return r(e.b) - r(e.a) -
                   (r(e.c) - r(e.a)) * (lambda(e.b) - lambda(e.a)) /
                       (lambda(e.c) - lambda(e.a));
    }
    return 0.0L;
}

void criterion_1() {
    auto candidates = enumerate_candidates();
    testutil::XorShift rng(20240601);
    std::size_t checked = 0, bad = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        Spectrum s = testutil::random_spectrum(rng);  // strictly positive bands
        for (const auto& e : candidates) {
            bool undefined = false;
            double got = e.eval(s, &undefined);
            if (undefined) continue;
            long double ref = reference_eval(e, s);
            long double denom = std::max<long double>(fabsl(ref), 1.0L);
            ++checked;
            if (fabsl(got - ref) / denom > 1e-12L) ++bad;
        }
    }

    bool examples = true;
    examples &= std::abs(*norm_ratio(0.02, 0.01) - 1.0 / 3.0) < 1e-12;
    examples &= *norm_ratio(0.02, 0.02) == 0.0;
    examples &= std::abs(*three_band(0.02, 0.04, 0.01) - 0.25) < 1e-12;
    examples &= std::abs(line_height(0.01, 0.02, 0.03, 443, 490, 537)) < 1e-12;
    examples &= std::abs(line_height(0.01, 0.03, 0.01, 560, 665, 705) - 0.02) < 1e-12;

    report(1, bad == 0 && examples && checked > 100000,
           "feature formulas vs independent evaluator (" + std::to_string(checked) +
               " values, " + std::to_string(bad) + " out of tolerance)");
}

// ---------------------------------------------------------------------------
// 2. Candidate-space count and the published variable names.

void criterion_2() {
    auto all = enumerate_candidates();
    std::size_t bands = 0, sq = 0, cu = 0, nr = 0, tb = 0, lh = 0;
    for (const auto& e : all) {
        switch (e.kind) {
            case FeatureExpr::Kind::Band: ++bands; break;
            case FeatureExpr::Kind::Power: (e.exponent == 2 ? sq : cu) += 1; break;
            case FeatureExpr::Kind::NormRatio: ++nr; break;
            case FeatureExpr::Kind::ThreeBand: ++tb; break;
            case FeatureExpr::Kind::LineHeight: ++lh; break;
        }
    }
    std::set<std::string> names;
    for (const auto& e : all) names.insert(e.name());

    const std::vector<std::string> published = {
        // Chl-a
        "B2", "(B2)^2", "(B4)^3", "(B8A)^2", "(B8A)^3", "(B11)^2", "NR(B2,B3)",
        "TB(B2,B3,B4)", "LH(B1,B2,B3)", "LH(B3,B4,B5)", "LH(B7,B8A,B11)",
        // SS
        "B3", "(B3)^3", "B4", "(B4)^2", "(B4)^3", "B5", "(B5)^3", "LH(B4,B5,B6)",
        "LH(B5,B6,B7)",
        // Turbidity
        "(B3)^2", "(B3)^3", "(B5)^2", "LH(B2,B3,B4)",
    };
    bool parse_ok = true;
    for (const auto& n : published) {
        try {
            if (!names.count(parse_feature(n).name())) parse_ok = false;
        } catch (const std::exception&) {
            parse_ok = false;
        }
    }

    bool pass = all.size() == 136 && names.size() == 136 && bands == 10 && sq == 10 &&
                cu == 10 && nr == 90 && tb == 8 && lh == 8 && parse_ok;
    report(2, pass,
           "136 candidates, breakdown 10/10/10/90/8/8, published names parse");
}

// ---------------------------------------------------------------------------
// 3. BPTT gradients vs central finite differences.

void criterion_3() {
    std::size_t total = 0, agree = 0;
    const double step = 1e-5, rel_tol = 1e-4;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        LstmModel model = make_lstm(3, 4, 0.0, 9000 + trial);
        testutil::XorShift data_rng(500 + trial);
        Eigen::MatrixXd window(3, 3);
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) window(r, c) = data_rng.uniform(-1, 1);
        }
        double y = data_rng.uniform(-1, 1);

        Rng rng(0);
        LstmCache cache;
        double pred = lstm_forward(model, window, false, rng, &cache);
        LstmGradients grads;
        grads.setZero(model);
        lstm_backward(model, cache, 2.0 * (pred - y), grads);

        std::vector<double> analytic;
        grads.for_each_param([&](Eigen::Map<Eigen::VectorXd> g) {
            for (Eigen::Index i = 0; i < g.size(); ++i) analytic.push_back(g(i));
        });
        std::vector<double*> params;
        model.for_each_param([&](Eigen::Map<Eigen::VectorXd> p) {
            for (Eigen::Index i = 0; i < p.size(); ++i) params.push_back(&p(i));
        });
        auto loss = [&]() {
            Rng r(0);
            double pr = lstm_forward(model, window, false, r);
            return (pr - y) * (pr - y);
        };
        for (std::size_t i = 0; i < params.size(); ++i) {
            double saved = *params[i];
            *params[i] = saved + step;
            double lp = loss();
            *params[i] = saved - step;
            double lm = loss();
            *params[i] = saved;
            double fd = (lp - lm) / (2.0 * step);
            double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-8});
            ++total;
            if (std::abs(fd - analytic[i]) / denom <= rel_tol) ++agree;
        }
    }
    double frac = static_cast<double>(agree) / static_cast<double>(total);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", frac);
    report(3, frac >= 0.99,
           "gradient check agreement " + std::string(buf) + " over " +
               std::to_string(total) + " coordinates (20 models)");
}

// ---------------------------------------------------------------------------
// 4. Optimizer sanity on a noiseless linear target.

SequenceSet linear_set(std::size_t count, std::uint64_t seed) {
    const std::vector<double> weights = {1.0, -0.6, 0.4, 0.8};
    testutil::XorShift rng(seed);
    SequenceSet set;
    set.window_len = 3;
    for (std::size_t i = 0; i < count; ++i) {
        Sequence s;
        s.window = Eigen::MatrixXd(3, 4);
        for (Eigen::Index r = 0; r < 3; ++r) {
            for (Eigen::Index c = 0; c < 4; ++c) s.window(r, c) = rng.uniform(-1, 1);
        }
        s.target = 0.0;
        for (Eigen::Index c = 0; c < 4; ++c) s.target += weights[c] * s.window(2, c);
        s.station = "A";
        s.date = Date{2019, 1, 1};
        set.sequences.push_back(std::move(s));
    }
    return set;
}

void criterion_4() {
    SequenceSet all = linear_set(250, 321);
    SequenceSet train_set, val_set;
    train_set.window_len = val_set.window_len = 3;
    for (std::size_t i = 0; i < all.sequences.size(); ++i) {
        (i < 200 ? train_set : val_set).sequences.push_back(all.sequences[i]);
    }

    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.hidden_dim = 16;
    cfg.dropout_rate = 0.0;
    cfg.learning_rate = 0.01;
    cfg.decay_rate = 0.99;
    cfg.seed = 7;

    LstmModel model = make_lstm(4, cfg.hidden_dim, cfg.dropout_rate, cfg.seed);
    auto history = train(model, train_set, cfg);
    auto preds = predict(model, val_set);
    std::vector<double> truth;
    for (const auto& s : val_set.sequences) truth.push_back(s.target);
    double err = rmse(truth, preds);

    double mean = 0.0;
    for (double t : truth) mean += t;
    mean /= static_cast<double>(truth.size());
    double var = 0.0;
    for (double t : truth) var += (t - mean) * (t - mean);
    double target_sd = std::sqrt(var / static_cast<double>(truth.size()));

    // Determinism: identical loss history on a rerun with the same seed.
    LstmModel model2 = make_lstm(4, cfg.hidden_dim, cfg.dropout_rate, cfg.seed);
    auto history2 = train(model2, train_set, cfg);
    bool deterministic = history.epoch_loss == history2.epoch_loss;

    char buf[96];
    std::snprintf(buf, sizeof(buf), "validation RMSE %.4f vs 5%% of sd = %.4f", err,
                  0.05 * target_sd);
    report(4, err <= 0.05 * target_sd && deterministic,
           std::string(buf) + (deterministic ? ", deterministic" : ", NON-deterministic"));
}

// ---------------------------------------------------------------------------
// 5. Metric oracles and properties.

void criterion_5() {
    bool ok = true;
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
    ok &= close(pearson_r({1, 2, 3}, {1, 2, 3}), 1.0);
    ok &= close(pearson_r({1, 2, 3}, {1, 2, 2}), std::sqrt(3.0) / 2.0);
    ok &= close(r_squared({1, 2, 3}, {1, 2, 2}), 0.5);
    ok &= close(r_squared({1, 2, 3}, {2, 2, 2}), 0.0);
    ok &= close(rmse({0, 0}, {3, 4}), std::sqrt(12.5));
    ok &= close(mae({0, 0}, {3, 4}), 3.5);
    ok &= close(smape({100}, {50}), 100.0 * 100.0 / 150.0);
    ok &= smape({0}, {0}) == 0.0;

    testutil::XorShift rng(4242);
    for (int trial = 0; trial < 10000 && ok; ++trial) {
        std::size_t n = 1 + rng.next() % 25;
        std::vector<double> y, yhat;
        for (std::size_t i = 0; i < n; ++i) {
            y.push_back(rng.uniform(-50, 50));
            yhat.push_back(rng.uniform(-50, 50));
        }
        if (rmse(y, yhat) < mae(y, yhat) - 1e-12) ok = false;
        if (std::abs(smape(y, yhat) - smape(yhat, y)) > 1e-9) ok = false;
    }
    report(5, ok, "metric oracles exact, rmse>=mae and SMAPE symmetry over 10000 vectors");
}

// ---------------------------------------------------------------------------
// 6. TimeSeriesSplit invariants.

void criterion_6() {
    bool ok = true;
    for (std::size_t n = 6; n <= 200 && ok; ++n) {
        auto plan = time_series_folds(n, 5);
        std::size_t expected_start = plan.folds.front().test.front();
        for (const auto& f : plan.folds) {
            if (f.train.empty() || f.test.empty()) ok = false;
            if (!ok) break;
            if (f.train.back() >= f.test.front()) ok = false;
            for (std::size_t i = 1; i < f.test.size(); ++i) {
                if (f.test[i] != f.test[i - 1] + 1) ok = false;
            }
            if (f.test.front() != expected_start) ok = false;
            expected_start = f.test.back() + 1;
        }
        if (expected_start != n) ok = false;
    }
    report(6, ok, "fold ordering and suffix partition hold for n in [6, 200]");
}

// ---------------------------------------------------------------------------
// 7. Tukey fences vs an independent reference on a fixed fuzz corpus.

void criterion_7() {
    testutil::XorShift rng(987654321);
    std::size_t bad = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        std::size_t n = 4 + rng.next() % 9;  // lengths 4..12
        std::vector<double> v;
        for (std::size_t i = 0; i < n; ++i) {
            v.push_back(static_cast<double>(static_cast<int>(rng.next() % 41) - 20));
        }
        auto res = tukey_fences(v, 1.5);

        std::vector<double> sorted = v;
        std::sort(sorted.begin(), sorted.end());
        auto q = [&](long double p) {
            long double h = p * static_cast<long double>(sorted.size() - 1);
            std::size_t lo = static_cast<std::size_t>(h);
            long double frac = h - static_cast<long double>(lo);
            std::size_t hi = std::min(lo + 1, sorted.size() - 1);
            return (1.0L - frac) * sorted[lo] + frac * sorted[hi];
        };
        long double q1 = q(0.25L), q3 = q(0.75L);
        long double lower = q1 - 1.5L * (q3 - q1);
        long double upper = q3 + 1.5L * (q3 - q1);
        for (std::size_t i = 0; i < v.size(); ++i) {
            bool ref_keep = v[i] >= lower - 1e-9L && v[i] <= upper + 1e-9L;
            bool got_keep = std::find(res.kept.begin(), res.kept.end(), i) != res.kept.end();
            if (ref_keep != got_keep) ++bad;
        }
    }
    report(7, bad == 0,
           "fence membership matches the reference on 10000 fuzz cases (" +
               std::to_string(bad) + " mismatches)");
}

// ---------------------------------------------------------------------------
// 8. Pipeline on the real dataset when provided, else synthetic recovery.

RunConfig synthetic_recovery_config(const fs::path& dir) {
    std::string csv = testutil::synthetic_matchup_csv(
        4, 2015, 2020, 20240815, [](const Spectrum& s, testutil::XorShift&) {
            double nr = (s[BandId::B2] - s[BandId::B3]) / (s[BandId::B2] + s[BandId::B3]);
            return 18.0 * nr + 20.0;
        });
    atomic_write_file(dir / "matchup.csv", csv);

    RunConfig c = RunConfig::from_json_text("{}", "acceptance");
    c.matchup_csv = dir / "matchup.csv";
    c.output_dir = dir / "out";
    c.boundary_year = 2020;
    c.selection.k_min = 1;
    c.selection.k_max = 3;
    c.selection.cv_epochs = 4;
    c.training.epochs = 80;
    c.training.hidden_dim = 12;
    c.training.window = 2;
    c.training.dropout_rate = 0.0;
    c.training.learning_rate = 0.01;
    c.training.decay_rate = 0.99;
    c.training.seed = 31;
    return c;
}

void criterion_8() {
    if (const char* real = std::getenv("AQUASERIES_MATCHUP")) {
        fs::path dir = fs::temp_directory_path() / "aqua_acceptance_real";
        fs::remove_all(dir);
        fs::create_directories(dir);
        RunConfig c = RunConfig::from_json_text("{}", "acceptance");
        c.matchup_csv = real;
        c.output_dir = dir / "out";
        try {
            PipelineResult result = run_pipeline(c);
            char buf[96];
            std::snprintf(buf, sizeof(buf), "real dataset: validation r %.3f, SMAPE %.1f%%",
                          result.validation_report.r, result.validation_report.smape);
            report(8, result.validation_report.r >= 0.75 &&
                          result.validation_report.smape <= 60.0,
                   buf);
        } catch (const std::exception& e) {
            report(8, false, std::string("real dataset run failed: ") + e.what());
        }
        fs::remove_all(dir);
        return;
    }

    fs::path dir = fs::temp_directory_path() / "aqua_acceptance_synth";
    fs::remove_all(dir);
    fs::create_directories(dir);
    RunConfig c = synthetic_recovery_config(dir);
    try {
        PipelineResult result = run_pipeline(c);
        bool selected = !result.selection.names.empty() &&
                        result.selection.names.front() == "NR(B2,B3)";
        double r = result.validation_report.r;
        char buf[128];
        std::snprintf(buf, sizeof(buf),
                      "synthetic recovery (no real dataset): NR(B2,B3) %s, validation r %.3f",
                      selected ? "selected" : "NOT selected", r);
        report(8, selected && r >= 0.95, buf);
    } catch (const std::exception& e) {
        report(8, false, std::string("synthetic recovery run failed: ") + e.what());
    }
    fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// 9. Determinism of the full pipeline.

void criterion_9() {
    fs::path dir = fs::temp_directory_path() / "aqua_acceptance_det";
    fs::remove_all(dir);
    fs::create_directories(dir);
    try {
        // Identical config and seed: run, capture the artifacts, wipe the
        // output directory and run again.
        RunConfig c = synthetic_recovery_config(dir);
        c.training.epochs = 20;
        PipelineResult first = run_pipeline(c);
        std::string model_first = read_file(c.output_dir / "model_chla.lstm");
        fs::remove_all(c.output_dir);
        PipelineResult second = run_pipeline(c);
        bool reports_equal = first.report_json == second.report_json;
        bool models_equal = model_first == read_file(c.output_dir / "model_chla.lstm");
        report(9, reports_equal && models_equal,
               std::string("repeat run: report JSON ") +
                   (reports_equal ? "identical" : "DIFFERS") + ", model snapshot " +
                   (models_equal ? "identical" : "DIFFERS"));
    } catch (const std::exception& e) {
        report(9, false, std::string("determinism run failed: ") + e.what());
    }
    fs::remove_all(dir);
}

}  // namespace

int main() {
    const auto start = std::chrono::steady_clock::now();
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    auto elapsed = std::chrono::duration_cast<std::chrono::seconds>(
                       std::chrono::steady_clock::now() - start)
                       .count();
    std::printf("%d/9 criteria passed in %llds\n", 9 - g_failures,
                static_cast<long long>(elapsed));
    return g_failures == 0 ? 0 : 1;
}
