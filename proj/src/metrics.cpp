#include "metrics.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace aqua {

namespace {

void check_lengths(const std::vector<double>& y, const std::vector<double>& yhat,
                   std::size_t min_len, const char* op) {
    if (y.size() != yhat.size()) {
        throw DataError(std::string(op) + ": length mismatch");
    }
    if (y.size() < min_len) {
        throw DataError(std::string(op) + ": need at least " + std::to_string(min_len) +
                        " values");
    }
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

double pearson_r(const std::vector<double>& y, const std::vector<double>& yhat) {
    check_lengths(y, yhat, 2, "pearson_r");
    double my = mean(y);
    double myh = mean(yhat);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double a = y[i] - my;
        double b = yhat[i] - myh;
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw DataError("pearson_r: zero variance");
    }
    return sxy / std::sqrt(sxx * syy);
}

double r_squared(const std::vector<double>& y, const std::vector<double>& yhat) {
    check_lengths(y, yhat, 2, "r_squared");
    double my = mean(y);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
        ss_tot += (y[i] - my) * (y[i] - my);
    }
    if (ss_tot == 0.0) {
        throw DataError("r_squared: zero variance in y");
    }
    return 1.0 - ss_res / ss_tot;
}

double rmse(const std::vector<double>& y, const std::vector<double>& yhat) {
    check_lengths(y, yhat, 1, "rmse");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    }
    return std::sqrt(s / static_cast<double>(y.size()));
}

double mae(const std::vector<double>& y, const std::vector<double>& yhat) {
    check_lengths(y, yhat, 1, "mae");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        s += std::abs(y[i] - yhat[i]);
    }
    return s / static_cast<double>(y.size());
}

double smape(const std::vector<double>& y, const std::vector<double>& yhat) {
    check_lengths(y, yhat, 1, "smape");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double denom = std::abs(y[i]) + std::abs(yhat[i]);
        if (denom != 0.0) {
            s += 2.0 * std::abs(yhat[i] - y[i]) / denom;
        }
    }
    return 100.0 * s / static_cast<double>(y.size());
}

FoldPlan time_series_folds(std::size_t n, std::size_t folds) {
    if (folds == 0) {
        throw DataError("time_series_folds: fold count must be positive");
    }
    if (n < folds + 1) {
        throw DataError("time_series_folds: need at least " + std::to_string(folds + 1) +
                        " samples, got " + std::to_string(n));
    }
    // n split into folds+1 near-equal contiguous chunks; the remainder goes
    // to the first chunk, so test blocks all have size n/(folds+1).
    std::size_t test_size = n / (folds + 1);
    std::size_t first_train = n - folds * test_size;

    FoldPlan plan;
    std::size_t boundary = first_train;
    for (std::size_t f = 0; f < folds; ++f) {
        Fold fold;
        for (std::size_t i = 0; i < boundary; ++i) fold.train.push_back(i);
        for (std::size_t i = boundary; i < boundary + test_size; ++i) fold.test.push_back(i);
        boundary += test_size;
        plan.folds.push_back(std::move(fold));
    }
    return plan;
}

SelectionResult select_features(const FeatureMatrix& matrix, const std::vector<double>& target,
                                std::size_t k_min, std::size_t k_max, const SubsetScorer& scorer) {
    if (target.size() != matrix.rows) {
        throw DataError("select_features: target length does not match matrix rows");
    }
    if (k_min > k_max || k_min == 0) {
        throw DataError("select_features: invalid k bounds");
    }

    SelectionResult res;
    res.k_min = k_min;

    struct Ranked {
        std::size_t col;
        double abs_r;
    };
    std::vector<Ranked> ranked;
    std::vector<std::vector<double>> columns(matrix.cols);
    for (std::size_t c = 0; c < matrix.cols; ++c) {
        columns[c] = matrix.column(c);
        bool constant = true;
        for (double v : columns[c]) {
            if (v != columns[c][0]) {
                constant = false;
                break;
            }
        }
        if (constant) {
            res.skipped_constant.push_back(matrix.names[c]);
            continue;
        }
        ranked.push_back({c, std::abs(pearson_r(target, columns[c]))});
    }
    // Deterministic: ties keep enumeration order.
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const Ranked& a, const Ranked& b) { return a.abs_r > b.abs_r; });

    std::vector<std::size_t> kept;
    for (const auto& cand : ranked) {
        bool collinear = false;
        for (std::size_t kc : kept) {
            double r = pearson_r(columns[kc], columns[cand.col]);
            if (std::abs(r) >= 1.0 - 1e-12) {
                collinear = true;
                break;
            }
        }
        if (collinear) {
            res.dropped_collinear.push_back(matrix.names[cand.col]);
        } else {
            kept.push_back(cand.col);
        }
    }

    if (kept.empty()) {
        throw DataError("select_features: no usable candidate columns");
    }
    std::size_t lo = std::min(k_min, kept.size());
    std::size_t hi = std::min(k_max, kept.size());

    std::size_t best_k = lo;
    double best_rmse = 0.0;
    bool first = true;
    for (std::size_t k = lo; k <= hi; ++k) {
        std::vector<std::size_t> subset(kept.begin(), kept.begin() + static_cast<long>(k));
        double score = scorer(subset);
        res.cv_rmse_by_k.push_back(score);
        if (first || score < best_rmse) {  // ties keep the smaller k
            first = false;
            best_rmse = score;
            best_k = k;
        }
    }
    res.k_min = lo;
    res.k = best_k;
    res.cv_rmse = best_rmse;
    res.column_indices.assign(kept.begin(), kept.begin() + static_cast<long>(best_k));
    for (std::size_t c : res.column_indices) {
        res.names.push_back(matrix.names[c]);
    }
    return res;
}

}  // namespace aqua
