#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bands.hpp"
#include "features.hpp"

namespace aqua {

// Sample Pearson correlation. Throws DataError on length mismatch,
// n < 2, or zero variance in either argument.
double pearson_r(const std::vector<double>& y, const std::vector<double>& yhat);

// 1 - SS_res/SS_tot about mean(y); may be negative.
double r_squared(const std::vector<double>& y, const std::vector<double>& yhat);

double rmse(const std::vector<double>& y, const std::vector<double>& yhat);
double mae(const std::vector<double>& y, const std::vector<double>& yhat);

// 0-200% form: 100 * mean of 2|yhat - y| / (|y| + |yhat|); zero-denominator
// terms contribute 0.
double smape(const std::vector<double>& y, const std::vector<double>& yhat);

struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

struct FoldPlan {
    std::vector<Fold> folds;
};

// Forward-chaining split: test blocks are the last `folds` of `folds+1`
// near-equal contiguous chunks; each fold trains on everything before its
// test block. Requires n >= folds + 1.
FoldPlan time_series_folds(std::size_t n, std::size_t folds);

struct SelectionResult {
    std::vector<std::string> names;           // selected, in rank order
    std::vector<std::size_t> column_indices;  // into the source matrix
    std::size_t k = 0;
    double cv_rmse = 0.0;
    std::vector<double> cv_rmse_by_k;         // aligned with k_min..
    std::size_t k_min = 0;
    std::vector<std::string> skipped_constant;
    std::vector<std::string> dropped_collinear;
};

// Scores a candidate column subset (indices into the matrix) and returns a
// mean cross-validated RMSE. Supplied by the caller so selection stays
// model-agnostic.
using SubsetScorer = std::function<double(const std::vector<std::size_t>&)>;

// Ranks columns by |Pearson r| against the target, skips constant columns,
// drops exactly collinear duplicates (|r| = 1 with an already-kept column),
// then sweeps k in [k_min, k_max] and keeps the k with the lowest scored
// RMSE (ties favor smaller k).
SelectionResult select_features(const FeatureMatrix& matrix, const std::vector<double>& target,
                                std::size_t k_min, std::size_t k_max, const SubsetScorer& scorer);

}  // namespace aqua
