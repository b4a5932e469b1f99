#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tsk/gpr.hpp"
#include "tsk/skernel.hpp"
#include "tsk/tsdata.hpp"
#include "tsk/vkernels.hpp"

namespace tsk {

// Hyperparameter search space. Log grids must be strictly positive.
struct ParamGrid {
    std::vector<KernelKind> k_prime_kinds;
    std::vector<KernelKind> k_dprime_kinds;
    std::vector<double> gamma_prime;
    std::vector<double> gamma_dprime;
    std::vector<double> lambda;
    std::vector<double> c_or_noise;  // SVM box constraint or GP noise

    static ParamGrid defaults_classification();
    static ParamGrid defaults_regression();
    void validate() const;

    std::size_t kernel_cell_count() const;
    std::size_t size() const { return kernel_cell_count() * c_or_noise.size(); }
};

// One (k', k'') combination from the grid, in canonical enumeration order
// (k' kind, k'' kind, gamma', gamma'', lambda). The full grid point index is
// cell.index * |c_or_noise| + noise_index.
struct KernelCell {
    VectorKernel k_prime;
    VectorKernel k_dprime;
    std::size_t index;
};

std::vector<KernelCell> enumerate_kernel_cells(const ParamGrid& grid);

struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Seeded Fisher-Yates shuffle, then k near-equal contiguous folds.
std::vector<Fold> kfold_indices(std::size_t n, int k, std::uint64_t seed);
std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> kfold_series(
    std::span<const std::string> ids, int k, std::uint64_t seed);

struct ErrorEstimate {
    double eps_hat = 0.0;      // grand mean loss
    double v_hat = 0.0;        // estimated variance of eps_hat
    Eigen::MatrixXd sigma;     // K x K unbiased covariance of per-timestamp losses
    Eigen::Index n_series = 0;
    Eigen::Index n_timestamps = 0;
};

ErrorEstimate estimate_error(const Eigen::MatrixXd& losses);

// Delta-method RMSE report: rmse = sqrt(eps), se = sqrt(v) / (2 sqrt(eps)).
std::pair<double, double> rmse_report(double eps_hat, double v_hat);
std::pair<double, double> rmse_report(const ErrorEstimate& e);

// Leave-one-out standard error for a 0/1 accuracy sample.
std::pair<double, double> jackknife_accuracy_se(std::span<const int> correct);

struct TTestResult {
    double t = 0.0;
    int df = 0;
    std::string stars;  // "***" 99%, "**" 95%, "*" 90%, "" otherwise
};

// One-tailed two-sample test of predictor vs best baseline; df = n_series / 5.
TTestResult t_test_vs_best_baseline(std::pair<double, double> pred,
                                    std::pair<double, double> baseline, std::size_t n_series);

enum class ForecasterKind { series_gpr, timestamp_means, zeros, linear_interpolator, series_means };
enum class ClassifierKind { dtw_1nn, series_svm };

ForecasterKind forecaster_from_string(std::string_view name);
ClassifierKind classifier_from_string(std::string_view name);
std::string_view to_string(ForecasterKind kind);
std::string_view to_string(ClassifierKind kind);

struct StrategyOptions {
    GprOptions gpr;                           // standardize flag for series_gpr
    std::optional<Eigen::MatrixXd> weights;   // channel mixing for the series kernel
    int score_channel = -1;                   // loss channel; -1 pools over channels
};

struct CvResult {
    double eps_cv = 0.0;  // mean of single-fold eps_hat
    double v_cv = 0.0;    // mean of single-fold v_hat
    std::vector<double> fold_eps;
    std::vector<double> fold_v;
    std::map<std::string, int> grid_choice_histogram;
};

// Nested cross-validation for the forecasting task (outer folds estimate the
// error, inner folds tune). Tuning-free baselines skip the inner loop. Within
// a kernel cell the training Gram is eigendecomposed once and all noise grid
// values reuse it. A grid point whose kernel evaluation fails is assigned
// infinite inner loss; a failing outer refit aborts the run.
CvResult nested_cv_forecast(ForecasterKind kind, const Dataset& ds, Eigen::Index n_test_timestamps,
                            const ParamGrid& grid, int outer_k, int inner_k, std::uint64_t seed,
                            const StrategyOptions& options = {}, int threads = 1);

struct ClassifyOutcome {
    double accuracy = 0.0;
    double se = 0.0;  // jackknife
    std::vector<std::string> predictions;
    std::map<std::string, int> grid_choice_histogram;
};

// Fixed-split protocol: tune on the training set by inner k-fold CV, refit on
// the full training set, evaluate once on the provided test set.
ClassifyOutcome tune_and_classify(ClassifierKind kind, const Dataset& train, const Dataset& test,
                                  const ParamGrid& grid, int inner_k, std::uint64_t seed,
                                  const StrategyOptions& options = {}, int threads = 1);

// Nested CV over a labelled dataset with 0/1 loss; eps_cv is the error rate.
CvResult nested_cv_classify(ClassifierKind kind, const Dataset& ds, const ParamGrid& grid,
                            int outer_k, int inner_k, std::uint64_t seed,
                            const StrategyOptions& options = {}, int threads = 1);

}  // namespace tsk
