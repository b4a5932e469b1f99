#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "tsk/skernel.hpp"
#include "tsk/tsdata.hpp"

namespace tsk {

struct GprOptions {
    // When set, per-channel mean/std scalers are fitted on the training data
    // (inputs on the train window, targets on the test window) and predictions
    // are mapped back. Off by default.
    bool standardize = false;
};

// Multi-series Gaussian-process forecaster. Each data point is a whole series
// segment; the series kernel acts as the series-level covariance and one GP
// per test timestamp shares it.
class GprModel {
public:
    static GprModel fit(const SeriesKernelConfig& cfg, double noise, const Dataset& train,
                        const SeriesSplit& split, const GprOptions& options = {});

    // Posterior mean at the held-out timestamps: M x (K * d), channel-major
    // column blocks. Test series must carry train-window observations only.
    Eigen::MatrixXd predict(const Dataset& test) const;

    // Series-level posterior variance diagnostic, one value per test series
    // (in the scaled space when standardization is on).
    Eigen::VectorXd predict_variance(const Dataset& test) const;

    const GramBundle& bundle() const { return *bundle_; }
    const Eigen::MatrixXd& targets() const { return targets_; }
    double noise() const { return noise_; }
    Eigen::Index n_outputs() const { return targets_.cols(); }

private:
    GprModel(SeriesKernelConfig cfg, double noise);

    SeriesKernelConfig cfg_;
    double noise_;
    std::optional<GramBundle> bundle_;
    Eigen::MatrixXd targets_;  // N x (K * d), possibly standardized
    std::vector<PreparedSeries> train_prepared_;
    Eigen::Index channels_ = 1;
    Eigen::Index horizon_ = 0;  // K
    bool standardize_ = false;
    Eigen::VectorXd x_mean_, x_std_;  // per channel
    Eigen::VectorXd y_mean_, y_std_;
};

}  // namespace tsk
