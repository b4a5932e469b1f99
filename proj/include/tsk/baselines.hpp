#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsk/tsdata.hpp"

namespace tsk {

// Local cost is the squared difference; the final distance takes the root.
struct DtwParams {
    std::optional<int> window;  // Sakoe-Chiba band half-width; absent = unconstrained
};

double dtw_distance(std::span<const double> x, std::span<const double> y,
                    const DtwParams& params = {});

// 1-nearest-neighbour under DTW; ties go to the earliest training index.
std::vector<std::string> nn1_classify(const Dataset& train, const Dataset& test,
                                      const DtwParams& params = {}, int threads = 1);

enum class ForecastBaseline { timestamp_means, zeros, linear_interpolator, series_means };

ForecastBaseline forecast_baseline_from_string(std::string_view name);
std::string_view to_string(ForecastBaseline kind);

// Naive forecasters. `split` carries the per-series window masks of the test
// dataset; train series must support a terminal window of the same length
// (used by timestamp_means). Returns an M x (K * d) prediction matrix laid
// out like test_window_values.
Eigen::MatrixXd forecast_baseline(ForecastBaseline kind, const Dataset& train, const Dataset& test,
                                  const SeriesSplit& split);

}  // namespace tsk
