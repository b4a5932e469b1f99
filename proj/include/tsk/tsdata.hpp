#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tsk {

// An irregularly-spaced multivariate time series: ascending timestamps plus a
// (length x channels) value matrix. Values are stored column-major so each
// channel is a contiguous slice. Immutable after construction.
class TimeSeries {
public:
    TimeSeries(std::string id, std::vector<double> timestamps, Eigen::MatrixXd values);

    const std::string& id() const { return id_; }
    const std::vector<double>& timestamps() const { return timestamps_; }
    const Eigen::MatrixXd& values() const { return values_; }

    Eigen::Index length() const { return values_.rows(); }
    Eigen::Index channels() const { return values_.cols(); }

    // Sub-series over an ascending index subset.
    TimeSeries select(std::span<const Eigen::Index> idx) const;
    TimeSeries head(Eigen::Index n) const;
    TimeSeries tail(Eigen::Index n) const;

private:
    std::string id_;
    std::vector<double> timestamps_;
    Eigen::MatrixXd values_;
};

struct Dataset {
    std::vector<TimeSeries> series;
    std::vector<std::string> labels;  // empty, or aligned 1:1 with series

    std::size_t size() const { return series.size(); }
    bool has_labels() const { return !labels.empty(); }
    Eigen::Index channels() const;

    // Shared channel count and label alignment.
    void validate() const;

    Dataset subset(std::span<const std::size_t> idx) const;

    // True when every series is observed on one identical timestamp vector.
    bool shared_grid() const;
};

// Per-series train/test index masks over timestamps, plus the series-level
// partition (filled in by the evaluation harness).
struct SeriesSplit {
    std::vector<std::vector<Eigen::Index>> train_time;
    std::vector<std::vector<Eigen::Index>> test_time;
    std::vector<std::string> train_series_ids;
    std::vector<std::string> test_series_ids;
};

Dataset load_ucr_tsv(const std::filesystem::path& path);
Dataset load_jsonl(const std::filesystem::path& path);
void write_jsonl(const Dataset& ds, const std::filesystem::path& path);

// Terminal-block forecasting split: per series, the last n_test_timestamps
// indices are test and the remainder train.
SeriesSplit split_forecast(const Dataset& ds, Eigen::Index n_test_timestamps);

// Window helpers for the forecasting protocol (masks aligned with ds order).
Dataset slice_train_window(const Dataset& ds, const SeriesSplit& split);
Dataset slice_test_window(const Dataset& ds, const SeriesSplit& split);

// Test-window values as an N x (K * d) matrix; channel c occupies the
// contiguous column block [c*K, (c+1)*K).
Eigen::MatrixXd test_window_values(const Dataset& ds, const SeriesSplit& split);

}  // namespace tsk
