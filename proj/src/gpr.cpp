#include "tsk/gpr.hpp"

#include <cmath>

#include "tsk/errors.hpp"

namespace tsk {

namespace {

// Per-channel pooled mean/std over a list of segments.
void fit_scaler(const std::vector<TimeSeries>& segs, Eigen::VectorXd& mean, Eigen::VectorXd& std) {
    const Eigen::Index d = segs.front().channels();
    mean = Eigen::VectorXd::Zero(d);
    std = Eigen::VectorXd::Ones(d);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d), sumsq = Eigen::VectorXd::Zero(d);
    long count = 0;
    for (const auto& s : segs) {
        sum += s.values().colwise().sum().transpose();
        sumsq += s.values().array().square().colwise().sum().matrix().transpose();
        count += s.length();
    }
    mean = sum / static_cast<double>(count);
    for (Eigen::Index c = 0; c < d; ++c) {
        double var = sumsq(c) / static_cast<double>(count) - mean(c) * mean(c);
        std(c) = var > 0.0 ? std::sqrt(var) : 1.0;
    }
}

TimeSeries scale_series(const TimeSeries& s, const Eigen::VectorXd& mean,
                        const Eigen::VectorXd& std) {
    Eigen::MatrixXd v = s.values();
    for (Eigen::Index c = 0; c < v.cols(); ++c) v.col(c) = (v.col(c).array() - mean(c)) / std(c);
    return TimeSeries(s.id(), s.timestamps(), std::move(v));
}

}  // namespace

GprModel::GprModel(SeriesKernelConfig cfg, double noise) : cfg_(std::move(cfg)), noise_(noise) {}

GprModel GprModel::fit(const SeriesKernelConfig& cfg, double noise, const Dataset& train,
                       const SeriesSplit& split, const GprOptions& options) {
    if (noise < 0.0 || !std::isfinite(noise)) throw ConfigError("noise must be >= 0");
    train.validate();
    if (split.train_time.size() != train.size() || split.test_time.size() != train.size())
        throw FormatError("split masks do not align with the training dataset");

    GprModel m(cfg, noise);
    m.standardize_ = options.standardize;
    m.channels_ = train.channels();
    m.horizon_ = static_cast<Eigen::Index>(split.test_time.front().size());
    if (m.horizon_ < 1) throw FormatError("empty test window");
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (static_cast<Eigen::Index>(split.test_time[i].size()) != m.horizon_)
            throw FormatError("inconsistent test windows across training series");
        if (split.train_time[i].empty())
            throw FormatError("series '" + train.series[i].id() + "' has an empty train window");
    }

    std::vector<TimeSeries> segments;
    segments.reserve(train.size());
    for (std::size_t i = 0; i < train.size(); ++i)
        segments.push_back(train.series[i].select(split.train_time[i]));
    m.targets_ = test_window_values(train, split);

    if (m.standardize_) {
        fit_scaler(segments, m.x_mean_, m.x_std_);
        for (auto& s : segments) s = scale_series(s, m.x_mean_, m.x_std_);
        m.y_mean_.resize(m.channels_);
        m.y_std_.resize(m.channels_);
        const Eigen::Index k = m.horizon_;
        for (Eigen::Index c = 0; c < m.channels_; ++c) {
            auto block = m.targets_.middleCols(c * k, k);
            const double mean = block.mean();
            double var = block.array().square().mean() - mean * mean;
            m.y_mean_(c) = mean;
            m.y_std_(c) = var > 0.0 ? std::sqrt(var) : 1.0;
            block = (block.array() - m.y_mean_(c)) / m.y_std_(c);
        }
    }

    m.train_prepared_.reserve(segments.size());
    for (const auto& s : segments) m.train_prepared_.push_back(prepare(cfg, s));
    m.bundle_.emplace(cross_gram_prepared_self(cfg, m.train_prepared_));

    if (noise == 0.0 && m.bundle_->eigvals().minCoeff() == 0.0)
        throw SingularShiftError(
            "training Gram has a zero eigenvalue; fit with noise > 0 or drop duplicate series");
    return m;
}

Eigen::MatrixXd GprModel::predict(const Dataset& test) const {
    test.validate();
    if (test.channels() != channels_)
        throw DimensionError("test dataset has " + std::to_string(test.channels()) +
                             " channels, model expects " + std::to_string(channels_));
    std::vector<PreparedSeries> prepared;
    prepared.reserve(test.size());
    for (const auto& s : test.series)
        prepared.push_back(prepare(cfg_, standardize_ ? scale_series(s, x_mean_, x_std_) : s));

    Eigen::MatrixXd cross = cross_gram_prepared(cfg_, prepared, train_prepared_);
    Eigen::MatrixXd out = cross * shifted_solve(*bundle_, noise_, targets_);
    if (standardize_) {
        const Eigen::Index k = horizon_;
        for (Eigen::Index c = 0; c < channels_; ++c)
            out.middleCols(c * k, k) = (out.middleCols(c * k, k).array() * y_std_(c)) + y_mean_(c);
    }
    return out;
}

Eigen::VectorXd GprModel::predict_variance(const Dataset& test) const {
    test.validate();
    if (test.channels() != channels_)
        throw DimensionError("test dataset channel mismatch");
    std::vector<PreparedSeries> prepared;
    prepared.reserve(test.size());
    for (const auto& s : test.series)
        prepared.push_back(prepare(cfg_, standardize_ ? scale_series(s, x_mean_, x_std_) : s));

    Eigen::MatrixXd cross = cross_gram_prepared(cfg_, prepared, train_prepared_);
    Eigen::MatrixXd sol = shifted_solve(*bundle_, noise_, cross.transpose());
    Eigen::VectorXd out(static_cast<Eigen::Index>(test.size()));
    for (std::size_t i = 0; i < test.size(); ++i) {
        const double self = eval_multivariate(cfg_, prepared[i], prepared[i]);
        const auto ii = static_cast<Eigen::Index>(i);
        out(ii) = self - cross.row(ii).dot(sol.col(ii));
    }
    return out;
}

}  // namespace tsk
