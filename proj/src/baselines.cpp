#include "tsk/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tsk/errors.hpp"
#include "tsk/parallel.hpp"

namespace tsk {

double dtw_distance(std::span<const double> x, std::span<const double> y, const DtwParams& params) {
    if (x.empty() || y.empty()) throw ConfigError("dtw_distance requires nonempty sequences");
    if (params.window && *params.window < 0) throw ConfigError("window must be >= 0");

    const auto n = static_cast<Eigen::Index>(x.size());
    const auto m = static_cast<Eigen::Index>(y.size());
    // A band narrower than the length difference admits no path.
    Eigen::Index band = params.window
                            ? std::max<Eigen::Index>(*params.window, std::abs(n - m))
                            : std::max(n, m);

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(static_cast<std::size_t>(m) + 1, inf);
    std::vector<double> cur(static_cast<std::size_t>(m) + 1, inf);
    prev[0] = 0.0;
    for (Eigen::Index i = 1; i <= n; ++i) {
        std::fill(cur.begin(), cur.end(), inf);
        const Eigen::Index jlo = std::max<Eigen::Index>(1, i - band);
        const Eigen::Index jhi = std::min<Eigen::Index>(m, i + band);
        for (Eigen::Index j = jlo; j <= jhi; ++j) {
            const double d = (x[static_cast<std::size_t>(i - 1)] - y[static_cast<std::size_t>(j - 1)]) *
                             (x[static_cast<std::size_t>(i - 1)] - y[static_cast<std::size_t>(j - 1)]);
            const double best = std::min({prev[static_cast<std::size_t>(j)],
                                          prev[static_cast<std::size_t>(j - 1)],
                                          cur[static_cast<std::size_t>(j - 1)]});
            cur[static_cast<std::size_t>(j)] = d + best;
        }
        std::swap(prev, cur);
    }
    return std::sqrt(prev[static_cast<std::size_t>(m)]);
}

std::vector<std::string> nn1_classify(const Dataset& train, const Dataset& test,
                                      const DtwParams& params, int threads) {
    train.validate();
    test.validate();
    if (train.series.empty()) throw ConfigError("nn1_classify requires a nonempty training set");
    if (!train.has_labels()) throw ConfigError("nn1_classify requires labelled training data");
    if (train.channels() != 1 || test.channels() != 1)
        throw DimensionError("DTW distance is defined for univariate series");

    std::vector<std::string> out(test.size());
    parallel_for(test.size(), threads, [&](std::size_t i) {
        const auto& xs = test.series[i];
        std::span<const double> x(xs.values().col(0).data(),
                                  static_cast<std::size_t>(xs.length()));
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < train.size(); ++j) {
            const auto& ys = train.series[j];
            std::span<const double> y(ys.values().col(0).data(),
                                      static_cast<std::size_t>(ys.length()));
            const double d = dtw_distance(x, y, params);
            if (d < best) {
                best = d;
                best_j = j;
            }
        }
        out[i] = train.labels[best_j];
    });
    return out;
}

ForecastBaseline forecast_baseline_from_string(std::string_view name) {
    if (name == "timestamp_means") return ForecastBaseline::timestamp_means;
    if (name == "zeros") return ForecastBaseline::zeros;
    if (name == "linear_interpolator") return ForecastBaseline::linear_interpolator;
    if (name == "series_means") return ForecastBaseline::series_means;
    throw ConfigError("unknown baseline '" + std::string(name) + "'");
}

std::string_view to_string(ForecastBaseline kind) {
    switch (kind) {
        case ForecastBaseline::timestamp_means: return "timestamp_means";
        case ForecastBaseline::zeros: return "zeros";
        case ForecastBaseline::linear_interpolator: return "linear_interpolator";
        case ForecastBaseline::series_means: return "series_means";
    }
    return "?";
}

namespace {

// Piecewise-linear interpolant through the train window, clamped to the first
// and last fitted values outside it.
double interp_clamped(std::span<const double> t, std::span<const double> v, double at) {
    if (at <= t.front()) return v.front();
    if (at >= t.back()) return v.back();
    auto it = std::upper_bound(t.begin(), t.end(), at);
    const auto hi = static_cast<std::size_t>(std::distance(t.begin(), it));
    const auto lo = hi - 1;
    const double t0 = t[lo], t1 = t[hi];
    if (t1 == t0) return v[lo];
    const double w = (at - t0) / (t1 - t0);
    return (1.0 - w) * v[lo] + w * v[hi];
}

}  // namespace

Eigen::MatrixXd forecast_baseline(ForecastBaseline kind, const Dataset& train, const Dataset& test,
                                  const SeriesSplit& split) {
    train.validate();
    test.validate();
    if (split.test_time.size() != test.size())
        throw ConfigError("split masks do not align with the test dataset");
    if (train.channels() != test.channels())
        throw DimensionError("train and test datasets have different channel counts");
    const Eigen::Index d = test.channels();
    const auto k = static_cast<Eigen::Index>(split.test_time.front().size());
    for (const auto& m : split.test_time)
        if (static_cast<Eigen::Index>(m.size()) != k)
            throw FormatError("inconsistent test windows across series");

    const auto m_count = static_cast<Eigen::Index>(test.size());
    Eigen::MatrixXd pred = Eigen::MatrixXd::Zero(m_count, k * d);

    switch (kind) {
        case ForecastBaseline::zeros:
            break;
        case ForecastBaseline::timestamp_means: {
            // Position-wise mean of the training series' terminal windows.
            Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(k * d);
            for (const auto& s : train.series) {
                if (s.length() < k)
                    throw ConfigError("training series '" + s.id() +
                                      "' is shorter than the test window");
                for (Eigen::Index c = 0; c < d; ++c)
                    for (Eigen::Index j = 0; j < k; ++j)
                        mean(c * k + j) += s.values()(s.length() - k + j, c);
            }
            mean /= static_cast<double>(train.size());
            pred.rowwise() = mean;
            break;
        }
        case ForecastBaseline::series_means: {
            for (Eigen::Index i = 0; i < m_count; ++i) {
                const TimeSeries& s = test.series[static_cast<std::size_t>(i)];
                const auto& tr = split.train_time[static_cast<std::size_t>(i)];
                if (tr.empty()) throw ConfigError("series '" + s.id() + "' has an empty train window");
                for (Eigen::Index c = 0; c < d; ++c) {
                    double mean = 0.0;
                    for (Eigen::Index idx : tr) mean += s.values()(idx, c);
                    mean /= static_cast<double>(tr.size());
                    for (Eigen::Index j = 0; j < k; ++j) pred(i, c * k + j) = mean;
                }
            }
            break;
        }
        case ForecastBaseline::linear_interpolator: {
            for (Eigen::Index i = 0; i < m_count; ++i) {
                const TimeSeries& s = test.series[static_cast<std::size_t>(i)];
                const auto& tr = split.train_time[static_cast<std::size_t>(i)];
                const auto& te = split.test_time[static_cast<std::size_t>(i)];
                if (tr.empty()) throw ConfigError("series '" + s.id() + "' has an empty train window");
                std::vector<double> tt(tr.size());
                for (std::size_t q = 0; q < tr.size(); ++q)
                    tt[q] = s.timestamps()[static_cast<std::size_t>(tr[q])];
                for (Eigen::Index c = 0; c < d; ++c) {
                    std::vector<double> vv(tr.size());
                    for (std::size_t q = 0; q < tr.size(); ++q) vv[q] = s.values()(tr[q], c);
                    for (Eigen::Index j = 0; j < k; ++j) {
                        const double at = s.timestamps()[static_cast<std::size_t>(te[static_cast<std::size_t>(j)])];
                        pred(i, c * k + j) = interp_clamped(tt, vv, at);
                    }
                }
            }
            break;
        }
    }
    return pred;
}

}  // namespace tsk
