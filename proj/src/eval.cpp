#include "tsk/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include <boost/math/distributions/students_t.hpp>

#include "tsk/baselines.hpp"
#include "tsk/errors.hpp"
#include "tsk/parallel.hpp"
#include "tsk/svm.hpp"

namespace tsk {

namespace {

std::string fmt_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n));
    const double step = (std::log10(hi) - std::log10(lo)) / (n - 1);
    for (int i = 0; i < n; ++i) out.push_back(std::pow(10.0, std::log10(lo) + step * i));
    return out;
}

}  // namespace

ParamGrid ParamGrid::defaults_classification() {
    ParamGrid g;
    g.k_prime_kinds = {KernelKind::linear, KernelKind::rbf, KernelKind::laplacian};
    g.k_dprime_kinds = g.k_prime_kinds;
    g.gamma_prime = log_grid(1e-3, 1e2, 6);
    g.gamma_dprime = g.gamma_prime;
    g.lambda = log_grid(1e-4, 1e2, 7);
    g.c_or_noise = log_grid(1e-2, 1e3, 6);
    return g;
}

ParamGrid ParamGrid::defaults_regression() {
    ParamGrid g = defaults_classification();
    g.c_or_noise = log_grid(1e-4, 1e2, 7);
    return g;
}

void ParamGrid::validate() const {
    if (k_prime_kinds.empty() || k_dprime_kinds.empty() || lambda.empty() || c_or_noise.empty())
        throw ConfigError("param grid has an empty dimension");
    auto nonlinear = [](const std::vector<KernelKind>& kinds) {
        return std::any_of(kinds.begin(), kinds.end(),
                           [](KernelKind k) { return k != KernelKind::linear; });
    };
    if (nonlinear(k_prime_kinds) && gamma_prime.empty())
        throw ConfigError("gamma_prime grid is empty but k' has rbf/laplacian kinds");
    if (nonlinear(k_dprime_kinds) && gamma_dprime.empty())
        throw ConfigError("gamma_dprime grid is empty but k'' has rbf/laplacian kinds");
    for (double v : gamma_prime)
        if (!(v > 0)) throw ConfigError("gamma grid must be strictly positive");
    for (double v : gamma_dprime)
        if (!(v > 0)) throw ConfigError("gamma grid must be strictly positive");
    for (double v : lambda)
        if (!(v > 0)) throw ConfigError("lambda grid must be strictly positive");
    for (double v : c_or_noise)
        if (!(v > 0)) throw ConfigError("C/noise grid must be strictly positive");
}

std::size_t ParamGrid::kernel_cell_count() const {
    std::size_t np = 0, nd = 0;
    for (KernelKind k : k_prime_kinds) np += k == KernelKind::linear ? 1 : gamma_prime.size();
    for (KernelKind k : k_dprime_kinds) nd += k == KernelKind::linear ? 1 : gamma_dprime.size();
    return np * nd * lambda.size();
}

std::vector<KernelCell> enumerate_kernel_cells(const ParamGrid& grid) {
    grid.validate();
    std::vector<KernelCell> cells;
    cells.reserve(grid.kernel_cell_count());
    std::size_t index = 0;
    auto make = [](KernelKind kind, double gamma, double lambda) {
        switch (kind) {
            case KernelKind::linear: return VectorKernel::linear(lambda);
            case KernelKind::rbf: return VectorKernel::rbf(gamma, lambda);
            case KernelKind::laplacian: return VectorKernel::laplacian(gamma, lambda);
        }
        throw ConfigError("bad kernel kind");
    };
    const std::vector<double> one{1.0};
    for (KernelKind kp : grid.k_prime_kinds) {
        const auto& gps = kp == KernelKind::linear ? one : grid.gamma_prime;
        for (KernelKind kd : grid.k_dprime_kinds) {
            const auto& gds = kd == KernelKind::linear ? one : grid.gamma_dprime;
            for (double gp : gps)
                for (double gd : gds)
                    for (double lam : grid.lambda)
                        cells.push_back({make(kp, gp, lam), make(kd, gd, 0.0), index++});
        }
    }
    return cells;
}

std::vector<Fold> kfold_indices(std::size_t n, int k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("fold count must be >= 2");
    if (n < static_cast<std::size_t>(k))
        throw ConfigError("need at least " + std::to_string(k) + " series for " +
                          std::to_string(k) + "-fold CV, got " + std::to_string(n));
    std::vector<std::size_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = i;
    // Hand-rolled Fisher-Yates: std::shuffle is not reproducible across
    // standard libraries.
    std::mt19937_64 rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(ids[i], ids[j]);
    }
    std::vector<Fold> folds(static_cast<std::size_t>(k));
    const std::size_t base = n / static_cast<std::size_t>(k);
    const std::size_t extra = n % static_cast<std::size_t>(k);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < static_cast<std::size_t>(k); ++f) {
        const std::size_t sz = base + (f < extra ? 1 : 0);
        folds[f].test.assign(ids.begin() + static_cast<long>(pos),
                             ids.begin() + static_cast<long>(pos + sz));
        pos += sz;
    }
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<bool> in_test(n, false);
        for (std::size_t i : folds[f].test) in_test[i] = true;
        for (std::size_t i = 0; i < n; ++i)
            if (!in_test[i]) folds[f].train.push_back(i);
        std::sort(folds[f].test.begin(), folds[f].test.end());
    }
    return folds;
}

std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> kfold_series(
    std::span<const std::string> ids, int k, std::uint64_t seed) {
    auto folds = kfold_indices(ids.size(), k, seed);
    std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> out;
    out.reserve(folds.size());
    for (const auto& f : folds) {
        std::vector<std::string> tr, te;
        for (std::size_t i : f.train) tr.push_back(ids[i]);
        for (std::size_t i : f.test) te.push_back(ids[i]);
        out.emplace_back(std::move(tr), std::move(te));
    }
    return out;
}

ErrorEstimate estimate_error(const Eigen::MatrixXd& losses) {
    const Eigen::Index n = losses.rows();
    const Eigen::Index k = losses.cols();
    if (n < 2)
        throw InsufficientSampleError("the unbiased covariance needs at least 2 series, got " +
                                      std::to_string(n));
    ErrorEstimate e;
    e.n_series = n;
    e.n_timestamps = k;
    e.eps_hat = losses.mean();
    Eigen::RowVectorXd col_means = losses.colwise().mean();
    Eigen::MatrixXd centered = losses.rowwise() - col_means;
    e.sigma = centered.transpose() * centered / static_cast<double>(n - 1);
    e.v_hat = e.sigma.sum() / (static_cast<double>(n) * static_cast<double>(k) *
                               static_cast<double>(k));
    if (e.v_hat < 0.0) e.v_hat = 0.0;
    return e;
}

std::pair<double, double> rmse_report(double eps_hat, double v_hat) {
    if (!(eps_hat > 0.0)) return {0.0, 0.0};
    const double rmse = std::sqrt(eps_hat);
    return {rmse, std::sqrt(std::max(v_hat, 0.0)) / (2.0 * rmse)};
}

std::pair<double, double> rmse_report(const ErrorEstimate& e) {
    return rmse_report(e.eps_hat, e.v_hat);
}

std::pair<double, double> jackknife_accuracy_se(std::span<const int> correct) {
    const auto n = correct.size();
    if (n < 2) throw InsufficientSampleError("jackknife needs at least 2 observations");
    double sum = 0.0;
    for (int c : correct) sum += c;
    const double nn = static_cast<double>(n);
    std::vector<double> theta(n);
    for (std::size_t i = 0; i < n; ++i) theta[i] = (sum - correct[i]) / (nn - 1.0);
    double theta_bar = 0.0;
    for (double t : theta) theta_bar += t;
    theta_bar /= nn;
    double ss = 0.0;
    for (double t : theta) ss += (t - theta_bar) * (t - theta_bar);
    return {sum / nn, std::sqrt((nn - 1.0) / nn * ss)};
}

TTestResult t_test_vs_best_baseline(std::pair<double, double> pred,
                                    std::pair<double, double> baseline, std::size_t n_series) {
    const auto [eps_p, v_p] = pred;
    const auto [eps_b, v_b] = baseline;
    if (v_p < 0.0 || v_b < 0.0) throw ConfigError("variance estimates must be >= 0");
    const double pooled = v_p + v_b;
    if (pooled == 0.0) throw NumericError("zero pooled variance; the t statistic is undefined");
    TTestResult r;
    r.t = (eps_p - eps_b) / std::sqrt(pooled);
    r.df = static_cast<int>(n_series / 5);
    if (r.df < 1) throw ConfigError("too few series for the t-test (df = n_series/5 < 1)");
    boost::math::students_t dist(static_cast<double>(r.df));
    if (r.t <= -boost::math::quantile(dist, 0.99)) r.stars = "***";
    else if (r.t <= -boost::math::quantile(dist, 0.95)) r.stars = "**";
    else if (r.t <= -boost::math::quantile(dist, 0.90)) r.stars = "*";
    return r;
}

ForecasterKind forecaster_from_string(std::string_view name) {
    if (name == "series_gpr") return ForecasterKind::series_gpr;
    if (name == "timestamp_means") return ForecasterKind::timestamp_means;
    if (name == "zeros") return ForecasterKind::zeros;
    if (name == "linear_interpolator") return ForecasterKind::linear_interpolator;
    if (name == "series_means") return ForecasterKind::series_means;
    throw ConfigError("unknown forecasting strategy '" + std::string(name) + "'");
}

ClassifierKind classifier_from_string(std::string_view name) {
    if (name == "dtw_1nn") return ClassifierKind::dtw_1nn;
    if (name == "series_svm") return ClassifierKind::series_svm;
    throw ConfigError("unknown classification strategy '" + std::string(name) + "'");
}

std::string_view to_string(ForecasterKind kind) {
    switch (kind) {
        case ForecasterKind::series_gpr: return "series_gpr";
        case ForecasterKind::timestamp_means: return "timestamp_means";
        case ForecasterKind::zeros: return "zeros";
        case ForecasterKind::linear_interpolator: return "linear_interpolator";
        case ForecasterKind::series_means: return "series_means";
    }
    return "?";
}

std::string_view to_string(ClassifierKind kind) {
    switch (kind) {
        case ClassifierKind::dtw_1nn: return "dtw_1nn";
        case ClassifierKind::series_svm: return "series_svm";
    }
    return "?";
}

namespace {

std::string point_key(const KernelCell& cell, double c_or_noise, bool regression) {
    return "k'=" + cell.k_prime.describe() + " k''=" + cell.k_dprime.describe() +
           (regression ? " noise=" : " C=") + fmt_g(c_or_noise);
}

// Squared-error losses on one channel (or the channel mean), N x K.
Eigen::MatrixXd squared_losses(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth,
                               Eigen::Index k, Eigen::Index d, int channel) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
        throw DimensionError("prediction/truth shape mismatch");
    Eigen::MatrixXd diff2 = (pred - truth).array().square();
    if (d == 1) return diff2;
    if (channel >= 0) {
        if (channel >= d) throw ConfigError("score channel out of range");
        return diff2.middleCols(static_cast<Eigen::Index>(channel) * k, k);
    }
    Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(diff2.rows(), k);
    for (Eigen::Index c = 0; c < d; ++c) pooled += diff2.middleCols(c * k, k);
    return pooled / static_cast<double>(d);
}

// Gram over one list of series, shared-grid factorization when possible.
Eigen::MatrixXd kernel_matrix_self(const SeriesKernelConfig& cfg, const Dataset& ds, bool shared,
                                   int threads) {
    if (shared) return cross_gram_shared_grid(cfg, ds, ds);
    return cross_gram(cfg, ds, threads);
}

Eigen::MatrixXd take_block(const Eigen::MatrixXd& g, const std::vector<std::size_t>& rows,
                           const std::vector<std::size_t>& cols) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c)
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                g(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(cols[c]));
    return out;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r)
        out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(rows[r]));
    return out;
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = i;
    return out;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

ForecastBaseline to_baseline(ForecasterKind kind) {
    switch (kind) {
        case ForecasterKind::timestamp_means: return ForecastBaseline::timestamp_means;
        case ForecasterKind::zeros: return ForecastBaseline::zeros;
        case ForecasterKind::linear_interpolator: return ForecastBaseline::linear_interpolator;
        case ForecasterKind::series_means: return ForecastBaseline::series_means;
        case ForecasterKind::series_gpr: break;
    }
    throw ConfigError("series_gpr is not a baseline");
}

// Best grid point: smallest inner loss, ties to the smallest canonical index.
std::size_t argmin_canonical(const std::vector<double>& loss) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < loss.size(); ++i)
        if (loss[i] < loss[best]) best = i;
    if (loss[best] == kInf)
        throw NumericError("every grid point failed during inner tuning");
    return best;
}

}  // namespace

CvResult nested_cv_forecast(ForecasterKind kind, const Dataset& ds, Eigen::Index n_test_timestamps,
                            const ParamGrid& grid, int outer_k, int inner_k, std::uint64_t seed,
                            const StrategyOptions& options, int threads) {
    ds.validate();
    const Eigen::Index d = ds.channels();
    const bool tunable = kind == ForecasterKind::series_gpr;
    if (tunable) grid.validate();

    auto outer = kfold_indices(ds.size(), outer_k, seed);
    std::vector<KernelCell> cells = tunable ? enumerate_kernel_cells(grid) : std::vector<KernelCell>{};
    const std::size_t n_noise = grid.c_or_noise.size();
    const std::size_t n_points = cells.size() * n_noise;

    CvResult result;
    for (std::size_t f = 0; f < outer.size(); ++f) {
        const Fold& fold = outer[f];
        Dataset train_ds = ds.subset(fold.train);
        Dataset test_ds = ds.subset(fold.test);
        SeriesSplit train_split = split_forecast(train_ds, n_test_timestamps);
        SeriesSplit test_split = split_forecast(test_ds, n_test_timestamps);

        Eigen::MatrixXd pred;
        if (!tunable) {
            pred = forecast_baseline(to_baseline(kind), train_ds, test_ds, test_split);
        } else {
            // Inner tuning over (kernel cell) x (noise); the inner-train Gram
            // is bundled once per cell and reused across the noise grid.
            Dataset segments;
            segments.series.reserve(train_ds.size());
            for (std::size_t i = 0; i < train_ds.size(); ++i)
                segments.series.push_back(train_ds.series[i].select(train_split.train_time[i]));
            Eigen::MatrixXd targets = test_window_values(train_ds, train_split);

            GprOptions gpr_opts = options.gpr;
            Eigen::VectorXd y_mean = Eigen::VectorXd::Zero(d), y_std = Eigen::VectorXd::Ones(d);
            if (gpr_opts.standardize) {
                // Scalers for the inner sweep are fitted on the outer-train
                // pool; the final refit fits its own inside GprModel::fit.
                Eigen::VectorXd x_mean, x_std;
                std::vector<TimeSeries> tmp = segments.series;
                {
                    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d), sumsq = Eigen::VectorXd::Zero(d);
                    long count = 0;
                    for (const auto& s : tmp) {
                        sum += s.values().colwise().sum().transpose();
                        sumsq += s.values().array().square().colwise().sum().matrix().transpose();
                        count += s.length();
                    }
                    x_mean = sum / static_cast<double>(count);
                    x_std.resize(d);
                    for (Eigen::Index c = 0; c < d; ++c) {
                        double var = sumsq(c) / static_cast<double>(count) - x_mean(c) * x_mean(c);
                        x_std(c) = var > 0.0 ? std::sqrt(var) : 1.0;
                    }
                }
                for (auto& s : segments.series) {
                    Eigen::MatrixXd v = s.values();
                    for (Eigen::Index c = 0; c < d; ++c)
                        v.col(c) = (v.col(c).array() - x_mean(c)) / x_std(c);
                    s = TimeSeries(s.id(), s.timestamps(), std::move(v));
                }
                const Eigen::Index kk = n_test_timestamps;
                for (Eigen::Index c = 0; c < d; ++c) {
                    auto block = targets.middleCols(c * kk, kk);
                    const double mean = block.mean();
                    double var = block.array().square().mean() - mean * mean;
                    y_mean(c) = mean;
                    y_std(c) = var > 0.0 ? std::sqrt(var) : 1.0;
                    block = (block.array() - y_mean(c)) / y_std(c);
                }
            }
            Eigen::MatrixXd raw_targets = test_window_values(train_ds, train_split);

            auto inner = kfold_indices(train_ds.size(), inner_k, seed + 1 + f);
            const bool shared = segments.shared_grid();
            std::vector<double> point_loss(n_points, 0.0);

            parallel_for(cells.size(), threads, [&](std::size_t ci) {
                const KernelCell& cell = cells[ci];
                SeriesKernelConfig cfg(cell.k_prime, cell.k_dprime, options.weights);
                Eigen::MatrixXd g;
                try {
                    g = kernel_matrix_self(cfg, segments, shared, 1);
                    if (!g.allFinite()) throw NumericError("non-finite Gram");
                } catch (const NumericError&) {
                    for (std::size_t ni = 0; ni < n_noise; ++ni)
                        point_loss[cell.index * n_noise + ni] = kInf;
                    return;
                }
                for (const Fold& inf : inner) {
                    try {
                        Eigen::MatrixXd ktr = take_block(g, inf.train, inf.train);
                        Eigen::MatrixXd kcross = take_block(g, inf.test, inf.train);
                        Eigen::MatrixXd t_tr = take_rows(targets, inf.train);
                        Eigen::MatrixXd truth = take_rows(raw_targets, inf.test);
                        GramBundle b(ktr);
                        for (std::size_t ni = 0; ni < n_noise; ++ni) {
                            const std::size_t point = cell.index * n_noise + ni;
                            if (point_loss[point] == kInf) continue;
                            try {
                                Eigen::MatrixXd p =
                                    kcross * shifted_solve(b, grid.c_or_noise[ni], t_tr);
                                if (gpr_opts.standardize) {
                                    const Eigen::Index kk = n_test_timestamps;
                                    for (Eigen::Index c = 0; c < d; ++c)
                                        p.middleCols(c * kk, kk) =
                                            (p.middleCols(c * kk, kk).array() * y_std(c)) + y_mean(c);
                                }
                                Eigen::MatrixXd losses = squared_losses(
                                    p, truth, n_test_timestamps, d, options.score_channel);
                                point_loss[point] +=
                                    losses.mean() / static_cast<double>(inner.size());
                            } catch (const NumericError&) {
                                point_loss[point] = kInf;
                            }
                        }
                    } catch (const NumericError&) {
                        for (std::size_t ni = 0; ni < n_noise; ++ni)
                            point_loss[cell.index * n_noise + ni] = kInf;
                        return;
                    }
                }
            });

            const std::size_t best = argmin_canonical(point_loss);
            const KernelCell& cell = cells[best / n_noise];
            const double noise = grid.c_or_noise[best % n_noise];
            result.grid_choice_histogram[point_key(cell, noise, true)] += 1;

            SeriesKernelConfig cfg(cell.k_prime, cell.k_dprime, options.weights);
            GprModel model = GprModel::fit(cfg, noise, train_ds, train_split, gpr_opts);
            pred = model.predict(slice_train_window(test_ds, test_split));
        }

        Eigen::MatrixXd truth = test_window_values(test_ds, test_split);
        Eigen::MatrixXd losses = squared_losses(pred, truth, n_test_timestamps, d,
                                                options.score_channel);
        ErrorEstimate e = estimate_error(losses);
        result.fold_eps.push_back(e.eps_hat);
        result.fold_v.push_back(e.v_hat);
    }

    for (double e : result.fold_eps) result.eps_cv += e / static_cast<double>(result.fold_eps.size());
    for (double v : result.fold_v) result.v_cv += v / static_cast<double>(result.fold_v.size());
    return result;
}

namespace {

struct SvmTuneOutcome {
    KernelCell cell;
    double c = 0.0;
};

SvmTuneOutcome tune_svm(const Dataset& train, const ParamGrid& grid, int inner_k,
                        std::uint64_t seed, const StrategyOptions& options, int threads) {
    grid.validate();
    auto cells = enumerate_kernel_cells(grid);
    const std::size_t n_c = grid.c_or_noise.size();
    std::vector<double> point_loss(cells.size() * n_c, 0.0);
    auto inner = kfold_indices(train.size(), inner_k, seed);
    const bool shared = train.shared_grid();

    parallel_for(cells.size(), threads, [&](std::size_t ci) {
        const KernelCell& cell = cells[ci];
        SeriesKernelConfig cfg(cell.k_prime, cell.k_dprime, options.weights);
        Eigen::MatrixXd g;
        try {
            g = kernel_matrix_self(cfg, train, shared, 1);
            if (!g.allFinite()) throw NumericError("non-finite Gram");
        } catch (const NumericError&) {
            for (std::size_t ni = 0; ni < n_c; ++ni) point_loss[cell.index * n_c + ni] = kInf;
            return;
        }
        for (const Fold& inf : inner) {
            Eigen::MatrixXd ktr = take_block(g, inf.train, inf.train);
            Eigen::MatrixXd kcross = take_block(g, inf.test, inf.train);
            std::vector<std::string> ytr, yte;
            for (std::size_t i : inf.train) ytr.push_back(train.labels[i]);
            for (std::size_t i : inf.test) yte.push_back(train.labels[i]);
            for (std::size_t ni = 0; ni < n_c; ++ni) {
                const std::size_t point = cell.index * n_c + ni;
                if (point_loss[point] == kInf) continue;
                try {
                    OvrSvmModel m = svm_train_multiclass(ktr, ytr, grid.c_or_noise[ni]);
                    auto pred = svm_classify(m, kcross);
                    double err = 0.0;
                    for (std::size_t i = 0; i < pred.size(); ++i)
                        if (pred[i] != yte[i]) err += 1.0;
                    point_loss[point] +=
                        err / static_cast<double>(pred.size()) / static_cast<double>(inner.size());
                } catch (const Error&) {
                    point_loss[point] = kInf;
                }
            }
        }
    });

    const std::size_t best = argmin_canonical(point_loss);
    return {cells[best / n_c], grid.c_or_noise[best % n_c]};
}

}  // namespace

ClassifyOutcome tune_and_classify(ClassifierKind kind, const Dataset& train, const Dataset& test,
                                  const ParamGrid& grid, int inner_k, std::uint64_t seed,
                                  const StrategyOptions& options, int threads) {
    train.validate();
    test.validate();
    if (!train.has_labels() || !test.has_labels())
        throw ConfigError("classification requires labelled train and test datasets");

    ClassifyOutcome out;
    if (kind == ClassifierKind::dtw_1nn) {
        out.predictions = nn1_classify(train, test, {}, threads);
    } else {
        SvmTuneOutcome tuned = tune_svm(train, grid, inner_k, seed, options, threads);
        out.grid_choice_histogram[point_key(tuned.cell, tuned.c, false)] += 1;
        SeriesKernelConfig cfg(tuned.cell.k_prime, tuned.cell.k_dprime, options.weights);
        const bool shared = train.shared_grid() && test.shared_grid();
        Eigen::MatrixXd ktr = kernel_matrix_self(cfg, train, train.shared_grid(), threads);
        Eigen::MatrixXd kcross = shared ? cross_gram_shared_grid(cfg, test, train)
                                        : cross_gram(cfg, test, train, threads);
        OvrSvmModel m = svm_train_multiclass(ktr, train.labels, tuned.c);
        out.predictions = svm_classify(m, kcross);
    }

    std::vector<int> correct(test.size());
    for (std::size_t i = 0; i < test.size(); ++i)
        correct[i] = out.predictions[i] == test.labels[i] ? 1 : 0;
    auto [acc, se] = jackknife_accuracy_se(correct);
    out.accuracy = acc;
    out.se = se;
    return out;
}

CvResult nested_cv_classify(ClassifierKind kind, const Dataset& ds, const ParamGrid& grid,
                            int outer_k, int inner_k, std::uint64_t seed,
                            const StrategyOptions& options, int threads) {
    ds.validate();
    if (!ds.has_labels()) throw ConfigError("classification requires labels");
    auto outer = kfold_indices(ds.size(), outer_k, seed);

    CvResult result;
    for (std::size_t f = 0; f < outer.size(); ++f) {
        Dataset train_ds = ds.subset(outer[f].train);
        Dataset test_ds = ds.subset(outer[f].test);
        ClassifyOutcome oc =
            tune_and_classify(kind, train_ds, test_ds, grid, inner_k, seed + 1 + f, options, threads);
        for (const auto& [key, count] : oc.grid_choice_histogram)
            result.grid_choice_histogram[key] += count;
        Eigen::MatrixXd losses(static_cast<Eigen::Index>(test_ds.size()), 1);
        for (std::size_t i = 0; i < test_ds.size(); ++i)
            losses(static_cast<Eigen::Index>(i), 0) =
                oc.predictions[i] == test_ds.labels[i] ? 0.0 : 1.0;
        ErrorEstimate e = estimate_error(losses);
        result.fold_eps.push_back(e.eps_hat);
        result.fold_v.push_back(e.v_hat);
    }
    for (double e : result.fold_eps) result.eps_cv += e / static_cast<double>(result.fold_eps.size());
    for (double v : result.fold_v) result.v_cv += v / static_cast<double>(result.fold_v.size());
    return result;
}

}  // namespace tsk
