#include "tsk/skernel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>

#include <nlohmann/json.hpp>

#include "tsk/errors.hpp"
#include "tsk/parallel.hpp"

namespace tsk {

SeriesKernelConfig::SeriesKernelConfig(VectorKernel kp, VectorKernel kd,
                                       std::optional<Eigen::MatrixXd> w)
    : k_prime(kp), k_dprime(kd), weights(std::move(w)) {
    if (weights) {
        Eigen::MatrixXd& m = *weights;
        if (m.rows() != m.cols() || m.rows() < 1)
            throw ConfigError("weights must be a square d x d matrix");
        const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
        if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw ConfigError("weights must be symmetric");
        m = ((m + m.transpose()) / 2.0).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success) throw NumericError("weights eigendecomposition failed");
        if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, es.eigenvalues().maxCoeff()))
            throw ConfigError("weights must be positive semidefinite");
    }
}

std::string SeriesKernelConfig::describe() const {
    std::string s = "k'=" + k_prime.describe() + " k''=" + k_dprime.describe();
    if (weights) s += " W=" + std::to_string(weights->rows()) + "x" + std::to_string(weights->cols());
    return s;
}

nlohmann::json series_kernel_config_to_json(const SeriesKernelConfig& cfg) {
    nlohmann::json j;
    j["k_prime"] = vector_kernel_to_json(cfg.k_prime);
    j["k_dprime"] = vector_kernel_to_json(cfg.k_dprime);
    if (cfg.weights) {
        auto rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < cfg.weights->rows(); ++r) {
            auto row = nlohmann::json::array();
            for (Eigen::Index c = 0; c < cfg.weights->cols(); ++c) row.push_back((*cfg.weights)(r, c));
            rows.push_back(std::move(row));
        }
        j["weights"] = std::move(rows);
    } else {
        j["weights"] = nullptr;
    }
    return j;
}

SeriesKernelConfig series_kernel_config_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("k_prime") || !j.contains("k_dprime"))
        throw ConfigError("series kernel config needs 'k_prime' and 'k_dprime'");
    VectorKernel kp = vector_kernel_from_json(j.at("k_prime"));
    VectorKernel kd = vector_kernel_from_json(j.at("k_dprime"));
    std::optional<Eigen::MatrixXd> w;
    if (j.contains("weights") && !j.at("weights").is_null()) {
        auto rows = j.at("weights").get<std::vector<std::vector<double>>>();
        if (rows.empty()) throw ConfigError("weights must be non-empty");
        Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                          static_cast<Eigen::Index>(rows.front().size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != rows.front().size())
                throw ConfigError("weights rows have inconsistent widths");
            for (std::size_t c = 0; c < rows[r].size(); ++c)
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
        w = std::move(m);
    }
    return SeriesKernelConfig(kp, kd, std::move(w));
}

namespace {

// Cholesky with escalating diagonal jitter. On success returns the factor and
// the jitter used; on failure (all levels exhausted) returns a failed LLT.
struct JitteredCholesky {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;
    bool ok = false;
};

JitteredCholesky cholesky_with_jitter(const Eigen::MatrixXd& g) {
    JitteredCholesky out;
    out.llt.compute(g);
    if (out.llt.info() == Eigen::Success) {
        out.ok = true;
        return out;
    }
    const double base = g.trace() / static_cast<double>(g.rows());
    for (double scale = 1e-10; scale <= 1e-4 * 1.0000001; scale *= 10.0) {
        out.jitter = scale * base;
        Eigen::MatrixXd jittered = g;
        jittered.diagonal().array() += out.jitter;
        out.llt.compute(jittered);
        if (out.llt.info() == Eigen::Success && out.jitter > 0.0) {
            out.ok = true;
            return out;
        }
    }
    out.ok = false;
    return out;
}

}  // namespace

namespace {

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t series_content_key(const TimeSeries& s) {
    std::uint64_t h = 14695981039346656037ULL;
    h = fnv1a(s.id().data(), s.id().size(), h);
    h = fnv1a(s.timestamps().data(), s.timestamps().size() * sizeof(double), h);
    h = fnv1a(s.values().data(), static_cast<std::size_t>(s.values().size()) * sizeof(double), h);
    return h;
}

// Content-based total order; allocation addresses would not survive a rerun.
bool canonical_before(const PreparedSeries& a, const PreparedSeries& b) {
    if (a.content_key() != b.content_key()) return a.content_key() < b.content_key();
    if (a.series().id() != b.series().id()) return a.series().id() < b.series().id();
    if (a.series().timestamps() != b.series().timestamps())
        return a.series().timestamps() < b.series().timestamps();
    const auto* av = a.series().values().data();
    const auto* bv = b.series().values().data();
    const auto an = static_cast<std::size_t>(a.series().values().size());
    const auto bn = static_cast<std::size_t>(b.series().values().size());
    return std::lexicographical_compare(av, av + an, bv, bv + bn);
}

}  // namespace

PreparedSeries::PreparedSeries(TimeSeries series, Eigen::MatrixXd kp_inv, VectorKernel k_prime,
                               double jitter)
    : series_(std::move(series)), kp_inv_(std::move(kp_inv)), k_prime_(k_prime), jitter_(jitter) {
    content_key_ = series_content_key(series_);
}

PreparedSeries prepare(const SeriesKernelConfig& cfg, const TimeSeries& s) {
    Eigen::MatrixXd g = gram(cfg.k_prime, s.timestamps());
    JitteredCholesky chol = cholesky_with_jitter(g);
    if (!chol.ok)
        throw SingularKernelError("k' Gram is numerically singular for series '" + s.id() +
                                  "' (final jitter tried: " + std::to_string(chol.jitter) + ")");
    Eigen::MatrixXd inv = chol.llt.solve(Eigen::MatrixXd::Identity(g.rows(), g.cols()));
    return PreparedSeries(s, std::move(inv), cfg.k_prime, chol.jitter);
}

namespace {

void check_prepared(const SeriesKernelConfig& cfg, const PreparedSeries& p) {
    if (!(p.k_prime() == cfg.k_prime))
        throw ConfigError("series '" + p.series().id() +
                          "' was prepared under a different k' than the given config");
}

// Core pairwise evaluation. The operands are taken in one canonical order so
// the same scalar comes out regardless of argument order.
double eval_pair(const SeriesKernelConfig& cfg, const PreparedSeries& a, const PreparedSeries& b) {
    check_prepared(cfg, a);
    check_prepared(cfg, b);
    const bool b_first = canonical_before(b, a);
    const PreparedSeries& lo = b_first ? b : a;
    const PreparedSeries& hi = b_first ? a : b;
    const TimeSeries& sl = lo.series();
    const TimeSeries& sh = hi.series();
    if (sl.channels() != sh.channels())
        throw DimensionError("series '" + sl.id() + "' and '" + sh.id() +
                             "' have different channel counts");
    const Eigen::Index d = sl.channels();
    if (cfg.weights && cfg.weights->rows() != d)
        throw DimensionError("weights are " + std::to_string(cfg.weights->rows()) + "x" +
                             std::to_string(cfg.weights->cols()) + " but series have " +
                             std::to_string(d) + " channels");

    Eigen::MatrixXd kd = (&lo == &hi) ? gram(cfg.k_dprime, sl.timestamps())
                                      : gram(cfg.k_dprime, sl.timestamps(), sh.timestamps());
    Eigen::MatrixXd mid = lo.kp_inv() * kd * hi.kp_inv();
    Eigen::MatrixXd p = sl.values().transpose() * (mid * sh.values());  // d x d
    if (cfg.weights) return cfg.weights->cwiseProduct(p).sum();
    return p.trace();
}

}  // namespace

double eval_univariate(const SeriesKernelConfig& cfg, const PreparedSeries& a,
                       const PreparedSeries& b) {
    if (a.series().channels() != 1 || b.series().channels() != 1)
        throw DimensionError("eval_univariate requires univariate series; use eval_multivariate");
    return eval_pair(cfg, a, b);
}

double eval_multivariate(const SeriesKernelConfig& cfg, const PreparedSeries& a,
                         const PreparedSeries& b) {
    return eval_pair(cfg, a, b);
}

Eigen::MatrixXd cross_gram_prepared(const SeriesKernelConfig& cfg,
                                    std::span<const PreparedSeries> X,
                                    std::span<const PreparedSeries> Xstar, int threads) {
    const auto n = static_cast<Eigen::Index>(X.size());
    const auto m = static_cast<Eigen::Index>(Xstar.size());
    Eigen::MatrixXd g(n, m);
    parallel_for(static_cast<std::size_t>(n * m), threads, [&](std::size_t cell) {
        const auto i = static_cast<Eigen::Index>(cell) / m;
        const auto j = static_cast<Eigen::Index>(cell) % m;
        g(i, j) = eval_pair(cfg, X[static_cast<std::size_t>(i)], Xstar[static_cast<std::size_t>(j)]);
    });
    return g;
}

Eigen::MatrixXd cross_gram_prepared_self(const SeriesKernelConfig& cfg,
                                         std::span<const PreparedSeries> X, int threads) {
    const auto n = static_cast<Eigen::Index>(X.size());
    Eigen::MatrixXd g(n, n);
    // Upper triangle (including the self-kernel diagonal), mirrored.
    std::vector<std::pair<Eigen::Index, Eigen::Index>> cells;
    cells.reserve(static_cast<std::size_t>(n) * (static_cast<std::size_t>(n) + 1) / 2);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) cells.emplace_back(i, j);
    parallel_for(cells.size(), threads, [&](std::size_t c) {
        const auto [i, j] = cells[c];
        double v = eval_pair(cfg, X[static_cast<std::size_t>(i)], X[static_cast<std::size_t>(j)]);
        g(i, j) = v;
        g(j, i) = v;
    });
    return g;
}

namespace {

std::vector<PreparedSeries> prepare_all(const SeriesKernelConfig& cfg, const Dataset& ds) {
    ds.validate();
    std::vector<PreparedSeries> out;
    out.reserve(ds.size());
    for (const auto& s : ds.series) out.push_back(prepare(cfg, s));
    return out;
}

}  // namespace

Eigen::MatrixXd cross_gram(const SeriesKernelConfig& cfg, const Dataset& X, const Dataset& Xstar,
                           int threads) {
    if (&X == &Xstar) return cross_gram(cfg, X, threads);
    if (X.channels() != Xstar.channels())
        throw DimensionError("datasets have different channel counts");
    auto px = prepare_all(cfg, X);
    auto py = prepare_all(cfg, Xstar);
    return cross_gram_prepared(cfg, px, py, threads);
}

Eigen::MatrixXd cross_gram(const SeriesKernelConfig& cfg, const Dataset& X, int threads) {
    auto px = prepare_all(cfg, X);
    return cross_gram_prepared_self(cfg, px, threads);
}

namespace {

const std::vector<double>& require_shared_grid(const Dataset& ds, const char* which) {
    ds.validate();
    const auto& t0 = ds.series.front().timestamps();
    std::string offenders;
    for (const auto& s : ds.series)
        if (s.timestamps() != t0) offenders += (offenders.empty() ? "" : ", ") + s.id();
    if (!offenders.empty())
        throw ConfigError(std::string(which) +
                          " does not share a common timestamp grid; offending series: " + offenders);
    return t0;
}

// Per-channel value matrices, one (length x N) matrix per channel.
std::vector<Eigen::MatrixXd> channel_matrices(const Dataset& ds) {
    const Eigen::Index d = ds.channels();
    const Eigen::Index len = ds.series.front().length();
    std::vector<Eigen::MatrixXd> out(static_cast<std::size_t>(d));
    for (Eigen::Index c = 0; c < d; ++c) {
        Eigen::MatrixXd m(len, static_cast<Eigen::Index>(ds.size()));
        for (std::size_t i = 0; i < ds.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = ds.series[i].values().col(c);
        out[static_cast<std::size_t>(c)] = std::move(m);
    }
    return out;
}

JitteredCholesky factor_shared(const SeriesKernelConfig& cfg, const std::vector<double>& t,
                               const char* which) {
    Eigen::MatrixXd g = gram(cfg.k_prime, t);
    JitteredCholesky chol = cholesky_with_jitter(g);
    if (!chol.ok)
        throw SingularKernelError(std::string("k' Gram is numerically singular on the shared grid of ") +
                                  which + " (final jitter tried: " + std::to_string(chol.jitter) + ")");
    return chol;
}

}  // namespace

Eigen::MatrixXd cross_gram_shared_grid(const SeriesKernelConfig& cfg, const Dataset& X,
                                       const Dataset& Xstar) {
    const auto& t = require_shared_grid(X, "X");
    const auto& ts = (&X == &Xstar) ? t : require_shared_grid(Xstar, "Xstar");
    if (X.channels() != Xstar.channels())
        throw DimensionError("datasets have different channel counts");
    const Eigen::Index d = X.channels();
    if (cfg.weights && cfg.weights->rows() != d)
        throw DimensionError("weights do not match the channel count");

    JitteredCholesky cl = factor_shared(cfg, t, "X");
    Eigen::MatrixXd kd = (&X == &Xstar) ? gram(cfg.k_dprime, t) : gram(cfg.k_dprime, t, ts);
    // A = k'(t,t)^-1 k''(t,t*) k'(t*,t*)^-1, via two triangular solves.
    Eigen::MatrixXd a = cl.llt.solve(kd);
    if (&X == &Xstar) {
        a = cl.llt.solve(a.transpose()).transpose();
    } else {
        JitteredCholesky cr = factor_shared(cfg, ts, "Xstar");
        a = cr.llt.solve(a.transpose()).transpose();
    }

    auto xs = channel_matrices(X);
    auto ys = (&X == &Xstar) ? xs : channel_matrices(Xstar);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(X.size()),
                                                static_cast<Eigen::Index>(Xstar.size()));
    for (Eigen::Index ci = 0; ci < d; ++ci) {
        for (Eigen::Index cj = 0; cj < d; ++cj) {
            const double w = cfg.weights ? (*cfg.weights)(ci, cj) : (ci == cj ? 1.0 : 0.0);
            if (w == 0.0) continue;
            out.noalias() += w * (xs[static_cast<std::size_t>(ci)].transpose() *
                                  (a * ys[static_cast<std::size_t>(cj)]));
        }
    }
    return out;
}

Eigen::MatrixXd inverse_gram_shared_grid(const SeriesKernelConfig& cfg, const Dataset& X) {
    const auto& t = require_shared_grid(X, "X");
    if (X.channels() != 1)
        throw DimensionError("inverse_gram_shared_grid requires univariate series");
    double w = 1.0;
    if (cfg.weights) {
        w = (*cfg.weights)(0, 0);
        if (w <= 0.0) throw RankError("zero channel weight makes the Gram singular");
    }

    const auto n = static_cast<Eigen::Index>(X.size());
    const auto depth = static_cast<Eigen::Index>(t.size());
    Eigen::MatrixXd xmat(depth, n);
    for (Eigen::Index i = 0; i < n; ++i) xmat.col(i) = X.series[static_cast<std::size_t>(i)].values().col(0);

    // Rank check on the value matrix itself.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(xmat);
    const double smax = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
    const double thresh =
        static_cast<double>(std::max(depth, n)) * std::numeric_limits<double>::epsilon() * smax;
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > thresh) ++rank;
    if (rank < n)
        throw RankError("value matrix has numerical rank " + std::to_string(rank) + " < " +
                        std::to_string(n) + " series (threshold " + std::to_string(thresh) + ")");

    JitteredCholesky cl = factor_shared(cfg, t, "X");
    Eigen::MatrixXd z = cl.llt.solve(xmat);  // k'(t,t)^-1 X

    Eigen::MatrixXd kd = gram(cfg.k_dprime, t);
    Eigen::LLT<Eigen::MatrixXd> kd_llt(kd);
    if (kd_llt.info() != Eigen::Success)
        throw NumericError("k''(t,t) is not positive definite; the inverse formula needs an invertible k''");

    // K = (L^T Z)^T (L^T Z); invert through a QR of the whitened value matrix
    // instead of forming and inverting the N x N Gram.
    Eigen::MatrixXd wmat = kd_llt.matrixL().transpose() * z;  // depth x n
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(wmat);
    Eigen::MatrixXd r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    Eigen::MatrixXd rinv =
        r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(n, n));
    Eigen::MatrixXd inv = rinv * rinv.transpose();
    return inv / w;
}

GramBundle::GramBundle(const Eigen::MatrixXd& gram_in) {
    if (gram_in.rows() != gram_in.cols() || gram_in.rows() < 1)
        throw ConfigError("bundle requires a square matrix");
    gram_ = (gram_in + gram_in.transpose()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram_);
    if (es.info() != Eigen::Success) throw NumericError("eigendecomposition did not converge");
    const Eigen::Index n = gram_.rows();
    // Eigen returns ascending order; store descending.
    q_.resize(n, n);
    v_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        q_.col(i) = es.eigenvectors().col(n - 1 - i);
        v_(i) = es.eigenvalues()(n - 1 - i);
    }
    const double vmax = std::max(v_(0), 0.0);
    const double noise_floor = -1e-8 * vmax;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (v_(i) < noise_floor) ++clamped_;
        if (v_(i) < 0.0) v_(i) = 0.0;
    }
}

Eigen::MatrixXd shifted_solve(const GramBundle& b, double lambda, const Eigen::MatrixXd& rhs) {
    if (lambda < 0.0) throw ConfigError("shifted_solve requires lambda >= 0");
    if (rhs.rows() != b.size())
        throw DimensionError("rhs has " + std::to_string(rhs.rows()) + " rows, expected " +
                             std::to_string(b.size()));
    if (lambda == 0.0 && b.eigvals().minCoeff() == 0.0)
        throw SingularShiftError("Gram has a zero eigenvalue; a positive shift is required");
    Eigen::MatrixXd proj = b.eigvecs().transpose() * rhs;
    proj.array().colwise() /= (b.eigvals().array() + lambda);
    return b.eigvecs() * proj;
}

}  // namespace tsk
