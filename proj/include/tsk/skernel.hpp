#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "tsk/tsdata.hpp"
#include "tsk/vkernels.hpp"

namespace tsk {

// The pair (k', k'') plus an optional d x d channel mixing matrix W.
// W must be symmetric psd; it is checked by eigendecomposition and
// symmetrized on construction. Absent W means identity mixing.
struct SeriesKernelConfig {
    SeriesKernelConfig(VectorKernel k_prime, VectorKernel k_dprime,
                       std::optional<Eigen::MatrixXd> weights = std::nullopt);

    VectorKernel k_prime;
    VectorKernel k_dprime;
    std::optional<Eigen::MatrixXd> weights;

    std::string describe() const;
};

nlohmann::json series_kernel_config_to_json(const SeriesKernelConfig& cfg);
SeriesKernelConfig series_kernel_config_from_json(const nlohmann::json& j);

// A series together with the cached inverse of k'(t, t), reusable across all
// pairings that involve it. Owns a copy of the series, so it stays valid
// independently of the source dataset.
class PreparedSeries {
public:
    const TimeSeries& series() const { return series_; }
    const Eigen::MatrixXd& kp_inv() const { return kp_inv_; }
    const VectorKernel& k_prime() const { return k_prime_; }
    // Diagonal jitter that was added to make the Cholesky succeed; 0 normally.
    double jitter() const { return jitter_; }
    // Content hash used to pick one canonical orientation per pair, so
    // eval(a, b) and eval(b, a) run the exact same arithmetic.
    std::uint64_t content_key() const { return content_key_; }

private:
    PreparedSeries(TimeSeries series, Eigen::MatrixXd kp_inv, VectorKernel k_prime, double jitter);
    friend PreparedSeries prepare(const SeriesKernelConfig&, const TimeSeries&);

    TimeSeries series_;
    Eigen::MatrixXd kp_inv_;
    VectorKernel k_prime_;
    double jitter_;
    std::uint64_t content_key_ = 0;
};

// Factors k'(t, t) once. If the Cholesky fails, retries with escalating
// diagonal jitter 1e-10 * trace/n up to 1e-4 * trace/n (x10 steps), then
// raises SingularKernelError naming the series and the final jitter tried.
PreparedSeries prepare(const SeriesKernelConfig& cfg, const TimeSeries& s);

// x' * k'(t,t)^-1 * k''(t,s) * k'(s,s)^-1 * y for univariate series.
// Exactly symmetric in (a, b): one canonical orientation is computed.
double eval_univariate(const SeriesKernelConfig& cfg, const PreparedSeries& a, const PreparedSeries& b);

// Weighted double sum over coordinate series; the middle matrix
// k'(t,t)^-1 k''(t,s) k'(s,s)^-1 is formed once for all channel pairs.
// With d = 1 and W = [[1]] this is bit-identical to eval_univariate.
double eval_multivariate(const SeriesKernelConfig& cfg, const PreparedSeries& a, const PreparedSeries& b);

// N x M matrix of pairwise kernel values; every series is prepared exactly
// once. The self variant computes the upper triangle and mirrors it.
Eigen::MatrixXd cross_gram(const SeriesKernelConfig& cfg, const Dataset& X, const Dataset& Xstar,
                           int threads = 1);
Eigen::MatrixXd cross_gram(const SeriesKernelConfig& cfg, const Dataset& X, int threads = 1);

Eigen::MatrixXd cross_gram_prepared(const SeriesKernelConfig& cfg,
                                    std::span<const PreparedSeries> X,
                                    std::span<const PreparedSeries> Xstar, int threads = 1);
Eigen::MatrixXd cross_gram_prepared_self(const SeriesKernelConfig& cfg,
                                         std::span<const PreparedSeries> X, int threads = 1);

// Shared-grid factorization: when all of X share one timestamp vector t and
// all of Xstar share t*, the whole cross-Gram needs two factorizations total.
Eigen::MatrixXd cross_gram_shared_grid(const SeriesKernelConfig& cfg, const Dataset& X,
                                       const Dataset& Xstar);

// Inverse of cross_gram(cfg, X, X) on a shared grid without forming and
// inverting the N x N Gram. Requires univariate X whose (D x N) value matrix
// has full column rank (so D >= N).
Eigen::MatrixXd inverse_gram_shared_grid(const SeriesKernelConfig& cfg, const Dataset& X);

// Symmetric eigendecomposition of a Gram matrix with psd clamping:
// eigenvalues in [-1e-8 * max, 0) are treated as floating-point noise and
// clamped to zero silently; anything below that threshold is clamped and
// counted in clamped().
class GramBundle {
public:
    explicit GramBundle(const Eigen::MatrixXd& gram);

    const Eigen::MatrixXd& gram() const { return gram_; }
    const Eigen::MatrixXd& eigvecs() const { return q_; }
    const Eigen::VectorXd& eigvals() const { return v_; }  // descending, >= 0
    int clamped() const { return clamped_; }
    Eigen::Index size() const { return v_.size(); }

private:
    Eigen::MatrixXd gram_;
    Eigen::MatrixXd q_;
    Eigen::VectorXd v_;
    int clamped_ = 0;
};

inline GramBundle bundle(const Eigen::MatrixXd& gram) { return GramBundle(gram); }

// (K + lambda I)^-1 * rhs via the cached decomposition; O(N^2) per column.
Eigen::MatrixXd shifted_solve(const GramBundle& b, double lambda, const Eigen::MatrixXd& rhs);

}  // namespace tsk
