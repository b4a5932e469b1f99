#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "test_support.hpp"
#include "tsk/errors.hpp"
#include "tsk/skernel.hpp"

using namespace tsk;

namespace {

TimeSeries univariate(const std::string& id, std::vector<double> t, std::vector<double> v) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
    return TimeSeries(id, std::move(t), std::move(m));
}

SeriesKernelConfig menu_config(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> kind(0, 2);
    std::uniform_real_distribution<double> gamma(0.01, 2.0);
    std::uniform_real_distribution<double> lam(0.01, 1.0);
    auto mk = [&](bool with_lam) {
        const double l = with_lam ? lam(rng) : 0.0;
        switch (kind(rng)) {
            case 0: return VectorKernel::linear(with_lam ? std::max(l, 0.05) : 0.0);
            case 1: return VectorKernel::rbf(gamma(rng), l);
            default: return VectorKernel::laplacian(gamma(rng), l);
        }
    };
    return SeriesKernelConfig(mk(true), mk(false));
}

}  // namespace

TEST_CASE("prepare inverts the within-series Gram") {
    // k' = rbf gamma=1 lambda=1 on t=[0,1]: G = [[2, e^-1], [e^-1, 2]]
    SeriesKernelConfig cfg(VectorKernel::rbf(1.0, 1.0), VectorKernel::linear());
    TimeSeries s = univariate("s", {0.0, 1.0}, {1.0, 2.0});
    PreparedSeries p = prepare(cfg, s);
    const double e1 = std::exp(-1.0);
    const double det = 4.0 - e1 * e1;
    Eigen::MatrixXd expected(2, 2);
    expected << 2.0 / det, -e1 / det, -e1 / det, 2.0 / det;
    CHECK(testing::max_rel_diff(p.kp_inv(), expected) < 1e-12);
    CHECK(p.jitter() == 0.0);

    // kp_inv * k'(t,t) ~ I within 1e-8 Frobenius-relative
    Eigen::MatrixXd g = gram(cfg.k_prime, s.timestamps());
    Eigen::MatrixXd prod = p.kp_inv() * g;
    CHECK((prod - Eigen::MatrixXd::Identity(2, 2)).norm() / prod.norm() < 1e-8);
}

TEST_CASE("prepare with dominant delta approaches a scaled identity") {
    SeriesKernelConfig cfg(VectorKernel::rbf(0.5, 1e6), VectorKernel::linear());
    TimeSeries s = univariate("s", {0.0, 3.0, 7.0}, {1.0, 2.0, 3.0});
    PreparedSeries p = prepare(cfg, s);
    Eigen::MatrixXd expected = 1e-6 * Eigen::MatrixXd::Identity(3, 3);
    // the limit is approached at rate 1/lambda^2
    CHECK((p.kp_inv() - expected).cwiseAbs().maxCoeff() < 10.0 / (1e6 * 1e6));
}

TEST_CASE("prepare handles tied timestamps deterministically") {
    // rbf with a tie: rank-deficient Gram rescued by jitter, reported as such
    SeriesKernelConfig cfg(VectorKernel::rbf(1.0), VectorKernel::linear());
    TimeSeries tied = univariate("tied", {1.0, 1.0}, {1.0, 2.0});
    PreparedSeries p1 = prepare(cfg, tied);
    PreparedSeries p2 = prepare(cfg, tied);
    CHECK(p1.jitter() > 0.0);
    CHECK(p1.jitter() == p2.jitter());
    CHECK(p1.kp_inv() == p2.kp_inv());

    // zero Gram cannot be rescued at any jitter level
    SeriesKernelConfig zero(VectorKernel::linear(), VectorKernel::linear());
    TimeSeries origin = univariate("origin", {0.0, 0.0}, {1.0, 2.0});
    CHECK_THROWS_WITH_AS(prepare(zero, origin), doctest::Contains("origin"), SingularKernelError);
}

TEST_CASE("univariate evaluation on hand-sized instances") {
    // all 1x1 matrices: k'(1,1) = 1 under rbf lambda=0
    SeriesKernelConfig cfg(VectorKernel::rbf(1.0), VectorKernel::linear());
    TimeSeries a = univariate("a", {1.0}, {2.0});
    TimeSeries b = univariate("b", {1.0}, {3.0});
    PreparedSeries pa = prepare(cfg, a);
    PreparedSeries pb = prepare(cfg, b);
    CHECK(eval_univariate(cfg, pa, pb) == doctest::Approx(6.0).epsilon(1e-12));

    // disjoint timestamps, hand-assembled oracle
    SeriesKernelConfig cfg2(VectorKernel::linear(1.0), VectorKernel::linear());
    TimeSeries c = univariate("c", {0.0, 1.0}, {1.0, 2.0});
    TimeSeries d = univariate("d", {2.0}, {3.0});
    // k'(t,t) = [[1,0],[0,2]], k'(s,s) = [[5]], k''(t,s) = [[0],[2]]
    // x' inv k'' inv y = [1,2] diag(1,1/2) [0,2]' (1/5) 3 = (2)(1/5)(3) = 1.2
    PreparedSeries pc = prepare(cfg2, c);
    PreparedSeries pd = prepare(cfg2, d);
    CHECK(eval_univariate(cfg2, pc, pd) == doctest::Approx(1.2).epsilon(1e-12));
    CHECK(eval_univariate(cfg2, pc, pd) ==
          doctest::Approx(testing::naive_series_kernel(cfg2, c, d)).epsilon(1e-12));

    // zero values annihilate
    TimeSeries z = univariate("z", {0.0, 1.0}, {0.0, 0.0});
    PreparedSeries pz = prepare(cfg2, z);
    CHECK(eval_univariate(cfg2, pz, pd) == 0.0);

    // multivariate input is rejected
    Eigen::MatrixXd mv(1, 2);
    mv << 1.0, 2.0;
    TimeSeries m("m", {0.0}, mv);
    PreparedSeries pm = prepare(cfg2, m);
    CHECK_THROWS_AS(eval_univariate(cfg2, pm, pm), DimensionError);
}

TEST_CASE("evaluation matches the dense-matrix oracle on random instances") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> len(2, 9);
    for (int rep = 0; rep < 60; ++rep) {
        SeriesKernelConfig cfg = menu_config(rng);
        TimeSeries a = testing::random_series(rng, len(rng), 1, "a");
        TimeSeries b = testing::random_series(rng, len(rng), 1, "b");
        PreparedSeries pa = prepare(cfg, a);
        PreparedSeries pb = prepare(cfg, b);
        const double got = eval_univariate(cfg, pa, pb);
        const double want = testing::naive_series_kernel(cfg, a, b);
        CHECK(testing::rel_diff(got, want, 1e-9) < 1e-10);
    }
}

TEST_CASE("evaluation is exactly symmetric") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        SeriesKernelConfig cfg = menu_config(rng);
        TimeSeries a = testing::random_series(rng, 5, 2, "a");
        TimeSeries b = testing::random_series(rng, 7, 2, "b");
        PreparedSeries pa = prepare(cfg, a);
        PreparedSeries pb = prepare(cfg, b);
        CHECK(eval_multivariate(cfg, pa, pb) == eval_multivariate(cfg, pb, pa));
    }
}

TEST_CASE("evaluation is bilinear in the value vectors") {
    std::mt19937_64 rng(12);
    SeriesKernelConfig cfg(VectorKernel::rbf(0.3, 0.1), VectorKernel::rbf(0.7));
    auto t = testing::random_timestamps(rng, 6);
    auto s = testing::random_timestamps(rng, 4);
    std::normal_distribution<double> g;
    std::vector<double> x1(6), x2(6), y(4);
    for (auto& v : x1) v = g(rng);
    for (auto& v : x2) v = g(rng);
    for (auto& v : y) v = g(rng);
    const double alpha = 0.7, beta = -1.3;
    std::vector<double> mix(6);
    for (int i = 0; i < 6; ++i) mix[static_cast<std::size_t>(i)] =
        alpha * x1[static_cast<std::size_t>(i)] + beta * x2[static_cast<std::size_t>(i)];

    auto mk = [&](const std::vector<double>& v) { return univariate("u", {t}, v); };
    PreparedSeries pb = prepare(cfg, univariate("y", {s}, y));
    PreparedSeries p1 = prepare(cfg, mk(x1));
    PreparedSeries p2 = prepare(cfg, mk(x2));
    PreparedSeries pmix = prepare(cfg, mk(mix));
    const double lhs = eval_univariate(cfg, pmix, pb);
    const double rhs = alpha * eval_univariate(cfg, p1, pb) + beta * eval_univariate(cfg, p2, pb);
    CHECK(testing::rel_diff(lhs, rhs, 1e-9) < 1e-10);
}

TEST_CASE("disjoint-support pairs stay finite and decay under rbf") {
    SeriesKernelConfig cfg(VectorKernel::rbf(1.0, 0.5), VectorKernel::rbf(1.0));
    TimeSeries a = univariate("a", {0.0, 1.0}, {1.0, -2.0});
    TimeSeries b = univariate("b", {100.0, 101.0}, {3.0, 4.0});
    PreparedSeries pa = prepare(cfg, a);
    PreparedSeries pb = prepare(cfg, b);
    const double v = eval_univariate(cfg, pa, pb);
    CHECK(std::isfinite(v));
    CHECK(std::abs(v) < 1e-300);  // exp(-99^2) underflows
    const double near = eval_univariate(cfg, pa, pa);
    CHECK(std::abs(near) > 0.0);
}

TEST_CASE("multivariate evaluation") {
    std::mt19937_64 rng(13);
    SeriesKernelConfig base(VectorKernel::rbf(0.4, 0.2), VectorKernel::laplacian(0.5));

    // d=1 with W=[[1]] is bit-identical to the univariate path
    Eigen::MatrixXd w1 = Eigen::MatrixXd::Ones(1, 1);
    SeriesKernelConfig cfg1(base.k_prime, base.k_dprime, w1);
    TimeSeries a = testing::random_series(rng, 5, 1, "a");
    TimeSeries b = testing::random_series(rng, 6, 1, "b");
    PreparedSeries pa = prepare(cfg1, a);
    PreparedSeries pb = prepare(cfg1, b);
    CHECK(eval_multivariate(cfg1, pa, pb) == eval_univariate(base, pa, pb));

    // d=2, W=I: sum of the per-channel univariate values
    TimeSeries a2 = testing::random_series(rng, 5, 2, "a2");
    TimeSeries b2 = testing::random_series(rng, 4, 2, "b2");
    PreparedSeries pa2 = prepare(base, a2);
    PreparedSeries pb2 = prepare(base, b2);
    const double whole = eval_multivariate(base, pa2, pb2);
    double parts = 0.0;
    for (int c = 0; c < 2; ++c) {
        TimeSeries ac = univariate("ac", a2.timestamps(),
                                   {a2.values().col(c).data(),
                                    a2.values().col(c).data() + a2.length()});
        TimeSeries bc = univariate("bc", b2.timestamps(),
                                   {b2.values().col(c).data(),
                                    b2.values().col(c).data() + b2.length()});
        parts += eval_univariate(base, prepare(base, ac), prepare(base, bc));
    }
    CHECK(testing::rel_diff(whole, parts, 1e-9) < 1e-12);

    // zero weights annihilate
    SeriesKernelConfig cfg0(base.k_prime, base.k_dprime, Eigen::MatrixXd::Zero(2, 2));
    CHECK(eval_multivariate(cfg0, prepare(cfg0, a2), prepare(cfg0, b2)) == 0.0);

    // oracle agreement with a non-trivial psd W
    Eigen::MatrixXd w(2, 2);
    w << 2.0, 0.5, 0.5, 1.0;
    SeriesKernelConfig cfgw(base.k_prime, base.k_dprime, w);
    const double got = eval_multivariate(cfgw, prepare(cfgw, a2), prepare(cfgw, b2));
    CHECK(testing::rel_diff(got, testing::naive_series_kernel(cfgw, a2, b2), 1e-9) < 1e-10);
}

TEST_CASE("weights are validated at construction") {
    Eigen::MatrixXd asym(2, 2);
    asym << 1.0, 0.5, -0.5, 1.0;
    CHECK_THROWS_AS(SeriesKernelConfig(VectorKernel::linear(), VectorKernel::linear(), asym),
                    ConfigError);
    Eigen::MatrixXd indef(2, 2);
    indef << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_AS(SeriesKernelConfig(VectorKernel::linear(), VectorKernel::linear(), indef),
                    ConfigError);
}

TEST_CASE("cross gram basics") {
    std::mt19937_64 rng(21);
    SeriesKernelConfig cfg(VectorKernel::rbf(0.5, 0.3), VectorKernel::rbf(0.2));

    Dataset one;
    one.series.push_back(testing::random_series(rng, 4, 1, "solo"));
    Eigen::MatrixXd g1 = cross_gram(cfg, one);
    CHECK(g1.rows() == 1);
    CHECK(g1(0, 0) >= 0.0);  // self-kernel is a squared norm

    Dataset x = testing::random_dataset(rng, 2, 3, 6, 1);
    Dataset y = testing::random_dataset(rng, 3, 3, 6, 1);
    Eigen::MatrixXd gxy = cross_gram(cfg, x, y);
    Eigen::MatrixXd gyx = cross_gram(cfg, y, x);
    CHECK(gxy.rows() == 2);
    CHECK(gxy.cols() == 3);
    CHECK(gxy == gyx.transpose());  // exact, thanks to canonical orientation

    Dataset z = testing::random_dataset(rng, 3, 3, 7, 1);
    Eigen::MatrixXd gz = cross_gram(cfg, z);
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) {
            CHECK(gz(i, j) == gz(j, i));
            const double naive =
                testing::naive_series_kernel(cfg, z.series[static_cast<std::size_t>(i)],
                                             z.series[static_cast<std::size_t>(j)]);
            CHECK(testing::rel_diff(gz(i, j), naive, 1e-9) < 1e-10);
        }
}

TEST_CASE("cross gram is identical across thread counts") {
    std::mt19937_64 rng(22);
    SeriesKernelConfig cfg(VectorKernel::laplacian(0.4, 0.2), VectorKernel::rbf(0.6));
    Dataset x = testing::random_dataset(rng, 7, 3, 8, 2);
    Eigen::MatrixXd g1 = cross_gram(cfg, x, 1);
    Eigen::MatrixXd g4 = cross_gram(cfg, x, 4);
    CHECK(g1 == g4);
}

TEST_CASE("shared-grid factorization agrees with the pairwise path") {
    std::mt19937_64 rng(23);
    SeriesKernelConfig cfg(VectorKernel::rbf(0.3, 0.1), VectorKernel::laplacian(0.8));
    Dataset x = testing::random_shared_grid_dataset(rng, 6, 9, 1);
    Eigen::MatrixXd fast = cross_gram_shared_grid(cfg, x, x);
    Eigen::MatrixXd slow = cross_gram(cfg, x);
    CHECK(testing::max_rel_diff(fast, slow) < 1e-8);

    // multivariate with weights
    Eigen::MatrixXd w(2, 2);
    w << 1.0, 0.3, 0.3, 2.0;
    SeriesKernelConfig cfgw(cfg.k_prime, cfg.k_dprime, w);
    Dataset xm = testing::random_shared_grid_dataset(rng, 5, 7, 2);
    CHECK(testing::max_rel_diff(cross_gram_shared_grid(cfgw, xm, xm), cross_gram(cfgw, xm)) < 1e-8);

    // distinct grids on the two sides
    Dataset ym = testing::random_shared_grid_dataset(rng, 4, 6, 1);
    Eigen::MatrixXd gxy = cross_gram_shared_grid(cfg, x, ym);
    Eigen::MatrixXd ref = cross_gram(cfg, x, ym);
    CHECK(testing::max_rel_diff(gxy, ref) < 1e-8);

    // single series on each side reduces to one evaluation
    Dataset xs, ys;
    xs.series.push_back(x.series[0]);
    ys.series.push_back(ym.series[0]);
    Eigen::MatrixXd g11 = cross_gram_shared_grid(cfg, xs, ys);
    PreparedSeries pa = prepare(cfg, xs.series[0]);
    PreparedSeries pb = prepare(cfg, ys.series[0]);
    CHECK(testing::rel_diff(g11(0, 0), eval_univariate(cfg, pa, pb), 1e-9) < 1e-10);

    // zero values give a zero matrix
    Dataset zeros = xs;
    zeros.series[0] = TimeSeries("z", xs.series[0].timestamps(),
                                 Eigen::MatrixXd::Zero(xs.series[0].length(), 1));
    CHECK(cross_gram_shared_grid(cfg, zeros, ys).cwiseAbs().maxCoeff() == 0.0);

    // heterogeneous grids are rejected with the offender named
    Dataset bad = x;
    auto t2 = bad.series[2].timestamps();
    t2.back() += 0.5;
    bad.series[2] = TimeSeries("odd_one", t2, bad.series[2].values());
    CHECK_THROWS_WITH_AS(cross_gram_shared_grid(cfg, bad, bad), doctest::Contains("odd_one"),
                         ConfigError);
}

TEST_CASE("inverse gram via the value-matrix pseudo-inverse") {
    std::mt19937_64 rng(24);
    SeriesKernelConfig cfg(VectorKernel::rbf(0.5, 0.4), VectorKernel::rbf(0.3));

    // square invertible case against the dense oracle
    Dataset x = testing::random_shared_grid_dataset(rng, 2, 2, 1);
    Eigen::MatrixXd inv = inverse_gram_shared_grid(cfg, x);
    Eigen::MatrixXd prod = inv * cross_gram(cfg, x);
    CHECK((prod - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-6);

    // taller-than-wide value matrices (more observations than series)
    Dataset tall = testing::random_shared_grid_dataset(rng, 4, 9, 1);
    Eigen::MatrixXd inv2 = inverse_gram_shared_grid(cfg, tall);
    Eigen::MatrixXd prod2 = inv2 * cross_gram(cfg, tall);
    CHECK((prod2 - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-6);

    // pigeonhole rank deficiency: more series than observations
    Dataset wide = testing::random_shared_grid_dataset(rng, 3, 2, 1);
    CHECK_THROWS_WITH_AS(inverse_gram_shared_grid(cfg, wide), doctest::Contains("rank"), RankError);

    // duplicated series also fail the rank check
    Dataset dup = testing::random_shared_grid_dataset(rng, 2, 5, 1);
    dup.series[1] = TimeSeries("copy", dup.series[0].timestamps(), dup.series[0].values());
    CHECK_THROWS_AS(inverse_gram_shared_grid(cfg, dup), RankError);
}

TEST_CASE("psd property of series-kernel self-Grams") {
    std::mt19937_64 rng(25);
    for (int rep = 0; rep < 4; ++rep) {
        SeriesKernelConfig cfg = menu_config(rng);
        Dataset ds = testing::random_dataset(rng, 30, 3, 10, rep % 2 == 0 ? 1 : 2);
        Eigen::MatrixXd g = cross_gram(cfg, ds);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
        const double vmax = es.eigenvalues().maxCoeff();
        CHECK(es.eigenvalues().minCoeff() >= -1e-8 * std::max(vmax, 0.0));
    }
}

TEST_CASE("gram bundle eigenstructure") {
    Eigen::MatrixXd d2(2, 2);
    d2 << 2.0, 0.0, 0.0, 1.0;
    GramBundle b(d2);
    CHECK(b.eigvals()(0) == 2.0);
    CHECK(b.eigvals()(1) == 1.0);
    CHECK(std::abs(std::abs(b.eigvecs()(0, 0)) - 1.0) < 1e-14);
    CHECK(b.clamped() == 0);

    Eigen::MatrixXd ones(2, 2);
    ones << 1.0, 1.0, 1.0, 1.0;
    GramBundle b2(ones);
    CHECK(b2.eigvals()(0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(b2.eigvals()(1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));

    std::mt19937_64 rng(26);
    Eigen::MatrixXd k = testing::random_psd(rng, 12);
    GramBundle b3(k);
    Eigen::MatrixXd recon =
        b3.eigvecs() * b3.eigvals().asDiagonal() * b3.eigvecs().transpose();
    CHECK((recon - b3.gram()).norm() / b3.gram().norm() < 1e-8);
    CHECK(b3.eigvals().minCoeff() >= 0.0);

    // a real negative eigenvalue is clamped and counted
    Eigen::MatrixXd neg(2, 2);
    neg << 1.0, 0.0, 0.0, -0.5;
    GramBundle b4(neg);
    CHECK(b4.clamped() == 1);
    CHECK(b4.eigvals().minCoeff() == 0.0);
}

TEST_CASE("shifted solve reuses the decomposition") {
    Eigen::MatrixXd k(2, 2);
    k << 2.0, 0.0, 0.0, 1.0;
    GramBundle b(k);
    Eigen::MatrixXd inv = shifted_solve(b, 1.0, Eigen::MatrixXd::Identity(2, 2));
    CHECK(inv(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(inv(1, 1) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(std::abs(inv(0, 1)) < 1e-15);

    // lambda = 0 with an invertible K: K^-1 K = I
    Eigen::MatrixXd self = shifted_solve(b, 0.0, k);
    CHECK((self - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-8);

    // lambda = 0 with a singular K is refused
    Eigen::MatrixXd ones(2, 2);
    ones << 1.0, 1.0, 1.0, 1.0;
    GramBundle bs(ones);
    CHECK_THROWS_AS(shifted_solve(bs, 0.0, Eigen::MatrixXd::Identity(2, 2)), SingularShiftError);

    // random psd vs a dense LU-inverse oracle across a lambda grid
    std::mt19937_64 rng(27);
    Eigen::MatrixXd kk = testing::random_psd(rng, 10, 0.1);
    GramBundle bb(kk);
    for (double lam : {1e-3, 0.37, 5.0}) {
        Eigen::MatrixXd got = shifted_solve(bb, lam, Eigen::MatrixXd::Identity(10, 10));
        Eigen::MatrixXd want =
            (bb.gram() + lam * Eigen::MatrixXd::Identity(10, 10)).inverse();
        CHECK(testing::max_rel_diff(got, want) < 1e-10);
    }
}

TEST_CASE("series kernel config JSON round trip") {
    Eigen::MatrixXd w(2, 2);
    w << 1.0, 0.2, 0.2, 0.5;
    SeriesKernelConfig cfg(VectorKernel::rbf(0.1, 1e-3), VectorKernel::laplacian(2.0), w);
    SeriesKernelConfig back = series_kernel_config_from_json(series_kernel_config_to_json(cfg));
    CHECK(back.k_prime == cfg.k_prime);
    CHECK(back.k_dprime == cfg.k_dprime);
    REQUIRE(back.weights.has_value());
    CHECK((*back.weights - *cfg.weights).cwiseAbs().maxCoeff() == 0.0);
}
