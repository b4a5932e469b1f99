#include <doctest.h>

#include <numeric>
#include <random>
#include <set>

#include "test_support.hpp"
#include "tsk/baselines.hpp"
#include "tsk/errors.hpp"
#include "tsk/eval.hpp"

using namespace tsk;

TEST_CASE("kfold partitions deterministically") {
    auto folds = kfold_indices(10, 5, 123);
    REQUIRE(folds.size() == 5);
    std::set<std::size_t> seen;
    for (const auto& f : folds) {
        CHECK(f.test.size() == 2);
        CHECK(f.train.size() == 8);
        for (auto i : f.test) CHECK(seen.insert(i).second);
    }
    CHECK(seen.size() == 10);

    auto folds93 = kfold_indices(93, 5, 7);
    std::multiset<std::size_t> sizes;
    for (const auto& f : folds93) sizes.insert(f.test.size());
    CHECK(sizes == std::multiset<std::size_t>{18, 18, 19, 19, 19});

    auto again = kfold_indices(93, 5, 7);
    for (std::size_t i = 0; i < folds93.size(); ++i) {
        CHECK(folds93[i].test == again[i].test);
        CHECK(folds93[i].train == again[i].train);
    }
    CHECK(kfold_indices(93, 5, 8)[0].test != folds93[0].test);
    CHECK_THROWS_AS(kfold_indices(3, 5, 1), ConfigError);

    std::vector<std::string> ids{"a", "b", "c", "d", "e"};
    auto named = kfold_series(ids, 2, 1);
    CHECK(named.size() == 2);
    CHECK(named[0].first.size() + named[0].second.size() == 5);
}

TEST_CASE("error estimator formulas") {
    Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(3, 2);
    ErrorEstimate e0 = estimate_error(zero);
    CHECK(e0.eps_hat == 0.0);
    CHECK(e0.v_hat == 0.0);

    Eigen::MatrixXd l(2, 1);
    l << 1.0, 4.0;
    ErrorEstimate e = estimate_error(l);
    CHECK(e.eps_hat == 2.5);
    CHECK(e.sigma(0, 0) == 4.5);
    CHECK(e.v_hat == 2.25);

    // constant rows have no across-series variance
    Eigen::MatrixXd c(3, 2);
    c << 1.0, 2.0, 1.0, 2.0, 1.0, 2.0;
    CHECK(estimate_error(c).v_hat == 0.0);

    Eigen::MatrixXd single(1, 3);
    CHECK_THROWS_AS(estimate_error(single), InsufficientSampleError);

    // grand mean equals the flat mean of all N*K entries
    std::mt19937_64 rng(71);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    Eigen::MatrixXd r(7, 4);
    for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = u(rng);
    CHECK(estimate_error(r).eps_hat == doctest::Approx(r.sum() / 28.0).epsilon(1e-12));
}

TEST_CASE("delta-method rmse report") {
    auto [rmse, se] = rmse_report(4.0, 1.0);
    CHECK(rmse == 2.0);
    CHECK(se == 0.25);
    auto [r0, s0] = rmse_report(0.0, 1.0);
    CHECK(r0 == 0.0);
    CHECK(s0 == 0.0);
}

TEST_CASE("jackknife accuracy standard error") {
    std::vector<int> correct{1, 1, 0, 1};
    auto [acc, se] = jackknife_accuracy_se(correct);
    CHECK(acc == 0.75);
    CHECK(se == doctest::Approx(0.25).epsilon(1e-12));

    std::vector<int> all{1, 1, 1};
    CHECK(jackknife_accuracy_se(all).second == 0.0);

    std::vector<int> one{1};
    CHECK_THROWS_AS(jackknife_accuracy_se(one), InsufficientSampleError);

    // agrees with the closed form sqrt(p(1-p)/(n-1)) for 0/1 data
    std::mt19937_64 rng(72);
    std::vector<int> big(200);
    for (auto& v : big) v = (rng() % 4) ? 1 : 0;
    auto [a2, s2] = jackknife_accuracy_se(big);
    CHECK(s2 == doctest::Approx(std::sqrt(a2 * (1 - a2) / 199.0)).epsilon(1e-10));
}

TEST_CASE("one-tailed t-test against the best baseline") {
    TTestResult r = t_test_vs_best_baseline({2.5, 0.01}, {3.0, 0.03}, 93);
    CHECK(r.t == doctest::Approx(-2.5).epsilon(1e-12));
    CHECK(r.df == 18);
    CHECK(r.stars == "**");  // t_crit(18): 1.7341 at 95%, 2.5524 at 99%

    TTestResult strong = t_test_vs_best_baseline({2.0, 0.01}, {3.0, 0.03}, 93);
    CHECK(strong.stars == "***");

    TTestResult weak = t_test_vs_best_baseline({2.9, 0.01}, {3.0, 0.03}, 93);
    CHECK(weak.stars.empty());

    TTestResult mild = t_test_vs_best_baseline({2.64, 0.01}, {3.0, 0.03}, 93);
    CHECK(mild.t == doctest::Approx(-1.8).epsilon(1e-10));
    CHECK(mild.stars == "**");

    TTestResult equal = t_test_vs_best_baseline({3.0, 0.02}, {3.0, 0.02}, 50);
    CHECK(equal.t == 0.0);
    CHECK(equal.stars.empty());

    CHECK_THROWS_AS(t_test_vs_best_baseline({1.0, 0.0}, {2.0, 0.0}, 50), NumericError);
}

TEST_CASE("monte-carlo consistency of the variance estimator") {
    // iid losses: the spread of eps_hat across resamples should match v_hat
    std::mt19937_64 rng(20240809);
    std::normal_distribution<double> g;
    const int n = 50, k = 3, reps = 1000;
    std::vector<double> eps(reps), vs(reps);
    for (int r = 0; r < reps; ++r) {
        Eigen::MatrixXd losses(n, k);
        for (Eigen::Index i = 0; i < losses.size(); ++i) {
            const double z = g(rng);
            losses(i) = z * z;
        }
        ErrorEstimate e = estimate_error(losses);
        eps[static_cast<std::size_t>(r)] = e.eps_hat;
        vs[static_cast<std::size_t>(r)] = e.v_hat;
    }
    const double mean_eps = std::accumulate(eps.begin(), eps.end(), 0.0) / reps;
    double emp_var = 0.0;
    for (double v : eps) emp_var += (v - mean_eps) * (v - mean_eps);
    emp_var /= (reps - 1);
    const double mean_v = std::accumulate(vs.begin(), vs.end(), 0.0) / reps;
    CHECK(emp_var / mean_v > 0.85);
    CHECK(emp_var / mean_v < 1.15);
}

TEST_CASE("param grid defaults and enumeration order") {
    ParamGrid g = ParamGrid::defaults_regression();
    CHECK(g.gamma_prime.size() == 6);
    CHECK(g.lambda.size() == 7);
    CHECK(g.c_or_noise.size() == 7);
    CHECK(g.lambda.front() == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(g.lambda.back() == doctest::Approx(1e2).epsilon(1e-12));
    CHECK(ParamGrid::defaults_classification().c_or_noise.size() == 6);

    // canonical order: k' kind, k'' kind, gamma', gamma'', lambda
    ParamGrid small;
    small.k_prime_kinds = {KernelKind::linear, KernelKind::rbf};
    small.k_dprime_kinds = {KernelKind::linear, KernelKind::rbf};
    small.gamma_prime = {0.1, 1.0};
    small.gamma_dprime = {0.5};
    small.lambda = {1e-3, 1e-2};
    small.c_or_noise = {1.0};
    auto cells = enumerate_kernel_cells(small);
    // (lin,lin): 1*1*2; (lin,rbf): 1*1*2; (rbf,lin): 2*1*2; (rbf,rbf): 2*1*2
    REQUIRE(cells.size() == 12);
    CHECK(cells[0].k_prime.kind() == KernelKind::linear);
    CHECK(cells[0].k_dprime.kind() == KernelKind::linear);
    CHECK(cells[0].k_prime.lambda() == 1e-3);
    CHECK(cells[1].k_prime.lambda() == 1e-2);
    CHECK(cells[2].k_dprime.kind() == KernelKind::rbf);
    CHECK(cells[4].k_prime.kind() == KernelKind::rbf);
    CHECK(cells[4].k_prime.gamma() == 0.1);
    CHECK(cells[6].k_prime.gamma() == 1.0);
    for (std::size_t i = 0; i < cells.size(); ++i) CHECK(cells[i].index == i);
    CHECK(small.size() == 12);
}

TEST_CASE("nested cv with a singleton grid equals plain 5-fold cross-validation") {
    std::mt19937_64 rng(73);
    Dataset ds = testing::random_shared_grid_dataset(rng, 15, 8, 1);
    ParamGrid grid;
    grid.k_prime_kinds = {KernelKind::rbf};
    grid.k_dprime_kinds = {KernelKind::rbf};
    grid.gamma_prime = {0.5};
    grid.gamma_dprime = {0.2};
    grid.lambda = {0.1};
    grid.c_or_noise = {0.01};
    const std::uint64_t seed = 99;
    CvResult cv = nested_cv_forecast(ForecasterKind::series_gpr, ds, 2, grid, 5, 5, seed);

    // oracle: plain 5-fold CV of that one configuration
    SeriesKernelConfig cfg(VectorKernel::rbf(0.5, 0.1), VectorKernel::rbf(0.2));
    auto folds = kfold_indices(ds.size(), 5, seed);
    std::vector<double> eps;
    for (const auto& f : folds) {
        Dataset tr = ds.subset(f.train);
        Dataset te = ds.subset(f.test);
        SeriesSplit str = split_forecast(tr, 2);
        SeriesSplit ste = split_forecast(te, 2);
        GprModel m = GprModel::fit(cfg, 0.01, tr, str);
        Eigen::MatrixXd pred = m.predict(slice_train_window(te, ste));
        Eigen::MatrixXd truth = test_window_values(te, ste);
        eps.push_back(estimate_error((pred - truth).array().square()).eps_hat);
    }
    const double want = std::accumulate(eps.begin(), eps.end(), 0.0) / 5.0;
    CHECK(cv.eps_cv == doctest::Approx(want).epsilon(1e-12));
    CHECK(cv.grid_choice_histogram.size() == 1);
    CHECK(cv.grid_choice_histogram.begin()->second == 5);

    // determinism end-to-end
    CvResult cv2 = nested_cv_forecast(ForecasterKind::series_gpr, ds, 2, grid, 5, 5, seed);
    CHECK(cv.eps_cv == cv2.eps_cv);
    CHECK(cv.v_cv == cv2.v_cv);
}

TEST_CASE("inner selection matches a brute-force grid sweep") {
    std::mt19937_64 rng(74);
    Dataset ds = testing::random_shared_grid_dataset(rng, 20, 9, 1);
    ParamGrid grid;
    grid.k_prime_kinds = {KernelKind::rbf};
    grid.k_dprime_kinds = {KernelKind::rbf, KernelKind::laplacian};
    grid.gamma_prime = {0.5};
    grid.gamma_dprime = {0.1};
    grid.lambda = {1e-2};
    grid.c_or_noise = {1e-3, 1e-1, 10.0};
    // 2 cells x 3 noises = 6 grid points
    const std::uint64_t seed = 1234;
    CvResult cv = nested_cv_forecast(ForecasterKind::series_gpr, ds, 2, grid, 5, 5, seed);

    // oracle: re-run the inner loop of the first outer fold by hand
    auto outer = kfold_indices(ds.size(), 5, seed);
    Dataset tr = ds.subset(outer[0].train);
    SeriesSplit str = split_forecast(tr, 2);
    auto inner = kfold_indices(tr.size(), 5, seed + 1 + 0);
    auto cells = enumerate_kernel_cells(grid);
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best_point = 0;
    for (const auto& cell : cells) {
        for (std::size_t ni = 0; ni < grid.c_or_noise.size(); ++ni) {
            double loss = 0.0;
            for (const auto& inf : inner) {
                Dataset itr = tr.subset(inf.train);
                Dataset ite = tr.subset(inf.test);
                SeriesSplit sitr = split_forecast(itr, 2);
                SeriesSplit site = split_forecast(ite, 2);
                SeriesKernelConfig cfg(cell.k_prime, cell.k_dprime);
                GprModel m = GprModel::fit(cfg, grid.c_or_noise[ni], itr, sitr);
                Eigen::MatrixXd pred = m.predict(slice_train_window(ite, site));
                Eigen::MatrixXd truth = test_window_values(ite, site);
                loss += (pred - truth).array().square().mean() /
                        static_cast<double>(inner.size());
            }
            const std::size_t point = cell.index * grid.c_or_noise.size() + ni;
            if (loss < best_loss) {
                best_loss = loss;
                best_point = point;
            }
        }
    }
    const auto& best_cell = cells[best_point / grid.c_or_noise.size()];
    const double best_noise = grid.c_or_noise[best_point % grid.c_or_noise.size()];
    std::string key = "k'=" + best_cell.k_prime.describe() +
                      " k''=" + best_cell.k_dprime.describe() + " noise=";
    bool found = false;
    for (const auto& [k, v] : cv.grid_choice_histogram) {
        if (k.rfind(key, 0) == 0) {
            // at least the first outer fold chose the oracle's point
            found = true;
        }
    }
    CHECK(found);
    (void)best_noise;
}

TEST_CASE("baseline strategies run through nested cv unchanged") {
    std::mt19937_64 rng(75);
    Dataset ds = testing::random_shared_grid_dataset(rng, 12, 7, 1);
    ParamGrid grid = ParamGrid::defaults_regression();
    CvResult z = nested_cv_forecast(ForecasterKind::zeros, ds, 2, grid, 5, 5, 5);
    // zeros baseline loss equals the raw second moment of the test values
    auto folds = kfold_indices(ds.size(), 5, 5);
    double want = 0.0;
    for (const auto& f : folds) {
        Dataset te = ds.subset(f.test);
        SeriesSplit ste = split_forecast(te, 2);
        want += test_window_values(te, ste).array().square().mean() / 5.0;
    }
    CHECK(z.eps_cv == doctest::Approx(want).epsilon(1e-12));
    CHECK(z.grid_choice_histogram.empty());
}

TEST_CASE("classification nested cv and fixed-split tuning") {
    // two well-separated classes of simple shapes
    std::mt19937_64 rng(76);
    std::normal_distribution<double> g;
    auto make_class_ds = [&](int n, double slope_a, double slope_b) {
        Dataset ds;
        std::vector<double> t(10);
        for (int i = 0; i < 10; ++i) t[static_cast<std::size_t>(i)] = i;
        for (int i = 0; i < n; ++i) {
            const bool a = i % 2 == 0;
            Eigen::MatrixXd v(10, 1);
            for (int j = 0; j < 10; ++j)
                v(j, 0) = (a ? slope_a : slope_b) * j + 0.05 * g(rng);
            ds.series.emplace_back("s" + std::to_string(i), t, std::move(v));
            ds.labels.push_back(a ? "up" : "down");
        }
        return ds;
    };
    Dataset train = make_class_ds(16, 1.0, -1.0);
    Dataset test = make_class_ds(8, 1.0, -1.0);

    ClassifyOutcome dtw = tune_and_classify(ClassifierKind::dtw_1nn, train, test,
                                            ParamGrid::defaults_classification(), 5, 3);
    CHECK(dtw.accuracy == 1.0);
    CHECK(dtw.se == 0.0);

    ParamGrid small;
    small.k_prime_kinds = {KernelKind::rbf};
    small.k_dprime_kinds = {KernelKind::linear, KernelKind::rbf};
    small.gamma_prime = {0.1};
    small.gamma_dprime = {0.1};
    small.lambda = {0.1, 1.0};
    small.c_or_noise = {1.0, 10.0};
    ClassifyOutcome svm =
        tune_and_classify(ClassifierKind::series_svm, train, test, small, 4, 3, {}, 2);
    CHECK(svm.accuracy == 1.0);
    CHECK(svm.grid_choice_histogram.size() == 1);

    CvResult cv = nested_cv_classify(ClassifierKind::dtw_1nn, train, small, 4, 3, 3);
    CHECK(cv.eps_cv == 0.0);  // error rate
}
