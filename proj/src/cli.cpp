#include "tsk/cli.hpp"

#include <Eigen/Eigenvalues>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "tsk/baselines.hpp"
#include "tsk/errors.hpp"
#include "tsk/eval.hpp"
#include "tsk/parallel.hpp"
#include "tsk/skernel.hpp"
#include "tsk/tsdata.hpp"

namespace tsk {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string round2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

Dataset load_data(const std::filesystem::path& path, const std::string& format) {
    if (!std::filesystem::exists(path))
        throw ConfigError("data file does not exist: '" + path.string() + "'");
    if (format == "ucr") return load_ucr_tsv(path);
    if (format == "jsonl") return load_jsonl(path);
    throw ConfigError("unknown format '" + format + "' (expected ucr or jsonl)");
}

int effective_threads(const RunConfig& rc) {
    return rc.threads > 0 ? rc.threads : hardware_threads();
}

std::uint64_t require_seed(const RunConfig& rc) {
    if (rc.seed) return *rc.seed;
    throw ConfigError("this command involves seeded randomization; pass --seed");
}

std::string dataset_name(const std::filesystem::path& p) { return p.stem().string(); }

void write_output(const RunConfig& rc, const ordered_json& doc) {
    if (rc.out.empty()) {
        std::cout << doc.dump(2) << std::endl;
        return;
    }
    std::ofstream f(rc.out);
    if (!f) throw ConfigError("cannot write '" + rc.out.string() + "'");
    f << doc.dump(2) << '\n';
}

ParamGrid grid_from_config(const json& config, bool regression) {
    ParamGrid g = regression ? ParamGrid::defaults_regression()
                             : ParamGrid::defaults_classification();
    if (!config.contains("grid")) return g;
    const json& j = config.at("grid");
    auto kinds = [](const json& arr) {
        std::vector<KernelKind> out;
        for (const auto& v : arr) out.push_back(kernel_kind_from_string(v.get<std::string>()));
        return out;
    };
    if (j.contains("k_prime_kinds")) g.k_prime_kinds = kinds(j.at("k_prime_kinds"));
    if (j.contains("k_dprime_kinds")) g.k_dprime_kinds = kinds(j.at("k_dprime_kinds"));
    if (j.contains("gamma_prime")) g.gamma_prime = j.at("gamma_prime").get<std::vector<double>>();
    if (j.contains("gamma_dprime")) g.gamma_dprime = j.at("gamma_dprime").get<std::vector<double>>();
    if (j.contains("lambda")) g.lambda = j.at("lambda").get<std::vector<double>>();
    if (j.contains("c") && !regression) g.c_or_noise = j.at("c").get<std::vector<double>>();
    if (j.contains("noise") && regression) g.c_or_noise = j.at("noise").get<std::vector<double>>();
    g.validate();
    return g;
}

StrategyOptions options_from_config(const json& config) {
    StrategyOptions opts;
    opts.gpr.standardize = config.value("gpr_standardize", false);
    if (config.contains("weights") && !config.at("weights").is_null()) {
        auto rows = config.at("weights").get<std::vector<std::vector<double>>>();
        Eigen::MatrixXd w(static_cast<Eigen::Index>(rows.size()),
                          static_cast<Eigen::Index>(rows.empty() ? 0 : rows.front().size()));
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t c = 0; c < rows[r].size(); ++c)
                w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        opts.weights = std::move(w);
    }
    return opts;
}

struct RecordContext {
    std::string dataset;
    std::string strategy;
    std::optional<std::uint64_t> seed;
    double wallclock_s = 0.0;
};

ordered_json make_record(const RecordContext& ctx, const std::string& metric, double estimate,
                         double se, const std::optional<TTestResult>& ttest,
                         const std::map<std::string, int>& histogram, std::optional<int> channel,
                         const std::string& display) {
    ordered_json r;
    r["dataset"] = ctx.dataset;
    r["strategy"] = ctx.strategy;
    r["metric"] = metric;
    r["estimate"] = estimate;
    r["se"] = se;
    if (ttest) {
        r["t"] = ttest->t;
        r["df"] = ttest->df;
        r["stars"] = ttest->stars;
    } else {
        r["t"] = nullptr;
        r["df"] = nullptr;
        r["stars"] = nullptr;
    }
    r["wallclock_s"] = ctx.wallclock_s;
    if (ctx.seed) r["seed"] = *ctx.seed;
    else r["seed"] = nullptr;
    r["grid_choice_histogram"] = histogram;
    if (channel) r["channel"] = *channel;
    else r["channel"] = nullptr;
    r["display"] = display;
    return r;
}

std::string accuracy_display(double acc, double se) {
    return round2(100.0 * acc) + "% ± " + round2(100.0 * se) + "%";
}

std::string rmse_display(double rmse, double se, const std::string& stars) {
    std::string s = round2(rmse) + " ± " + round2(se);
    if (!stars.empty()) s += " " + stars;
    return s;
}

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

// Per-channel nested-CV records for one forecasting strategy, plus the raw
// (eps, v) estimates needed for the significance test.
struct RegressOutcome {
    std::vector<CvResult> per_channel;  // indexed by channel
};

RegressOutcome run_forecaster(ForecasterKind kind, const Dataset& ds, Eigen::Index n_test,
                              const ParamGrid& grid, std::uint64_t seed,
                              const StrategyOptions& base_opts, int threads) {
    RegressOutcome out;
    const Eigen::Index d = ds.channels();
    for (Eigen::Index c = 0; c < d; ++c) {
        StrategyOptions opts = base_opts;
        opts.score_channel = d == 1 ? -1 : static_cast<int>(c);
        out.per_channel.push_back(
            nested_cv_forecast(kind, ds, n_test, grid, 5, 5, seed, opts, threads));
    }
    return out;
}

}  // namespace

int cmd_gram(const RunConfig& rc) {
    if (rc.data.empty()) throw ConfigError("gram requires --data");
    if (!rc.config.contains("kernel"))
        throw ConfigError("gram requires an explicit series kernel config under 'kernel'");
    SeriesKernelConfig cfg = series_kernel_config_from_json(rc.config.at("kernel"));
    Dataset ds = load_data(rc.data, rc.format);

    Eigen::MatrixXd g = cross_gram(cfg, ds, effective_threads(rc));

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((g + g.transpose()) / 2.0,
                                                      Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericError("eigendecomposition did not converge");
    const double min_eig = es.eigenvalues().minCoeff();
    const double max_eig = es.eigenvalues().maxCoeff();
    int clamped = 0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()(i) < -1e-8 * std::max(max_eig, 0.0)) ++clamped;

    std::filesystem::path out = rc.out.empty() ? std::filesystem::path("gram.csv") : rc.out;
    std::ofstream f(out);
    if (!f) throw ConfigError("cannot write '" + out.string() + "'");
    char buf[64];
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        for (Eigen::Index j = 0; j < g.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", g(i, j));
            f << buf << (j + 1 < g.cols() ? "," : "");
        }
        f << '\n';
    }

    ordered_json sidecar;
    sidecar["rows"] = g.rows();
    sidecar["cols"] = g.cols();
    sidecar["min_eigenvalue"] = min_eig;
    sidecar["max_eigenvalue"] = max_eig;
    sidecar["clamped_below_threshold"] = clamped;
    std::ofstream sf(out.string() + ".json");
    if (!sf) throw ConfigError("cannot write sidecar for '" + out.string() + "'");
    sf << sidecar.dump(2) << '\n';
    return kExitOk;
}

int cmd_classify(const RunConfig& rc) {
    if (rc.data.empty() || rc.data2.empty())
        throw ConfigError("classify requires --data (train) and --data2 (test)");
    if (rc.strategy.empty()) throw ConfigError("classify requires --strategy");
    ClassifierKind kind = classifier_from_string(rc.strategy);
    const std::uint64_t seed = require_seed(rc);

    Dataset train = load_data(rc.data, rc.format);
    Dataset test = load_data(rc.data2, rc.format);
    ParamGrid grid = grid_from_config(rc.config, false);
    StrategyOptions opts = options_from_config(rc.config);

    Stopwatch watch;
    ClassifyOutcome oc =
        tune_and_classify(kind, train, test, grid, 5, seed, opts, effective_threads(rc));

    RecordContext ctx{dataset_name(rc.data), rc.strategy, seed, watch.seconds()};
    ordered_json doc;
    doc["records"] = ordered_json::array();
    doc["records"].push_back(make_record(ctx, "accuracy", oc.accuracy, oc.se, std::nullopt,
                                         oc.grid_choice_histogram, std::nullopt,
                                         accuracy_display(oc.accuracy, oc.se)));
    write_output(rc, doc);
    return kExitOk;
}

int cmd_regress(const RunConfig& rc) {
    if (rc.data.empty()) throw ConfigError("regress requires --data");
    if (rc.strategy.empty()) throw ConfigError("regress requires --strategy");
    if (!rc.config.contains("n_test_timestamps"))
        throw ConfigError("regress requires 'n_test_timestamps' in the config");
    const auto n_test = rc.config.at("n_test_timestamps").get<Eigen::Index>();
    ForecasterKind kind = forecaster_from_string(rc.strategy);
    const std::uint64_t seed = require_seed(rc);

    Dataset ds = load_data(rc.data, rc.format);
    const Eigen::Index d = ds.channels();
    ParamGrid grid = grid_from_config(rc.config, true);
    StrategyOptions opts = options_from_config(rc.config);
    const int threads = effective_threads(rc);

    static constexpr ForecasterKind kBaselines[] = {
        ForecasterKind::timestamp_means, ForecasterKind::zeros,
        ForecasterKind::linear_interpolator, ForecasterKind::series_means};

    Stopwatch watch;
    RegressOutcome strategy_out = run_forecaster(kind, ds, n_test, grid, seed, opts, threads);
    std::vector<std::pair<ForecasterKind, RegressOutcome>> baseline_out;
    for (ForecasterKind b : kBaselines)
        baseline_out.emplace_back(b, run_forecaster(b, ds, n_test, grid, seed, opts, threads));

    ordered_json doc;
    doc["records"] = ordered_json::array();
    for (Eigen::Index c = 0; c < d; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        // Best baseline on this channel by RMSE.
        std::size_t best = 0;
        for (std::size_t b = 1; b < baseline_out.size(); ++b)
            if (baseline_out[b].second.per_channel[ci].eps_cv <
                baseline_out[best].second.per_channel[ci].eps_cv)
                best = b;
        const CvResult& best_cv = baseline_out[best].second.per_channel[ci];

        std::optional<int> channel = d == 1 ? std::optional<int>{} : std::optional<int>(static_cast<int>(c));

        const CvResult& cv = strategy_out.per_channel[ci];
        auto [rmse, se] = rmse_report(cv.eps_cv, cv.v_cv);
        std::optional<TTestResult> ttest;
        if (kind == ForecasterKind::series_gpr) {
            ttest = t_test_vs_best_baseline({cv.eps_cv, cv.v_cv}, {best_cv.eps_cv, best_cv.v_cv},
                                            ds.size());
        }
        RecordContext ctx{dataset_name(rc.data), rc.strategy, seed, watch.seconds()};
        doc["records"].push_back(make_record(ctx, "rmse", rmse, se, ttest,
                                             cv.grid_choice_histogram, channel,
                                             rmse_display(rmse, se, ttest ? ttest->stars : "")));

        for (const auto& [bk, bout] : baseline_out) {
            const CvResult& bcv = bout.per_channel[ci];
            auto [brmse, bse] = rmse_report(bcv.eps_cv, bcv.v_cv);
            RecordContext bctx{dataset_name(rc.data), std::string(to_string(bk)), seed,
                               watch.seconds()};
            doc["records"].push_back(make_record(bctx, "rmse", brmse, bse, std::nullopt, {},
                                                 channel, rmse_display(brmse, bse, "")));
        }
    }
    write_output(rc, doc);
    return kExitOk;
}

int cmd_bench(const RunConfig& rc) {
    if (!rc.config.contains("strategies") || !rc.config.at("strategies").is_array() ||
        rc.config.at("strategies").empty())
        throw ConfigError("bench requires a non-empty 'strategies' list in the config");
    if (!rc.config.contains("datasets") || !rc.config.at("datasets").is_array() ||
        rc.config.at("datasets").empty())
        throw ConfigError("bench requires a non-empty 'datasets' list in the config");
    const std::uint64_t seed = require_seed(rc);
    const int threads = effective_threads(rc);

    const auto strategies = rc.config.at("strategies").get<std::vector<std::string>>();
    const auto& datasets = rc.config.at("datasets");

    ordered_json doc;
    doc["records"] = ordered_json::array();
    std::vector<std::string> ds_names;
    std::map<std::string, std::map<std::string, std::string>> table;  // strategy -> ds -> cell

    for (const auto& entry : datasets) {
        const std::string name = entry.at("name").get<std::string>();
        ds_names.push_back(name);
        for (const auto& strategy : strategies) {
            std::string cell = "---";
            Stopwatch watch;
            try {
                const std::string task = entry.at("task").get<std::string>();
                const std::string format = entry.value("format", "ucr");
                if (task == "classify") {
                    ClassifierKind kind = classifier_from_string(strategy);
                    Dataset train = load_data(entry.at("path").get<std::string>(), format);
                    Dataset test = load_data(entry.at("data2").get<std::string>(), format);
                    ParamGrid grid = grid_from_config(rc.config, false);
                    StrategyOptions opts = options_from_config(rc.config);
                    ClassifyOutcome oc =
                        tune_and_classify(kind, train, test, grid, 5, seed, opts, threads);
                    cell = accuracy_display(oc.accuracy, oc.se);
                    RecordContext ctx{name, strategy, seed, watch.seconds()};
                    doc["records"].push_back(make_record(ctx, "accuracy", oc.accuracy, oc.se,
                                                         std::nullopt, oc.grid_choice_histogram,
                                                         std::nullopt, cell));
                } else if (task == "regress") {
                    ForecasterKind kind = forecaster_from_string(strategy);
                    Dataset ds = load_data(entry.at("path").get<std::string>(), format);
                    const auto n_test = entry.at("n_test_timestamps").get<Eigen::Index>();
                    ParamGrid grid = grid_from_config(rc.config, true);
                    StrategyOptions opts = options_from_config(rc.config);
                    if (entry.contains("channel") && !entry.at("channel").is_null())
                        opts.score_channel = entry.at("channel").get<int>();
                    CvResult cv = nested_cv_forecast(kind, ds, n_test, grid, 5, 5, seed, opts, threads);
                    auto [rmse, se] = rmse_report(cv.eps_cv, cv.v_cv);
                    cell = rmse_display(rmse, se, "");
                    std::optional<int> channel =
                        opts.score_channel >= 0 ? std::optional<int>(opts.score_channel)
                                                : std::nullopt;
                    RecordContext ctx{name, strategy, seed, watch.seconds()};
                    doc["records"].push_back(make_record(ctx, "rmse", rmse, se, std::nullopt,
                                                         cv.grid_choice_histogram, channel, cell));
                } else {
                    throw ConfigError("dataset '" + name + "' has unknown task '" + task + "'");
                }
            } catch (const std::exception&) {
                cell = "---";  // cell failed; the sweep continues
            }
            table[strategy][name] = cell;
        }
    }

    // Combined CSV table, one row per strategy.
    std::string csv = "strategy";
    for (const auto& n : ds_names) csv += "," + n;
    csv += "\n";
    for (const auto& strategy : strategies) {
        csv += strategy;
        for (const auto& n : ds_names) {
            std::string cell = table[strategy][n];
            for (auto& ch : cell)
                if (ch == ',') ch = ';';
            csv += "," + cell;
        }
        csv += "\n";
    }
    doc["table_csv"] = csv;

    if (!rc.out.empty()) {
        std::ofstream f(rc.out);
        if (!f) throw ConfigError("cannot write '" + rc.out.string() + "'");
        f << doc.dump(2) << '\n';
        std::filesystem::path csv_path = rc.out;
        csv_path.replace_extension(".csv");
        std::ofstream cf(csv_path);
        if (!cf) throw ConfigError("cannot write '" + csv_path.string() + "'");
        cf << csv;
    } else {
        std::cout << doc.dump(2) << std::endl;
    }
    return kExitOk;
}

namespace {

int dispatch(const RunConfig& rc) {
    if (rc.command == "gram") return cmd_gram(rc);
    if (rc.command == "classify") return cmd_classify(rc);
    if (rc.command == "regress") return cmd_regress(rc);
    if (rc.command == "bench") return cmd_bench(rc);
    throw ConfigError("unknown command '" + rc.command + "'");
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"series-kernel benchmark toolkit"};
    app.require_subcommand(1);

    RunConfig rc;
    std::string config_path;
    bool seed_set = false;
    std::uint64_t seed_value = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--data", rc.data, "primary dataset path");
        sub->add_option("--data2", rc.data2, "secondary dataset path (test split)");
        sub->add_option("--format", rc.format, "dataset format: ucr|jsonl");
        sub->add_option("--strategy", rc.strategy, "strategy name");
        sub->add_option("--seed", seed_value, "RNG seed")->each([&](const std::string&) {
            seed_set = true;
        });
        sub->add_option("--threads", rc.threads, "worker threads (default: all cores)");
        sub->add_option("--out", rc.out, "output path (default: stdout)");
    };
    add_common(app.add_subcommand("gram", "materialize a Gram matrix"));
    add_common(app.add_subcommand("classify", "fixed-split classification benchmark"));
    add_common(app.add_subcommand("regress", "nested-CV forecasting benchmark"));
    add_common(app.add_subcommand("bench", "strategies x datasets sweep"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        rc.command = app.get_subcommands().front()->get_name();
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            if (!f) throw ConfigError("cannot open config '" + config_path + "'");
            rc.config = json::parse(f);
            // Flags override config fields.
            if (rc.data.empty() && rc.config.contains("data"))
                rc.data = rc.config.at("data").get<std::string>();
            if (rc.data2.empty() && rc.config.contains("data2"))
                rc.data2 = rc.config.at("data2").get<std::string>();
            if (rc.strategy.empty() && rc.config.contains("strategy"))
                rc.strategy = rc.config.at("strategy").get<std::string>();
            if (!seed_set && rc.config.contains("seed")) {
                seed_value = rc.config.at("seed").get<std::uint64_t>();
                seed_set = true;
            }
            if (rc.threads == 0 && rc.config.contains("threads"))
                rc.threads = rc.config.at("threads").get<int>();
            if (rc.out.empty() && rc.config.contains("out"))
                rc.out = rc.config.at("out").get<std::string>();
            if (rc.config.contains("format") && app.get_subcommands().front()->count("--format") == 0)
                rc.format = rc.config.at("format").get<std::string>();
        }
        if (seed_set) rc.seed = seed_value;
        return dispatch(rc);
    } catch (const FormatError& e) {
        std::cerr << "data format error: " << e.what() << std::endl;
        return kExitFormat;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << std::endl;
        return kExitNumeric;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return kExitConfig;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << std::endl;
        return kExitNumeric;
    }
}

}  // namespace tsk
