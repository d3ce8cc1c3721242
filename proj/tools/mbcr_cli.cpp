#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mbcr/bench.hpp"
#include "mbcr/errors.hpp"
#include "mbcr/io.hpp"
#include "mbcr/predict.hpp"
#include "mbcr/sampler.hpp"
#include "mbcr/solvers.hpp"

namespace {

using namespace mbcr;

constexpr int kExitInput = 1;
constexpr int kExitRuntime = 2;

void emit(const std::string& out_path, const std::string& text) {
    if (out_path.empty())
        std::cout << text;
    else
        write_file_atomic(out_path, text);
}

std::string join_numbers(const Eigen::VectorXd& v, const char* sep) {
    std::string s;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) s += sep;
        s += format_number(v(i));
    }
    return s;
}

struct FitArgs {
    std::string data;
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

int cmd_fit(const FitArgs& args) {
    const DatasetD data = read_dataset_csv(args.data);
    FitConfig cfg = args.config.empty() ? default_fit_config(data.dim())
                                        : parse_fit_config(read_text_file(args.config), data.dim());
    if (args.seed) cfg.chain.seed = *args.seed;
    cfg.chain.validate();
    const ChainResult result = run_chain(data, cfg.prior, cfg.proposal, cfg.chain);
    write_file_atomic(args.out, model_to_json(result));

    const auto& d = result.diagnostics;
    std::cout << "retained draws: " << result.samples.size() << "\n";
    for (MoveKind k : {MoveKind::relocate, MoveKind::remove, MoveKind::add}) {
        const auto i = static_cast<std::size_t>(k);
        std::cout << "acceptance " << to_string(k) << ": " << format_number(d.acceptance_rate_by_kind[i]) << " ("
                  << d.accepted_by_kind[i] << "/" << d.attempts_by_kind[i] << ")\n";
    }
    if (d.unavailable_additions) std::cout << "unavailable additions: " << d.unavailable_additions << "\n";
    return 0;
}

struct PredictArgs {
    std::string model;
    std::string query;
    std::string grid;
    std::string out;
    double level = 0.9;
};

int cmd_predict(const PredictArgs& args) {
    const PosteriorSamples samples = read_model(args.model);
    const Eigen::Index p = samples.dim();
    const Eigen::MatrixXd Q = args.query.empty() ? parse_grid(args.grid, p) : read_query_csv(args.query);
    if (Q.cols() != p)
        throw InputError("query has " + std::to_string(Q.cols()) + " covariates but the model has " + std::to_string(p));
    if (!(args.level > 0 && args.level < 1)) throw InputError("--level must lie strictly between 0 and 1");
    const bool banded = samples.size() >= 10;
    if (!banded) std::cerr << "warning: fewer than 10 draws, lo and hi are reported as nan\n";

    std::ostringstream csv;
    for (Eigen::Index j = 0; j < p; ++j) csv << "x" << j + 1 << ",";
    csv << "mean,lo,hi\n";
    for (Eigen::Index i = 0; i < Q.rows(); ++i) {
        const Eigen::VectorXd x = Q.row(i).transpose();
        const double mean = posterior_mean(samples, x);
        const auto [lo, hi] = banded ? posterior_band(samples, x, args.level)
                                     : std::pair{std::nan(""), std::nan("")};
        csv << join_numbers(x, ",") << "," << format_number(mean) << "," << format_number(lo) << ","
            << format_number(hi) << "\n";
    }
    emit(args.out, csv.str());
    return 0;
}

struct BenchArgs {
    std::string problem;
    long n = 200;
    int seeds = 5;
    std::uint64_t seed = 1;
    std::string methods = "mbcr,lse";
    int jobs = 1;
    long test_n = kDefaultTestSize;
    MbcrSettings mbcr;
    std::string out;
};

double bench_one(const std::string& method, const ProblemSpec& spec, Eigen::Index test_n, const MbcrSettings& mbcr) {
    const Problem problem = generate(spec);
    if (method == "truth") return evaluate_mse(problem.truth, spec, test_n, kDefaultTestSeed);
    if (method == "lse") {
        const QpSolution sol = lse_fit(problem.data);
        const Eigen::MatrixXd& anchors = problem.data.X();
        return evaluate_mse([&](const Eigen::VectorXd& x) { return lse_predict(sol, anchors, x); }, spec, test_n,
                            kDefaultTestSeed);
    }
    const ChainResult fit = fit_mbcr(problem.data, spec.seed, mbcr);
    return evaluate_mse([&](const Eigen::VectorXd& x) { return posterior_mean(fit.samples, x); }, spec, test_n,
                        kDefaultTestSeed);
}

int cmd_bench(const BenchArgs& args) {
    const ProblemId id = problem_from_string(args.problem);
    if (args.n < 1) throw InputError("--n must be positive");
    if (args.seeds < 1) throw InputError("--seeds must be positive");
    if (args.jobs < 1) throw InputError("--jobs must be positive");
    if (args.test_n < 1) throw InputError("--test-n must be positive");
    std::vector<std::string> methods;
    {
        std::stringstream ss(args.methods);
        for (std::string m; std::getline(ss, m, ',');) {
            if (m != "mbcr" && m != "lse" && m != "truth") throw InputError("unknown method '" + m + "'");
            if (std::find(methods.begin(), methods.end(), m) == methods.end()) methods.push_back(m);
        }
    }
    if (methods.empty()) throw InputError("--methods is empty");

    struct Task {
        std::size_t method;
        std::uint64_t seed;
        std::optional<double> mse;
        std::string error;
    };
    std::vector<Task> tasks;
    for (std::size_t m = 0; m < methods.size(); ++m)
        for (int r = 0; r < args.seeds; ++r) tasks.push_back({m, args.seed + static_cast<std::uint64_t>(r), {}, {}});

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t; (t = next++) < tasks.size();) {
            auto& task = tasks[t];
            try {
                task.mse = bench_one(methods[task.method], {id, args.n, task.seed}, args.test_n, args.mbcr);
            } catch (const std::exception& e) {
                task.error = e.what();
            }
        }
    };
    const int threads = std::min<int>(args.jobs, static_cast<int>(tasks.size()));
    std::vector<std::thread> pool;
    for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    std::ostringstream csv;
    csv << "problem,method,n,seed,mse,se\n";
    bool failed = false;
    for (std::size_t m = 0; m < methods.size(); ++m) {
        std::vector<double> values;
        for (const auto& task : tasks) {
            if (task.method != m) continue;
            if (!task.mse) {
                failed = true;
                std::cerr << "error: " << methods[m] << " seed " << task.seed << ": " << task.error << "\n";
                continue;
            }
            values.push_back(*task.mse);
            csv << to_string(id) << "," << methods[m] << "," << args.n << "," << task.seed << ","
                << format_number(*task.mse) << ",\n";
        }
        if (values.empty()) continue;
        double mean = 0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        double se = std::nan("");
        if (values.size() > 1) {
            double ss = 0;
            for (double v : values) ss += (v - mean) * (v - mean);
            se = std::sqrt(ss / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
        }
        csv << to_string(id) << "," << methods[m] << "," << args.n << ",summary," << format_number(mean) << ","
            << format_number(se) << "\n";
    }
    emit(args.out, csv.str());
    return failed ? kExitRuntime : 0;
}

struct MinimizeArgs {
    std::string model;
    std::string box;
    std::string out;
};

int cmd_minimize(const MinimizeArgs& args) {
    const PosteriorSamples samples = read_model(args.model);
    const auto [lower, upper] = parse_box(args.box);
    if (lower.size() != samples.dim())
        throw InputError("box has " + std::to_string(lower.size()) + " coordinates but the model has " +
                         std::to_string(samples.dim()));
    const LpSolution sol = minimize_surrogate(samples.draws, lower, upper);
    if (sol.status != LpStatus::optimal) throw InputError("malformed box");
    std::cout << "x_star: " << join_numbers(sol.x_star, " ") << "\n";
    std::cout << "value: " << format_number(sol.value) << "\n";
    if (!args.out.empty())
        write_file_atomic(args.out, "{\"x_star\": [" + join_numbers(sol.x_star, ", ") + "], \"value\": " +
                                        format_number(sol.value) + "}\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multivariate Bayesian convex regression"};
    app.require_subcommand(1);

    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "Run the reversible-jump sampler and write a model file");
    fit_cmd->add_option("data", fit.data, "CSV with header x1,...,xp,y")->required();
    fit_cmd->add_option("--config", fit.config, "JSON config (prior, proposal, chain)");
    fit_cmd->add_option("--out", fit.out, "Model JSON to write")->required();
    fit_cmd->add_option("--seed", fit.seed, "Chain seed (overrides the config)");

    PredictArgs predict;
    auto* predict_cmd = app.add_subcommand("predict", "Posterior mean and band at query points");
    predict_cmd->add_option("model", predict.model, "Model JSON")->required();
    auto* query_opt = predict_cmd->add_option("--query", predict.query, "CSV with header x1,...,xp");
    auto* grid_opt = predict_cmd->add_option("--grid", predict.grid, "Grid spec, e.g. x1=-1:1:21,x2=0:1:5");
    query_opt->excludes(grid_opt);
    predict_cmd->add_option("--level", predict.level, "Band level in (0, 1)")->capture_default_str();
    predict_cmd->add_option("--out", predict.out, "CSV to write (default: stdout)");
    predict_cmd->add_option("--seed", "Accepted for uniformity; prediction is deterministic");

    BenchArgs bench;
    auto* bench_cmd = app.add_subcommand("bench", "Test MSE of the estimators on a synthetic problem");
    bench_cmd->add_option("--problem", bench.problem, "p1, p2, p3 or quad")->required();
    bench_cmd->add_option("--n", bench.n, "Training size")->capture_default_str();
    bench_cmd->add_option("--seeds", bench.seeds, "Number of replications")->capture_default_str();
    bench_cmd->add_option("--seed", bench.seed, "First replication seed")->capture_default_str();
    bench_cmd->add_option("--methods", bench.methods, "Comma-separated subset of mbcr,lse")->capture_default_str();
    bench_cmd->add_option("--jobs", bench.jobs, "Worker threads")->capture_default_str();
    bench_cmd->add_option("--test-n", bench.test_n, "Test points per replication")->capture_default_str();
    bench_cmd->add_option("--iterations", bench.mbcr.iterations, "MBCR iterations")->capture_default_str();
    bench_cmd->add_option("--burn-in", bench.mbcr.burn_in, "MBCR burn-in")->capture_default_str();
    bench_cmd->add_option("--lambda", bench.mbcr.lambda, "Poisson rate for K - 1")->capture_default_str();
    bench_cmd->add_option("--out", bench.out, "CSV to write (default: stdout)");

    MinimizeArgs minimize;
    auto* minimize_cmd = app.add_subcommand("minimize", "Minimize the posterior-mean surrogate over a box");
    minimize_cmd->add_option("model", minimize.model, "Model JSON")->required();
    minimize_cmd->add_option("--box", minimize.box, "lo:hi per coordinate, comma separated")->required();
    minimize_cmd->add_option("--out", minimize.out, "JSON to write");
    minimize_cmd->add_option("--seed", "Accepted for uniformity; minimization is deterministic");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitInput;
    }

    try {
        if (fit_cmd->parsed()) return cmd_fit(fit);
        if (predict_cmd->parsed()) {
            if (predict.query.empty() && predict.grid.empty()) throw InputError("predict needs --query or --grid");
            return cmd_predict(predict);
        }
        if (bench_cmd->parsed()) return cmd_bench(bench);
        if (minimize_cmd->parsed()) return cmd_minimize(minimize);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitInput;
}
