#include "mbcr/bench.hpp"

#include <cmath>
#include <random>

#include "mbcr/errors.hpp"
#include "mbcr/predict.hpp"

namespace mbcr {

namespace {

const Eigen::Vector4d kProblem3Direction(0.8262, 0.9305, 1.6361, 0.6072);

Eigen::Matrix2d quad_matrix() {
    Eigen::Matrix2d Q;
    Q << 1.0, 0.2, 0.2, 1.0;
    return Q;
}

}  // namespace

std::string_view to_string(ProblemId id) {
    switch (id) {
        case ProblemId::p1: return "p1";
        case ProblemId::p2: return "p2";
        case ProblemId::p3: return "p3";
        case ProblemId::quad: return "quad";
    }
    return "unknown";
}

ProblemId problem_from_string(std::string_view name) {
    if (name == "p1") return ProblemId::p1;
    if (name == "p2") return ProblemId::p2;
    if (name == "p3") return ProblemId::p3;
    if (name == "quad") return ProblemId::quad;
    throw InputError("unknown problem '" + std::string(name) + "' (expected p1, p2, p3 or quad)");
}

Eigen::Index problem_dim(ProblemId id) {
    switch (id) {
        case ProblemId::p1: return 5;
        case ProblemId::p2: return 6;
        case ProblemId::p3: return 4;
        case ProblemId::quad: return 2;
    }
    return 0;
}

double problem_noise_variance(ProblemId id) {
    switch (id) {
        case ProblemId::p1: return 1.0;
        case ProblemId::p2: return 0.25;
        case ProblemId::p3: return 1.0;
        case ProblemId::quad: return 0.1;
    }
    return 0;
}

ScalarFunction truth_function(ProblemId id) {
    switch (id) {
        case ProblemId::p1:
            return [](const Eigen::VectorXd& x) {
                const double s = x(0) + 0.5 * x(1) + x(2);
                return s * s - x(3) + 0.25 * x(4) * x(4);
            };
        case ProblemId::p2:
            return [](const Eigen::VectorXd& x) {
                const double s = x(0) + x(1);
                return s * s;
            };
        case ProblemId::p3:
            return [](const Eigen::VectorXd& x) { return std::abs(kProblem3Direction.dot(x.head<4>())); };
        case ProblemId::quad:
            return [](const Eigen::VectorXd& x) { return x.head<2>().dot(quad_matrix() * x.head<2>()); };
    }
    throw InputError("unknown problem");
}

Eigen::MatrixXd sample_design(ProblemId id, Eigen::Index n, Rng& rng) {
    const auto p = problem_dim(id);
    Eigen::MatrixXd X(n, p);
    std::normal_distribution<double> normal;
    const double half_width = id == ProblemId::p3 ? 4.0 : 1.0;
    std::uniform_real_distribution<double> unif(-half_width, half_width);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < p; ++j) X(i, j) = id == ProblemId::p1 ? normal(rng) : unif(rng);
    return X;
}

Problem generate(const ProblemSpec& spec) {
    if (spec.n < 1) throw InputError("problem size must be positive");
    Rng rng(spec.seed);
    Eigen::MatrixXd X = sample_design(spec.id, spec.n, rng);
    const auto truth = truth_function(spec.id);
    std::normal_distribution<double> noise(0.0, std::sqrt(problem_noise_variance(spec.id)));
    Eigen::VectorXd y(spec.n);
    for (Eigen::Index i = 0; i < spec.n; ++i) y(i) = truth(X.row(i).transpose()) + noise(rng);
    return {DatasetD(std::move(X), std::move(y)), truth};
}

double evaluate_mse(const ScalarFunction& estimator, const ProblemSpec& spec, Eigen::Index test_n,
                    std::uint64_t test_seed) {
    if (test_n < 1) throw InputError("test_n must be positive");
    Rng rng(test_seed);
    const Eigen::MatrixXd X = sample_design(spec.id, test_n, rng);
    const auto truth = truth_function(spec.id);
    double sum = 0;
    for (Eigen::Index i = 0; i < test_n; ++i) {
        const Eigen::VectorXd x = X.row(i).transpose();
        const double e = estimator(x) - truth(x);
        sum += e * e;
    }
    return sum / static_cast<double>(test_n);
}

ChainResult fit_mbcr(const DatasetD& data, std::uint64_t seed, const MbcrSettings& settings) {
    auto prior = PriorConfig::defaults(data.dim());
    prior.lambda = settings.lambda;
    const auto proposal = ProposalConfig::from_prior(prior);
    ChainConfig chain;
    chain.iterations = settings.iterations;
    chain.burn_in = settings.burn_in;
    chain.thin = settings.thin;
    chain.seed = seed;
    return run_chain(data, prior, proposal, chain);
}

StabilityMethod mbcr_stability_method(const MbcrSettings& settings) {
    return {"mbcr", [settings](const DatasetD& data, std::uint64_t seed) {
                const auto fit = fit_mbcr(data, seed, settings);
                const Eigen::Vector2d lower(-1, -1), upper(1, 1);
                return minimize_surrogate(fit.samples.draws, lower, upper).x_star;
            }};
}

StabilityMethod lse_stability_method(const LseOptions& options) {
    return {"lse", [options](const DatasetD& data, std::uint64_t) {
                const auto sol = lse_fit(data, options);
                const Eigen::Vector2d lower(-1, -1), upper(1, 1);
                return minimize_surrogate({lse_surrogate(sol, data.X())}, lower, upper).x_star;
            }};
}

StabilityMethod truth_stability_method() {
    return {"truth", [](const DatasetD&, std::uint64_t) -> Eigen::VectorXd { return Eigen::Vector2d::Zero(); }};
}

std::vector<StabilityResult> stability_experiment(int resamples, Eigen::Index n, std::uint64_t base_seed,
                                                  const std::vector<StabilityMethod>& methods) {
    if (resamples < 2) throw InputError("stability_experiment needs at least 2 resamples");
    std::vector<StabilityResult> results;
    for (const auto& m : methods) results.push_back({m.name, {}, 0.0});
    for (int r = 0; r < resamples; ++r) {
        const auto seed = base_seed + static_cast<std::uint64_t>(r);
        const auto problem = generate({ProblemId::quad, n, seed});
        for (std::size_t k = 0; k < methods.size(); ++k) {
            const Eigen::VectorXd x = methods[k].minimize(problem.data, seed);
            results[k].minimizers.push_back(x);
            results[k].mean_distance += x.norm() / resamples;
        }
    }
    return results;
}

}  // namespace mbcr
