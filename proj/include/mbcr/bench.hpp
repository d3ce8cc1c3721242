#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "mbcr/config.hpp"
#include "mbcr/core.hpp"
#include "mbcr/proposals.hpp"
#include "mbcr/sampler.hpp"
#include "mbcr/solvers.hpp"

namespace mbcr {

/// Synthetic problems: p1 (5-D Gaussian design), p2 (6-D uniform), p3 (4-D uniform, |a^T x|),
/// quad (2-D quadratic response surface).
enum class ProblemId { p1, p2, p3, quad };

std::string_view to_string(ProblemId id);
ProblemId problem_from_string(std::string_view name);

struct ProblemSpec {
    ProblemId id = ProblemId::p2;
    Eigen::Index n = 100;
    std::uint64_t seed = 0;
};

Eigen::Index problem_dim(ProblemId id);
double problem_noise_variance(ProblemId id);

using ScalarFunction = std::function<double(const Eigen::VectorXd&)>;

/// Noiseless regression function of a problem.
ScalarFunction truth_function(ProblemId id);

/// n covariate rows from the problem's design distribution.
Eigen::MatrixXd sample_design(ProblemId id, Eigen::Index n, Rng& rng);

struct Problem {
    DatasetD data;
    ScalarFunction truth;
};

Problem generate(const ProblemSpec& spec);

/// Mean squared error of `estimator` against the truth on test_n fresh design points.
double evaluate_mse(const ScalarFunction& estimator, const ProblemSpec& spec, Eigen::Index test_n,
                    std::uint64_t test_seed);

inline constexpr Eigen::Index kDefaultTestSize = 10000;
inline constexpr std::uint64_t kDefaultTestSeed = 20240917;

/// Chain settings for benchmark fits; prior and proposal default from the problem dimension.
struct MbcrSettings {
    int iterations = 1000;
    int burn_in = 500;
    int thin = 1;
    double lambda = 20.0;
};

ChainResult fit_mbcr(const DatasetD& data, std::uint64_t seed, const MbcrSettings& settings = {});

/// Minimizer pipelines for the response-surface stability study.
struct StabilityMethod {
    std::string name;
    std::function<Eigen::VectorXd(const DatasetD&, std::uint64_t seed)> minimize;
};

StabilityMethod mbcr_stability_method(const MbcrSettings& settings = {});
StabilityMethod lse_stability_method(const LseOptions& options = {});
/// Minimizes the noiseless quadratic itself (always returns the origin).
StabilityMethod truth_stability_method();

struct StabilityResult {
    std::string name;
    std::vector<Eigen::VectorXd> minimizers;
    double mean_distance = 0;  ///< mean Euclidean distance to the true minimizer (0, 0)
};

/// Resample the quad problem `resamples` times (seeds base_seed, base_seed + 1, ...) and record
/// where each method's surrogate attains its minimum over [-1, 1]^2.
std::vector<StabilityResult> stability_experiment(int resamples, Eigen::Index n, std::uint64_t base_seed,
                                                  const std::vector<StabilityMethod>& methods);

}  // namespace mbcr
