#pragma once

#include <Eigen/Core>

#include <optional>
#include <string_view>
#include <vector>

#include "mbcr/core.hpp"

namespace mbcr {

/// Convexity-constrained least-squares fit: fitted values and one subgradient per observation.
struct QpSolution {
    Eigen::VectorXd yhat;
    Eigen::MatrixXd g;  ///< n x p, row i is the subgradient at x_i
    double objective = 0;     ///< sum of squared residuals
    double kkt_residual = 0;  ///< primal + dual residual at termination
    int iterations = 0;
};

/// interior_point: Mehrotra predictor-corrector. admm: over-relaxed operator splitting with
/// adaptive penalty; much slower to reach tight tolerances once n exceeds a few dozen.
enum class LseMethod { interior_point, admm };

std::string_view to_string(LseMethod method);

struct LseOptions {
    LseMethod method = LseMethod::interior_point;
    double tolerance = 1e-6;
    int max_iterations = 50000;
    Eigen::Index max_n = 500;
};

/// Solves min sum (y_i - yhat_i)^2 s.t. yhat_j >= yhat_i + g_i^T (x_j - x_i) for all i, j.
/// Throws SolverError when the residual target is not met within max_iterations.
QpSolution lse_fit(const DatasetD& data, const LseOptions& options = {});

/// max_i (yhat_i + g_i^T (x - x_i)).
double lse_predict(const QpSolution& sol, const Eigen::MatrixXd& anchors, const Eigen::Ref<const Eigen::VectorXd>& x);

/// The LSE estimator as a max-affine state (one plane per observation, unit variance).
ModelStateD lse_surrogate(const QpSolution& sol, const Eigen::MatrixXd& anchors);

/// Largest violation of the pairwise supporting-hyperplane constraints (<= 0 when feasible).
double lse_max_violation(const QpSolution& sol, const Eigen::MatrixXd& anchors);

enum class LpStatus { optimal, infeasible_error };

struct LpSolution {
    Eigen::VectorXd x_star;
    double value = 0;
    LpStatus status = LpStatus::optimal;
};

/// Minimizes (1/M) sum_m max_k (alpha_mk + beta_mk^T x) over lower <= x <= upper. Among
/// optimal points the lexicographically smallest x is returned.
LpSolution minimize_surrogate(const std::vector<ModelStateD>& states, const Eigen::VectorXd& lower,
                              const Eigen::VectorXd& upper);

/// Surrogate objective (1/M) sum_m max_k (...) at x.
double surrogate_value(const std::vector<ModelStateD>& states, const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace mbcr
