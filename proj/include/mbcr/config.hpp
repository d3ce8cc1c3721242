#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "mbcr/conjugate.hpp"

namespace mbcr {

/// Prior: per-plane NIG(mu, V, a, b), K - 1 ~ Poisson(lambda), optional coefficient box.
struct PriorConfig {
    Eigen::VectorXd mu;
    Eigen::MatrixXd V;
    double a = 1.0;
    double b = 1.0;
    double lambda = 20.0;
    std::optional<double> truncation;

    static PriorConfig defaults(Eigen::Index p);

    Eigen::Index dim() const { return mu.size() - 1; }
    NigParamsD nig() const { return {mu, V, a, b}; }
    void validate() const;
};

enum class DirectionMode { cardinal, gaussian };

std::string_view to_string(DirectionMode mode);
DirectionMode direction_mode_from_string(std::string_view name);

/// Proposal hyperparameters (the tilde parameters) and addition-search settings.
struct ProposalConfig {
    Eigen::VectorXd mu;
    Eigen::MatrixXd V;
    double a = 1.0;
    double b = 1.0;
    int L = 3;   ///< knots per region
    int M = 1;   ///< search directions; forced to p in cardinal mode
    DirectionMode direction_mode = DirectionMode::cardinal;
    double c = 0.4;

    /// Prior NIG values with V scaled by 0.25 and cardinal directions.
    static ProposalConfig from_prior(const PriorConfig& prior);

    Eigen::Index dim() const { return mu.size() - 1; }
    NigParamsD nig() const { return {mu, V, a, b}; }
    int directions() const { return direction_mode == DirectionMode::cardinal ? static_cast<int>(dim()) : M; }
    void validate() const;
};

struct ChainConfig {
    int iterations = 1000;
    int burn_in = 500;
    int thin = 1;
    std::uint64_t seed = 0;

    int retained() const { return thin > 0 ? (iterations - burn_in) / thin : 0; }
    void validate() const;
};

}  // namespace mbcr
