#include "mbcr/config.hpp"

#include <cmath>

#include "mbcr/errors.hpp"

namespace mbcr {

PriorConfig PriorConfig::defaults(Eigen::Index p) {
    if (p < 1) throw InputError("prior dimension must be >= 1");
    PriorConfig prior;
    prior.mu = Eigen::VectorXd::Zero(p + 1);
    prior.V = 100.0 * Eigen::MatrixXd::Identity(p + 1, p + 1);
    return prior;
}

void PriorConfig::validate() const {
    nig().validate();
    if (!(lambda > 0) || !std::isfinite(lambda)) throw InputError("prior lambda must be positive");
    if (truncation && !(*truncation > 0)) throw InputError("prior truncation must be positive");
}

std::string_view to_string(DirectionMode mode) {
    return mode == DirectionMode::cardinal ? "cardinal" : "gaussian";
}

DirectionMode direction_mode_from_string(std::string_view name) {
    if (name == "cardinal") return DirectionMode::cardinal;
    if (name == "gaussian") return DirectionMode::gaussian;
    throw InputError("unknown direction_mode '" + std::string(name) + "'");
}

ProposalConfig ProposalConfig::from_prior(const PriorConfig& prior) {
    ProposalConfig cfg;
    cfg.mu = prior.mu;
    cfg.V = 0.25 * prior.V;
    cfg.a = prior.a;
    cfg.b = prior.b;
    cfg.M = static_cast<int>(prior.dim());
    return cfg;
}

void ProposalConfig::validate() const {
    nig().validate();
    if (L < 1) throw InputError("proposal L must be >= 1");
    if (M < 1) throw InputError("proposal M must be >= 1");
    if (!(c > 0) || c > 0.5) throw InputError("proposal c must lie in (0, 0.5]");
}

void ChainConfig::validate() const {
    if (iterations < 1) throw InputError("chain iterations must be positive");
    if (burn_in < 0 || burn_in >= iterations) throw InputError("chain burn_in must be in [0, iterations)");
    if (thin < 1) throw InputError("chain thin must be positive");
    if (retained() < 1) throw InputError("chain retains no draws after burn-in and thinning");
}

}  // namespace mbcr
