#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "mbcr/config.hpp"
#include "mbcr/core.hpp"
#include "mbcr/proposals.hpp"

namespace mbcr {

/// Prior over the trans-dimensional state, with the truncated-NIG box mass cached.
class ModelPrior {
public:
    explicit ModelPrior(PriorConfig config);

    const PriorConfig& config() const { return config_; }
    const TruncatedNig<double>& plane_prior() const { return plane_prior_; }

    /// log Poisson(K - 1; lambda) + sum_k log NIG(plane_k).
    double log_density(const ModelStateD& state) const;
    bool in_support(const ModelStateD& state) const;

private:
    PriorConfig config_;
    TruncatedNig<double> plane_prior_;
};

double log_posterior(const ModelStateD& state, const DatasetD& data, const ModelPrior& prior);

/// log of the Metropolis-Hastings acceptance probability min(1, ratio); -inf on non-finite terms.
double log_acceptance(const ModelStateD& current, const ProposalDraw& draw, const DatasetD& data,
                      const ModelPrior& prior);
double log_acceptance(const ModelStateD& current, const ProposalDraw& draw, const DatasetD& data,
                      const PriorConfig& prior);

struct ChainDiagnostics {
    /// Indexed by MoveKind: relocate, remove, add.
    std::array<double, 3> acceptance_rate_by_kind{};
    std::array<std::size_t, 3> attempts_by_kind{};
    std::array<std::size_t, 3> accepted_by_kind{};
    std::size_t unavailable_additions = 0;
    std::size_t numerical_failures = 0;
    std::size_t non_finite_rejections = 0;
    std::vector<int> k_trace;
    std::vector<double> log_post_trace;
    /// Autocorrelation of the retained log-posterior trace at lags 1..5.
    std::vector<double> autocorrelation;
};

struct PosteriorSamples {
    std::vector<ModelStateD> draws;
    PriorConfig prior;
    ProposalConfig proposal;
    ChainConfig chain;

    Eigen::Index dim() const { return draws.empty() ? 0 : draws.front().dim(); }
    std::size_t size() const { return draws.size(); }
};

struct ChainResult {
    PosteriorSamples samples;
    ChainDiagnostics diagnostics;
};

/// Reversible-jump chain: start from one plane drawn from the full-data posterior, then
/// relocate, delete or add with probabilities (r_K, d_K, b_K).
ChainResult run_chain(const DatasetD& data, const PriorConfig& prior, const ProposalConfig& proposal,
                      const ChainConfig& chain);

/// Relocation-only chain with K pinned at 1; its stationary law is the exact NIG posterior.
ChainResult fixed_k_validation_chain(const DatasetD& data, const PriorConfig& prior,
                                     const ProposalConfig& proposal, const ChainConfig& chain);

}  // namespace mbcr
