#include "mbcr/sampler.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "mbcr/errors.hpp"

namespace mbcr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kMaxNumericalFailureFraction = 0.01;

double log_poisson_k(std::size_t K, double lambda) {
    const double k = static_cast<double>(K) - 1.0;
    return k * std::log(lambda) - lambda - std::lgamma(k + 1.0);
}

struct AcceptanceTerms {
    double log_ratio = kNegInf;
    bool non_finite = false;
};

AcceptanceTerms acceptance_terms(double current_log_post, const ProposalDraw& draw, const DatasetD& data,
                                 const ModelPrior& prior) {
    AcceptanceTerms out;
    const double log_prior = prior.log_density(draw.candidate);
    if (log_prior == kNegInf || draw.log_reverse == kNegInf) return out;
    const double candidate_log_post = log_likelihood(draw.candidate, data) + log_prior;
    const double ratio = candidate_log_post - current_log_post + draw.log_reverse - draw.log_forward;
    if (!std::isfinite(ratio)) {
        out.non_finite = true;
        return out;
    }
    out.log_ratio = std::min(0.0, ratio);
    return out;
}

std::vector<double> autocorrelation(const std::vector<double>& trace, int max_lag) {
    std::vector<double> acf;
    const auto n = trace.size();
    if (n < 2) return acf;
    double mean = 0;
    for (double v : trace) mean += v;
    mean /= static_cast<double>(n);
    double var = 0;
    for (double v : trace) var += (v - mean) * (v - mean);
    for (int lag = 1; lag <= max_lag && static_cast<std::size_t>(lag) < n; ++lag) {
        double cov = 0;
        for (std::size_t i = static_cast<std::size_t>(lag); i < n; ++i)
            cov += (trace[i] - mean) * (trace[i - static_cast<std::size_t>(lag)] - mean);
        acf.push_back(var > 0 ? cov / var : 0.0);
    }
    return acf;
}

ChainResult run(const DatasetD& data, const PriorConfig& prior_cfg, const ProposalConfig& proposal_cfg,
                const ChainConfig& chain, bool allow_jumps) {
    prior_cfg.validate();
    proposal_cfg.validate();
    chain.validate();
    if (prior_cfg.dim() != data.dim()) throw InputError("prior dimension does not match data");

    const ModelPrior prior(prior_cfg);
    const ProposalKernel kernel(data, proposal_cfg, prior_cfg.lambda);
    Rng rng(chain.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    const ConjugateUpdater<double> full_update(prior_cfg.nig());
    std::vector<int> all_rows(static_cast<std::size_t>(data.size()));
    for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = static_cast<int>(i);
    const NigDistribution<double> initial(full_update.update(data, all_rows));
    ModelStateD state({nig_sample(initial, rng, prior_cfg.truncation)});
    double state_log_post = log_posterior(state, data, prior);

    ChainResult result;
    auto& diag = result.diagnostics;
    result.samples.prior = prior_cfg;
    result.samples.proposal = proposal_cfg;
    result.samples.chain = chain;
    result.samples.draws.reserve(static_cast<std::size_t>(chain.retained()));
    diag.k_trace.reserve(static_cast<std::size_t>(chain.iterations));
    diag.log_post_trace.reserve(static_cast<std::size_t>(chain.iterations));

    const auto failure_cap = static_cast<std::size_t>(kMaxNumericalFailureFraction * chain.iterations);
    for (int it = 0; it < chain.iterations; ++it) {
        MoveKind kind = MoveKind::relocate;
        if (allow_jumps) {
            const auto jp = jump_probabilities(static_cast<int>(state.size()), prior_cfg.lambda, proposal_cfg.c);
            const double u = unif(rng);
            if (u < jp.birth)
                kind = MoveKind::add;
            else if (u < jp.birth + jp.death)
                kind = MoveKind::remove;
        }
        const auto slot = static_cast<std::size_t>(kind);
        ++diag.attempts_by_kind[slot];

        std::optional<ProposalDraw> draw;
        bool failed = false;
        try {
            switch (kind) {
                case MoveKind::relocate: draw = kernel.relocate(state, rng); break;
                case MoveKind::remove: draw = kernel.remove(state, rng); break;
                case MoveKind::add: draw = kernel.add(state, rng); break;
            }
        } catch (const NumericalError&) {
            failed = true;
            if (++diag.numerical_failures > failure_cap)
                throw ChainError("conjugate updates failed in more than 1% of iterations");
        }
        if (kind == MoveKind::add && !draw && !failed) ++diag.unavailable_additions;

        if (draw) {
            const auto terms = acceptance_terms(state_log_post, *draw, data, prior);
            if (terms.non_finite) ++diag.non_finite_rejections;
            if (std::log(unif(rng)) < terms.log_ratio) {
                state_log_post = log_posterior(draw->candidate, data, prior);
                state = std::move(draw->candidate);
                ++diag.accepted_by_kind[slot];
            }
        }

        diag.k_trace.push_back(static_cast<int>(state.size()));
        diag.log_post_trace.push_back(state_log_post);
        if (it >= chain.burn_in && (it - chain.burn_in + 1) % chain.thin == 0)
            result.samples.draws.push_back(state);
    }

    for (std::size_t s = 0; s < 3; ++s)
        diag.acceptance_rate_by_kind[s] =
            diag.attempts_by_kind[s] ? static_cast<double>(diag.accepted_by_kind[s]) /
                                           static_cast<double>(diag.attempts_by_kind[s])
                                     : 0.0;
    const std::vector<double> retained(diag.log_post_trace.begin() + chain.burn_in, diag.log_post_trace.end());
    diag.autocorrelation = autocorrelation(retained, 5);
    return result;
}

}  // namespace

ModelPrior::ModelPrior(PriorConfig config)
    : config_((config.validate(), std::move(config))), plane_prior_(config_.nig(), config_.truncation) {}

double ModelPrior::log_density(const ModelStateD& state) const {
    double total = log_poisson_k(state.size(), config_.lambda);
    for (const auto& h : state) total += plane_prior_.log_density(h);
    return total;
}

bool ModelPrior::in_support(const ModelStateD& state) const {
    if (!config_.truncation) return true;
    for (const auto& h : state)
        if (!inside_box(h.intercept, h.slope, *config_.truncation)) return false;
    return true;
}

double log_posterior(const ModelStateD& state, const DatasetD& data, const ModelPrior& prior) {
    return log_likelihood(state, data) + prior.log_density(state);
}

double log_acceptance(const ModelStateD& current, const ProposalDraw& draw, const DatasetD& data,
                      const ModelPrior& prior) {
    return acceptance_terms(log_posterior(current, data, prior), draw, data, prior).log_ratio;
}

double log_acceptance(const ModelStateD& current, const ProposalDraw& draw, const DatasetD& data,
                      const PriorConfig& prior) {
    return log_acceptance(current, draw, data, ModelPrior(prior));
}

ChainResult run_chain(const DatasetD& data, const PriorConfig& prior, const ProposalConfig& proposal,
                      const ChainConfig& chain) {
    return run(data, prior, proposal, chain, true);
}

ChainResult fixed_k_validation_chain(const DatasetD& data, const PriorConfig& prior,
                                     const ProposalConfig& proposal, const ChainConfig& chain) {
    return run(data, prior, proposal, chain, false);
}

}  // namespace mbcr
