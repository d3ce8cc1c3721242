#include "mbcr/proposals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mbcr/errors.hpp"

namespace mbcr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kEmptyRegionSize = 0.25;

std::size_t pick(std::span<const double> weights, Rng& rng) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    double cumulative = 0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0) continue;
        last_positive = i;
        cumulative += weights[i];
        if (u < cumulative) return i;
    }
    return last_positive;
}

std::vector<HyperplaneD> without(const std::vector<HyperplaneD>& planes, std::size_t j) {
    std::vector<HyperplaneD> rest;
    rest.reserve(planes.size() - 1);
    for (std::size_t k = 0; k < planes.size(); ++k)
        if (k != j) rest.push_back(planes[k]);
    return rest;
}

}  // namespace

std::string_view to_string(MoveKind kind) {
    switch (kind) {
        case MoveKind::relocate: return "relocate";
        case MoveKind::remove: return "delete";
        case MoveKind::add: return "add";
    }
    return "unknown";
}

double log_sum_exp(std::span<const double> values) {
    double peak = kNegInf;
    for (double v : values) peak = std::max(peak, v);
    if (!std::isfinite(peak)) return peak;
    double sum = 0;
    for (double v : values) sum += std::exp(v - peak);
    return peak + std::log(sum);
}

JumpProbabilities jump_probabilities(int K, double lambda, double c) {
    if (K < 1) throw ContractError("jump_probabilities: K must be >= 1");
    // With K - 1 ~ Poisson(lambda): p(K+1)/p(K) = lambda/K and p(K-1)/p(K) = (K-1)/lambda.
    JumpProbabilities jp;
    jp.birth = c * std::min(1.0, lambda / K);
    jp.death = K >= 2 ? c * std::min(1.0, (K - 1) / lambda) : 0.0;
    jp.relocate = 1.0 - jp.birth - jp.death;
    return jp;
}

ProposalKernel::ProposalKernel(const DatasetD& data, ProposalConfig cfg, double lambda)
    : data_(data), cfg_(std::move(cfg)), lambda_(lambda), updater_(cfg_.nig()) {
    cfg_.validate();
    if (cfg_.dim() != data_.dim()) throw InputError("proposal config dimension does not match data");
    if (!(lambda_ > 0)) throw InputError("lambda must be positive");
}

std::vector<Eigen::VectorXd> ProposalKernel::draw_directions(Rng& rng) const {
    const auto p = data_.dim();
    std::vector<Eigen::VectorXd> dirs;
    if (cfg_.direction_mode == DirectionMode::cardinal) {
        for (Eigen::Index j = 0; j < p; ++j) dirs.push_back(Eigen::VectorXd::Unit(p, j));
        return dirs;
    }
    std::normal_distribution<double> normal;
    for (int m = 0; m < cfg_.M; ++m) {
        Eigen::VectorXd g(p);
        for (Eigen::Index j = 0; j < p; ++j) g(j) = normal(rng);
        dirs.push_back(std::move(g));
    }
    return dirs;
}

NigDistribution<double> ProposalKernel::region_posterior(std::span<const int> rows) const {
    return NigDistribution<double>(updater_.update(data_, rows));
}

double ProposalKernel::log_region_density(const std::vector<std::vector<int>>& regions,
                                          const ModelStateD& to) const {
    double total = 0;
    for (std::size_t k = 0; k < regions.size(); ++k) total += region_posterior(regions[k]).log_density(to[k]);
    return total;
}

ModelStateD ProposalKernel::sample_from_regions(const std::vector<std::vector<int>>& regions, Rng& rng) const {
    std::vector<HyperplaneD> planes;
    planes.reserve(regions.size());
    for (const auto& rows : regions) planes.push_back(region_posterior(rows).sample(rng));
    return ModelStateD(std::move(planes));
}

std::vector<double> ProposalKernel::deletion_weights(const Partition& partition) const {
    std::vector<double> w(partition.regions());
    for (std::size_t j = 0; j < w.size(); ++j) {
        const auto size = partition.subsets[j].size();
        w[j] = 1.0 / (size == 0 ? kEmptyRegionSize : static_cast<double>(size));
    }
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& v : w) v /= total;
    return w;
}

std::vector<SplitSpec> ProposalKernel::enumerate_splits(const Partition& partition,
                                                        const std::vector<Eigen::VectorXd>& directions) const {
    std::vector<SplitSpec> specs;
    specs.reserve(partition.regions() * directions.size() * static_cast<std::size_t>(cfg_.L));
    std::vector<double> proj;
    for (std::size_t j = 0; j < partition.regions(); ++j) {
        const auto& rows = partition.subsets[j];
        for (std::size_t m = 0; m < directions.size(); ++m) {
            proj.resize(rows.size());
            for (std::size_t r = 0; r < rows.size(); ++r) proj[r] = data_.row(rows[r]).dot(directions[m]);
            const auto [lo_it, hi_it] = std::minmax_element(proj.begin(), proj.end());
            const double lo = rows.empty() ? 0.0 : *lo_it;
            const double hi = rows.empty() ? 0.0 : *hi_it;
            const bool splittable = rows.size() >= 2 && hi > lo;
            for (int l = 0; l < cfg_.L; ++l) {
                SplitSpec spec;
                spec.region = static_cast<int>(j);
                spec.direction = static_cast<int>(m);
                spec.knot_index = l;
                spec.knot = lo + (hi - lo) * static_cast<double>(l + 1) / static_cast<double>(cfg_.L + 1);
                if (splittable) {
                    for (std::size_t r = 0; r < rows.size(); ++r)
                        (proj[r] <= spec.knot ? spec.minus : spec.plus).push_back(rows[r]);
                    spec.weight = static_cast<double>(spec.minus.size()) * static_cast<double>(spec.plus.size());
                }
                specs.push_back(std::move(spec));
            }
        }
    }
    return specs;
}

ProposalDraw ProposalKernel::relocate(const ModelStateD& state, Rng& rng) const {
    const auto partition = assign_partition(state, data_);
    ProposalDraw draw(sample_from_regions(partition.subsets, rng), MoveKind::relocate);
    draw.log_forward = log_relocation_density(state, draw.candidate);
    draw.log_reverse = log_relocation_density(draw.candidate, state);
    return draw;
}

ProposalDraw ProposalKernel::remove(const ModelStateD& state, Rng& rng) const {
    if (state.size() < 2) throw ContractError("propose_deletion requires K >= 2");
    const auto weights = deletion_weights(assign_partition(state, data_));
    const auto j = pick(weights, rng);
    const auto rest = without(state.planes(), j);
    const auto partition = assign_partition(rest, data_);
    ProposalDraw draw(sample_from_regions(partition.subsets, rng), MoveKind::remove);
    draw.removed = static_cast<int>(j);
    draw.directions = draw_directions(rng);
    draw.log_forward = log_deletion_density(state, draw.candidate);
    draw.log_reverse = log_addition_density(draw.candidate, state, draw.directions);
    return draw;
}

std::optional<ProposalDraw> ProposalKernel::add(const ModelStateD& state, Rng& rng) const {
    auto directions = draw_directions(rng);
    const auto partition = assign_partition(state, data_);
    auto specs = enumerate_splits(partition, directions);
    std::vector<double> weights(specs.size());
    std::transform(specs.begin(), specs.end(), weights.begin(), [](const SplitSpec& s) { return s.weight; });
    if (std::all_of(weights.begin(), weights.end(), [](double w) { return w <= 0; })) return std::nullopt;
    auto& spec = specs[pick(weights, rng)];

    std::vector<std::vector<int>> regions;
    regions.reserve(partition.regions() + 1);
    for (std::size_t k = 0; k < partition.regions(); ++k) {
        if (static_cast<int>(k) == spec.region) {
            regions.push_back(spec.minus);
            regions.push_back(spec.plus);
        } else {
            regions.push_back(partition.subsets[k]);
        }
    }
    ProposalDraw draw(sample_from_regions(regions, rng), MoveKind::add);
    draw.log_forward = log_addition_density(state, draw.candidate, directions);
    draw.log_reverse = log_deletion_density(draw.candidate, state);
    draw.split = std::move(spec);
    draw.directions = std::move(directions);
    return draw;
}

double ProposalKernel::log_relocation_density(const ModelStateD& from, const ModelStateD& to) const {
    if (from.size() != to.size()) return kNegInf;
    const auto jp = jump_probabilities(static_cast<int>(from.size()), lambda_, cfg_.c);
    const auto partition = assign_partition(from, data_);
    return std::log(jp.relocate) + log_region_density(partition.subsets, to);
}

double ProposalKernel::log_deletion_density(const ModelStateD& from, const ModelStateD& to) const {
    if (from.size() < 2 || to.size() + 1 != from.size()) return kNegInf;
    const auto jp = jump_probabilities(static_cast<int>(from.size()), lambda_, cfg_.c);
    const auto weights = deletion_weights(assign_partition(from, data_));
    std::vector<double> terms(from.size());
    for (std::size_t j = 0; j < from.size(); ++j) {
        const auto partition = assign_partition(without(from.planes(), j), data_);
        terms[j] = std::log(weights[j]) + log_region_density(partition.subsets, to);
    }
    return std::log(jp.death) + log_sum_exp(terms);
}

double ProposalKernel::log_addition_density(const ModelStateD& from, const ModelStateD& to,
                                            const std::vector<Eigen::VectorXd>& directions) const {
    if (to.size() != from.size() + 1) return kNegInf;
    const auto K = from.size();
    const auto jp = jump_probabilities(static_cast<int>(K), lambda_, cfg_.c);
    const auto partition = assign_partition(from, data_);
    const auto specs = enumerate_splits(partition, directions);
    const double total_weight =
        std::accumulate(specs.begin(), specs.end(), 0.0, [](double s, const SplitSpec& x) { return s + x.weight; });
    if (!(total_weight > 0)) return kNegInf;

    // Unsplit regions keep their own posterior; region k maps to candidate plane k when it
    // precedes the split and to plane k + 1 when it follows it.
    std::vector<double> before(K), after(K);
    for (std::size_t k = 0; k < K; ++k) {
        const auto post = region_posterior(partition.subsets[k]);
        before[k] = post.log_density(to[k]);
        after[k] = post.log_density(to[k + 1]);
    }
    std::vector<double> prefix(K + 1, 0.0), suffix(K + 1, 0.0);
    for (std::size_t k = 0; k < K; ++k) prefix[k + 1] = prefix[k] + before[k];
    for (std::size_t k = K; k-- > 0;) suffix[k] = suffix[k + 1] + after[k];

    std::vector<double> terms;
    terms.reserve(specs.size());
    for (const auto& spec : specs) {
        if (spec.weight <= 0) continue;
        const auto j = static_cast<std::size_t>(spec.region);
        const double split = region_posterior(spec.minus).log_density(to[j]) +
                             region_posterior(spec.plus).log_density(to[j + 1]);
        terms.push_back(std::log(spec.weight / total_weight) + prefix[j] + split + suffix[j + 1]);
    }
    return std::log(jp.birth) + log_sum_exp(terms);
}

double ProposalKernel::log_density(const ModelStateD& from, const ModelStateD& to,
                                   const std::vector<Eigen::VectorXd>& directions) const {
    if (to.size() == from.size()) return log_relocation_density(from, to);
    if (to.size() + 1 == from.size()) return log_deletion_density(from, to);
    if (to.size() == from.size() + 1) return log_addition_density(from, to, directions);
    return kNegInf;
}

ProposalDraw propose_relocation(const ModelStateD& state, const DatasetD& data, const ProposalConfig& cfg,
                                double lambda, Rng& rng) {
    return ProposalKernel(data, cfg, lambda).relocate(state, rng);
}

ProposalDraw propose_deletion(const ModelStateD& state, const DatasetD& data, const ProposalConfig& cfg,
                              double lambda, Rng& rng) {
    return ProposalKernel(data, cfg, lambda).remove(state, rng);
}

std::optional<ProposalDraw> propose_addition(const ModelStateD& state, const DatasetD& data,
                                             const ProposalConfig& cfg, double lambda, Rng& rng) {
    return ProposalKernel(data, cfg, lambda).add(state, rng);
}

}  // namespace mbcr
