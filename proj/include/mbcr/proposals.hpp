#pragma once

#include <Eigen/Core>

#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "mbcr/config.hpp"
#include "mbcr/conjugate.hpp"
#include "mbcr/core.hpp"

namespace mbcr {

using Rng = std::mt19937_64;

enum class MoveKind { relocate, remove, add };

std::string_view to_string(MoveKind kind);

/// Attempt probabilities for addition (birth), deletion (death) and relocation given K planes.
struct JumpProbabilities {
    double birth = 0;
    double death = 0;
    double relocate = 1;
};

JumpProbabilities jump_probabilities(int K, double lambda, double c);

/// One component of the addition mixture: region `region` split along `direction` at `knot`.
struct SplitSpec {
    int region = 0;
    int direction = 0;  ///< index into the attempt's direction list
    int knot_index = 0; ///< 0-based knot number in 0..L-1
    double knot = 0;
    double weight = 0;  ///< unnormalized n_minus * n_plus
    std::vector<int> minus;  ///< observations with projection <= knot
    std::vector<int> plus;
};

struct ProposalDraw {
    ProposalDraw(ModelStateD candidate_state, MoveKind move) : candidate(std::move(candidate_state)), kind(move) {}

    ModelStateD candidate;
    double log_forward = 0;  ///< log q(candidate | current), jump probability included
    double log_reverse = 0;  ///< log q(current | candidate); -inf when the reverse move is impossible
    MoveKind kind = MoveKind::relocate;
    std::optional<int> removed;          ///< deletion: index of the dropped plane in current
    std::optional<SplitSpec> split;      ///< addition: the selected mixture component
    std::vector<Eigen::VectorXd> directions;  ///< search directions used by this attempt
};

/// Builds the basis-region proposals for one dataset and one ProposalConfig.
///
/// All densities are full mixture densities: the deletion density sums over every plane that
/// could have been removed and the addition density over every (region, direction, knot)
/// component. Forward and reverse densities therefore come from the same functions, which is
/// what makes the acceptance ratio exact.
class ProposalKernel {
public:
    ProposalKernel(const DatasetD& data, ProposalConfig cfg, double lambda);

    const ProposalConfig& config() const { return cfg_; }
    const DatasetD& data() const { return data_; }

    /// Directions for one attempt: unit axes in cardinal mode, fresh N(0, I) vectors otherwise.
    std::vector<Eigen::VectorXd> draw_directions(Rng& rng) const;

    ProposalDraw relocate(const ModelStateD& state, Rng& rng) const;
    ProposalDraw remove(const ModelStateD& state, Rng& rng) const;
    /// std::nullopt when no region can be split.
    std::optional<ProposalDraw> add(const ModelStateD& state, Rng& rng) const;

    double log_relocation_density(const ModelStateD& from, const ModelStateD& to) const;
    double log_deletion_density(const ModelStateD& from, const ModelStateD& to) const;
    double log_addition_density(const ModelStateD& from, const ModelStateD& to,
                                const std::vector<Eigen::VectorXd>& directions) const;

    /// Density of `to` given `from` under the move kind implied by their sizes.
    double log_density(const ModelStateD& from, const ModelStateD& to,
                       const std::vector<Eigen::VectorXd>& directions) const;

    /// Draw every plane of a fresh state from the basis-region posteriors of `regions`.
    ModelStateD sample_from_regions(const std::vector<std::vector<int>>& regions, Rng& rng) const;

    /// Normalized p_d(j), proportional to 1/|C_j| (1/0.25 for an empty region).
    std::vector<double> deletion_weights(const Partition& partition) const;

    /// All K * L * M split components with their unnormalized weights (zero for unsplittable).
    std::vector<SplitSpec> enumerate_splits(const Partition& partition,
                                            const std::vector<Eigen::VectorXd>& directions) const;

private:
    NigDistribution<double> region_posterior(std::span<const int> rows) const;
    double log_region_density(const std::vector<std::vector<int>>& regions, const ModelStateD& to) const;

    const DatasetD& data_;
    ProposalConfig cfg_;
    double lambda_;
    ConjugateUpdater<double> updater_;
};

ProposalDraw propose_relocation(const ModelStateD& state, const DatasetD& data,
                                const ProposalConfig& cfg, double lambda, Rng& rng);
ProposalDraw propose_deletion(const ModelStateD& state, const DatasetD& data,
                              const ProposalConfig& cfg, double lambda, Rng& rng);
std::optional<ProposalDraw> propose_addition(const ModelStateD& state, const DatasetD& data,
                                             const ProposalConfig& cfg, double lambda, Rng& rng);

double log_sum_exp(std::span<const double> values);

}  // namespace mbcr
