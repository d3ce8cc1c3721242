#include "mbcr/predict.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mbcr/errors.hpp"

namespace mbcr {

namespace {

void check_query(const PosteriorSamples& samples, Eigen::Index dim) {
    if (samples.draws.empty()) throw ContractError("posterior samples are empty");
    if (samples.dim() != dim) throw InputError("query dimension does not match the model");
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

double posterior_mean(const PosteriorSamples& samples, const Eigen::Ref<const Eigen::VectorXd>& x) {
    check_query(samples, x.size());
    double sum = 0;
    for (const auto& draw : samples.draws) sum += evaluate(draw, x);
    return sum / static_cast<double>(samples.draws.size());
}

std::pair<double, double> posterior_band(const PosteriorSamples& samples,
                                         const Eigen::Ref<const Eigen::VectorXd>& x, double level) {
    check_query(samples, x.size());
    if (!(level > 0 && level < 1)) throw InputError("band level must lie in (0, 1)");
    if (samples.draws.size() < 10) throw ContractError("posterior_band needs at least 10 draws");
    std::vector<double> values;
    values.reserve(samples.draws.size());
    for (const auto& draw : samples.draws) values.push_back(evaluate(draw, x));
    std::sort(values.begin(), values.end());
    const double tail = 0.5 * (1.0 - level);
    return {quantile_sorted(values, tail), quantile_sorted(values, 1.0 - tail)};
}

ConvexityReport convexity_certificate(const PosteriorSamples& samples, std::size_t probe_count, Rng& rng,
                                      const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
    check_query(samples, lower.size());
    if (probe_count < 1) throw InputError("probe_count must be >= 1");
    if (upper.size() != lower.size() || (upper.array() < lower.array()).any())
        throw InputError("convexity_certificate: malformed box");

    ConvexityReport report;
    report.max_violation = -std::numeric_limits<double>::infinity();
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto probe = [&](const Eigen::VectorXd& x1, const Eigen::VectorXd& x2, double t) {
        const Eigen::VectorXd mid = t * x1 + (1 - t) * x2;
        const double f1 = posterior_mean(samples, x1);
        const double f2 = posterior_mean(samples, x2);
        const double gap = posterior_mean(samples, mid) - (t * f1 + (1 - t) * f2);
        // Relative to the magnitudes involved so large-valued surrogates are judged fairly.
        const double scale = std::max(1.0, std::abs(f1) + std::abs(f2));
        report.max_violation = std::max(report.max_violation, gap / scale);
        ++report.probes;
    };

    const auto p = lower.size();
    auto random_point = [&] {
        Eigen::VectorXd x(p);
        for (Eigen::Index j = 0; j < p; ++j) x(j) = lower(j) + unif(rng) * (upper(j) - lower(j));
        return x;
    };
    for (std::size_t i = 0; i < probe_count; ++i) {
        const auto x1 = random_point();
        const auto x2 = random_point();
        probe(x1, x2, unif(rng));
    }
    if (p <= 10) {
        const std::size_t corners = std::size_t{1} << p;
        auto corner = [&](std::size_t mask) {
            Eigen::VectorXd x(p);
            for (Eigen::Index j = 0; j < p; ++j) x(j) = (mask >> j) & 1u ? upper(j) : lower(j);
            return x;
        };
        for (std::size_t c = 0; c < corners; ++c) probe(corner(c), corner(corners - 1 - c), unif(rng));
    }
    return report;
}

}  // namespace mbcr
