#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <utility>

#include "mbcr/proposals.hpp"
#include "mbcr/sampler.hpp"

namespace mbcr {

/// Average of the retained max-affine draws at x.
double posterior_mean(const PosteriorSamples& samples, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Pointwise equal-tailed band: empirical quantiles (linear interpolation between order
/// statistics) at (1 - level)/2 and (1 + level)/2. Requires at least 10 draws.
std::pair<double, double> posterior_band(const PosteriorSamples& samples,
                                         const Eigen::Ref<const Eigen::VectorXd>& x, double level);

struct ConvexityReport {
    std::size_t probes = 0;
    /// max over probes of f(t x1 + (1-t) x2) - (t f(x1) + (1-t) f(x2)); <= 0 up to rounding.
    double max_violation = 0;
};

/// Probes the midpoint inequality of the posterior mean with random triples in [lower, upper],
/// plus every pair of box corners.
ConvexityReport convexity_certificate(const PosteriorSamples& samples, std::size_t probe_count, Rng& rng,
                                      const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

}  // namespace mbcr
