#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>

#include "mbcr/core.hpp"
#include "mbcr/errors.hpp"

namespace mbcr {

/// Normal-Inverse-Gamma parameters over (alpha, beta) of length p+1, intercept first.
/// Convention: sigma^2 ~ IG(a, b) (density proportional to sigma^{-2(a+1)} exp(-b / sigma^2))
/// and (alpha, beta) | sigma^2 ~ N(mu, sigma^2 V).
template <typename Scalar>
struct NigParams {
    Vector<Scalar> mu;
    Matrix<Scalar> V;
    Scalar a{1};
    Scalar b{1};

    Eigen::Index dim() const { return mu.size(); }

    void validate() const {
        if (mu.size() < 1) throw InputError("NIG mean must be non-empty");
        if (V.rows() != mu.size() || V.cols() != mu.size()) throw InputError("NIG V has wrong shape");
        if (!(a > 0) || !(b > 0)) throw InputError("NIG shape and rate must be positive");
        if (!mu.allFinite() || !V.allFinite()) throw InputError("NIG parameters must be finite");
        if (!V.isApprox(V.transpose(), Scalar(1e-10))) throw InputError("NIG V must be symmetric");
        if (Eigen::LLT<Matrix<Scalar>>(V).info() != Eigen::Success)
            throw InputError("NIG V must be positive definite");
    }
};

namespace detail {

/// Cholesky with escalating diagonal jitter (1e-10, 1e-9, 1e-8 times the mean diagonal).
template <typename Scalar>
Eigen::LLT<Matrix<Scalar>> robust_llt(const Matrix<Scalar>& A) {
    Eigen::LLT<Matrix<Scalar>> llt(A);
    if (llt.info() == Eigen::Success) return llt;
    const Scalar scale = A.trace() / static_cast<Scalar>(A.rows());
    Scalar jitter = Scalar(1e-10) * (scale > 0 ? scale : Scalar(1));
    for (int attempt = 0; attempt < 3; ++attempt, jitter *= 10) {
        Matrix<Scalar> shifted = A;
        shifted.diagonal().array() += jitter;
        llt.compute(shifted);
        if (llt.info() == Eigen::Success) return llt;
    }
    throw NumericalError("Cholesky factorization failed after jitter escalation");
}

template <typename Scalar>
Matrix<Scalar> spd_inverse(const Eigen::LLT<Matrix<Scalar>>& llt, Eigen::Index d) {
    Matrix<Scalar> inv = llt.solve(Matrix<Scalar>::Identity(d, d));
    return Scalar(0.5) * (inv + inv.transpose());
}

}  // namespace detail

/// Sampling and density evaluation for a fixed NIG law; caches the Cholesky factor of V.
template <typename Scalar>
class NigDistribution {
public:
    explicit NigDistribution(NigParams<Scalar> params)
        : params_(std::move(params)), chol_(detail::robust_llt<Scalar>(params_.V)) {
        factor_ = chol_.matrixL();
        log_det_V_ = 2 * factor_.diagonal().array().log().sum();
        log_norm_ = params_.a * std::log(params_.b) - std::lgamma(params_.a) -
                    Scalar(0.5) * static_cast<Scalar>(params_.dim()) *
                        std::log(Scalar(2) * std::numbers::pi_v<Scalar>) -
                    Scalar(0.5) * log_det_V_;
    }

    const NigParams<Scalar>& params() const { return params_; }

    /// Draw (alpha, beta, sigma^2) as a hyperplane. Not validated as a ModelState member.
    template <typename Rng>
    Hyperplane<Scalar> sample(Rng& rng) const {
        std::gamma_distribution<Scalar> gamma(params_.a, Scalar(1) / params_.b);
        Scalar precision = gamma(rng);
        // The smallest positive gamma draws can round to zero for tiny shapes.
        while (!(precision > 0)) precision = gamma(rng);
        const Scalar sigma2 = Scalar(1) / precision;
        std::normal_distribution<Scalar> normal;
        Vector<Scalar> z(params_.dim());
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
        const Vector<Scalar> theta = params_.mu + std::sqrt(sigma2) * (factor_ * z);
        return {theta(0), theta.tail(theta.size() - 1), sigma2};
    }

    template <typename Derived>
    Scalar log_density(Scalar alpha, const Eigen::MatrixBase<Derived>& beta, Scalar sigma2) const {
        if (!(sigma2 > 0)) return -std::numeric_limits<Scalar>::infinity();
        if (beta.size() + 1 != params_.dim()) throw InputError("NIG density: dimension mismatch");
        Vector<Scalar> diff(params_.dim());
        diff(0) = alpha - params_.mu(0);
        diff.tail(beta.size()) = beta - params_.mu.tail(beta.size());
        const Scalar quad = factor_.template triangularView<Eigen::Lower>().solve(diff).squaredNorm();
        const Scalar d = static_cast<Scalar>(params_.dim());
        const Scalar log_s2 = std::log(sigma2);
        return log_norm_ - Scalar(0.5) * d * log_s2 - quad / (2 * sigma2) -
               (params_.a + 1) * log_s2 - params_.b / sigma2;
    }

    Scalar log_density(const Hyperplane<Scalar>& h) const {
        return log_density(h.intercept, h.slope, h.variance);
    }

private:
    NigParams<Scalar> params_;
    Eigen::LLT<Matrix<Scalar>> chol_;
    Matrix<Scalar> factor_;
    Scalar log_det_V_{0};
    Scalar log_norm_{0};
};

/// Conjugate updates against one fixed prior; the prior precision is factored once.
template <typename Scalar>
class ConjugateUpdater {
public:
    explicit ConjugateUpdater(NigParams<Scalar> prior) : prior_(std::move(prior)) {
        const auto d = prior_.dim();
        precision_ = detail::spd_inverse(detail::robust_llt<Scalar>(prior_.V), d);
        precision_mu_ = precision_ * prior_.mu;
    }

    const NigParams<Scalar>& prior() const { return prior_; }

    /// Posterior after observing design rows [1, x_i] and responses. m = 0 returns the prior.
    NigParams<Scalar> update(const Matrix<Scalar>& design, const Vector<Scalar>& y) const {
        if (design.rows() != y.size()) throw InputError("nig_posterior: rows and responses differ");
        if (design.rows() == 0) return prior_;
        if (design.cols() != prior_.dim()) throw InputError("nig_posterior: design has wrong width");
        const auto d = prior_.dim();
        Matrix<Scalar> post_precision = precision_;
        post_precision.template selfadjointView<Eigen::Lower>().rankUpdate(design.transpose());
        post_precision = post_precision.template selfadjointView<Eigen::Lower>();
        const auto llt = detail::robust_llt<Scalar>(post_precision);

        NigParams<Scalar> post;
        post.mu = llt.solve(precision_mu_ + design.transpose() * y);
        post.V = detail::spd_inverse(llt, d);
        post.a = prior_.a + Scalar(0.5) * static_cast<Scalar>(design.rows());
        // Residual form of b* is algebraically equal to the textbook expression and never
        // suffers cancellation.
        const Vector<Scalar> shift = post.mu - prior_.mu;
        post.b = prior_.b + Scalar(0.5) * ((y - design * post.mu).squaredNorm() +
                                           shift.dot(precision_ * shift));
        return post;
    }

    /// Posterior from the dataset rows listed in `rows`.
    NigParams<Scalar> update(const Dataset<Scalar>& data, std::span<const int> rows) const {
        if (rows.empty()) return prior_;
        const auto p = data.dim();
        Matrix<Scalar> design(static_cast<Eigen::Index>(rows.size()), p + 1);
        Vector<Scalar> y(design.rows());
        for (Eigen::Index r = 0; r < design.rows(); ++r) {
            const auto i = rows[static_cast<std::size_t>(r)];
            design(r, 0) = 1;
            design.row(r).tail(p) = data.X().row(i);
            y(r) = data.y()(i);
        }
        return update(design, y);
    }

private:
    NigParams<Scalar> prior_;
    Matrix<Scalar> precision_;
    Vector<Scalar> precision_mu_;
};

template <typename Scalar>
NigParams<Scalar> nig_posterior(const NigParams<Scalar>& prior, const Matrix<Scalar>& design,
                                const Vector<Scalar>& y) {
    if (design.rows() == 0 && y.size() == 0) return prior;
    return ConjugateUpdater<Scalar>(prior).update(design, y);
}

inline constexpr std::size_t kDefaultTruncationAttempts = 100000;

template <typename Scalar, typename Derived>
bool inside_box(Scalar alpha, const Eigen::MatrixBase<Derived>& beta, Scalar bound) {
    return std::abs(alpha) <= bound && (beta.array().abs() <= bound).all();
}

/// Draw from the NIG law; with `truncation`, reject until every coefficient is in [-B, B].
template <typename Scalar, typename Rng>
Hyperplane<Scalar> nig_sample(const NigDistribution<Scalar>& dist, Rng& rng,
                              std::optional<Scalar> truncation = std::nullopt,
                              std::size_t max_attempts = kDefaultTruncationAttempts) {
    if (!truncation) return dist.sample(rng);
    for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
        auto h = dist.sample(rng);
        if (inside_box(h.intercept, h.slope, *truncation)) return h;
    }
    throw SamplingError("truncated NIG sampling exceeded " + std::to_string(max_attempts) + " attempts");
}

template <typename Scalar, typename Rng>
Hyperplane<Scalar> nig_sample(const NigParams<Scalar>& params, Rng& rng,
                              std::optional<Scalar> truncation = std::nullopt,
                              std::size_t max_attempts = kDefaultTruncationAttempts) {
    return nig_sample(NigDistribution<Scalar>(params), rng, truncation, max_attempts);
}

template <typename Scalar, typename Derived>
Scalar nig_log_density(const NigParams<Scalar>& params, Scalar alpha,
                       const Eigen::MatrixBase<Derived>& beta, Scalar sigma2) {
    return NigDistribution<Scalar>(params).log_density(alpha, beta, sigma2);
}

/// NIG prior restricted to the coefficient box [-B, B]^{p+1}. The box mass is estimated once
/// by Monte Carlo at construction and reused for every density evaluation.
template <typename Scalar>
class TruncatedNig {
public:
    static constexpr std::size_t kNormalizerDraws = 100000;
    static constexpr std::uint64_t kNormalizerSeed = 0x6d626372u;

    TruncatedNig(NigParams<Scalar> params, std::optional<Scalar> bound) : dist_(std::move(params)), bound_(bound) {
        if (!bound_) return;
        if (!(*bound_ > 0)) throw InputError("truncation bound must be positive");
        std::mt19937_64 rng(kNormalizerSeed);
        std::size_t inside = 0;
        for (std::size_t i = 0; i < kNormalizerDraws; ++i) {
            const auto h = dist_.sample(rng);
            if (inside_box(h.intercept, h.slope, *bound_)) ++inside;
        }
        if (inside == 0) throw InputError("truncation box carries no estimable prior mass");
        log_mass_ = std::log(static_cast<Scalar>(inside) / static_cast<Scalar>(kNormalizerDraws));
    }

    const NigDistribution<Scalar>& distribution() const { return dist_; }
    std::optional<Scalar> bound() const { return bound_; }
    /// log of the estimated prior mass inside the box (0 when untruncated).
    Scalar log_mass() const { return log_mass_; }

    template <typename Derived>
    Scalar log_density(Scalar alpha, const Eigen::MatrixBase<Derived>& beta, Scalar sigma2) const {
        if (bound_ && !inside_box(alpha, beta, *bound_)) return -std::numeric_limits<Scalar>::infinity();
        return dist_.log_density(alpha, beta, sigma2) - log_mass_;
    }

    Scalar log_density(const Hyperplane<Scalar>& h) const {
        return log_density(h.intercept, h.slope, h.variance);
    }

    template <typename Rng>
    Hyperplane<Scalar> sample(Rng& rng) const {
        return nig_sample(dist_, rng, bound_);
    }

private:
    NigDistribution<Scalar> dist_;
    std::optional<Scalar> bound_;
    Scalar log_mass_{0};
};

using NigParamsD = NigParams<double>;

}  // namespace mbcr
