#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "mbcr/errors.hpp"

namespace mbcr {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// One affine piece alpha + beta^T x with its own noise variance.
template <typename Scalar>
struct Hyperplane {
    Scalar intercept{0};
    Vector<Scalar> slope;
    Scalar variance{1};

    Eigen::Index dim() const { return slope.size(); }

    template <typename Derived>
    Scalar operator()(const Eigen::MatrixBase<Derived>& x) const {
        return intercept + slope.dot(x);
    }

    bool operator==(const Hyperplane&) const = default;
};

/// A point in the trans-dimensional parameter space: K >= 1 hyperplanes sharing one dimension.
template <typename Scalar>
class ModelState {
public:
    using PlaneType = Hyperplane<Scalar>;

    explicit ModelState(std::vector<PlaneType> planes) : planes_(std::move(planes)) {
        if (planes_.empty()) throw InputError("ModelState needs at least one hyperplane");
        const auto p = planes_.front().dim();
        if (p < 1) throw InputError("hyperplane slope must have length >= 1");
        for (const auto& h : planes_) {
            if (h.dim() != p) throw InputError("hyperplanes disagree on dimension");
            if (!(h.variance > 0) || !std::isfinite(static_cast<double>(h.variance)))
                throw InputError("hyperplane variance must be positive and finite");
        }
    }

    Eigen::Index dim() const { return planes_.front().dim(); }
    std::size_t size() const { return planes_.size(); }
    const std::vector<PlaneType>& planes() const { return planes_; }
    const PlaneType& operator[](std::size_t k) const { return planes_[k]; }

    auto begin() const { return planes_.begin(); }
    auto end() const { return planes_.end(); }

    bool operator==(const ModelState&) const = default;

private:
    std::vector<PlaneType> planes_;
};

/// Immutable design matrix (n x p) plus responses.
template <typename Scalar>
class Dataset {
public:
    Dataset(Matrix<Scalar> X, Vector<Scalar> y) : X_(std::move(X)), y_(std::move(y)) {
        if (X_.rows() < 1 || X_.cols() < 1) throw InputError("dataset needs n >= 1 and p >= 1");
        if (y_.size() != X_.rows()) throw InputError("X and y disagree on the number of rows");
        if (!X_.allFinite() || !y_.allFinite()) throw InputError("dataset contains non-finite values");
    }

    Eigen::Index size() const { return X_.rows(); }
    Eigen::Index dim() const { return X_.cols(); }
    const Matrix<Scalar>& X() const { return X_; }
    const Vector<Scalar>& y() const { return y_; }
    auto row(Eigen::Index i) const { return X_.row(i).transpose(); }

private:
    Matrix<Scalar> X_;
    Vector<Scalar> y_;
};

/// Observation -> dominating hyperplane. subsets[k] lists observations in increasing order.
struct Partition {
    std::vector<int> assignment;
    std::vector<std::vector<int>> subsets;

    std::size_t regions() const { return subsets.size(); }
    bool operator==(const Partition&) const = default;
};

template <typename Scalar, typename Derived>
Scalar evaluate(const ModelState<Scalar>& state, const Eigen::MatrixBase<Derived>& x) {
    if (x.size() != state.dim()) throw InputError("evaluate: dimension mismatch");
    Scalar best = state[0](x);
    for (std::size_t k = 1; k < state.size(); ++k) best = std::max(best, state[k](x));
    return best;
}

/// Index of the maximizing plane; ties go to the lowest index.
template <typename Scalar, typename Derived>
int dominating_plane(const std::vector<Hyperplane<Scalar>>& planes,
                     const Eigen::MatrixBase<Derived>& x) {
    int arg = 0;
    Scalar best = planes[0](x);
    for (std::size_t k = 1; k < planes.size(); ++k) {
        const Scalar v = planes[k](x);
        if (v > best) {
            best = v;
            arg = static_cast<int>(k);
        }
    }
    return arg;
}

inline Partition partition_from_assignment(std::vector<int> assignment, std::size_t regions) {
    Partition part;
    part.subsets.resize(regions);
    for (std::size_t i = 0; i < assignment.size(); ++i)
        part.subsets[static_cast<std::size_t>(assignment[i])].push_back(static_cast<int>(i));
    part.assignment = std::move(assignment);
    return part;
}

template <typename Scalar>
Partition assign_partition(const std::vector<Hyperplane<Scalar>>& planes, const Dataset<Scalar>& data) {
    if (planes.empty()) throw InputError("assign_partition: no hyperplanes");
    if (planes.front().dim() != data.dim()) throw InputError("assign_partition: dimension mismatch");
    std::vector<int> assignment(static_cast<std::size_t>(data.size()));
    for (Eigen::Index i = 0; i < data.size(); ++i)
        assignment[static_cast<std::size_t>(i)] = dominating_plane(planes, data.row(i));
    return partition_from_assignment(std::move(assignment), planes.size());
}

template <typename Scalar>
Partition assign_partition(const ModelState<Scalar>& state, const Dataset<Scalar>& data) {
    return assign_partition(state.planes(), data);
}

/// Heteroscedastic Gaussian log-likelihood: y_i ~ N(f(x_i), sigma^2 of the dominating plane).
template <typename Scalar>
Scalar log_likelihood(const ModelState<Scalar>& state, const Dataset<Scalar>& data) {
    if (state.dim() != data.dim()) throw InputError("log_likelihood: dimension mismatch");
    const Scalar log_two_pi = std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
    Scalar total = 0;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        const auto x = data.row(i);
        const auto& h = state[static_cast<std::size_t>(dominating_plane(state.planes(), x))];
        const Scalar r = data.y()(i) - h(x);
        total -= Scalar(0.5) * (log_two_pi + std::log(h.variance)) + r * r / (Scalar(2) * h.variance);
    }
    return total;
}

/// Axis-aligned bounding box of the design.
template <typename Scalar>
std::pair<Vector<Scalar>, Vector<Scalar>> bounding_box(const Dataset<Scalar>& data) {
    return {data.X().colwise().minCoeff().transpose(), data.X().colwise().maxCoeff().transpose()};
}

using HyperplaneD = Hyperplane<double>;
using ModelStateD = ModelState<double>;
using DatasetD = Dataset<double>;

}  // namespace mbcr
