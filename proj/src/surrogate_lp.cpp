#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "mbcr/errors.hpp"
#include "mbcr/solvers.hpp"

namespace mbcr {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr int kMaxPivots = 100000;
constexpr int kMaxCuts = 20000;

/// Vertex-following simplex for min c^T z s.t. rows(i)^T z >= rhs(i), started from a feasible
/// vertex whose active set has dim(z) independent rows. Bland's rule picks the lowest index
/// for both the released and the blocking constraint.
struct VertexSimplex {
    MatrixXd rows;
    VectorXd rhs;

    struct Vertex {
        VectorXd z;
        std::vector<Index> active;
    };

    Vertex minimize(const VectorXd& c, Vertex v) const {
        const Index nz = c.size();
        for (int pivot = 0; pivot < kMaxPivots; ++pivot) {
            MatrixXd AW(nz, nz);
            for (Index k = 0; k < nz; ++k) AW.row(k) = rows.row(v.active[static_cast<std::size_t>(k)]);
            const Eigen::PartialPivLU<MatrixXd> lu(AW);
            // Re-solve the vertex from its active rows; incremental updates drift.
            VectorXd rhs_w(nz);
            for (Index k = 0; k < nz; ++k) rhs_w(k) = rhs(v.active[static_cast<std::size_t>(k)]);
            v.z = lu.solve(rhs_w);
            const VectorXd mu = lu.transpose().solve(c);

            Index release = -1;
            Index release_row = std::numeric_limits<Index>::max();
            for (Index k = 0; k < nz; ++k) {
                const Index r = v.active[static_cast<std::size_t>(k)];
                if (mu(k) < -1e-12 && r < release_row) {
                    release = k;
                    release_row = r;
                }
            }
            if (release < 0) return v;

            const VectorXd d = lu.solve(VectorXd::Unit(nz, release));
            double step = std::numeric_limits<double>::infinity();
            Index blocking = -1;
            for (Index i = 0; i < rows.rows(); ++i) {
                const double slope = rows.row(i).dot(d);
                if (slope >= -1e-12) continue;
                if (std::find(v.active.begin(), v.active.end(), i) != v.active.end()) continue;
                const double gap = std::max(0.0, rows.row(i).dot(v.z) - rhs(i));
                const double t = gap / -slope;
                if (t < step) {
                    step = t;
                    blocking = i;
                }
            }
            if (blocking < 0) throw SolverError("surrogate LP is unbounded", 0.0);
            v.z += step * d;
            v.active[static_cast<std::size_t>(release)] = blocking;
        }
        throw SolverError("surrogate LP exceeded the pivot cap", 0.0);
    }
};

struct Cut {
    double offset = 0;
    VectorXd slope;
    std::vector<int> pieces;  ///< dominating plane index per state

    bool same_pieces(const Cut& other) const { return pieces == other.pieces; }
};

class Surrogate {
public:
    explicit Surrogate(const std::vector<ModelStateD>& states) : states_(states) {}

    double value(const VectorXd& x) const { return surrogate_value(states_, x); }

    /// The aggregated supporting plane touching the surrogate at x.
    Cut cut_at(const VectorXd& x) const {
        Cut cut{0.0, VectorXd::Zero(x.size()), {}};
        for (const auto& state : states_) {
            const int k = dominating_plane(state.planes(), x);
            cut.pieces.push_back(k);
            const auto& h = state[static_cast<std::size_t>(k)];
            cut.offset += h.intercept;
            cut.slope += h.slope;
        }
        const double m = static_cast<double>(states_.size());
        cut.offset /= m;
        cut.slope /= m;
        return cut;
    }

    /// Upper bound of the surrogate over the box.
    double upper_bound(const VectorXd& lower, const VectorXd& upper) const {
        double total = 0;
        for (const auto& state : states_) {
            double best = -std::numeric_limits<double>::infinity();
            for (const auto& h : state)
                best = std::max(best, h.intercept + h.slope.cwiseProduct(lower).cwiseMax(h.slope.cwiseProduct(upper)).sum());
            total += best;
        }
        return total / static_cast<double>(states_.size());
    }

private:
    const std::vector<ModelStateD>& states_;
};

/// Restricted master over the free coordinates (x_free, t) with the remaining coordinates fixed.
class Master {
public:
    Master(const std::vector<Cut>& cuts, const VectorXd& lower, const VectorXd& upper, const VectorXd& fixed_x,
           Index first_free, double t_lower, std::optional<double> t_upper)
        : first_free_(first_free), fixed_x_(fixed_x) {
        const Index p = lower.size();
        const Index r = p - first_free;
        nz_ = r + 1;
        const Index n_rows = static_cast<Index>(cuts.size()) + 2 * r + 1 + (t_upper ? 1 : 0);
        lp_.rows = MatrixXd::Zero(n_rows, nz_);
        lp_.rhs.resize(n_rows);
        Index row = 0;
        // Bound rows first so that the starting vertex uses the lowest indices.
        for (Index j = 0; j < r; ++j, ++row) {
            lp_.rows(row, j) = 1.0;
            lp_.rhs(row) = lower(first_free + j);
        }
        for (Index j = 0; j < r; ++j, ++row) {
            lp_.rows(row, j) = -1.0;
            lp_.rhs(row) = -upper(first_free + j);
        }
        lp_.rows(row, r) = 1.0;
        lp_.rhs(row++) = t_lower;
        if (t_upper) {
            lp_.rows(row, r) = -1.0;
            lp_.rhs(row++) = -*t_upper;
        }
        cut_begin_ = row;
        for (const auto& cut : cuts) {
            // t - s_free^T x_free >= offset + s_fixed^T x_fixed
            lp_.rows.row(row).head(r) = -cut.slope.tail(r).transpose();
            lp_.rows(row, r) = 1.0;
            lp_.rhs(row++) = cut.offset + cut.slope.head(first_free).dot(fixed_x.head(first_free));
        }
    }

    /// Vertex at the lower corner of the free box with t on the highest cut.
    VertexSimplex::Vertex lower_corner() const {
        const Index r = nz_ - 1;
        VertexSimplex::Vertex v;
        v.z = VectorXd::Zero(nz_);
        for (Index j = 0; j < r; ++j) {
            v.z(j) = lp_.rhs(j);
            v.active.push_back(j);
        }
        Index best = -1;
        double t = -std::numeric_limits<double>::infinity();
        for (Index i = cut_begin_; i < lp_.rows.rows(); ++i) {
            const double need = lp_.rhs(i) - lp_.rows.row(i).head(r).dot(v.z.head(r));
            if (need > t) {
                t = need;
                best = i;
            }
        }
        v.z(r) = t;
        v.active.push_back(best);
        return v;
    }

    VertexSimplex::Vertex minimize_t(const VertexSimplex::Vertex& start) const {
        return lp_.minimize(VectorXd::Unit(nz_, nz_ - 1), start);
    }

    VertexSimplex::Vertex minimize_coordinate(Index free_index, const VertexSimplex::Vertex& start) const {
        return lp_.minimize(VectorXd::Unit(nz_, free_index), start);
    }

    VectorXd full_x(const VertexSimplex::Vertex& v) const {
        VectorXd x = fixed_x_;
        x.tail(nz_ - 1) = v.z.head(nz_ - 1);
        return x;
    }

private:
    Index first_free_;
    VectorXd fixed_x_;
    Index nz_ = 0;
    Index cut_begin_ = 0;
    VertexSimplex lp_;
};

}  // namespace

double surrogate_value(const std::vector<ModelStateD>& states, const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (states.empty()) throw InputError("surrogate needs at least one state");
    double total = 0;
    for (const auto& s : states) total += evaluate(s, x);
    return total / static_cast<double>(states.size());
}

LpSolution minimize_surrogate(const std::vector<ModelStateD>& states, const Eigen::VectorXd& lower,
                              const Eigen::VectorXd& upper) {
    if (states.empty()) throw InputError("minimize_surrogate: no states");
    const Index p = states.front().dim();
    for (const auto& s : states)
        if (s.dim() != p) throw InputError("minimize_surrogate: states disagree on dimension");
    if (lower.size() != p || upper.size() != p) throw InputError("minimize_surrogate: box dimension mismatch");

    LpSolution sol;
    if (!lower.allFinite() || !upper.allFinite() || (lower.array() > upper.array()).any()) {
        sol.status = LpStatus::infeasible_error;
        sol.x_star = VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
        sol.value = std::numeric_limits<double>::quiet_NaN();
        return sol;
    }

    const Surrogate f(states);
    std::vector<Cut> cuts{f.cut_at(0.5 * (lower + upper))};
    const double t_lower = [&] {
        const auto& c = cuts.front();
        return c.offset + c.slope.cwiseProduct(lower).cwiseMin(c.slope.cwiseProduct(upper)).sum() - 1.0;
    }();
    const double f_max = f.upper_bound(lower, upper);
    auto tol_for = [](double v) { return 1e-10 * std::max(1.0, std::abs(v)); };
    auto known = [&cuts](const Cut& cut) {
        return std::any_of(cuts.begin(), cuts.end(), [&](const Cut& c) { return c.same_pieces(cut); });
    };

    // Row generation on the epigraph LP: add the supporting plane at each master solution
    // until the master's t meets the surrogate.
    const VectorXd no_fixed = lower;
    VectorXd x;
    double best = 0;
    for (int round = 0;; ++round) {
        if (round > kMaxCuts) throw SolverError("minimize_surrogate: cut generation did not terminate", 0.0);
        const Master master(cuts, lower, upper, no_fixed, 0, t_lower, std::nullopt);
        const auto v = master.minimize_t(master.lower_corner());
        x = master.full_x(v);
        best = f.value(x);
        if (best - v.z(p) <= tol_for(best)) break;
        // A repeated cut carries no new information; the remaining gap is rounding.
        auto cut = f.cut_at(x);
        if (known(cut)) break;
        cuts.push_back(std::move(cut));
    }

    // Lexicographic tie-break over the optimal face {x : f(x) <= best}. The Kelley point lies
    // on it, so the capped master is feasible up to rounding.
    const double level = best;
    VectorXd fixed = x;
    for (Index d = 0; d < p; ++d) {
        for (int round = 0;; ++round) {
            if (round > kMaxCuts) throw SolverError("minimize_surrogate: tie-break did not terminate", 0.0);
            const Master relaxed(cuts, lower, upper, fixed, d, t_lower, std::max(level, f_max + 1.0));
            const auto start = relaxed.minimize_t(relaxed.lower_corner());
            const Master capped(cuts, lower, upper, fixed, d, t_lower, level);
            if (start.z(p - d) > level) {
                // Rounding pushed the cut model above the level; the current point stands.
                break;
            }
            // Both masters share one row layout, so the relaxed vertex is a valid start.
            const auto v = capped.minimize_coordinate(0, start);
            const VectorXd candidate = capped.full_x(v);
            // Accept once the cut model is exact at the candidate; a further cut would repeat one.
            auto cut = f.cut_at(candidate);
            if (f.value(candidate) - v.z(p - d) <= tol_for(level) || known(cut)) {
                fixed = candidate;
                break;
            }
            cuts.push_back(std::move(cut));
        }
    }

    sol.x_star = fixed.cwiseMax(lower).cwiseMin(upper);
    sol.value = f.value(sol.x_star);
    return sol;
}

}  // namespace mbcr
