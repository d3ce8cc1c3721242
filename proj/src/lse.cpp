#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "mbcr/errors.hpp"
#include "mbcr/solvers.hpp"

namespace mbcr {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Pairwise constraint operator c_ij = yhat_j - yhat_i - g_i^T (x_j - x_i) on a dense n x n grid
/// (the diagonal is identically zero and kept at zero).
class PairwiseConstraints {
public:
    explicit PairwiseConstraints(const MatrixXd& X) : X_(X) {}

    MatrixXd apply(const VectorXd& yhat, const MatrixXd& G) const {
        MatrixXd C = G * X_.transpose();  // C(i, j) = g_i . x_j
        const VectorXd self = C.diagonal();
        C = (-C).eval();
        C.colwise() += self - yhat;
        C.rowwise() += yhat.transpose();
        C.diagonal().setZero();
        return C;
    }

    /// Adjoint: returns (A^T W) split into the yhat and g blocks.
    void apply_adjoint(const MatrixXd& W, VectorXd& ry, MatrixXd& RG) const {
        const VectorXd rows = W.rowwise().sum();
        ry = W.colwise().sum().transpose() - rows;
        RG = -(W * X_);
        RG += rows.asDiagonal() * X_;
    }

private:
    const MatrixXd& X_;
};

/// Factored (P + sigma I + rho A^T A). The g-block is block diagonal, so the system is
/// reduced to an n x n Schur complement on yhat.
class ReducedKkt {
public:
    ReducedKkt(const MatrixXd& X, double sigma, double rho) : X_(X), rho_(rho) {
        const Index n = X.rows(), p = X.cols();
        const VectorXd col_sum = X.colwise().sum().transpose();
        const MatrixXd gram = X.transpose() * X;
        sum_d_.resize(n, p);
        gg_.clear();
        gg_.reserve(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) {
            const VectorXd xi = X.row(i).transpose();
            sum_d_.row(i) = (col_sum - static_cast<double>(n) * xi).transpose();
            // sum_j (x_j - x_i)(x_j - x_i)^T
            MatrixXd block = gram - col_sum * xi.transpose() - xi * col_sum.transpose() +
                             static_cast<double>(n) * xi * xi.transpose();
            block *= rho;
            block.diagonal().array() += sigma;
            gg_.emplace_back(block);
        }
        MatrixXd S = MatrixXd::Constant(n, n, -2.0 * rho);
        S.diagonal().array() += 1.0 + sigma + 2.0 * rho * static_cast<double>(n);
        MatrixXd B(n, p);
        for (Index i = 0; i < n; ++i) {
            B = -rho * (X.rowwise() - X.row(i));
            B.row(i) = rho * sum_d_.row(i);
            const MatrixXd C = gg_[static_cast<std::size_t>(i)].solve(B.transpose());
            S.noalias() -= B * C;
        }
        schur_.compute(S);
        if (schur_.info() != Eigen::Success) throw NumericalError("LSE: KKT Schur complement is not SPD");
    }

    void solve(const VectorXd& ry, const MatrixXd& RG, VectorXd& u, MatrixXd& V) const {
        const Index n = X_.rows(), p = X_.cols();
        MatrixXd T(n, p);
        for (Index i = 0; i < n; ++i) T.row(i) = gg_[static_cast<std::size_t>(i)].solve(RG.row(i).transpose()).transpose();
        u = ry - apply_B(T);
        u = schur_.solve(u);
        // B_i^T u = -rho (X^T u - x_i sum(u)) + rho sum_d_i u_i
        const VectorXd xtu = X_.transpose() * u;
        const double usum = u.sum();
        V.resize(n, p);
        for (Index i = 0; i < n; ++i) {
            const VectorXd bt = -rho_ * (xtu - X_.row(i).transpose() * usum) + rho_ * u(i) * sum_d_.row(i).transpose();
            V.row(i) = gg_[static_cast<std::size_t>(i)].solve(RG.row(i).transpose() - bt).transpose();
        }
    }

private:
    /// sum_i B_i t_i for the rows t_i of T.
    VectorXd apply_B(const MatrixXd& T) const {
        const Index n = X_.rows();
        const MatrixXd Q = X_ * T.transpose();  // Q(j, i) = x_j . t_i
        const VectorXd self = Q.diagonal();
        VectorXd out = -rho_ * (Q.rowwise().sum() - VectorXd::Constant(n, self.sum()));
        // The j == i term of the first sum vanished; add the diagonal block rows.
        for (Index i = 0; i < n; ++i) out(i) += rho_ * sum_d_.row(i).dot(T.row(i));
        return out;
    }

    const MatrixXd& X_;
    double rho_;
    MatrixXd sum_d_;
    std::vector<Eigen::LLT<MatrixXd>> gg_;
    Eigen::LLT<MatrixXd> schur_;
};

double inf_norm(const MatrixXd& M) { return M.size() ? M.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

namespace {

struct ScaledFit {
    VectorXd yhat;
    MatrixXd G;
    double residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
};

ScaledFit solve_admm(const MatrixXd& X, const VectorXd& y, int max_iterations, double tolerance) {
    const Index n = X.rows(), p = X.cols();
    constexpr double sigma = 1e-6;
    constexpr double relax = 1.6;
    constexpr int check_every = 10;
    constexpr int adapt_every = 50;
    double rho = 0.1;

    const PairwiseConstraints A(X);
    auto kkt = std::make_unique<ReducedKkt>(X, sigma, rho);

    ScaledFit fit{y, MatrixXd::Zero(n, p)};
    VectorXd& yhat = fit.yhat;
    MatrixXd& G = fit.G;
    MatrixXd slack = A.apply(yhat, G).cwiseMax(0.0);
    MatrixXd dual = MatrixXd::Zero(n, n);

    VectorXd ry, u;
    MatrixXd RG, V;
    int it = 0;
    for (; it < max_iterations; ++it) {
        A.apply_adjoint(rho * slack - dual, ry, RG);
        ry += sigma * yhat + y;
        RG += sigma * G;
        kkt->solve(ry, RG, u, V);
        const MatrixXd Ct = A.apply(u, V);

        yhat = relax * u + (1 - relax) * yhat;
        G = relax * V + (1 - relax) * G;
        const MatrixXd zrel = relax * Ct + (1 - relax) * slack;
        MatrixXd next = (zrel + dual / rho).cwiseMax(0.0);
        next.diagonal().setZero();
        dual += rho * (zrel - next);
        slack = std::move(next);

        if ((it + 1) % check_every != 0) continue;
        const MatrixXd Ax = A.apply(yhat, G);
        const double prim = inf_norm(Ax - slack);
        VectorXd dy;
        MatrixXd dG;
        A.apply_adjoint(dual, dy, dG);
        dy += yhat - y;
        const double dual_res = std::max(inf_norm(dy), inf_norm(dG));
        fit.residual = prim + dual_res;
        if (fit.residual < tolerance) {
            ++it;
            break;
        }
        if ((it + 1) % adapt_every == 0) {
            const double prim_scale = std::max({inf_norm(Ax), inf_norm(slack), 1e-12});
            const double dual_scale = std::max({inf_norm(yhat), inf_norm(dy - yhat + y), inf_norm(dG), inf_norm(y), 1e-12});
            const double ratio = std::sqrt((prim / prim_scale) / std::max(dual_res / dual_scale, 1e-300));
            const double next_rho = std::clamp(rho * ratio, 1e-6, 1e6);
            if (next_rho > 5 * rho || next_rho < rho / 5) {
                rho = next_rho;
                kkt = std::make_unique<ReducedKkt>(X, sigma, rho);
            }
        }
    }
    fit.iterations = it;
    return fit;
}

/// Newton system P + A^T D A of the interior-point method for one weight matrix D.
class WeightedNewton {
public:
    WeightedNewton(const MatrixXd& X, const MatrixXd& D, double ridge) : n_(X.rows()), p_(X.cols()) {
        const MatrixXd Dsym = D + D.transpose();
        MatrixXd S = -Dsym;
        S.diagonal().array() += 1.0 + Dsym.rowwise().sum().array();
        blocks_.reserve(static_cast<std::size_t>(n_));
        B_.reserve(static_cast<std::size_t>(n_));
        MatrixXd delta(n_, p_);
        for (Index i = 0; i < n_; ++i) {
            delta = X.rowwise() - X.row(i);
            const VectorXd w = D.row(i).transpose();
            MatrixXd H = delta.transpose() * w.asDiagonal() * delta;
            H.diagonal().array() += ridge + 1e-13 * H.diagonal().maxCoeff();
            MatrixXd B = -(w.asDiagonal() * delta);
            B.row(i) = (w.transpose() * delta);
            blocks_.emplace_back(H);
            const MatrixXd W = blocks_.back().matrixL().solve(B.transpose());
            S.noalias() -= W.transpose() * W;
            B_.push_back(std::move(B));
        }
        schur_.compute(S);
        if (schur_.info() != Eigen::Success) throw NumericalError("LSE: Newton system is not positive definite");
    }

    void solve(const VectorXd& ry, const MatrixXd& RG, VectorXd& dy, MatrixXd& dG) const {
        VectorXd r = ry;
        for (Index i = 0; i < n_; ++i)
            r.noalias() -= B_[idx(i)] * blocks_[idx(i)].solve(RG.row(i).transpose());
        dy = schur_.solve(r);
        dG.resize(n_, p_);
        for (Index i = 0; i < n_; ++i)
            dG.row(i) = blocks_[idx(i)].solve(RG.row(i).transpose() - B_[idx(i)].transpose() * dy).transpose();
    }

private:
    static std::size_t idx(Index i) { return static_cast<std::size_t>(i); }

    Index n_, p_;
    std::vector<Eigen::LLT<MatrixXd>> blocks_;
    std::vector<MatrixXd> B_;
    Eigen::LDLT<MatrixXd> schur_;
};

double max_step(const MatrixXd& v, const MatrixXd& dv) {
    double step = 1.0;
    for (Index j = 0; j < v.cols(); ++j)
        for (Index i = 0; i < v.rows(); ++i)
            if (i != j && dv(i, j) < 0) step = std::min(step, -v(i, j) / dv(i, j));
    return step;
}

/// Mehrotra predictor-corrector on min 1/2 |yhat - y|^2 + ridge/2 |G|^2 s.t. A(yhat, G) = s >= 0.
/// Subgradients at hull points are not identified by the least-squares objective alone; the
/// small ridge picks the near minimum-norm ones, which keeps extrapolation sane.
ScaledFit solve_interior_point(const MatrixXd& X, const VectorXd& y, int max_iterations, double tolerance) {
    constexpr double ridge = 1e-10;
    const Index n = X.rows(), p = X.cols();
    const PairwiseConstraints A(X);
    const double m = static_cast<double>(n) * static_cast<double>(n - 1);

    ScaledFit fit{y, MatrixXd::Zero(n, p)};
    MatrixXd s = MatrixXd::Ones(n, n);
    MatrixXd lam = MatrixXd::Ones(n, n);
    lam.diagonal().setZero();
    if (n == 1) {
        fit.residual = 0;
        return fit;
    }

    VectorXd aty, rdy, dy;
    MatrixXd atg, dG;
    int it = 0;
    for (; it < max_iterations; ++it) {
        MatrixXd rp = A.apply(fit.yhat, fit.G) - s;
        rp.diagonal().setZero();
        A.apply_adjoint(lam, aty, atg);
        rdy = fit.yhat - y - aty;
        const MatrixXd rdg = ridge * fit.G - atg;
        const double mu = s.cwiseProduct(lam).sum() / m;
        fit.residual = inf_norm(rp) + std::max(inf_norm(rdy), inf_norm(rdg));
        // Relative gap, floored at tolerance^2 so that exactly convex data fits to rounding.
        const double objective = (y - fit.yhat).squaredNorm();
        if (fit.residual < tolerance && mu * m < tolerance * std::max(objective, tolerance)) break;

        const MatrixXd D = lam.cwiseQuotient(s);
        const WeightedNewton newton(X, D, ridge);

        // Direction for complementarity target rc: returns (ds, dlam) and fills dy, dG.
        auto direction = [&](const MatrixXd& rc, MatrixXd& ds, MatrixXd& dlam) {
            MatrixXd w = (rc + lam.cwiseProduct(rp)).cwiseQuotient(s);
            w.diagonal().setZero();
            VectorXd wy;
            MatrixXd wg;
            A.apply_adjoint(w, wy, wg);
            newton.solve(-rdy - wy, -rdg - wg, dy, dG);
            ds = A.apply(dy, dG) + rp;
            ds.diagonal().setZero();
            dlam = -(rc + lam.cwiseProduct(ds)).cwiseQuotient(s);
            dlam.diagonal().setZero();
        };

        MatrixXd ds_aff, dl_aff;
        const MatrixXd rc_aff = s.cwiseProduct(lam);
        direction(rc_aff, ds_aff, dl_aff);
        const double a_aff = std::min(max_step(s, ds_aff), max_step(lam, dl_aff));
        const double mu_aff = (s + a_aff * ds_aff).cwiseProduct(lam + a_aff * dl_aff).sum() / m;
        const double centering = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

        MatrixXd rc = rc_aff + ds_aff.cwiseProduct(dl_aff);
        rc.array() -= centering * mu;
        rc.diagonal().setZero();
        MatrixXd ds, dl;
        direction(rc, ds, dl);
        const double step = 0.99 * std::min(max_step(s, ds), max_step(lam, dl));
        if (!(step > 1e-14)) break;
        fit.yhat += step * dy;
        fit.G += step * dG;
        s += step * ds;
        lam += step * dl;
    }
    fit.iterations = it;
    return fit;
}

}  // namespace

std::string_view to_string(LseMethod method) {
    return method == LseMethod::admm ? "admm" : "interior_point";
}

QpSolution lse_fit(const DatasetD& data, const LseOptions& options) {
    const MatrixXd& X = data.X();
    const Index n = data.size(), p = data.dim();
    if (n > options.max_n) throw InputError("lse_fit: n = " + std::to_string(n) + " exceeds the cap of " +
                                            std::to_string(options.max_n));
    if (!(options.tolerance > 0)) throw InputError("lse_fit: tolerance must be positive");
    if (options.max_iterations < 1) throw InputError("lse_fit: max_iterations must be positive");

    // The solvers run on centered and scaled data. The constraints are invariant under affine
    // changes of x and y, so the fit maps back exactly.
    const Eigen::RowVectorXd x_center = X.colwise().mean();
    Eigen::RowVectorXd x_scale = (X.rowwise() - x_center).cwiseAbs().colwise().maxCoeff();
    for (Index j = 0; j < p; ++j)
        if (!(x_scale(j) > 0)) x_scale(j) = 1.0;
    const double y_center = data.y().mean();
    double y_scale = (data.y().array() - y_center).abs().maxCoeff();
    if (!(y_scale > 0)) y_scale = 1.0;
    const MatrixXd Xs = (X.rowwise() - x_center).array().rowwise() / x_scale.array();
    const VectorXd ys = (data.y().array() - y_center) / y_scale;

    ScaledFit fit = options.method == LseMethod::admm
                        ? solve_admm(Xs, ys, options.max_iterations, options.tolerance)
                        : solve_interior_point(Xs, ys, options.max_iterations, options.tolerance);
    if (!(fit.residual < options.tolerance))
        throw SolverError("lse_fit: no convergence after " + std::to_string(fit.iterations) +
                              " iterations (residual " + std::to_string(fit.residual) + ")",
                          fit.residual);

    const VectorXd yhat = (fit.yhat.array() * y_scale + y_center).matrix();
    const MatrixXd G = (fit.G.array().rowwise() * (y_scale / x_scale.array())).matrix();

    // Snap to exact feasibility: evaluate the fitted max-affine function at every anchor and take
    // the attaining piece's slope. Moves each value by at most the remaining violation.
    QpSolution sol;
    sol.yhat.resize(n);
    sol.g.resize(n, p);
    const MatrixXd S = G * X.transpose();  // S(k, i) = g_k . x_i
    const VectorXd offsets = yhat - S.diagonal();
    for (Index i = 0; i < n; ++i) {
        Index best = i;
        double best_value = yhat(i);
        for (Index k = 0; k < n; ++k) {
            const double v = offsets(k) + S(k, i);
            if (v > best_value) {
                best_value = v;
                best = k;
            }
        }
        sol.yhat(i) = best_value;
        sol.g.row(i) = G.row(best);
    }
    sol.objective = (data.y() - sol.yhat).squaredNorm();
    sol.kkt_residual = fit.residual;
    sol.iterations = fit.iterations;
    return sol;
}

double lse_predict(const QpSolution& sol, const Eigen::MatrixXd& anchors, const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (anchors.rows() != sol.yhat.size() || anchors.cols() != x.size() || sol.g.cols() != x.size())
        throw InputError("lse_predict: dimension mismatch");
    double best = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < anchors.rows(); ++i)
        best = std::max(best, sol.yhat(i) + sol.g.row(i).dot(x - anchors.row(i).transpose()));
    return best;
}

ModelStateD lse_surrogate(const QpSolution& sol, const Eigen::MatrixXd& anchors) {
    std::vector<HyperplaneD> planes;
    planes.reserve(static_cast<std::size_t>(anchors.rows()));
    for (Index i = 0; i < anchors.rows(); ++i)
        planes.push_back({sol.yhat(i) - sol.g.row(i).dot(anchors.row(i)), sol.g.row(i).transpose(), 1.0});
    return ModelStateD(std::move(planes));
}

double lse_max_violation(const QpSolution& sol, const Eigen::MatrixXd& anchors) {
    double worst = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < anchors.rows(); ++i)
        for (Index j = 0; j < anchors.rows(); ++j) {
            const double v = sol.yhat(i) + sol.g.row(i).dot(anchors.row(j) - anchors.row(i)) - sol.yhat(j);
            worst = std::max(worst, v);
        }
    return worst;
}

}  // namespace mbcr
