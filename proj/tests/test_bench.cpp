#include <doctest.h>

#include <cmath>

#include "mbcr/bench.hpp"

using namespace mbcr;

TEST_CASE("problem definitions") {
    CHECK(problem_dim(ProblemId::p1) == 5);
    CHECK(problem_dim(ProblemId::p2) == 6);
    CHECK(problem_dim(ProblemId::p3) == 4);
    CHECK(problem_dim(ProblemId::quad) == 2);
    CHECK(problem_from_string("p3") == ProblemId::p3);
    CHECK(to_string(ProblemId::quad) == "quad");
    CHECK_THROWS_AS(problem_from_string("p4"), InputError);

    CHECK(truth_function(ProblemId::p3)(Eigen::Vector4d(1, 0, 0, 0)) == doctest::Approx(0.8262));
    Eigen::VectorXd x2 = Eigen::VectorXd::Zero(6);
    x2(0) = 0.5;
    x2(1) = -0.5;
    CHECK(truth_function(ProblemId::p2)(x2) == 0.0);
    CHECK(truth_function(ProblemId::quad)(Eigen::Vector2d(1, 1)) == doctest::Approx(2.4));
    Eigen::VectorXd x1(5);
    x1 << 1, 2, -1, 3, 2;
    CHECK(truth_function(ProblemId::p1)(x1) == doctest::Approx(1 - 3 + 1));
}

TEST_CASE("generators") {
    const auto a = generate({ProblemId::p3, 50, 4});
    const auto b = generate({ProblemId::p3, 50, 4});
    CHECK(a.data.X() == b.data.X());
    CHECK(a.data.y() == b.data.y());
    CHECK(a.data.dim() == 4);
    CHECK(a.data.X().cwiseAbs().maxCoeff() <= 4.0);
    const auto c = generate({ProblemId::p2, 50, 4});
    CHECK(c.data.X().cwiseAbs().maxCoeff() <= 1.0);

    // Residuals about the truth have the configured noise variance.
    const auto big = generate({ProblemId::p2, 20000, 1});
    double ss = 0;
    for (Eigen::Index i = 0; i < big.data.size(); ++i) {
        const double r = big.data.y()(i) - big.truth(big.data.X().row(i).transpose());
        ss += r * r;
    }
    CHECK(ss / 20000 == doctest::Approx(0.25).epsilon(0.05));
    CHECK_THROWS_AS(generate({ProblemId::p2, 0, 1}), InputError);
}

TEST_CASE("evaluate_mse") {
    const ProblemSpec spec{ProblemId::p2, 100, 1};
    const auto truth = truth_function(ProblemId::p2);
    CHECK(evaluate_mse(truth, spec, 1000, 3) == 0.0);
    CHECK(evaluate_mse([&](const Eigen::VectorXd& x) { return truth(x) + 1; }, spec, 1000, 3) == doctest::Approx(1.0));

    // A constant estimator: the MSE is the second moment of (truth - c) under the test design.
    const double c = 2.0 / 3.0;
    Rng rng(3);
    const Eigen::MatrixXd X = sample_design(ProblemId::p2, 1000, rng);
    double direct = 0;
    for (Eigen::Index i = 0; i < 1000; ++i) {
        const double e = truth(X.row(i).transpose()) - c;
        direct += e * e / 1000;
    }
    CHECK(evaluate_mse([&](const Eigen::VectorXd&) { return c; }, spec, 1000, 3) == doctest::Approx(direct).epsilon(1e-12));
    CHECK_THROWS_AS(evaluate_mse(truth, spec, 0, 3), InputError);
}

TEST_CASE("stability experiment") {
    const auto r = stability_experiment(3, 30, 1, {truth_stability_method()});
    REQUIRE(r.size() == 1);
    CHECK(r[0].minimizers.size() == 3);
    CHECK(r[0].mean_distance == 0.0);
    CHECK_THROWS_AS(stability_experiment(1, 30, 1, {truth_stability_method()}), InputError);

    MbcrSettings quick;
    quick.iterations = 60;
    quick.burn_in = 30;
    const std::vector<StabilityMethod> methods{mbcr_stability_method(quick), lse_stability_method()};
    const auto x = stability_experiment(2, 40, 7, methods);
    const auto y = stability_experiment(2, 40, 7, methods);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(x[k].name == y[k].name);
        for (std::size_t r2 = 0; r2 < 2; ++r2) CHECK(x[k].minimizers[r2] == y[k].minimizers[r2]);
        CHECK(x[k].mean_distance <= std::sqrt(2.0));
    }
}
