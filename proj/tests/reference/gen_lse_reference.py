"""Regenerates lse_reference.hpp: 20 one-dimensional convex least-squares instances (n = 20)
solved once with an interior-point QP solver through cvxpy.

    python3 gen_lse_reference.py > lse_reference.hpp
"""

import cvxpy as cp
import numpy as np

N_INSTANCES = 20
N = 20


def solve(x, y):
    n = len(x)
    yhat = cp.Variable(n)
    g = cp.Variable(n)
    cons = [yhat >= yhat[i] + g[i] * (x - x[i]) for i in range(n)]
    prob = cp.Problem(cp.Minimize(cp.sum_squares(y - yhat)), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    assert prob.status == cp.OPTIMAL, prob.status
    return prob.value


def main():
    rng = np.random.default_rng(20240917)
    print("#pragma once")
    print("// Generated by gen_lse_reference.py; do not edit.")
    print("#include <array>")
    print()
    print("namespace lse_reference {")
    print()
    print(f"inline constexpr int kInstances = {N_INSTANCES};")
    print(f"inline constexpr int kSize = {N};")
    print()
    print("struct Instance {")
    print("    std::array<double, kSize> x;")
    print("    std::array<double, kSize> y;")
    print("    double objective;")
    print("};")
    print()
    print("inline const std::array<Instance, kInstances> kData{{")
    for k in range(N_INSTANCES):
        x = rng.uniform(-2.0, 2.0, N)
        shape = k % 4
        if shape == 0:
            f = x**2
        elif shape == 1:
            f = np.abs(x - 0.3)
        elif shape == 2:
            f = np.exp(0.8 * x)
        else:
            f = np.zeros(N)
        y = f + rng.normal(0.0, 0.5, N)
        obj = solve(x, y)
        xs = ", ".join(repr(float(v)) for v in x)
        ys = ", ".join(repr(float(v)) for v in y)
        print(f"    {{{{{{{xs}}}}}, {{{{{ys}}}}}, {obj!r}}},")
    print("}};")
    print()
    print("}  // namespace lse_reference")


if __name__ == "__main__":
    main()
