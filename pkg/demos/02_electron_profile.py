"""Compare the electron profile u with the explicit minorant U.

U solves u'' + (2/r)u' - (lambda^2/r^4) u = 0 with the same boundary
data (zero at the anode, unit slope at the cathode), which trades the
ionization gain for damping; it therefore sits below u pointwise and
its cathode value has the closed form U(2) = (4/lambda) tanh(lambda/2).
The point of carrying U around is
the high-voltage argument: once lambda is past the sparking root the
boundary functional evaluated on U already goes negative, and the true
B sits below it there, so no further sign changes can hide at large
voltage.

Run:  python3 demos/02_electron_profile.py
"""

import math

import numpy as np

import spark_branch as sb


def main():
    p = sb.Parameters(2.0, 3.0, 1.0)
    grid = sb.RadialGrid(257)
    r = grid.r

    print("explicit minorant U against the electron profile u, a=2 b=3 gamma=1")
    print()
    print("closed form at the cathode: U(2) = (4/lambda) tanh(lambda/2)")
    print()
    print(f"{'lambda':>8s} {'u(2)':>12s} {'U(2)':>12s} {'closed form':>12s} {'min(u-U)':>11s}")
    for lam in (1.0, 5.0, 20.0, 60.0):
        u = sb.solve_electron(lam, p, grid).u
        U = sb.auxiliary_U(lam, grid)
        exact = 4.0 / lam * math.tanh(lam / 2.0)
        gap = float(np.min(u - U))
        print(f"{lam:8.1f} {u[-1]:12.6f} {U[-1]:12.6f} {exact:12.6f} {gap:11.1e}")
    print()
    print("min(u-U) stays nonnegative to rounding: u dominates U everywhere.")
    print()

    # the high-voltage sign: B on the true profile vs B on the minorant
    print(f"{'lambda':>8s} {'B(lambda, u)':>14s} {'B(lambda, U)':>14s}")
    for lam in (5.0, 20.0, 60.0):
        sol = sb.solve_electron(lam, p, grid)
        U = sb.auxiliary_U(lam, grid)
        Bu = sb.boundary_B(sol, p, grid)
        BU = sb.boundary_functional(lam, U, p, grid)
        print(f"{lam:8.1f} {Bu:+14.6e} {BU:+14.6e}")
    print()
    print("past the sparking root B stays below B(., U), and B(., U) itself is")
    print("negative for large lambda, so the root found in demo 01 is the only")
    print("crossing.")
    print()

    # a coarse picture of the two profiles at lambda = 20
    lam = 20.0
    u = sb.solve_electron(lam, p, grid).u
    U = sb.auxiliary_U(lam, grid)
    print(f"profiles at lambda = {lam:g} (every 32nd node):")
    print(f"{'r':>8s} {'u':>12s} {'U':>12s}")
    for i in range(0, grid.n, 32):
        print(f"{r[i]:8.4f} {u[i]:12.6f} {U[i]:12.6f}")


if __name__ == "__main__":
    main()
