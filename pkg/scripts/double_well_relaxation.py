"""Ball values of the double well against radius, compared to its convex envelope.

Usage: python3 scripts/double_well_relaxation.py [--xi -2 -1 -0.5 0 0.5 1 2]
"""

import argparse

from cellhom.cellsolver import SolverParams, quasiconvexify
from cellhom.integrand import make_integrand
from cellhom.oracles import double_well_envelope
from cellhom.structure import build_euclidean


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--xi", type=float, nargs="+", default=[-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0])
    p.add_argument("--rho", type=float, nargs="+", default=[0.5, 0.25, 0.125])
    p.add_argument("--epr", type=int, default=64, help="elements per unit radius")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    s = build_euclidean(1)
    L = make_integrand("double_well_1d", {"p": 4})
    head = " ".join(f"rho={r:<8g}" for r in args.rho)
    print(f"{'xi':>6s} {head} {'envelope':>10s} {'L(xi)':>8s}")
    for xi in args.xi:
        r = quasiconvexify(s, L, [0.5], [[xi]], args.rho, args.epr, SolverParams(seed=args.seed))
        vals = " ".join(f"{v:<12.3e}" for v in r.values)
        print(f"{xi:6.2f} {vals} {double_well_envelope(xi):10.4f} {(xi * xi - 1) ** 2:8.4f}")


if __name__ == "__main__":
    main()
