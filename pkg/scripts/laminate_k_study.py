"""Cell values s_k of the 2D laminate against k and mesh resolution.

The cell boundary condition forces a layer of width O(1/k) where the
corrector cannot develop, so s_k approaches the laminate value from above at
a rate close to 1/k. Prints s_k, its deviation from the oracle, and k (s_k -
L_hom) which should level off.

Usage: python3 scripts/laminate_k_study.py [--res 16 32] [--k 1 2 4 8]
"""

import argparse

from cellhom.cellsolver import SolverParams
from cellhom.homog import compute_lhom
from cellhom.integrand import make_integrand
from cellhom.oracles import laminate_lhom
from cellhom.structure import build_euclidean


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--res", type=int, nargs="+", default=[16, 32])
    p.add_argument("--k", type=int, nargs="+", default=[1, 2, 4, 8])
    p.add_argument("--tasks", type=int, default=1)
    args = p.parse_args()

    s = build_euclidean(2)
    L = make_integrand("laminate_2d", {"a1": 1.0, "a2": 3.0})
    xi = [[1.0, 0.0]]
    ref = laminate_lhom(1.0, 3.0, xi)
    tab = compute_lhom(s, L, [xi], args.k, args.res, SolverParams(multistart=1), args.tasks)
    print(f"oracle {ref:.6f}")
    print(f"{'res':>5s} {'k':>3s} {'s_k':>10s} {'rel_dev':>9s} {'k*dev':>8s}")
    for r in tab.rows:
        dev = r.s - ref
        print(f"{r.resolution:5d} {r.k:3d} {r.s:10.6f} {dev / ref:9.2e} {r.k * dev:8.4f}")


if __name__ == "__main__":
    main()
