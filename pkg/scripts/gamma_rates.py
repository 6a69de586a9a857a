"""Deviation of the boundary-value energies e_t from L_hom as t grows.

Writes the two-column (t, deviation) data for a log-log plot and prints the
observed slopes between successive t. The rate is descriptive only. In 1D,
integer t reproduces the cell problem exactly, so the default schedule leaves
a quarter period over to expose the boundary mismatch.

Usage: python3 scripts/gamma_rates.py [--t 2 4 8 16 32] [--out gamma_rates.dat]
"""

import argparse
import math

from cellhom.cellsolver import SolverParams
from cellhom.gammacheck import GammaExperiment, gamma_experiment
from cellhom.integrand import make_integrand
from cellhom.oracles import harmonic_mean, sine_coefficient
from cellhom.structure import Box, build_euclidean


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--t", type=float, nargs="+", default=[1.25, 2.25, 4.25, 8.25, 16.25, 32.25])
    p.add_argument("--ept", type=int, default=16, help="elements per period")
    p.add_argument("--out", default="gamma_rates.dat")
    p.add_argument("--tasks", type=int, default=1)
    args = p.parse_args()

    L = make_integrand("p_dirichlet_coeff", {"a0": 2.0, "a1": 1.0, "p": 2})
    ref = harmonic_mean(sine_coefficient(2.0, 1.0))
    exp = GammaExperiment(build_euclidean(1), L, [[1.0]], Box((0.0,), (1.0,)), args.t, args.ept, lhom=ref)
    rep = gamma_experiment(exp, SolverParams(multistart=1), args.tasks)
    with open(args.out, "w") as fh:
        fh.write(rep.plot_data())
    print(f"L_hom {ref:.10f}")
    print(f"{'t':>6s} {'e_t':>14s} {'deviation':>10s} {'slope':>7s}")
    prev = None
    for t, e, d in zip(rep.ts, rep.energies, rep.deviations):
        slope = ""
        if prev and d > 0 and prev[1] > 0:
            slope = f"{math.log(d / prev[1]) / math.log(t / prev[0]):7.2f}"
        print(f"{t:6g} {e:14.10f} {d:10.2e} {slope:>7s}")
        prev = (t, d)
    print(f"passed={rep.passed}; plot data in {args.out}")


if __name__ == "__main__":
    main()
