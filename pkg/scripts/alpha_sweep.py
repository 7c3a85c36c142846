"""Which coherent amplitude reproduces the published k-matrix?

Fits the four displacement-noise families for ECS(alpha, alpha) with PNRD(5)
at each alpha of the sweep and reports the worst entry-wise deviation.
"""
import argparse

import numpy as np

from cvverify.analysis import appendix_e_families, fit_noise_response, optimize_mu
from cvverify.config import REFERENCE_K
from cvverify.fock import TruncationConfig, default_dim
from cvverify.protocols import ecs_settings
from cvverify.states import StateSpec, build_state


def fit_at(alpha: float, pnrd: int = 5):
    t = TruncationConfig(max(25, default_dim(alpha + 0.5)))
    target = build_state(StateSpec("ECS_plus", (alpha, alpha)), t)
    return fit_noise_response(ecs_settings(alpha, alpha, 1, t, pnrd=pnrd), appendix_e_families(alpha, t), target)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.5, 0.75, 1.0, 1.25, 1.5, 2.0])
    ap.add_argument("--tol", type=float, default=0.02)
    args = ap.parse_args()
    matches = []
    print(f"{'alpha':>6} {'max|dk|':>9} {'min r2':>9} {'1/nu':>7}  k")
    for a in args.alphas:
        resp = fit_at(a)
        err = float(np.abs(resp.k_matrix - REFERENCE_K).max())
        inv = optimize_mu(resp.k_matrix).efficiency
        print(f"{a:6.2f} {err:9.4f} {resp.r_squared.min():9.6f} {inv:7.4f}  {np.round(resp.k_matrix, 3).tolist()}")
        if err <= args.tol:
            matches.append(a)
    print(f"alphas within {args.tol}: {matches}")


if __name__ == "__main__":
    main()
