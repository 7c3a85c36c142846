"""Empirical acceptance probability vs number of rounds for the worst noise
family, compared with (1 - nu_hat eps)^N. Writes a CSV for external plotting."""
import argparse
import csv
import sys

import numpy as np

from cvverify.analysis import appendix_e_families, fit_noise_response, kappa_at_epsilon, sample_complexity
from cvverify.config import REFERENCE_MU
from cvverify.fock import TruncationConfig
from cvverify.protocols import ecs_settings, strategy
from cvverify.simulate import RunConfig, acceptance_curve
from cvverify.states import StateSpec, build_state


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epsilon", type=float, default=0.01)
    ap.add_argument("--delta", type=float, default=0.01)
    ap.add_argument("--repetitions", type=int, default=2000)
    ap.add_argument("--points", type=int, default=12)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--dim", type=int, default=25)
    args = ap.parse_args()

    t = TruncationConfig(args.dim)
    target = build_state(StateSpec("ECS_plus", (1, 1)), t)
    sets = ecs_settings(1, 1, 1, t, pnrd=5)
    fams = appendix_e_families(1, t)
    mu = np.asarray(REFERENCE_MU) / sum(REFERENCE_MU)
    k = fit_noise_response(sets, fams, target).k_matrix
    cols = mu @ k
    j = int(np.argmin(cols))
    nu_hat = float(cols[j])
    n_star = sample_complexity(nu_hat, args.epsilon, args.delta)[0]
    kappa = kappa_at_epsilon(fams[j], target, args.epsilon)
    grid = np.unique(np.linspace(0, 1.5 * n_star, args.points).astype(int))
    cfg = RunConfig(strategy(sets, mu), (fams[j], kappa), rounds=1, seed=args.seed)

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["rounds", "acceptance", "stderr", "predicted"])
    for pt in acceptance_curve(cfg, grid, args.repetitions):
        w.writerow([pt.rounds, pt.acceptance, pt.stderr, (1 - nu_hat * args.epsilon) ** pt.rounds])
    print(f"# worst family {fams[j].label}, nu_hat={nu_hat:.5f}, N*={n_star}", file=sys.stderr)


if __name__ == "__main__":
    main()
