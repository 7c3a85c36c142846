"""Command-line entry point: ``cvverify {state,verify,simulate,equiv}``."""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScenarioConfig, family_from_template, load_families, read_k_matrix
from .errors import CVVerifyError, ConfigError
from .fock import TruncationConfig, fidelity
from .operators import pnrd_acceptance, pnrd_loss
from .pipeline import simulate_scenario, verify_scenario
from .simulate import batch_csv
from .states import (ALIASES, StateSpec, build_state, closed_form_normalization, local_equivalence_transform,
                     parse_complex, transformed_state)


def fmt(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.6g}"


def _stamp(args) -> str | None:
    if args.no_timestamp:
        return None
    now = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()
    return f"generated {now} by cvverify {__version__}"


def _amplitudes(text: str | None) -> list[complex]:
    if text is None:
        return []
    return [parse_complex(tok) for tok in text.split(",") if tok.strip()]


def spec_from_args(args) -> StateSpec:
    family = ALIASES.get(args.family, args.family)
    alphas, betas = _amplitudes(args.alpha), _amplitudes(args.beta)
    if family in ("Coherent", "CatEven", "CatOdd", "GHZ_plus", "GHZ_minus"):
        params = alphas
    else:
        params = alphas + betas
    return StateSpec(family, tuple(params), int(args.sign))


def _truncation(args, fallback: TruncationConfig) -> TruncationConfig:
    dim = args.dim if args.dim is not None else fallback.dim
    tol = args.tail_tol if args.tail_tol is not None else fallback.tail_tolerance
    return TruncationConfig(dim, tol)


def _write(args, name: str, text: str) -> None:
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)


def cmd_state(args) -> int:
    spec = spec_from_args(args)
    trunc = _truncation(args, spec.default_truncation())
    state = build_state(spec, trunc)
    lines = [
        f"family: {spec.family}",
        f"params: {', '.join(fmt(p.real) if p.imag == 0 else str(p) for p in spec.params)}",
        f"dim per mode: {trunc.dim}",
        f"norm: {fmt(state.norm())}",
        f"normalization constant: {fmt(state.raw_norm_sq)} (closed form {fmt(closed_form_normalization(spec))})",
        f"mean photon number: {', '.join(fmt(n) for n in state.mean_photon_numbers())}",
        f"truncation tail: {fmt(state.tail_mass)}",
    ]
    if state.num_modes == 1:
        for r in args.pnrd or [3]:
            lines.append(f"p({r}) = {fmt(pnrd_acceptance(state, r))}  (loss {fmt(pnrd_loss(state, r))})")
    if args.show_amplitudes:
        for idx, amp in np.ndenumerate(state.amplitudes):
            if abs(amp) > 1e-12:
                lines.append(f"  {idx}: {amp.real:+.6g}{amp.imag:+.6g}j")
    print("\n".join(lines))
    return 0


def _scenario(args) -> ScenarioConfig:
    if args.config:
        cfg = ScenarioConfig.load(args.config)
    elif args.preset:
        cfg = ScenarioConfig.preset(args.preset)
    elif args.family:
        cfg = ScenarioConfig(spec_from_args(args))
    else:
        raise ConfigError("give --preset, --config or a target --family")
    if args.dim is not None or args.tail_tol is not None:
        cfg.truncation = _truncation(args, cfg.resolved_truncation())
    if args.pnrd:
        cfg.pnrd = args.pnrd[0]
    if getattr(args, "families", None):
        trunc = cfg.resolved_truncation()
        templates = load_families(args.families)
        for t in templates:
            family_from_template(t, trunc)
        cfg.families = templates
    if getattr(args, "k_matrix", None):
        k, _, _ = read_k_matrix(Path(args.k_matrix).read_text())
        cfg.k_matrix = k.tolist()
    if getattr(args, "settings", None):
        cfg.settings = [int(s) for s in args.settings.split(",")]
    if getattr(args, "mu", None):
        cfg.mu = [float(x) for x in args.mu.split(",")]
        cfg.optimize = False
    if getattr(args, "epsilon", None):
        cfg.epsilons = list(args.epsilon)
    if getattr(args, "delta", None):
        cfg.deltas = list(args.delta)
    return cfg


def _matrix_csv(labels, columns, mat, header) -> str:
    buf = io.StringIO()
    if header:
        buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["setting", *columns])
    for label, row in zip(labels, mat):
        w.writerow([label, *(repr(float(x)) for x in row)])
    return buf.getvalue()


def cmd_verify(args) -> int:
    cfg = _scenario(args)
    out = verify_scenario(cfg)
    res = out.result
    stamp = _stamp(args)
    lines = ["k-matrix (rows: settings, columns: noise families)",
             "  " + "  ".join(f"{c:>10}" for c in ["", *out.family_labels])]
    for label, row in zip(out.setting_labels, out.k_matrix):
        lines.append("  " + "  ".join(f"{c:>10}" for c in [label, *(fmt(x) for x in row)]))
    if out.response is not None:
        lines.append(f"min r^2: {fmt(out.response.r_squared.min())}")
    lines.append(f"nu_opt: {fmt(res.nu_opt)}")
    lines.append(f"1/nu_opt: {fmt(res.efficiency) if res.nu_opt > 0 else 'inf'}")
    lines.append(f"mu: {', '.join(fmt(m) for m in res.mu)}")
    if out.reference is not None:
        ref = out.reference
        lines.append(f"reference k-matrix: 1/nu_opt {fmt(ref.efficiency)}, mu {', '.join(fmt(m) for m in ref.mu)}")
    lines.append("sample complexity:")
    for row in out.complexity:
        lines.append(f"  eps={fmt(row['epsilon'])} delta={fmt(row['delta'])}: N={fmt(row['n_exact'])} (approx {fmt(row['n_approx'])})")
    for w in out.warnings:
        lines.append(f"WARNING: {w}")
    print("\n".join(lines))
    for w in out.warnings:
        print(f"warning: {w}", file=sys.stderr)

    _write(args, "k_matrix.csv", _matrix_csv(out.setting_labels, out.family_labels, out.k_matrix, stamp))
    if out.response is not None:
        _write(args, "r_squared.csv", _matrix_csv(out.setting_labels, out.family_labels, out.response.r_squared, stamp))
    buf = io.StringIO()
    if stamp:
        buf.write(f"# {stamp}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epsilon", "delta", "n_exact", "n_approx"])
    for row in out.complexity:
        w.writerow([repr(row["epsilon"]), repr(row["delta"]), row["n_exact"], repr(row["n_approx"])])
    _write(args, "sample_complexity.csv", buf.getvalue())
    doc = {
        "scenario": cfg.to_dict(),
        "noise_response": out.response.to_dict() if out.response else None,
        "optimization": res.to_dict(),
        "reference_optimization": out.reference.to_dict() if out.reference else None,
        "sample_complexity": out.complexity,
        "warnings": out.warnings,
    }
    _write(args, "verify.json", json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")
    return 0


def cmd_simulate(args) -> int:
    cfg = _scenario(args)
    eps = args.epsilon[0] if args.epsilon else None
    delta = args.delta[0] if args.delta else None
    sim = simulate_scenario(cfg, runs=args.runs, seed=args.seed, epsilon=eps, delta=delta, rounds=args.rounds,
                            source=args.source, nu_source=args.nu_source, saturation_policy=args.saturation_policy)
    passes = sum(r.report.passes for r in sim.rows)
    total = sum(r.report.rounds for r in sim.rows)
    lines = [
        f"nu: {fmt(sim.nu)}  mu: {', '.join(fmt(m) for m in sim.mu)}",
        f"rounds per run (N): {sim.rounds}",
        f"source: {sim.source_label}" + (f" at kappa={fmt(sim.kappa)} (eps={fmt(sim.epsilon)})" if sim.kappa is not None else ""),
        f"runs: {len(sim.rows)}",
        f"per-round pass rate: {fmt(passes / total if total else 1.0)}",
        f"acceptance: {fmt(sim.acceptance)} (bound delta={fmt(sim.delta)}, 3 sigma={fmt(3 * sim.sigma)})",
        f"within bound: {'yes' if sim.within_bound else 'NO'}",
    ]
    print("\n".join(lines))
    _write(args, "simulate.csv", batch_csv(sim.rows, _stamp(args)))
    return 0


def cmd_equiv(args) -> int:
    spec = spec_from_args(args)
    report = local_equivalence_transform(spec, theta=args.theta)
    doc = report.to_dict()
    trunc = _truncation(args, TruncationConfig.for_amplitude(max(
        [spec.max_amplitude()] + [abs(x) for x in report.canonical.params]) + spec.max_amplitude()))
    moved = transformed_state(report, trunc)
    doc["fidelity_with_canonical"] = fidelity(moved, build_state(report.canonical, trunc))
    doc["dim"] = trunc.dim
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    print(text, end="")
    _write(args, "equiv.json", text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dim", type=int, help="Fock levels per mode")
    common.add_argument("--tail-tol", type=float, help="max probability allowed above the cutoff")
    common.add_argument("--pnrd", type=int, action="append", help="PNRD resolution (repeatable for `state`)")
    common.add_argument("--seed", type=int, help="base seed")
    common.add_argument("--out", help="output directory for CSV/JSON")
    common.add_argument("--no-timestamp", action="store_true", help="omit the timestamp header line in CSV output")
    common.add_argument("--family", help="target family, e.g. ecs+, ghz-, cat-even, ecs-general")
    common.add_argument("--alpha", help="comma-separated complex amplitudes (1, 0.5+1j, ...)")
    common.add_argument("--beta", help="comma-separated complex amplitudes")
    common.add_argument("--sign", type=int, default=1, choices=(1, -1), help="branch sign for general families")

    parser = argparse.ArgumentParser(prog="cvverify", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("state", parents=[common], help="build a target state and print diagnostics")
    p.add_argument("--show-amplitudes", action="store_true")
    p.set_defaults(func=cmd_state)

    scen = argparse.ArgumentParser(add_help=False)
    scen.add_argument("--preset", help="built-in scenario (appendix-e)")
    scen.add_argument("--config", help="scenario JSON file")
    scen.add_argument("--epsilon", type=float, action="append", help="infidelity (repeatable)")
    scen.add_argument("--delta", type=float, action="append", help="failure probability (repeatable)")

    p = sub.add_parser("verify", parents=[common, scen], help="fit k-matrix, optimize mu, tabulate N")
    p.add_argument("--families", help="JSON file of noise-family templates")
    p.add_argument("--k-matrix", help="CSV k-matrix; skips the fit")
    p.add_argument("--settings", help="1-based comma-separated subset of settings")
    p.add_argument("--mu", help="fixed comma-separated mu instead of optimizing")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", parents=[common, scen], help="Monte Carlo verification runs")
    p.add_argument("--families", help="JSON file of noise-family templates")
    p.add_argument("--settings", help="1-based comma-separated subset of settings")
    p.add_argument("--runs", type=int)
    p.add_argument("--rounds", type=int, help="rounds per run; default: exact N from (nu, eps, delta)")
    p.add_argument("--source", help="target, worst, or a family label")
    p.add_argument("--nu-source", choices=("fit", "reference"))
    p.add_argument("--saturation-policy", choices=("discard_resample", "count_as_fail"))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("equiv", parents=[common], help="canonicalize a general ECS/GHZ state")
    p.add_argument("--theta", type=float, default=np.pi / 4, help="beam splitter angle for bcss")
    p.set_defaults(func=cmd_equiv)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CVVerifyError as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
        if exc.exit_code == 2:
            err["hint"] = f"see `cvverify {args.command} --help`"
        print(json.dumps(err), file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": 2}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
