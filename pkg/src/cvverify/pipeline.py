"""End-to-end scenario runs shared by the CLI and the scripts."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import (NoiseResponse, OptimizationResult, fit_noise_response, infidelity, kappa_at_epsilon,
                       optimize_mu, sample_complexity)
from .config import ScenarioConfig
from .errors import BadRange, BadSpec
from .fock import ModeState, TruncationConfig
from .protocols import MeasurementSetting, settings_for_spec, strategy
from .simulate import BatchRow, Simulator
from .states import build_state


@dataclass
class VerifyOutcome:
    truncation: TruncationConfig
    target: ModeState
    settings: list[MeasurementSetting]
    k_matrix: np.ndarray
    setting_labels: list[str]
    family_labels: list[str]
    response: NoiseResponse | None
    result: OptimizationResult
    complexity: list[dict]
    warnings: list[str] = field(default_factory=list)
    reference: OptimizationResult | None = None  # LP on the scenario's reference_k, if any


def evaluate_mu(k: np.ndarray, mu) -> OptimizationResult:
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (k.shape[0],):
        raise BadSpec(f"mu has {mu.size} entries for {k.shape[0]} settings")
    cols = mu @ k
    nu = float(cols.min())
    return OptimizationResult(nu, mu, tuple(int(i) for i in np.flatnonzero(cols <= nu + 1e-9)),
                              np.zeros(k.shape[1]), math.nan)


def complexity_table(nu: float, epsilons, deltas) -> list[dict]:
    rows = []
    for eps in epsilons:
        for delta in deltas:
            if nu <= 0:
                rows.append({"epsilon": eps, "delta": delta, "n_exact": None, "n_approx": None})
                continue
            n_exact, n_approx = sample_complexity(min(nu, 1.0), eps, delta)
            rows.append({"epsilon": eps, "delta": delta, "n_exact": n_exact, "n_approx": n_approx})
    return rows


def verify_scenario(cfg: ScenarioConfig) -> VerifyOutcome:
    for eps in cfg.epsilons:
        if not 0 < eps < 1:
            raise BadRange(f"epsilon must lie in (0, 1), got {eps}")
    for delta in cfg.deltas:
        if not 0 < delta < 1:
            raise BadRange(f"delta must lie in (0, 1), got {delta}")
    trunc = cfg.resolved_truncation()
    target = build_state(cfg.state, trunc)
    settings = settings_for_spec(cfg.state, trunc, cfg.pnrd)
    if cfg.settings:
        try:
            settings = [settings[i - 1] for i in cfg.settings]
        except IndexError as exc:
            raise BadSpec(f"setting index out of range 1..{len(settings)}: {cfg.settings}") from exc
    response = None
    if cfg.k_matrix is not None:
        k = np.asarray(cfg.k_matrix, dtype=float)
        set_labels = [f"setting{i + 1}" for i in range(k.shape[0])]
        fam_labels = [f"family{j + 1}" for j in range(k.shape[1])]
    else:
        families = cfg.noise_families(trunc)
        response = fit_noise_response(settings, families, target, eps_max=cfg.eps_max, n_points=cfg.n_points)
        k = response.k_matrix
        set_labels, fam_labels = list(response.setting_labels), list(response.family_labels)
    if cfg.optimize or cfg.mu is None:
        result = optimize_mu(k)
    else:
        result = evaluate_mu(k, cfg.mu)
    warnings = []
    for j in np.flatnonzero(np.all(np.abs(k) < 1e-9, axis=0)):
        warnings.append(f"protocol cannot detect this noise: family {fam_labels[j]!r} has k = 0 in every setting")
    if response is not None:
        bad = np.argwhere(response.r_squared < 0.999)
        for l, j in bad:
            warnings.append(f"weak linear fit (r^2 = {response.r_squared[l, j]:.6f}) for {set_labels[l]} / {fam_labels[j]}")
    reference = optimize_mu(np.asarray(cfg.reference_k, dtype=float)) if cfg.reference_k is not None else None
    return VerifyOutcome(trunc, target, settings, k, set_labels, fam_labels, response, result,
                         complexity_table(result.nu_opt, cfg.epsilons, cfg.deltas), warnings, reference)


@dataclass
class SimulateOutcome:
    verify: VerifyOutcome
    nu: float
    mu: np.ndarray
    rounds: int
    epsilon: float
    delta: float
    source_label: str
    kappa: float | None
    rows: list[BatchRow]

    @property
    def acceptance(self) -> float:
        return float(np.mean([r.report.accepted for r in self.rows])) if self.rows else math.nan

    @property
    def sigma(self) -> float:
        return math.sqrt(self.delta * (1 - self.delta) / len(self.rows))

    @property
    def within_bound(self) -> bool:
        return self.acceptance <= self.delta + 3 * self.sigma


def simulate_scenario(cfg: ScenarioConfig, runs: int | None = None, seed: int | None = None,
                      epsilon: float | None = None, delta: float | None = None, rounds: int | None = None,
                      source: str | None = None, nu_source: str | None = None,
                      saturation_policy: str | None = None) -> SimulateOutcome:
    sim_cfg = cfg.simulate
    runs = int(runs if runs is not None else sim_cfg.get("runs", 1000))
    seed = int(seed if seed is not None else sim_cfg.get("seed", 0))
    epsilon = float(epsilon if epsilon is not None else sim_cfg.get("epsilon", 0.01))
    delta = float(delta if delta is not None else sim_cfg.get("delta", 0.01))
    source = source or sim_cfg.get("source", "worst")
    nu_source = nu_source or sim_cfg.get("nu_source", "fit")
    policy = saturation_policy or sim_cfg.get("saturation_policy", "discard_resample")
    if not 0 < epsilon < 1:
        raise BadRange(f"epsilon must lie in (0, 1), got {epsilon}; try --epsilon 0.01")
    if not 0 < delta < 1:
        raise BadRange(f"delta must lie in (0, 1), got {delta}; try --delta 0.01")
    if runs < 1:
        raise BadRange("runs must be >= 1")

    ver = verify_scenario(cfg)
    if nu_source == "reference":
        if cfg.reference_k is None:
            raise BadSpec("nu_source 'reference' needs a reference_k matrix in the scenario")
        ref = optimize_mu(np.asarray(cfg.reference_k))
        nu, mu = ref.nu_opt, ref.mu
    elif nu_source == "fit":
        nu, mu = ver.result.nu_opt, ver.result.mu
    else:
        raise BadSpec(f"nu_source must be 'fit' or 'reference', got {nu_source!r}")
    if rounds is None:
        if nu <= 0:
            raise BadRange("nu_opt is 0: the protocol cannot detect some noise family, so no finite N exists")
        rounds = sample_complexity(min(nu, 1.0), epsilon, delta)[0]

    strat = strategy(ver.settings, mu, target=cfg.state, pnrd=cfg.pnrd)
    kappa = None
    if source == "target":
        state, label = ver.target, "target"
    else:
        if cfg.k_matrix is not None:
            raise BadSpec("simulating a noise family needs fitted families, not a k-matrix file")
        families = cfg.noise_families(ver.truncation)
        if source == "worst":
            j = int(np.argmin(np.asarray(mu) @ ver.k_matrix))
        else:
            labels = [f.label for f in families]
            if source not in labels:
                raise BadSpec(f"unknown source {source!r}; use target, worst or one of {labels}")
            j = labels.index(source)
        fam = families[j]
        kappa = kappa_at_epsilon(fam, ver.target, epsilon)
        state, label = fam.generator(kappa), fam.label
    sim = Simulator(strat, state, None, policy)
    eps_actual = epsilon if source != "target" else infidelity(state, ver.target)
    rows = [BatchRow(seed + i, rounds, label, eps_actual, sim.run(rounds, seed + i)) for i in range(runs)]
    return SimulateOutcome(ver, nu, np.asarray(mu), rounds, epsilon, delta, label, kappa, rows)
