"""Round-by-round Monte Carlo of the verification pipeline.

Each round draws a setting from mu, displaces the modes, samples one joint
detector outcome from the Born probabilities and applies the pass rule.
Outcomes are drawn mode by mode: first from the marginal of the first
detector, then from each next detector conditioned on the earlier ones.
Randomness comes from a Philox (counter-based) generator seeded per run.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .analysis import NoisyFamily
from .errors import ConfigError
from .fock import ModeState
from .protocols import OutcomeTable, VerificationStrategy

POLICIES = ("discard_resample", "count_as_fail")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) % 2**64))


@dataclass(frozen=True)
class RunConfig:
    strategy: VerificationStrategy
    source: ModeState | tuple[NoisyFamily, float]
    rounds: int
    seed: int = 0
    pnrd_resolution: int | None = None
    saturation_policy: str = "discard_resample"

    def __post_init__(self):
        if int(self.rounds) != self.rounds or self.rounds < 0:
            raise ConfigError(f"rounds must be a nonnegative integer, got {self.rounds}")
        if self.saturation_policy not in POLICIES:
            raise ConfigError(f"saturation_policy must be one of {POLICIES}")

    def source_state(self) -> ModeState:
        if isinstance(self.source, ModeState):
            return self.source
        family, kappa = self.source
        return family.generator(kappa)


@dataclass
class RunReport:
    rounds: int
    passes: int
    fails: int
    discarded: int
    seed: int
    wall_time: float = 0.0

    @property
    def accepted(self) -> bool:
        return self.fails == 0

    @property
    def empirical_pass_rate(self) -> float:
        return self.passes / self.rounds if self.rounds else 1.0

    def to_dict(self) -> dict:
        return {"rounds": self.rounds, "passes": self.passes, "fails": self.fails,
                "discarded": self.discarded, "accepted": self.accepted,
                "empirical_pass_rate": self.empirical_pass_rate, "seed": self.seed,
                "wall_time": self.wall_time}


class _SettingSampler:
    """Inverse-CDF sampler over one setting's joint outcome table."""

    def __init__(self, table: OutcomeTable):
        self.table = table
        probs = table.probs
        self.shape = probs.shape
        self.k = probs.ndim
        # marginals of the leading j+1 detectors, for conditional sampling
        self.prefix = [probs.sum(axis=tuple(range(j + 1, self.k))) for j in range(self.k)]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        out = np.zeros((n, self.k), dtype=np.int64)
        u = rng.random((n, self.k))
        for j in range(self.k):
            if j == 0:
                joint = np.broadcast_to(self.prefix[0], (n, self.shape[0]))
            else:
                joint = self.prefix[j][tuple(out[:, i] for i in range(j))]  # (n, outcomes_j)
            cdf = np.cumsum(joint, axis=1)
            total = cdf[:, -1:]
            cdf = cdf / np.where(total > 0, total, 1.0)
            out[:, j] = np.minimum((u[:, j:j + 1] > cdf).sum(axis=1), self.shape[j] - 1)
        return out

    def classify(self, outcomes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        idx = tuple(outcomes[:, j] for j in range(self.k))
        return self.table.pass_mask[idx], self.table.saturated_mask[idx]


class Simulator:
    """Precomputes outcome tables for one (strategy, source state) pair."""

    def __init__(self, strategy: VerificationStrategy, state: ModeState, pnrd_resolution: int | None = None,
                 saturation_policy: str = "discard_resample"):
        if saturation_policy not in POLICIES:
            raise ConfigError(f"saturation_policy must be one of {POLICIES}")
        self.strategy = strategy
        self.policy = saturation_policy
        self.samplers = [_SettingSampler(s.outcome_table(state, pnrd_resolution)) for s in strategy.settings]

    def run(self, rounds: int, seed: int) -> RunReport:
        t0 = time.perf_counter()
        rng = make_rng(seed)
        mu = self.strategy.mu
        choice = rng.choice(len(mu), size=rounds, p=mu) if rounds else np.zeros(0, dtype=int)
        counts = np.bincount(choice, minlength=len(mu))
        passes = fails = discarded = 0
        for sampler, n in zip(self.samplers, counts):
            pending = int(n)
            while pending:
                passed, saturated = sampler.classify(sampler.sample(rng, pending))
                if self.policy == "discard_resample":
                    nsat = int(saturated.sum())
                    discarded += nsat
                    valid = ~saturated
                    passes += int(passed[valid].sum())
                    fails += int((~passed[valid]).sum())
                    pending = nsat
                else:
                    passes += int(passed.sum())
                    fails += int((~passed).sum())
                    pending = 0
        return RunReport(rounds, passes, fails, discarded, int(seed), time.perf_counter() - t0)


def run(config: RunConfig) -> RunReport:
    sim = Simulator(config.strategy, config.source_state(), config.pnrd_resolution, config.saturation_policy)
    return sim.run(config.rounds, config.seed)


def run_batch(config: RunConfig, seeds: Sequence[int]) -> list[RunReport]:
    sim = Simulator(config.strategy, config.source_state(), config.pnrd_resolution, config.saturation_policy)
    return [sim.run(config.rounds, s) for s in seeds]


@dataclass(frozen=True)
class CurvePoint:
    rounds: int
    acceptance: float
    stderr: float
    runs: int


def acceptance_curve(config: RunConfig, n_grid: Sequence[int], repetitions: int = 1000) -> list[CurvePoint]:
    """Fraction of accepting runs for each N (``config.rounds`` is ignored).

    Seeds for N are ``config.seed + i`` for i < repetitions, so curve points
    share seeds and stay comparable.
    """
    sim = Simulator(config.strategy, config.source_state(), config.pnrd_resolution, config.saturation_policy)
    out = []
    for n in n_grid:
        acc = sum(sim.run(int(n), config.seed + i).accepted for i in range(repetitions))
        p = acc / repetitions
        out.append(CurvePoint(int(n), p, math.sqrt(p * (1 - p) / repetitions), repetitions))
    return out


@dataclass
class BatchRow:
    seed: int
    rounds: int
    family: str
    epsilon: float
    report: RunReport = field(repr=False)


def batch_csv(rows: Sequence[BatchRow], header: str | None = None) -> str:
    buf = io.StringIO()
    if header:
        buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "rounds", "family", "epsilon", "passes", "fails", "discarded", "accepted"])
    for r in rows:
        rep = r.report
        w.writerow([r.seed, r.rounds, r.family, repr(float(r.epsilon)), rep.passes, rep.fails, rep.discarded, int(rep.accepted)])
    return buf.getvalue()
