"""Passing probabilities, noise-response fits, spectral gaps and sample complexity."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.sparse.linalg import LinearOperator, eigsh

from .errors import BadRange, DegenerateFit, ShapeMismatch
from .fock import ModeOperator, ModeState, TruncationConfig, fidelity
from .maximin import solve_game
from .protocols import MeasurementSetting, VerificationStrategy
from .states import StateSpec, build_state, superposition

DENSE_EIGH_LIMIT = 1024
# pass-probability deficits this small are round-off, not a response
ZERO_RESPONSE = 1e-12


def passing_probability(obj: MeasurementSetting | VerificationStrategy | ModeOperator, state: ModeState,
                        pnrd: int | None = None, saturation_policy: str = "discard_resample") -> float:
    """tr(Omega sigma) for a pure state. A finite ``pnrd`` applies the
    saturation rule of the parity setting."""
    if isinstance(obj, ModeOperator):
        return float(obj.expectation(state).real)
    if state.num_modes != obj.num_modes or state.dim != obj.truncation.dim:
        raise ShapeMismatch("state does not match the setting's register")
    return obj.passing_probability(state, pnrd, saturation_policy)


def infidelity(state: ModeState, target: ModeState) -> float:
    return min(1.0, max(0.0, 1.0 - fidelity(target, state)))


@dataclass(frozen=True)
class NoisyFamily:
    """Pure noisy states |phi(kappa)>; kappa = 0 must reproduce the target."""

    label: str
    generator: Callable[[float], ModeState]
    kappa_grid: tuple[float, ...] | None = None


def coherent_family(label: str, template: Sequence[tuple[complex, Sequence[tuple[complex, complex]]]],
                    trunc: TruncationConfig) -> NoisyFamily:
    """Family from a coherent-superposition template.

    Each term is (coefficient, [(base, slope) per mode]) and contributes
    coefficient * x_i |base_i + slope_i * kappa>.
    """
    def gen(kappa: float) -> ModeState:
        terms = [(c, tuple(b + s * kappa for b, s in modes)) for c, modes in template]
        return superposition(terms, trunc)
    return NoisyFamily(label, gen)


def appendix_e_families(alpha: complex, trunc: TruncationConfig, beta: complex | None = None) -> list[NoisyFamily]:
    """The four displacement-noise families around the symmetric ECS.

    phi1 = |a+k>|k> + |k>|a+k>,    phi2 = |a+k>|-k> + |-k>|a+k>,
    phi3 = |a>|k> + |k>|a>,        phi4 = |a+k>|0> + |0>|a+k>
    (with ``beta`` given, the second branch uses beta in place of alpha).
    """
    a = complex(alpha)
    b = a if beta is None else complex(beta)
    templates = {
        "phi1": [(1, [(a, 1), (0, 1)]), (1, [(0, 1), (b, 1)])],
        "phi2": [(1, [(a, 1), (0, -1)]), (1, [(0, -1), (b, 1)])],
        "phi3": [(1, [(a, 0), (0, 1)]), (1, [(0, 1), (b, 0)])],
        "phi4": [(1, [(a, 1), (0, 0)]), (1, [(0, 0), (b, 1)])],
    }
    return [coherent_family(name, t, trunc) for name, t in templates.items()]


@dataclass(frozen=True)
class NoiseResponse:
    k_matrix: np.ndarray
    r_squared: np.ndarray
    epsilon_range: np.ndarray  # (families, 2): min and max fitted infidelity
    setting_labels: tuple[str, ...]
    family_labels: tuple[str, ...]
    samples: dict = field(default_factory=dict, repr=False)

    def to_csv(self, header: str | None = None) -> str:
        buf = io.StringIO()
        if header:
            buf.write(f"# {header}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["setting", *self.family_labels])
        for label, row in zip(self.setting_labels, self.k_matrix):
            w.writerow([label, *(repr(float(x)) for x in row)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "settings": list(self.setting_labels),
            "families": list(self.family_labels),
            "k_matrix": self.k_matrix.tolist(),
            "r_squared": self.r_squared.tolist(),
            "epsilon_range": self.epsilon_range.tolist(),
        }


def _kappa_for_epsilon(eps_of: Callable[[float], float], eps_target: float, kmax: float = 4.0) -> float:
    hi = 1e-3
    while eps_of(hi) < eps_target:
        hi *= 2
        if hi > kmax:
            raise DegenerateFit(f"infidelity never reaches {eps_target} for kappa <= {kmax}")
    lo = hi / 2 if hi > 1e-3 else 0.0
    while lo > 0 and eps_of(lo) >= eps_target:
        lo /= 2
    return brentq(lambda k: eps_of(k) - eps_target, lo, hi, xtol=1e-14, rtol=1e-12)


def fit_noise_response(settings: Sequence[MeasurementSetting], families: Sequence[NoisyFamily],
                       target: ModeState, pnrd: int | None = None, eps_max: float = 0.02,
                       n_points: int = 30, saturation_policy: str = "discard_resample") -> NoiseResponse:
    """Slope-through-origin fits of (eps, 1 - tr(Omega_l sigma_i)) per setting/family.

    The kappa grid is log-spaced over two decades below the kappa where the
    infidelity reaches ``eps_max`` unless the family supplies its own grid.
    ``r_squared`` is the uncentered coefficient of determination of the
    through-origin fit; cells whose response is identically zero (below ``ZERO_RESPONSE``)
    report a perfect fit of slope 0.
    """
    n_set, n_fam = len(settings), len(families)
    k = np.zeros((n_set, n_fam))
    r2 = np.ones((n_set, n_fam))
    eps_range = np.zeros((n_fam, 2))
    samples = {}
    for j, fam in enumerate(families):
        def eps_of(kappa, fam=fam):
            return infidelity(fam.generator(kappa), target)

        if fam.kappa_grid is not None:
            grid = np.asarray(fam.kappa_grid, dtype=float)
        else:
            kmax = _kappa_for_epsilon(eps_of, eps_max)
            grid = np.logspace(math.log10(kmax) - 2, math.log10(kmax), n_points)
        states = [fam.generator(kap) for kap in grid]
        eps = np.array([infidelity(s, target) for s in states])
        if not np.any(eps > 0) or eps.max() <= 0:
            raise DegenerateFit(f"family {fam.label!r} leaves the fidelity unchanged; no slope to fit")
        if eps.min() <= 0 or eps.max() / eps.min() < 10:
            raise DegenerateFit(f"family {fam.label!r}: infidelity range [{eps.min():.3g}, {eps.max():.3g}] spans less than a decade")
        eps_range[j] = eps.min(), eps.max()
        for l, s in enumerate(settings):
            y = np.array([1.0 - s.passing_probability(st, pnrd, saturation_policy) for st in states])
            if np.max(np.abs(y)) <= ZERO_RESPONSE:
                k[l, j] = 0.0
            else:
                slope = float(eps @ y / (eps @ eps))
                k[l, j] = slope
                r2[l, j] = 1.0 - float(((y - slope * eps) ** 2).sum()) / float(y @ y)
            samples[(l, j)] = (eps, y)
    return NoiseResponse(k, r2, eps_range, tuple(s.label for s in settings),
                         tuple(f.label for f in families), samples)


@dataclass(frozen=True)
class OptimizationResult:
    nu_opt: float
    mu: np.ndarray
    active_families: tuple[int, ...]
    certificate: np.ndarray  # optimal distribution over noise families
    dual_value: float

    @property
    def efficiency(self) -> float:
        """1 / nu_opt, the prefactor of eps^-1 ln(1/delta)."""
        return math.inf if self.nu_opt <= 0 else 1.0 / self.nu_opt

    def to_dict(self) -> dict:
        return {
            "nu_opt": self.nu_opt,
            "inverse_nu_opt": self.efficiency if math.isfinite(self.efficiency) else None,
            "mu": self.mu.tolist(),
            "active_families": list(self.active_families),
            "certificate": self.certificate.tolist(),
            "dual_value": self.dual_value,
        }


def optimize_mu(k_matrix: np.ndarray) -> OptimizationResult:
    """max_mu min_i sum_l mu_l k[l, i] as an exact LP, with the dual certificate."""
    k = np.asarray(k_matrix, dtype=float)
    if k.ndim != 2 or k.shape[0] < 1 or k.shape[1] < 1:
        raise BadRange("k_matrix must be a nonempty settings x families table")
    sol = solve_game(k)
    mu = sol.row_strategy
    cols = mu @ k
    nu = float(cols.min())
    dual = float((k @ sol.column_strategy).max())
    active = tuple(int(i) for i in np.flatnonzero(cols <= nu + 1e-9))
    return OptimizationResult(nu, mu, active, sol.column_strategy, dual)


@dataclass(frozen=True)
class SpectralGap:
    lambda2: float
    nu: float
    lambda1: float
    truncation_caveat: float

    def __iter__(self):
        return iter((self.lambda2, self.nu))


def spectral_gap(obj: VerificationStrategy | ModeOperator | np.ndarray, tail_bound: float | None = None) -> SpectralGap:
    """Second-largest eigenvalue of the mixed operator and nu = 1 - lambda2.

    The truncated spectrum approximates the infinite-dimensional one; the
    reported ``truncation_caveat`` is the tail mass that bounds the shift.
    Large registers are solved matrix-free with Lanczos.
    """
    if isinstance(obj, VerificationStrategy):
        trunc = obj.truncation
        size = trunc.dim ** obj.num_modes
        caveat = tail_bound if tail_bound is not None else _strategy_tail(obj)
        if size <= DENSE_EIGH_LIMIT:
            evals = np.linalg.eigvalsh(obj.mixed_operator().matrix)
        else:
            shape = (trunc.dim,) * obj.num_modes
            op = LinearOperator((size, size), dtype=complex,
                                matvec=lambda v: obj.apply_amplitudes(v.reshape(shape)).reshape(-1))
            evals = eigsh(op, k=3, which="LA", tol=1e-12, return_eigenvectors=False)
    else:
        mat = obj.matrix if isinstance(obj, ModeOperator) else np.asarray(obj)
        evals = np.linalg.eigvalsh(mat)
        caveat = tail_bound or 0.0
    evals = np.sort(np.real(evals))[::-1]
    lam2 = float(evals[1]) if evals.size > 1 else 0.0
    return SpectralGap(lam2, 1.0 - lam2, float(evals[0]), float(caveat))


def _strategy_tail(strategy: VerificationStrategy) -> float:
    from .fock import poisson_tail
    amps = [abs(g) for s in strategy.settings for g in s.recipe.displacements]
    if strategy.target is not None:
        amps.append(strategy.target.max_amplitude())
    return poisson_tail(max(amps, default=0.0) ** 2, strategy.truncation.dim)


def sample_complexity(nu: float, epsilon: float, delta: float) -> tuple[int, float]:
    """(ceil of ln(1/delta) / ln(1/(1 - nu eps)), nu^-1 eps^-1 ln(1/delta))."""
    if not 0 < nu <= 1:
        raise BadRange(f"nu must lie in (0, 1], got {nu}")
    if not 0 < epsilon < 1:
        raise BadRange(f"epsilon must lie in (0, 1), got {epsilon}")
    if not 0 < delta < 1:
        raise BadRange(f"delta must lie in (0, 1), got {delta}")
    x = nu * epsilon
    exact = math.log(1 / delta) / -math.log1p(-x)
    n_exact = math.ceil(exact - 1e-9 * exact)
    return max(n_exact, 1), math.log(1 / delta) / x


def worst_family(k_matrix: np.ndarray, mu: np.ndarray) -> int:
    return int(np.argmin(np.asarray(mu) @ np.asarray(k_matrix)))


def kappa_at_epsilon(family: NoisyFamily, target: ModeState, epsilon: float) -> float:
    return _kappa_for_epsilon(lambda k: infidelity(family.generator(k), target), epsilon)


def spec_target(spec: StateSpec, trunc: TruncationConfig) -> ModeState:
    return build_state(spec, trunc)


def results_json(response: NoiseResponse | None, result: OptimizationResult, extra: dict | None = None) -> str:
    doc = {"noise_response": response.to_dict() if response else None, "optimization": result.to_dict()}
    doc.update(extra or {})
    return json.dumps(doc, indent=2, sort_keys=True)
