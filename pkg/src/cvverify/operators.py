"""Displacement, beam splitter, parity and photodetector operators."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .errors import ConfigError, ShapeMismatch, TailTooLarge
from .fock import ModeOperator, ModeState, TruncationConfig, poisson_tail


def displacement_matrix(alpha: complex, dim: int) -> np.ndarray:
    """Exact matrix elements <m|D(alpha)|n> for m, n < dim.

    Generator convention: D(alpha) = exp(alpha a^dag - alpha^* a). Row 0 is
    <0|D|n> = e^{-|a|^2/2} (-a^*)^n / sqrt(n!), and the remaining rows follow
    from a D = D a + alpha D:

        sqrt(m) D[m, n] = alpha D[m-1, n] + sqrt(n) D[m-1, n-1]

    which is the upward recurrence of the associated-Laguerre closed form.
    """
    alpha = complex(alpha)
    out = np.zeros((dim, dim), dtype=complex)
    out[0, 0] = math.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, dim):
        out[0, n] = out[0, n - 1] * (-alpha.conjugate()) / math.sqrt(n)
    sq = np.sqrt(np.arange(1, dim))
    for m in range(1, dim):
        out[m, 0] = out[m - 1, 0] * alpha / math.sqrt(m)
        out[m, 1:] = (alpha * out[m - 1, 1:] + sq * out[m - 1, :-1]) / math.sqrt(m)
    return out


@lru_cache(maxsize=512)
def _unitary_displacement(alpha: complex, dim: int) -> np.ndarray:
    a = np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)
    u = expm(alpha * a.conj().T - alpha.conjugate() * a)
    u.setflags(write=False)
    return u


def unitary_displacement(alpha: complex, dim: int) -> np.ndarray:
    """Exactly unitary representative of D(alpha) on the truncated mode.

    Built by exponentiating the truncated generator. It agrees with
    :func:`displacement_matrix` on the interior block and keeps every
    conjugated projector an exact projector, so measurement settings use it.
    """
    return _unitary_displacement(complex(alpha), int(dim))


def interior_size(alpha: complex, dim: int, tol: float = 1e-12) -> int:
    """Number of low Fock levels where truncated displacement is trustworthy.

    Band rule dim - ceil(4|alpha| sqrt(dim)), further cut to the leading
    columns of the exact matrix that lose less than ``tol`` of their norm
    above the cutoff (the band rule alone is too generous for small |alpha|).
    """
    band = dim - math.ceil(4 * abs(alpha) * math.sqrt(dim))
    if band <= 0:
        return 0
    deficit = 1.0 - np.sum(np.abs(displacement_matrix(alpha, dim)) ** 2, axis=0)
    bad = np.flatnonzero(deficit >= tol)
    leading = int(bad[0]) if bad.size else dim
    return max(0, min(band, leading))


def displacement(alpha: complex, trunc: TruncationConfig) -> ModeOperator:
    tail = poisson_tail(abs(alpha) ** 2, trunc.dim)
    if tail > trunc.tail_tolerance:
        raise TailTooLarge(f"D({alpha}) leaks {tail:.3e} of the vacuum above dim={trunc.dim}")
    return ModeOperator.single(displacement_matrix(alpha, trunc.dim), label=f"D({alpha})")


def _beam_splitter_unitary(theta: float, dim: int) -> np.ndarray:
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    eye = np.eye(dim)
    a1, a2 = np.kron(a, eye), np.kron(eye, a)
    gen = 1j * theta * (a1.T @ a2 + a1 @ a2.T)
    return expm(gen)


_bs_cache: dict[tuple[float, int], np.ndarray] = {}


def beam_splitter_apply(theta: float, state: ModeState) -> ModeState:
    """B(theta)|a>|b> = |a cos + i b sin>|b cos + i a sin>.

    Exponentiates the truncated two-mode generator, so the action is exactly
    unitary on the truncated space for any input.
    """
    if state.num_modes != 2:
        raise ShapeMismatch(f"beam splitter needs a two-mode state, got {state.num_modes} modes")
    key = (float(theta), state.dim)
    if key not in _bs_cache:
        _bs_cache[key] = _beam_splitter_unitary(theta, state.dim)
    out = (_bs_cache[key] @ state.vector).reshape(state.amplitudes.shape)
    return state.with_amplitudes(out)


def parity_diagonal(dim: int) -> np.ndarray:
    return np.where(np.arange(dim) % 2 == 0, 1.0, -1.0)


def parity_projectors(trunc: TruncationConfig) -> tuple[ModeOperator, ModeOperator]:
    even = (parity_diagonal(trunc.dim) > 0).astype(float)
    return (
        ModeOperator.single(np.diag(even), hermitian=True, projector=True, label="pi+"),
        ModeOperator.single(np.diag(1.0 - even), hermitian=True, projector=True, label="pi-"),
    )


def multi_mode_parity_projector(num_modes: int, sign: int, trunc: TruncationConfig) -> ModeOperator:
    """Projector onto the +-1 eigenspace of the m-fold parity product."""
    if num_modes < 1:
        raise ConfigError("num_modes must be >= 1")
    sign = _sign(sign)
    total = np.ones(1)
    for _ in range(num_modes):
        total = np.kron(total, parity_diagonal(trunc.dim))
    diag = (1.0 + sign * total) / 2.0
    return ModeOperator(num_modes, trunc.dim, tuple(range(num_modes)), np.diag(diag),
                        hermitian=True, projector=True, label=f"(pi^{num_modes}){'+' if sign > 0 else '-'}")


def parity_pattern_sum(num_modes: int, sign: int, trunc: TruncationConfig) -> ModeOperator:
    """Same projector as :func:`multi_mode_parity_projector`, assembled as the
    sum over single-mode parity patterns with an even (or odd) number of odd
    modes."""
    sign = _sign(sign)
    plus, minus = parity_projectors(trunc)
    total = np.zeros((trunc.dim**num_modes,) * 2, dtype=complex)
    for pattern in parity_patterns(num_modes, sign):
        mat = np.ones((1, 1))
        for t in pattern:
            mat = np.kron(mat, (minus if t else plus).local)
        total += mat
    return ModeOperator(num_modes, trunc.dim, tuple(range(num_modes)), total, hermitian=True, projector=True)


def parity_patterns(num_modes: int, sign: int) -> list[tuple[int, ...]]:
    want = 0 if _sign(sign) > 0 else 1
    return [t for t in itertools.product((0, 1), repeat=num_modes) if sum(t) % 2 == want]


def _sign(sign) -> int:
    if sign in (1, "+", "plus"):
        return 1
    if sign in (-1, "-", "minus"):
        return -1
    raise ConfigError(f"sign must be + or -, got {sign!r}")


@dataclass(frozen=True)
class DetectorModel:
    """Ideal photodetector with outcomes ``0 .. resolution-1`` plus a final
    saturation outcome (index ``resolution``). An SPD is the ``resolution=1``
    case: outcome 0 is "no click" and outcome 1 is "click"."""

    kind: str = "SPD"
    resolution: int = 1

    def __post_init__(self):
        if self.kind not in ("SPD", "PNRD"):
            raise ConfigError(f"unknown detector kind {self.kind!r}")
        if self.kind == "SPD" and self.resolution != 1:
            raise ConfigError("an SPD has resolution 1")
        if int(self.resolution) != self.resolution or self.resolution < 1:
            raise ConfigError(f"PNRD resolution must be a positive integer, got {self.resolution}")

    @classmethod
    def spd(cls) -> "DetectorModel":
        return cls("SPD", 1)

    @classmethod
    def pnrd(cls, r: int) -> "DetectorModel":
        return cls("PNRD", int(r))

    @property
    def num_outcomes(self) -> int:
        return self.resolution + 1

    @property
    def saturated(self) -> int:
        return self.resolution

    def outcome_of_level(self, dim: int) -> np.ndarray:
        """Outcome index reported for each Fock level below ``dim``."""
        return np.minimum(np.arange(dim), self.resolution)

    def binning(self, dim: int) -> np.ndarray:
        """0/1 matrix of shape (num_outcomes, dim) grouping Fock levels into outcomes."""
        out = np.zeros((self.num_outcomes, dim))
        out[self.outcome_of_level(dim), np.arange(dim)] = 1.0
        return out


def detector_effects(model: DetectorModel, trunc: TruncationConfig) -> list[ModeOperator]:
    bins = model.binning(trunc.dim)
    names = [str(i) for i in range(model.resolution)] + [f"{model.resolution}+"]
    return [ModeOperator.single(np.diag(row), hermitian=True, projector=True, label=name)
            for row, name in zip(bins, names)]


def pnrd_acceptance(state: ModeState, r: int) -> float:
    """Probability that PNRD(r) on a one-mode state is not saturated."""
    if state.num_modes != 1:
        raise ShapeMismatch("pnrd_acceptance expects a one-mode state")
    if r < 1:
        raise ConfigError("resolution must be >= 1")
    p = state.probabilities()
    # sum the discarded part directly so tiny losses are not lost to cancellation
    lost = float(p[r:].sum()) / float(p.sum())
    return 1.0 - lost


def pnrd_loss(state: ModeState, r: int) -> float:
    """1 - pnrd_acceptance, evaluated without cancellation."""
    p = state.probabilities()
    return float(p[r:].sum()) / float(p.sum())
