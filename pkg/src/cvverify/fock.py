"""Truncated Fock-space states and operators.

Mode ordering is fixed: mode 0 is the leftmost ket and the slowest-varying
index of the flattened amplitude vector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammainc, gammaln

from .errors import ConfigError, MixedTruncation, ShapeMismatch, TailTooLarge

NORM_ATOL = 1e-10


@dataclass(frozen=True)
class TruncationConfig:
    dim_per_mode: int = 25
    tail_tolerance: float = 1e-10

    def __post_init__(self):
        if int(self.dim_per_mode) != self.dim_per_mode or self.dim_per_mode < 2:
            raise ConfigError(f"dim_per_mode must be an integer >= 2, got {self.dim_per_mode}")
        if not 0.0 <= self.tail_tolerance < 1.0:
            raise ConfigError(f"tail_tolerance must lie in [0, 1), got {self.tail_tolerance}")

    @property
    def dim(self) -> int:
        return int(self.dim_per_mode)

    @classmethod
    def for_amplitude(cls, max_abs_alpha: float, tail_tolerance: float = 1e-10) -> "TruncationConfig":
        return cls(default_dim(max_abs_alpha), tail_tolerance)


def default_dim(max_abs_alpha: float) -> int:
    """Per-mode cutoff putting the Poisson tail of |alpha| below ~1e-12."""
    a = abs(max_abs_alpha)
    return max(16, math.ceil(a * a + 6 * a + 10))


def poisson_tail(mean: float, dim: int) -> float:
    """P(n >= dim) for a Poisson distribution, without cancellation."""
    if mean == 0:
        return 0.0
    return float(gammainc(dim, mean))


@dataclass(frozen=True, eq=False)
class ModeState:
    """Pure state stored as a dense amplitude tensor of shape ``(dim,) * num_modes``.

    ``raw_norm_sq`` is the squared norm before the explicit normalization step
    (for a truncated coherent ket it is ``1 - tail``; for a superposition it is
    the closed-form normalization constant such as ``C_{a,b}``).
    """

    amplitudes: np.ndarray
    truncation: TruncationConfig
    raw_norm_sq: float = 1.0
    tail_mass: float = 0.0

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        d = self.truncation.dim
        if amp.ndim < 1 or any(s != d for s in amp.shape):
            raise ShapeMismatch(f"amplitude tensor shape {amp.shape} does not match dim={d}")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def num_modes(self) -> int:
        return self.amplitudes.ndim

    @property
    def dim(self) -> int:
        return self.truncation.dim

    @property
    def vector(self) -> np.ndarray:
        return self.amplitudes.reshape(-1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def normalized(self) -> "ModeState":
        n2 = float(np.vdot(self.vector, self.vector).real)
        if n2 == 0:
            raise TailTooLarge("cannot normalize the zero vector")
        return ModeState(self.amplitudes / math.sqrt(n2), self.truncation, n2 * self.raw_norm_sq, self.tail_mass)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def mean_photon_numbers(self) -> np.ndarray:
        p = self.probabilities()
        n = np.arange(self.dim)
        out = []
        for mode in range(self.num_modes):
            axes = tuple(i for i in range(self.num_modes) if i != mode)
            out.append(float(p.sum(axis=axes) @ n))
        return np.array(out)

    def with_amplitudes(self, amplitudes: np.ndarray) -> "ModeState":
        return ModeState(amplitudes, self.truncation, self.raw_norm_sq, self.tail_mass)


def coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    """Untruncated-normalization coherent amplitudes c_n for n < dim."""
    n = np.arange(dim)
    if alpha == 0:
        out = np.zeros(dim, dtype=complex)
        out[0] = 1.0
        return out
    logmag = n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1) - 0.5 * abs(alpha) ** 2
    return np.exp(logmag) * np.exp(1j * n * np.angle(alpha))


def coherent_state(alpha: complex, trunc: TruncationConfig) -> ModeState:
    alpha = complex(alpha)
    tail = poisson_tail(abs(alpha) ** 2, trunc.dim)
    if tail > trunc.tail_tolerance:
        raise TailTooLarge(
            f"coherent state |{alpha}> loses {tail:.3e} probability above dim={trunc.dim} "
            f"(tolerance {trunc.tail_tolerance:.1e}); raise --dim to at least {default_dim(abs(alpha))}"
        )
    c = coherent_amplitudes(alpha, trunc.dim)
    n2 = float(np.vdot(c, c).real)
    return ModeState(c / math.sqrt(n2), trunc, raw_norm_sq=n2, tail_mass=tail)


def fock_state(n: int, trunc: TruncationConfig) -> ModeState:
    if not 0 <= n < trunc.dim:
        raise ShapeMismatch(f"Fock level {n} outside truncation dim={trunc.dim}")
    amp = np.zeros(trunc.dim, dtype=complex)
    amp[n] = 1.0
    return ModeState(amp, trunc)


def vacuum(trunc: TruncationConfig, num_modes: int = 1) -> ModeState:
    return tensor([fock_state(0, trunc)] * num_modes)


def tensor(states: Sequence[ModeState]) -> ModeState:
    if not states:
        raise ShapeMismatch("tensor() needs at least one state")
    trunc = states[0].truncation
    if any(s.truncation != trunc for s in states):
        raise MixedTruncation("all factors of a tensor product must share one TruncationConfig")
    amp = states[0].amplitudes
    for s in states[1:]:
        amp = np.multiply.outer(amp, s.amplitudes)
    raw = float(np.prod([s.raw_norm_sq for s in states]))
    tail = 1.0 - float(np.prod([1.0 - s.tail_mass for s in states]))
    return ModeState(amp, trunc, raw, tail)


def overlap(a: ModeState, b: ModeState) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    if a.amplitudes.shape != b.amplitudes.shape:
        raise ShapeMismatch(f"cannot overlap shapes {a.amplitudes.shape} and {b.amplitudes.shape}")
    return complex(np.vdot(a.vector, b.vector))


def fidelity(a: ModeState, b: ModeState) -> float:
    """|<a|b>|^2; global phase is irrelevant."""
    return abs(overlap(a, b)) ** 2


def coherent_overlap(alpha: complex, beta: complex) -> complex:
    """Analytic <alpha|beta> in the untruncated space."""
    alpha, beta = complex(alpha), complex(beta)
    return complex(np.exp(-abs(alpha) ** 2 / 2 - abs(beta) ** 2 / 2 + np.conj(alpha) * beta))


def apply_local(amplitudes: np.ndarray, matrix: np.ndarray, modes: Sequence[int]) -> np.ndarray:
    """Apply a matrix acting on ``modes`` (in that order) to an amplitude tensor.

    Axes not listed in ``modes`` (including trailing batch axes) are carried along.
    """
    modes = list(modes)
    rest = [i for i in range(amplitudes.ndim) if i not in modes]
    moved = np.transpose(amplitudes, modes + rest)
    flat = moved.reshape(matrix.shape[1], -1)
    out = (matrix @ flat).reshape(moved.shape)
    return np.transpose(out, np.argsort(modes + rest))


@dataclass(frozen=True, eq=False)
class ModeOperator:
    """Operator on ``num_modes`` truncated modes that acts nontrivially only on
    ``footprint``. ``local`` is the square matrix on the footprint modes in the
    listed order; ``matrix`` embeds it into the full space."""

    num_modes: int
    dim: int
    footprint: tuple[int, ...]
    local: np.ndarray
    hermitian: bool = False
    projector: bool = False
    label: str = ""
    _checks: bool = field(default=True, repr=False)

    def __post_init__(self):
        fp = tuple(int(i) for i in self.footprint)
        object.__setattr__(self, "footprint", fp)
        local = np.asarray(self.local, dtype=complex)
        side = self.dim ** len(fp)
        if local.shape != (side, side):
            raise ShapeMismatch(f"local matrix shape {local.shape} != ({side}, {side})")
        if len(set(fp)) != len(fp) or any(not 0 <= i < self.num_modes for i in fp):
            raise ShapeMismatch(f"bad footprint {fp} for {self.num_modes} modes")
        object.__setattr__(self, "local", local)
        if self._checks:
            if (self.hermitian or self.projector) and not is_hermitian(local):
                raise ConfigError(f"operator {self.label!r} declared Hermitian but is not")
            if self.projector and not is_projector(local):
                raise ConfigError(f"operator {self.label!r} declared a projector but is not idempotent")

    @classmethod
    def single(cls, matrix: np.ndarray, **kw) -> "ModeOperator":
        matrix = np.asarray(matrix)
        return cls(1, matrix.shape[0], (0,), matrix, **kw)

    @property
    def matrix(self) -> np.ndarray:
        d, m = self.dim, self.num_modes
        if self.footprint == tuple(range(m)):
            return self.local
        cols = np.eye(d**m, dtype=complex).reshape((d,) * m + (d**m,))
        out = apply_local(cols, self.local, self.footprint)
        return out.reshape(d**m, d**m)

    def embed(self, num_modes: int, footprint: Sequence[int]) -> "ModeOperator":
        """Place this operator on the given modes of a larger register."""
        if len(footprint) != len(self.footprint):
            raise ShapeMismatch("footprint length mismatch")
        mapping = dict(zip(range(self.num_modes), footprint))
        fp = tuple(mapping[i] for i in self.footprint)
        return ModeOperator(num_modes, self.dim, fp, self.local, self.hermitian, self.projector, self.label, False)

    def apply_amplitudes(self, amplitudes: np.ndarray) -> np.ndarray:
        return apply_local(amplitudes, self.local, self.footprint)

    def apply(self, state: ModeState) -> ModeState:
        if state.num_modes != self.num_modes or state.dim != self.dim:
            raise ShapeMismatch("operator and state shapes differ")
        return state.with_amplitudes(self.apply_amplitudes(state.amplitudes))

    def expectation(self, state: ModeState) -> complex:
        if state.num_modes != self.num_modes or state.dim != self.dim:
            raise ShapeMismatch("operator and state shapes differ")
        return complex(np.vdot(state.vector, self.apply_amplitudes(state.amplitudes).reshape(-1)))

    def __matmul__(self, other: "ModeOperator") -> "ModeOperator":
        _same_space(self, other)
        return ModeOperator(self.num_modes, self.dim, tuple(range(self.num_modes)), self.matrix @ other.matrix, _checks=False)

    def __add__(self, other: "ModeOperator") -> "ModeOperator":
        _same_space(self, other)
        return ModeOperator(self.num_modes, self.dim, tuple(range(self.num_modes)), self.matrix + other.matrix, _checks=False)

    def dagger(self) -> "ModeOperator":
        return ModeOperator(self.num_modes, self.dim, self.footprint, self.local.conj().T, self.hermitian, self.projector, self.label, False)


def _same_space(a: ModeOperator, b: ModeOperator) -> None:
    if a.num_modes != b.num_modes or a.dim != b.dim:
        raise ShapeMismatch("operators act on different spaces")


def kron(*ops: ModeOperator) -> ModeOperator:
    """Tensor product of operators on disjoint registers, left factor = low modes."""
    mat = ops[0].matrix
    for op in ops[1:]:
        mat = np.kron(mat, op.matrix)
    m = sum(op.num_modes for op in ops)
    return ModeOperator(m, ops[0].dim, tuple(range(m)), mat, _checks=False)


def identity(trunc: TruncationConfig, num_modes: int = 1) -> ModeOperator:
    d = trunc.dim
    return ModeOperator(num_modes, d, tuple(range(num_modes)), np.eye(d**num_modes), hermitian=True, projector=True, label="1")


def is_hermitian(mat: np.ndarray, atol: float = 1e-10) -> bool:
    return bool(np.max(np.abs(mat - mat.conj().T), initial=0.0) < atol)


def is_projector(mat: np.ndarray, atol: float = 1e-8) -> bool:
    return bool(np.max(np.abs(mat @ mat - mat), initial=0.0) < atol)
