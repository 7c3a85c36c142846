"""Target-state families and their local-displacement canonical forms."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import BadArity, BadSpec, ConstraintViolated
from .fock import (ModeState, TruncationConfig, apply_local, coherent_overlap, coherent_state,
                   default_dim, tensor)
from .operators import beam_splitter_apply, displacement_matrix

FAMILIES = ("Coherent", "CatEven", "CatOdd", "BalancedCSS", "ECS_plus", "ECS_minus",
            "ECS_general", "GHZ_plus", "GHZ_minus", "GHZ_general")

# CLI spellings
ALIASES = {
    "coherent": "Coherent", "cat-even": "CatEven", "cat-odd": "CatOdd", "bcss": "BalancedCSS",
    "ecs+": "ECS_plus", "ecs-": "ECS_minus", "ecs-general": "ECS_general",
    "ghz+": "GHZ_plus", "ghz-": "GHZ_minus", "ghz-general": "GHZ_general",
}

PHASE_ATOL = 1e-9


def parse_complex(value: Any) -> complex:
    """Accept 1.5, "1+0.5j", [re, im] or {"re":..,"im":..}."""
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise BadSpec(f"complex as list needs [re, im], got {value!r}")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, dict):
        return complex(float(value.get("re", 0.0)), float(value.get("im", 0.0)))
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", "").replace("i", "j"))
        except ValueError as exc:
            raise BadSpec(f"cannot parse complex amplitude {value!r}") from exc
    return complex(value)


def complex_to_json(z: complex) -> float | list[float]:
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


@dataclass(frozen=True)
class StateSpec:
    """A target family plus its amplitudes.

    ``sign`` is the relative sign of the second branch for the general
    families (|a_1..a_m> + sign |b_1..b_m>); the fixed-sign families ignore it.
    """

    family: str
    params: tuple[complex, ...]
    sign: int = 1

    def __post_init__(self):
        family = ALIASES.get(self.family, self.family)
        if family not in FAMILIES:
            raise BadSpec(f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")
        params = tuple(complex(p) for p in self.params)
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "params", params)
        if self.sign not in (1, -1):
            raise BadSpec(f"sign must be +1 or -1, got {self.sign}")
        n = len(params)
        fixed = {"Coherent": 1, "CatEven": 1, "CatOdd": 1, "BalancedCSS": 2,
                 "ECS_plus": 2, "ECS_minus": 2, "ECS_general": 4}
        if family in fixed and n != fixed[family]:
            raise BadArity(f"{family} takes {fixed[family]} amplitudes, got {n}")
        if family in ("GHZ_plus", "GHZ_minus") and n < 2:
            raise BadArity(f"{family} needs at least 2 amplitudes, got {n}")
        if family == "GHZ_general" and (n < 4 or n % 2):
            raise BadArity("GHZ_general takes alphas followed by betas (2m values, m >= 2)")

    @property
    def num_modes(self) -> int:
        if self.family in ("Coherent", "CatEven", "CatOdd", "BalancedCSS"):
            return 1
        if self.family.startswith("ECS"):
            return 2
        if self.family == "GHZ_general":
            return len(self.params) // 2
        return len(self.params)

    def terms(self) -> list[tuple[complex, tuple[complex, ...]]]:
        """Unnormalized coherent-product expansion: [(coefficient, per-mode amplitudes)]."""
        p, f = self.params, self.family
        if f == "Coherent":
            return [(1, (p[0],))]
        if f in ("CatEven", "CatOdd"):
            return [(1, (p[0],)), (1 if f == "CatEven" else -1, (-p[0],))]
        if f == "BalancedCSS":
            return [(1, (p[0],)), (1, (p[1],))]
        if f in ("ECS_plus", "ECS_minus"):
            return [(1, (p[0], 0j)), (1 if f == "ECS_plus" else -1, (0j, p[1]))]
        if f == "ECS_general":
            return [(1, (p[0], p[1])), (self.sign, (p[2], p[3]))]
        if f in ("GHZ_plus", "GHZ_minus"):
            return [(1, tuple(p)), (1 if f == "GHZ_plus" else -1, (0j,) * len(p))]
        m = len(p) // 2
        return [(1, tuple(p[:m])), (self.sign, tuple(p[m:]))]

    def max_amplitude(self) -> float:
        return max(abs(a) for _, amps in self.terms() for a in amps)

    def default_truncation(self, tail_tolerance: float = 1e-10) -> TruncationConfig:
        return TruncationConfig(default_dim(self.max_amplitude()), tail_tolerance)

    def to_dict(self) -> dict:
        out = {"family": self.family, "params": [complex_to_json(z) for z in self.params]}
        if self.family.endswith("general"):
            out["sign"] = self.sign
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "StateSpec":
        try:
            family = data["family"]
            params = [parse_complex(v) for v in data["params"]]
        except KeyError as exc:
            raise BadSpec(f"state spec is missing field {exc.args[0]!r}") from exc
        return cls(family, tuple(params), int(data.get("sign", 1)))


def gram_norm_sq(terms: Sequence[tuple[complex, Sequence[complex]]]) -> float:
    """Analytic squared norm of a coherent-product superposition."""
    total = 0j
    for cj, aj in terms:
        for ck, ak in terms:
            g = np.prod([coherent_overlap(x, y) for x, y in zip(aj, ak)])
            total += np.conj(cj) * ck * g
    return float(total.real)


def superposition(terms: Sequence[tuple[complex, Sequence[complex]]], trunc: TruncationConfig) -> ModeState:
    """Normalized sum of coherent product kets. raw_norm_sq keeps the
    pre-normalization squared norm (the family's normalization constant)."""
    amp = None
    tail = 0.0
    for coef, amps in terms:
        ket = tensor([coherent_state(a, trunc) for a in amps])
        tail = max(tail, ket.tail_mass)
        amp = coef * ket.amplitudes if amp is None else amp + coef * ket.amplitudes
    raw = ModeState(amp, trunc, 1.0, tail)
    if raw.norm() < 1e-12:
        raise BadSpec("superposition vanishes (the two branches coincide)")
    return raw.normalized()


def build_state(spec: StateSpec, trunc: TruncationConfig | None = None) -> ModeState:
    trunc = trunc or spec.default_truncation()
    return superposition(spec.terms(), trunc)


def closed_form_normalization(spec: StateSpec) -> float:
    """The normalization constants quoted for each family (C_+-, C_ab, C, C')."""
    p, f = spec.params, spec.family
    if f == "Coherent":
        return 1.0
    if f in ("CatEven", "CatOdd"):
        s = 1 if f == "CatEven" else -1
        return 2 * (1 + s * math.exp(-2 * abs(p[0]) ** 2))
    if f in ("ECS_plus", "ECS_minus"):
        s = 1 if f == "ECS_plus" else -1
        return 2 * (1 + s * math.exp(-(abs(p[0]) ** 2 + abs(p[1]) ** 2) / 2))
    if f in ("GHZ_plus", "GHZ_minus"):
        s = 1 if f == "GHZ_plus" else -1
        return 2 * (1 + s * math.exp(-sum(abs(a) ** 2 for a in p) / 2))
    if f == "BalancedCSS":
        a, b = p
        return float((2 + math.exp(-(abs(a) ** 2 + abs(b) ** 2) / 2)
                      * (np.exp(np.conj(a) * b) + np.exp(a * np.conj(b)))).real)
    m = spec.num_modes
    al, be = p[:m], p[m:]
    cross = np.exp(sum(np.conj(x) * y for x, y in zip(al, be))) + np.exp(sum(x * np.conj(y) for x, y in zip(al, be)))
    return float((2 + spec.sign * math.exp(-sum(abs(x) ** 2 + abs(y) ** 2 for x, y in zip(al, be)) / 2) * cross).real)


@dataclass(frozen=True)
class EquivalenceReport:
    """Result of mapping a general family onto a canonical ECS/GHZ target.

    ``displacements[i]`` is the amplitude of the local displacement applied to
    mode i (after the beam splitter, when ``beam_splitter_theta`` is set).
    """

    source: StateSpec
    displacements: tuple[complex, ...]
    canonical: StateSpec
    phase_sum: float
    multiple_of_pi: int
    constraint_2npi: bool
    protocol_sign: int
    global_phase: complex
    beam_splitter_theta: float | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "source": self.source.to_dict(),
            "beam_splitter_theta": self.beam_splitter_theta,
            "displacements": [complex_to_json(z) for z in self.displacements],
            "canonical": self.canonical.to_dict(),
            "phase_sum": self.phase_sum,
            "phase_sum_over_pi": self.multiple_of_pi,
            "constraint_2npi_met": self.constraint_2npi,
            "protocol": "plus" if self.protocol_sign > 0 else "minus",
            "notes": list(self.notes),
        }


def _phase_multiple(phase_sum: float) -> int:
    n = round(phase_sum / math.pi)
    if abs(phase_sum - n * math.pi) > PHASE_ATOL:
        raise ConstraintViolated(
            f"phase sum {phase_sum:.12g} is not an integer multiple of pi; "
            "no local-displacement protocol is available for this state"
        )
    return int(n)


def local_equivalence_transform(spec: StateSpec, theta: float = math.pi / 4) -> EquivalenceReport:
    """Local displacements taking ECS_general / GHZ_general / BalancedCSS to
    the canonical ECS or GHZ form, with the phase-constraint bookkeeping.

    A phase sum of 2n*pi keeps the branch sign, (2n+1)*pi flips it; anything
    else raises ConstraintViolated. BalancedCSS is first sent through a beam
    splitter with a vacuum ancilla at angle ``theta`` and only the 2n*pi case
    is accepted.
    """
    f, p = spec.family, spec.params
    if f == "ECS_general":
        a1, a2, b1, b2 = p
        phase = (a1 * np.conj(b1)).imag + (a2 * np.conj(b2)).imag
        n = _phase_multiple(phase)
        sign = spec.sign * (-1) ** n
        canonical = StateSpec("ECS_plus" if sign > 0 else "ECS_minus", (a1 - b1, b2 - a2))
        gphase = complex(np.exp(1j * (a1 * np.conj(b1)).imag))
        return EquivalenceReport(spec, (-b1, -a2), canonical, float(phase), n, n % 2 == 0, sign, gphase)
    if f == "GHZ_general":
        m = spec.num_modes
        al, be = p[:m], p[m:]
        phase = float(sum((x * np.conj(y)).imag for x, y in zip(al, be)))
        n = _phase_multiple(phase)
        sign = spec.sign * (-1) ** n
        canonical = StateSpec("GHZ_plus" if sign > 0 else "GHZ_minus", tuple(x - y for x, y in zip(al, be)))
        notes = []
        if all(abs(y) == 0 for y in be):
            notes.append("all beta_i vanish: displacements are the identity")
        return EquivalenceReport(spec, tuple(-y for y in be), canonical, phase, n, n % 2 == 0, sign,
                                 complex(np.exp(1j * phase)), notes=notes)
    if f == "BalancedCSS":
        a, b = p
        c, s = math.cos(theta), math.sin(theta)
        phase = float((a * np.conj(b)).imag)
        n = _phase_multiple(phase)
        if n % 2:
            raise ConstraintViolated(
                f"balanced cat state needs Im(alpha beta*) = 2n pi, got {phase:.12g}; odd multiples are unsupported")
        sign = 1
        canonical = StateSpec("ECS_plus", ((a - b) * c, 1j * (b - a) * s))
        gphase = complex(np.exp(1j * phase * c * c))
        return EquivalenceReport(spec, (-b * c, -1j * a * s), canonical, phase, n, n % 2 == 0, sign, gphase,
                                 beam_splitter_theta=theta)
    raise BadSpec(f"local_equivalence_transform needs ECS_general, GHZ_general or BalancedCSS, got {f}")


def apply_displacements(state: ModeState, amplitudes: Sequence[complex]) -> ModeState:
    """Apply D(amplitudes[i]) to mode i using exact matrix elements."""
    if len(amplitudes) != state.num_modes:
        raise BadArity("one displacement amplitude per mode is required")
    amp = state.amplitudes
    for mode, a in enumerate(amplitudes):
        if a != 0:
            amp = apply_local(amp, displacement_matrix(a, state.dim), [mode])
    return state.with_amplitudes(amp)


def transformed_state(report: EquivalenceReport, trunc: TruncationConfig) -> ModeState:
    """Build the source state and push it through the reported local operations."""
    src = report.source
    if report.beam_splitter_theta is not None:
        single = build_state(src, trunc)
        state = beam_splitter_apply(report.beam_splitter_theta, tensor([single, coherent_state(0, trunc)]))
    else:
        state = build_state(src, trunc)
    return apply_displacements(state, report.displacements)
