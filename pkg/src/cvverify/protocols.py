"""Measurement settings for ECS and GHZ-like targets, and strategies mixing them.

Every setting has the same physical shape: local displacements on a few
modes, one photodetector per displaced mode, and a pass rule over the joint
detector outcome. The pass projector is

    Omega = (x_i U_i)^dag  Pi_pass  (x_i U_i)

with Pi_pass diagonal in the Fock basis.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BadArity, BadDistribution, BadSpec, ShapeMismatch
from .fock import ModeOperator, ModeState, TruncationConfig, apply_local
from .operators import (DetectorModel, detector_effects, multi_mode_parity_projector,
                        unitary_displacement)
from .states import StateSpec, complex_to_json, local_equivalence_transform

PASS_RULES = ("not_all_click", "even_parity", "odd_parity")


@dataclass(frozen=True)
class Recipe:
    """Physical description of one setting.

    ``displacements[j]`` is applied to mode ``footprint[j]`` before detector
    ``detectors[j]``. ``discard_saturated`` marks settings where a saturated
    PNRD invalidates the round instead of being a regular outcome.
    """

    footprint: tuple[int, ...]
    displacements: tuple[complex, ...]
    detectors: tuple[DetectorModel, ...]
    pass_rule: str
    discard_saturated: bool = False

    def __post_init__(self):
        if not (len(self.footprint) == len(self.displacements) == len(self.detectors)):
            raise ShapeMismatch("footprint, displacements and detectors must have equal length")
        if self.pass_rule not in PASS_RULES:
            raise BadSpec(f"unknown pass rule {self.pass_rule!r}")

    def with_resolution(self, r: int | None) -> "Recipe":
        """Swap PNRDs for PNRD(r); ``None`` keeps the current detectors."""
        if r is None:
            return self
        dets = tuple(DetectorModel.pnrd(r) if d.kind == "PNRD" else d for d in self.detectors)
        return Recipe(self.footprint, self.displacements, dets, self.pass_rule, self.discard_saturated)

    def passes(self, outcomes: Sequence[int]) -> bool:
        """Pass predicate on one joint outcome (saturated rounds fail here;
        discarding them is the caller's policy)."""
        if self.pass_rule == "not_all_click":
            return not all(o >= 1 for o in outcomes)
        if any(o == d.saturated for o, d in zip(outcomes, self.detectors)):
            return False
        want = 0 if self.pass_rule == "even_parity" else 1
        return sum(outcomes) % 2 == want

    def outcome_masks(self) -> tuple[np.ndarray, np.ndarray]:
        """(pass, saturated) boolean tensors over the joint outcome grid."""
        shape = tuple(d.num_outcomes for d in self.detectors)
        pass_mask = np.zeros(shape, dtype=bool)
        sat_mask = np.zeros(shape, dtype=bool)
        for idx in itertools.product(*(range(n) for n in shape)):
            pass_mask[idx] = self.passes(idx)
            sat_mask[idx] = self.discard_saturated and any(o == d.saturated for o, d in zip(idx, self.detectors))
        return pass_mask, sat_mask


@dataclass(frozen=True)
class OutcomeTable:
    """Born probabilities of the joint detector outcomes of one setting on one state."""

    probs: np.ndarray
    pass_mask: np.ndarray
    saturated_mask: np.ndarray

    @property
    def p_pass(self) -> float:
        return float(self.probs[self.pass_mask].sum())

    @property
    def p_saturated(self) -> float:
        return float(self.probs[self.saturated_mask].sum())

    def pass_probability(self, saturation_policy: str = "discard_resample") -> float:
        p_ok = self.p_pass
        if saturation_policy == "count_as_fail" or not self.saturated_mask.any():
            return p_ok
        valid = 1.0 - self.p_saturated
        return p_ok / valid if valid > 0 else 0.0


@dataclass(frozen=True)
class MeasurementSetting:
    label: str
    num_modes: int
    truncation: TruncationConfig
    recipe: Recipe
    ideal_sign: int = 1

    @property
    def dim(self) -> int:
        return self.truncation.dim

    def _local_unitaries(self) -> list[np.ndarray]:
        return [unitary_displacement(g, self.dim) for g in self.recipe.displacements]

    def _ideal_mask(self) -> np.ndarray:
        """Pass mask over Fock levels of the footprint with ideal detectors."""
        levels = np.indices((self.dim,) * len(self.recipe.footprint))
        if self.recipe.pass_rule == "not_all_click":
            return ~np.all(levels >= 1, axis=0)
        parity = levels.sum(axis=0) % 2
        return parity == (0 if self.recipe.pass_rule == "even_parity" else 1)

    def displace(self, amplitudes: np.ndarray) -> np.ndarray:
        for mode, u in zip(self.recipe.footprint, self._local_unitaries()):
            amplitudes = apply_local(amplitudes, u, [mode])
        return amplitudes

    def undisplace(self, amplitudes: np.ndarray) -> np.ndarray:
        for mode, u in zip(self.recipe.footprint, self._local_unitaries()):
            amplitudes = apply_local(amplitudes, u.conj().T, [mode])
        return amplitudes

    def apply_amplitudes(self, amplitudes: np.ndarray) -> np.ndarray:
        """Omega |psi> without building the matrix."""
        fp = list(self.recipe.footprint)
        shifted = self.displace(amplitudes)
        mask = self._ideal_mask()
        moved = np.moveaxis(shifted, fp, list(range(len(fp))))
        moved = moved * mask.reshape(mask.shape + (1,) * (moved.ndim - len(fp)))
        return self.undisplace(np.moveaxis(moved, list(range(len(fp))), fp))

    def outcome_table(self, state: ModeState, pnrd: int | None = None) -> OutcomeTable:
        if state.num_modes != self.num_modes or state.dim != self.dim:
            raise ShapeMismatch("setting and state live on different spaces")
        recipe = self.recipe.with_resolution(pnrd)
        fp = list(recipe.footprint)
        probs = np.abs(self.displace(state.amplitudes)) ** 2
        rest = tuple(i for i in range(self.num_modes) if i not in fp)
        probs = np.transpose(probs.sum(axis=rest) if rest else probs, np.argsort(np.argsort(fp)))
        for axis, det in enumerate(recipe.detectors):
            probs = np.moveaxis(np.tensordot(det.binning(self.dim), probs, axes=([1], [axis])), 0, axis)
        probs = probs / probs.sum()
        pass_mask, sat_mask = recipe.outcome_masks()
        return OutcomeTable(probs, pass_mask, sat_mask)

    def passing_probability(self, state: ModeState, pnrd: int | None = None,
                            saturation_policy: str = "discard_resample") -> float:
        return self.outcome_table(state, pnrd).pass_probability(saturation_policy)

    def effect(self) -> ModeOperator:
        """Pass projector assembled from operator algebra (1 - tau^- x tau^-,
        displaced parity projectors), independently of the outcome enumeration
        used by :meth:`recipe_effect`."""
        k, t = len(self.recipe.footprint), self.truncation
        if self.recipe.pass_rule == "not_all_click":
            if k != 2:
                raise BadArity("click settings act on two modes")
            clicked = detector_effects(DetectorModel.spd(), t)[1].local
            pi = np.eye(self.dim**2) - np.kron(clicked, clicked)
        else:
            pi = multi_mode_parity_projector(k, 1 if self.recipe.pass_rule == "even_parity" else -1, t).local
        u = np.ones((1, 1))
        for ui in self._local_unitaries():
            u = np.kron(u, ui)
        local = u.conj().T @ pi @ u
        local = (local + local.conj().T) / 2
        return ModeOperator(self.num_modes, self.dim, self.recipe.footprint, local,
                            hermitian=True, projector=True, label=self.label)

    def recipe_effect(self, pnrd: int | None = None) -> ModeOperator:
        """Sum of detector-effect products over passing outcome patterns,
        conjugated by the recipe displacements. PNRDs default to full
        resolution (no saturation inside the truncated space)."""
        recipe = self.recipe.with_resolution(self.dim if pnrd is None else pnrd)
        effects = [detector_effects(d, self.truncation) for d in recipe.detectors]
        side = self.dim ** len(recipe.footprint)
        pi = np.zeros((side, side), dtype=complex)
        for idx in itertools.product(*(range(len(e)) for e in effects)):
            if recipe.passes(idx):
                mat = np.ones((1, 1))
                for e, o in zip(effects, idx):
                    mat = np.kron(mat, e[o].local)
                pi += mat
        u = np.ones((1, 1))
        for ui in self._local_unitaries():
            u = np.kron(u, ui)
        return ModeOperator(self.num_modes, self.dim, recipe.footprint, u.conj().T @ pi @ u, label=self.label, _checks=False)

    def shifted(self, offsets: Sequence[complex]) -> "MeasurementSetting":
        """Same setting preceded by local displacements D(offsets[i]) on every mode.

        D(g) D(o) equals D(g + o) up to a phase, so only the recipe amplitudes change.
        """
        disp = tuple(g + offsets[m] for g, m in zip(self.recipe.displacements, self.recipe.footprint))
        r = self.recipe
        return MeasurementSetting(self.label, self.num_modes, self.truncation,
                                  Recipe(r.footprint, disp, r.detectors, r.pass_rule, r.discard_saturated),
                                  self.ideal_sign)


def _click_setting(label, num_modes, trunc, modes, disp) -> MeasurementSetting:
    return MeasurementSetting(label, num_modes, trunc,
                              Recipe(tuple(modes), tuple(complex(d) for d in disp),
                                     (DetectorModel.spd(),) * len(modes), "not_all_click"))


def _parity_setting(label, num_modes, trunc, disp, sign, pnrd) -> MeasurementSetting:
    r = trunc.dim if pnrd is None else pnrd
    rule = "even_parity" if sign > 0 else "odd_parity"
    return MeasurementSetting(label, num_modes, trunc,
                              Recipe(tuple(range(num_modes)), tuple(complex(d) for d in disp),
                                     (DetectorModel.pnrd(r),) * num_modes, rule, discard_saturated=True),
                              sign)


def _sign(sign) -> int:
    if sign in (1, "+", "plus"):
        return 1
    if sign in (-1, "-", "minus"):
        return -1
    raise BadSpec(f"sign must be + or -, got {sign!r}")


def ecs_settings(alpha: complex, beta: complex, sign, trunc: TruncationConfig,
                 pnrd: int | None = None) -> list[MeasurementSetting]:
    """Three settings: SPD coincidence veto, the two-mode Kennedy receiver,
    and displaced joint parity (odd for the minus state)."""
    sign = _sign(sign)
    alpha, beta = complex(alpha), complex(beta)
    return [
        _click_setting("Omega1", 2, trunc, (0, 1), (0, 0)),
        _click_setting("Omega2", 2, trunc, (0, 1), (-alpha, -beta)),
        _parity_setting("Omega3", 2, trunc, (-alpha / 2, -beta / 2), sign, pnrd),
    ]


def ghz_settings(alphas: Sequence[complex], sign, trunc: TruncationConfig,
                 pnrd: int | None = None) -> list[MeasurementSetting]:
    """2(m-1) pairwise Kennedy-type settings on neighbouring modes plus one
    global displaced-parity setting."""
    sign = _sign(sign)
    alphas = [complex(a) for a in alphas]
    m = len(alphas)
    if m < 2:
        raise BadArity(f"GHZ-like states need m >= 2 modes, got {m}")
    out = []
    for l in range(m - 1):
        out.append(_click_setting(f"Omega{2 * l + 1}", m, trunc, (l, l + 1), (-alphas[l], 0)))
        out.append(_click_setting(f"Omega{2 * l + 2}", m, trunc, (l, l + 1), (0, -alphas[l + 1])))
    out.append(_parity_setting(f"Omega{2 * m - 1}", m, trunc, [-a / 2 for a in alphas], sign, pnrd))
    return out


def settings_for_spec(spec: StateSpec, trunc: TruncationConfig, pnrd: int | None = None) -> list[MeasurementSetting]:
    f, p = spec.family, spec.params
    if f in ("ECS_plus", "ECS_minus"):
        return ecs_settings(p[0], p[1], 1 if f == "ECS_plus" else -1, trunc, pnrd)
    if f in ("GHZ_plus", "GHZ_minus"):
        return ghz_settings(p, 1 if f == "GHZ_plus" else -1, trunc, pnrd)
    if f in ("ECS_general", "GHZ_general", "BalancedCSS"):
        if f == "BalancedCSS":
            raise BadSpec("BalancedCSS is verified after a beam splitter; use the equiv report and its canonical ECS")
        report = local_equivalence_transform(spec)
        return [s.shifted(report.displacements) for s in settings_for_spec(report.canonical, trunc, pnrd)]
    raise BadSpec(f"no verification protocol for family {f}")


@dataclass(frozen=True, eq=False)
class VerificationStrategy:
    settings: tuple[MeasurementSetting, ...]
    mu: np.ndarray
    target: StateSpec | None = None
    pnrd: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        object.__setattr__(self, "settings", tuple(self.settings))
        if mu.shape != (len(self.settings),):
            raise BadDistribution(f"mu has {mu.size} entries for {len(self.settings)} settings")
        if not np.all(np.isfinite(mu)) or np.any(mu < 0):
            raise BadDistribution(f"mu must be nonnegative, got {mu.tolist()}")
        if abs(mu.sum() - 1.0) > 1e-12:
            raise BadDistribution(f"mu must sum to 1, sums to {mu.sum():.15g}")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)

    @property
    def num_modes(self) -> int:
        return self.settings[0].num_modes

    @property
    def truncation(self) -> TruncationConfig:
        return self.settings[0].truncation

    def apply_amplitudes(self, amplitudes: np.ndarray) -> np.ndarray:
        out = np.zeros_like(amplitudes, dtype=complex)
        for w, s in zip(self.mu, self.settings):
            if w:
                out += w * s.apply_amplitudes(amplitudes)
        return out

    def mixed_operator(self) -> ModeOperator:
        mat = sum(w * s.effect().matrix for w, s in zip(self.mu, self.settings))
        return ModeOperator(self.num_modes, self.truncation.dim, tuple(range(self.num_modes)), mat,
                            hermitian=True, label="Omega")

    def passing_probability(self, state: ModeState, pnrd: int | None = None,
                            saturation_policy: str = "discard_resample") -> float:
        return float(sum(w * s.passing_probability(state, pnrd, saturation_policy)
                         for w, s in zip(self.mu, self.settings)))

    def to_dict(self) -> dict:
        return {
            "target": self.target.to_dict() if self.target else None,
            "truncation": {"dim": self.truncation.dim, "tail_tolerance": self.truncation.tail_tolerance},
            "mu": [float(x) for x in self.mu],
            "pnrd": self.pnrd,
            "settings": [
                {"label": s.label, "modes": list(s.recipe.footprint),
                 "displacements": [complex_to_json(z) for z in s.recipe.displacements],
                 "detectors": [f"{d.kind}({d.resolution})" for d in s.recipe.detectors],
                 "pass_rule": s.recipe.pass_rule}
                for s in self.settings
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VerificationStrategy":
        if not data.get("target"):
            raise BadSpec("strategy document needs a target state to rebuild its settings")
        spec = StateSpec.from_dict(data["target"])
        t = data.get("truncation") or {}
        trunc = TruncationConfig(int(t.get("dim", spec.default_truncation().dim)), float(t.get("tail_tolerance", 1e-10)))
        return strategy(settings_for_spec(spec, trunc, data.get("pnrd")), data["mu"], target=spec, pnrd=data.get("pnrd"))


def strategy(settings: Sequence[MeasurementSetting], mu: Sequence[float] | None = None,
             target: StateSpec | None = None, pnrd: int | None = None) -> VerificationStrategy:
    """Validated strategy; ``mu=None`` means equal weights."""
    settings = list(settings)
    if not settings:
        raise BadDistribution("a strategy needs at least one setting")
    if mu is None:
        mu = np.full(len(settings), 1.0 / len(settings))
    mu = np.asarray(mu, dtype=float)
    # tolerate round-off from JSON / LP output, then renormalize exactly
    if mu.ndim == 1 and mu.size and np.all(mu >= 0) and abs(mu.sum() - 1) < 1e-9:
        mu = mu / mu.sum()
    return VerificationStrategy(tuple(settings), mu, target, pnrd)
