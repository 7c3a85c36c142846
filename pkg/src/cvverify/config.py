"""Scenario documents (JSON) and built-in presets."""
from __future__ import annotations

import copy
import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .analysis import NoisyFamily, appendix_e_families, coherent_family
from .errors import BadSpec, ConfigError
from .fock import TruncationConfig
from .states import StateSpec, complex_to_json, parse_complex

# k-matrix and optimum as published for the symmetric ECS with PNRD(5)
REFERENCE_K = np.array([
    [0.389, 0.429, 0.798, 0.0],
    [0.341, 0.429, 0.0, 0.778],
    [0.996, 0.0, 0.554, 0.524],
])
REFERENCE_MU = (0.463, 0.477, 0.060)
REFERENCE_INVERSE_NU = 2.484

PRESETS: dict[str, dict] = {
    "appendix-e": {
        "state": {"family": "ECS_plus", "params": [1.0, 1.0]},
        "truncation": {"dim": 25, "tail_tolerance": 1e-10},
        "pnrd": 5,
        "families": "appendix-e",
        "reference_k": REFERENCE_K.tolist(),
        "epsilons": [0.01, 0.001],
        "deltas": [0.01, 0.001],
        "simulate": {"epsilon": 0.01, "delta": 0.01, "runs": 10000, "seed": 2021,
                     "source": "worst", "nu_source": "reference"},
    },
}


@dataclass
class ScenarioConfig:
    state: StateSpec
    truncation: TruncationConfig | None = None
    pnrd: int | None = None
    families: str | list[dict] = "appendix-e"
    kappa_grid: list[float] | None = None
    eps_max: float = 0.02
    n_points: int = 30
    settings: list[int] | None = None  # 1-based subset
    mu: list[float] | None = None
    optimize: bool = True
    k_matrix: list[list[float]] | None = None
    reference_k: list[list[float]] | None = None
    epsilons: list[float] = field(default_factory=lambda: [0.01])
    deltas: list[float] = field(default_factory=lambda: [0.01])
    simulate: dict = field(default_factory=dict)
    out: str | None = None

    def resolved_truncation(self) -> TruncationConfig:
        return self.truncation or self.state.default_truncation()

    def noise_families(self, trunc: TruncationConfig) -> list[NoisyFamily]:
        if self.families == "appendix-e":
            p = self.state.params
            if self.state.family != "ECS_plus":
                raise BadSpec("the built-in appendix-e noise families are defined around ECS_plus targets")
            fams = appendix_e_families(p[0], trunc, beta=p[1])
        elif isinstance(self.families, list):
            fams = [family_from_template(t, trunc) for t in self.families]
        else:
            raise BadSpec(f"families must be 'appendix-e' or a list of templates, got {self.families!r}")
        if self.kappa_grid is not None:
            fams = [NoisyFamily(f.label, f.generator, tuple(self.kappa_grid)) for f in fams]
        return fams

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"state": self.state.to_dict()}
        if self.truncation is not None:
            out["truncation"] = {"dim": self.truncation.dim, "tail_tolerance": self.truncation.tail_tolerance}
        for name in ("pnrd", "families", "kappa_grid", "settings", "mu", "k_matrix", "reference_k", "out"):
            value = getattr(self, name)
            if value is not None:
                out[name] = copy.deepcopy(value)
        out.update(eps_max=self.eps_max, n_points=self.n_points, optimize=self.optimize,
                   epsilons=list(self.epsilons), deltas=list(self.deltas), simulate=dict(self.simulate))
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("scenario must be a JSON object")
        known = {"state", "truncation", "pnrd", "families", "kappa_grid", "eps_max", "n_points", "settings",
                 "mu", "optimize", "k_matrix", "reference_k", "epsilons", "deltas", "simulate", "out"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown scenario field(s): {', '.join(sorted(unknown))}")
        if "state" not in data:
            raise ConfigError("scenario field 'state' is required")
        t = data.get("truncation")
        trunc = TruncationConfig(int(t["dim"]), float(t.get("tail_tolerance", 1e-10))) if t else None
        return cls(
            state=StateSpec.from_dict(data["state"]),
            truncation=trunc,
            pnrd=data.get("pnrd"),
            families=data.get("families", "appendix-e"),
            kappa_grid=data.get("kappa_grid"),
            eps_max=float(data.get("eps_max", 0.02)),
            n_points=int(data.get("n_points", 30)),
            settings=data.get("settings"),
            mu=data.get("mu"),
            optimize=bool(data.get("optimize", True)),
            k_matrix=data.get("k_matrix"),
            reference_k=data.get("reference_k"),
            epsilons=list(data.get("epsilons", [0.01])),
            deltas=list(data.get("deltas", [0.01])),
            simulate=dict(data.get("simulate", {})),
            out=data.get("out"),
        )

    @classmethod
    def parse(cls, text: str) -> "ScenarioConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scenario JSON error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
        return cls.from_dict(data)

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def preset(cls, name: str) -> "ScenarioConfig":
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
        return cls.from_dict(copy.deepcopy(PRESETS[name]))

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        return cls.parse(Path(path).read_text())


def family_from_template(doc: dict, trunc: TruncationConfig) -> NoisyFamily:
    """{"label": "...", "terms": [{"coef": 1, "modes": [[base, slope], ...]}, ...]}"""
    try:
        label = str(doc["label"])
        terms = []
        for term in doc["terms"]:
            coef = parse_complex(term.get("coef", 1))
            modes = [(parse_complex(b), parse_complex(s)) for b, s in term["modes"]]
            terms.append((coef, modes))
    except (KeyError, TypeError, ValueError) as exc:
        raise BadSpec(f"bad noise-family template {doc!r}: {exc}") from exc
    if not terms:
        raise BadSpec(f"noise family {label!r} has no terms")
    fam = coherent_family(label, terms, trunc)
    if "kappa_grid" in doc:
        fam = NoisyFamily(label, fam.generator, tuple(float(k) for k in doc["kappa_grid"]))
    return fam


def load_families(path: str | Path) -> list[dict]:
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get("families")
    if not isinstance(data, list):
        raise ConfigError("families file must be a JSON list of templates or {\"families\": [...]}")
    return data


def read_k_matrix(text: str) -> tuple[np.ndarray, list[str] | None, list[str] | None]:
    """Parse a k-matrix CSV, with or without a header row / label column."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ConfigError("k-matrix file is empty")

    def is_num(x: str) -> bool:
        try:
            float(x)
            return True
        except ValueError:
            return False

    header = None
    if not all(is_num(c) for c in rows[0][1:]) or not any(is_num(c) for c in rows[0]):
        header = rows[0]
        rows = rows[1:]
    labels = None
    if rows and not is_num(rows[0][0]):
        labels = [r[0] for r in rows]
        rows = [r[1:] for r in rows]
        if header:
            header = header[1:]
    try:
        k = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise ConfigError(f"k-matrix file has a non-numeric entry: {exc}") from exc
    if k.ndim != 2:
        raise ConfigError("k-matrix rows have unequal lengths")
    return k, labels, header


__all__ = ["ScenarioConfig", "PRESETS", "REFERENCE_K", "REFERENCE_MU", "family_from_template",
           "load_families", "read_k_matrix", "complex_to_json"]
