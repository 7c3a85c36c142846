"""Exact maximin solution of a finite zero-sum game by the simplex method.

The row player picks a setting distribution mu to maximize min_i (mu^T K)_i.
Shifting K by +1 makes every entry positive, and the game is then solved as

    maximize 1^T y   subject to  (K + 1) y <= 1,  y >= 0,

whose optimal dual prices are the (unnormalized) row strategy. Bland's rule
prevents cycling on the degenerate pivots that small payoff tables produce.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadRange, NumericError

PIVOT_TOL = 1e-12


@dataclass(frozen=True)
class GameSolution:
    value: float
    row_strategy: np.ndarray
    column_strategy: np.ndarray
    pivots: int


def solve_game(payoff: np.ndarray, max_pivots: int = 10_000) -> GameSolution:
    k = np.asarray(payoff, dtype=float)
    if k.ndim != 2 or 0 in k.shape:
        raise BadRange("payoff must be a nonempty 2-D table")
    shift = 1.0 - min(0.0, float(k.min()))
    a = k + shift
    rows, cols = a.shape

    # tableau [A | I | b], objective row stores reduced costs
    tab = np.zeros((rows, cols + rows + 1))
    tab[:, :cols] = a
    tab[:, cols:cols + rows] = np.eye(rows)
    tab[:, -1] = 1.0
    obj = np.zeros(cols + rows + 1)
    obj[:cols] = -1.0
    basis = list(range(cols, cols + rows))

    pivots = 0
    while True:
        entering = next((j for j in range(cols + rows) if obj[j] < -PIVOT_TOL), None)
        if entering is None:
            break
        col = tab[:, entering]
        candidates = [i for i in range(rows) if col[i] > PIVOT_TOL]
        if not candidates:
            raise NumericError("unbounded game LP; payoff shift failed")
        ratios = [tab[i, -1] / col[i] for i in candidates]
        best = min(ratios)
        leave = min((i for i, r in zip(candidates, ratios) if r <= best + PIVOT_TOL), key=lambda i: basis[i])
        tab[leave] /= tab[leave, entering]
        for i in range(rows):
            if i != leave and tab[i, entering] != 0:
                tab[i] -= tab[i, entering] * tab[leave]
        obj -= obj[entering] * tab[leave]
        basis[leave] = entering
        pivots += 1
        if pivots > max_pivots:
            raise NumericError("simplex did not terminate")

    total = obj[-1]
    y = np.zeros(cols)
    for i, b in enumerate(basis):
        if b < cols:
            y[b] = tab[i, -1]
    prices = np.clip(obj[cols:cols + rows], 0.0, None)
    mu = prices / prices.sum()
    q = y / y.sum()
    return GameSolution(1.0 / total - shift, mu, q, pivots)
