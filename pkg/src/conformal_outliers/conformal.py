"""Marginal conformal p-values from a hold-out calibration sample.

The p-value for a test score s against calibration scores S_1..S_n is
(1 + #{i : S_i <= s}) / (n + 1); smaller scores mean "more outlying".  With
continuous scores and an inlier test point this is uniform on the grid
{1/(n+1), ..., 1}.  A randomized variant handles ties from non-continuous
scores.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .randomness import RandomStream


@dataclass(frozen=True)
class CalibrationSet:
    """Sorted hold-out scores; the only state conformal p-values condition on."""

    scores: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        if s.ndim != 1 or s.size < 1:
            raise ValueError("calibration scores must be a nonempty 1-d array")
        if not np.isfinite(s).all():
            raise ValueError("calibration scores must be finite")
        s = np.sort(s)
        object.__setattr__(self, "scores", s)
        self.scores.setflags(write=False)

    @property
    def n(self) -> int:
        return int(self.scores.size)


@dataclass(frozen=True)
class PValueVector:
    """P-values plus the provenance needed to interpret them."""

    values: np.ndarray
    kind: str  # "marginal" | "conditional"
    n: int
    delta: float | None = None
    method: str | None = field(default=None)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1:
            raise ValueError("p-values must be a 1-d array")
        if self.kind not in ("marginal", "conditional"):
            raise ValueError(f"unknown p-value kind {self.kind!r}")
        if v.size and (v.min() <= 0.0 or v.max() > 1.0):
            raise ValueError("p-values must lie in (0, 1]")
        if self.kind == "marginal" and v.size:
            grid = np.rint(v * (self.n + 1))
            if not np.allclose(grid / (self.n + 1), v, rtol=0, atol=1e-12):
                raise ValueError("marginal p-values must lie on the grid {1/(n+1),...,1}")
        object.__setattr__(self, "values", v)
        self.values.setflags(write=False)

    @property
    def m(self) -> int:
        return int(self.values.size)


def marginal_pvalue(cal: CalibrationSet, s: float) -> float:
    """Marginal conformal p-value (1 + #{cal <= s}) / (n + 1)."""
    count = int(np.searchsorted(cal.scores, s, side="right"))
    return (1 + count) / (cal.n + 1)


def marginal_pvalue_randomized(cal: CalibrationSet, s: float, u: float) -> float:
    """Tie-randomized p-value (#{cal < s} + ceil((1 + #{cal = s}) u)) / (n+1).

    Equals the non-randomized value whenever no calibration score ties with s
    and u > 0; u = 0 degenerates to #{cal < s}/(n+1).
    """
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"u must be in [0, 1], got {u}")
    lo = int(np.searchsorted(cal.scores, s, side="left"))
    hi = int(np.searchsorted(cal.scores, s, side="right"))
    return (lo + int(np.ceil((1 + hi - lo) * u))) / (cal.n + 1)


def marginal_pvalues_batch(
    cal: CalibrationSet,
    tests: np.ndarray,
    rng: RandomStream | None = None,
    randomized: bool = False,
) -> PValueVector:
    """Element-wise marginal p-values for a vector of test scores.

    When ``randomized`` is set, one independent uniform draw in (0, 1] is used
    per test point (so the randomized values still land on the p-value grid
    and never hit zero).
    """
    t = np.asarray(tests, dtype=np.float64)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("tests must be a nonempty 1-d array")
    np1 = cal.n + 1
    if not randomized:
        counts = np.searchsorted(cal.scores, t, side="right")
        values = (1 + counts) / np1
    else:
        if rng is None:
            raise ValueError("randomized p-values need a RandomStream")
        lo = np.searchsorted(cal.scores, t, side="left")
        hi = np.searchsorted(cal.scores, t, side="right")
        u = 1.0 - rng.generator().random(t.size)  # in (0, 1]
        values = (lo + np.ceil((1 + hi - lo) * u)) / np1
    return PValueVector(values=values, kind="marginal", n=cal.n)
