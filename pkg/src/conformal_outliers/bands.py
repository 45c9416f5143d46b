"""False-positive-rate laws and simultaneous upper confidence bands.

Thresholding raw scores at t yields FPR(t) = F(t), the score CDF at t.  For a
fixed level the conditional FPR follows an exact Beta law; uniformly in t, any
adjustment sequence gives the upper band F(t) <= b_{n F_hat(t) + 1} holding for
all t simultaneously with probability >= 1 - delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .adjust import AdjustmentSequence
from .conformal import CalibrationSet


def fpr_pointwise_law(n: int, alpha: float) -> tuple[int, tuple[int, int]]:
    """Beta law of the conditional FPR at a fixed level alpha.

    Returns (ell, (ell, n + 1 - ell)) with ell = floor((n+1) alpha): the
    conditional FPR of the level-alpha conformal test is Beta(ell, n+1-ell).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    ell = int(math.floor((n + 1) * alpha))
    if ell < 1:
        raise ValueError(
            f"(n+1) alpha = {(n + 1) * alpha:.3f} < 1: no p-value mass below alpha"
        )
    return ell, (ell, n + 1 - ell)


@dataclass(frozen=True)
class FprBand:
    """Right-continuous step band over score thresholds.

    band(t) = b_{c+1} where c = #{calibration scores <= t} and b_{n+1} = 1;
    holds F(t) <= band(t) for all t with probability >= 1 - delta.
    """

    thresholds: np.ndarray  # sorted calibration scores
    b: np.ndarray           # adjustment values, len n
    delta: float
    method: str

    @property
    def n(self) -> int:
        return int(self.thresholds.size)

    def value(self, t) -> np.ndarray | float:
        c = np.searchsorted(self.thresholds, np.asarray(t, dtype=np.float64),
                            side="right")
        ext = np.concatenate([self.b, [1.0]])
        out = ext[c]
        return float(out) if np.isscalar(t) else out

    def empirical_fpr(self, t) -> np.ndarray | float:
        c = np.searchsorted(self.thresholds, np.asarray(t, dtype=np.float64),
                            side="right")
        out = c / self.n
        return float(out) if np.isscalar(t) else out

    def rows(self) -> list[tuple[float, float, float]]:
        """(threshold, empirical FPR, band) rows for a step render.

        Row i carries the left-limit values on the segment ending at the i-th
        calibration score (so the first row shows b_1), plus a closing row
        with the right-limit values at the largest score.
        """
        out = [(float(self.thresholds[i]), i / self.n, float(self.b[i]))
               for i in range(self.n)]
        out.append((float(self.thresholds[-1]), 1.0, 1.0))
        return out


def fpr_band(cal: CalibrationSet, seq: AdjustmentSequence) -> FprBand:
    """Simultaneous upper confidence band for the FPR curve of a scorer."""
    if seq.n != cal.n:
        raise ValueError(f"sequence n={seq.n} does not match calibration n={cal.n}")
    return FprBand(thresholds=cal.scores, b=seq.b, delta=seq.delta,
                   method=seq.method)


def prediction_set_threshold(cal: CalibrationSet, seq: AdjustmentSequence,
                             alpha: float) -> float:
    """Score cutoff of the level-alpha prediction set {x : score(x) > cutoff}.

    Returns the largest calibration order statistic S_(i*) whose adjusted
    p-value grid point satisfies b_{i*} <= alpha, or -inf when none does (the
    prediction set is then the whole space).  Inlier coverage of the set is
    >= 1 - alpha conditionally on calibration, simultaneously over all alpha,
    with probability >= 1 - delta.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if seq.n != cal.n:
        raise ValueError(f"sequence n={seq.n} does not match calibration n={cal.n}")
    i_star = int(np.searchsorted(seq.b, alpha, side="right"))
    if i_star == 0:
        return -math.inf
    return float(cal.scores[i_star - 1])
