"""Multiple-testing procedures and global-null tests over p-value vectors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .conformal import PValueVector
from .special import chi_square_quantile, gamma_q, normal_quantile, normal_sf


@dataclass(frozen=True)
class RejectionReport:
    """Indices rejected by a procedure, with error metrics when truth is known."""

    rejected: np.ndarray  # sorted 0-based indices
    procedure: str
    params: dict[str, Any] = field(default_factory=dict)
    fdp: float | None = None
    power: float | None = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        r = np.asarray(self.rejected, dtype=np.int64)
        object.__setattr__(self, "rejected", np.sort(r))
        self.rejected.setflags(write=False)

    @property
    def num_rejected(self) -> int:
        return int(self.rejected.size)


@dataclass(frozen=True)
class GlobalTestResult:
    """Outcome of a global-null test."""

    statistic: float
    threshold: float
    reject: bool
    combined_p: float | None = None
    procedure: str = ""
    params: dict[str, Any] = field(default_factory=dict)


def _values(p) -> np.ndarray:
    v = p.values if isinstance(p, PValueVector) else np.asarray(p, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("need a nonempty 1-d p-value vector")
    return v


# ---------------------------------------------------------------------------
# FDR procedures
# ---------------------------------------------------------------------------

def _bh_mask(v: np.ndarray, level: float, require_below: float | None = None) -> np.ndarray:
    """Step-up rejection mask at target level; optionally require p < bound."""
    m = v.size
    vs = np.sort(v)
    ok = vs <= level * np.arange(1, m + 1) / m
    if require_below is not None:
        ok &= vs < require_below
    if not ok.any():
        return np.zeros(m, dtype=bool)
    crit = vs[np.nonzero(ok)[0][-1]]
    mask = v <= crit
    if require_below is not None:
        mask &= v < require_below
    return mask


def bh(p, alpha: float) -> RejectionReport:
    """Benjamini-Hochberg step-up procedure at level alpha.

    Rejects all p-values <= p_(r) where r = max{r : p_(r) <= r alpha / m};
    ties at the boundary are all rejected.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    v = _values(p)
    mask = _bh_mask(v, alpha)
    return RejectionReport(rejected=np.nonzero(mask)[0], procedure="bh",
                           params={"alpha": alpha})


def storey_pi0(p, lam: float) -> float:
    """Null-proportion estimate (1 + #{p_i > lambda}) / (m (1 - lambda))."""
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must be in (0, 1), got {lam}")
    v = _values(p)
    return (1.0 + int((v > lam).sum())) / (v.size * (1.0 - lam))


def storey_bh(p, alpha: float, lam: float) -> RejectionReport:
    """BH at level alpha / pi0_hat, additionally requiring p_i < lambda.

    For conformal p-values the FDR guarantee is proven for lambda on the grid
    K/(n+1); an off-grid lambda is allowed but flagged with a warning.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    v = _values(p)
    warnings = ()
    if isinstance(p, PValueVector) and p.kind == "marginal":
        k_exact = lam * (p.n + 1)
        if abs(k_exact - round(k_exact)) > 1e-9:
            warnings = (f"lambda={lam} is off the conformal grid K/(n+1) with "
                        f"n={p.n}; the FDR guarantee is unproven off-grid",)
    pi0 = storey_pi0(p, lam)
    mask = _bh_mask(v, alpha / pi0, require_below=lam)
    return RejectionReport(rejected=np.nonzero(mask)[0], procedure="storey-bh",
                           params={"alpha": alpha, "lambda": lam, "pi0": pi0},
                           warnings=warnings)


def fdp_power(report: RejectionReport, truth, m: int) -> tuple[float, float]:
    """False discovery proportion and power of a rejection set.

    truth is the set (or index array) of actual outliers among {0..m-1}.
    """
    truth_idx = np.asarray(sorted(truth), dtype=np.int64)
    if truth_idx.size and (truth_idx.min() < 0 or truth_idx.max() >= m):
        raise ValueError("truth indices out of range")
    rej = report.rejected
    is_true = np.isin(rej, truth_idx)
    fdp = float((~is_true).sum()) / max(1, rej.size)
    power = float(is_true.sum()) / max(1, truth_idx.size)
    return fdp, power


# ---------------------------------------------------------------------------
# Global-null tests
# ---------------------------------------------------------------------------

def fisher_test(p, alpha: float) -> GlobalTestResult:
    """Fisher combination: reject when -2 sum log p_i >= chi2(2m; 1-alpha)."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    v = _values(p)
    if (v <= 0.0).any():
        raise ValueError("fisher_test requires all p-values > 0")
    m = v.size
    stat = float(-2.0 * np.log(v).sum())
    thr = chi_square_quantile(2 * m, 1.0 - alpha)
    return GlobalTestResult(statistic=stat, threshold=thr, reject=stat >= thr,
                            combined_p=gamma_q(m, 0.5 * stat),
                            procedure="fisher", params={"alpha": alpha, "m": m})


def fisher_corrected_test(p, alpha: float, gamma: float) -> GlobalTestResult:
    """Dependence-corrected Fisher test for conformal p-values.

    With m test points per n calibration points (gamma = m/n), rejects when
    (stat + 2 (sqrt(1+gamma) - 1) m) / sqrt(1+gamma) >= chi2(2m; 1-alpha).
    gamma = 0 reduces to the plain Fisher test.
    """
    if gamma < 0.0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    base = fisher_test(p, alpha)
    m = base.params["m"]
    xi = math.sqrt(1.0 + gamma)
    stat = (base.statistic + 2.0 * (xi - 1.0) * m) / xi
    return GlobalTestResult(statistic=stat, threshold=base.threshold,
                            reject=stat >= base.threshold,
                            combined_p=gamma_q(m, 0.5 * stat),
                            procedure="fisher-corrected",
                            params={"alpha": alpha, "m": m, "gamma": gamma})


def stouffer_pvalue(p) -> float:
    """Stouffer combination: survival of sum of z-scores over sqrt(m)."""
    v = _values(p)
    if (v <= 0.0).any() or (v >= 1.0).any():
        raise ValueError("stouffer_pvalue requires p-values strictly in (0, 1)")
    z = np.array([normal_quantile(1.0 - x) for x in v])
    return normal_sf(float(z.sum()) / math.sqrt(v.size))


def simes_global_pvalue(p) -> float:
    """Simes combination: min_i m p_(i) / i, capped at 1."""
    v = np.sort(_values(p))
    m = v.size
    return float(min(1.0, (m * v / np.arange(1, m + 1)).min()))


def harmonic_mean_pvalue(p) -> float:
    """Harmonic-mean combination m / sum(1/p_i), capped at 1.

    Reported raw, without a tail correction, so it is slightly
    anti-conservative; used comparatively.
    """
    v = _values(p)
    if (v <= 0.0).any():
        raise ValueError("harmonic_mean_pvalue requires all p-values > 0")
    return float(min(1.0, v.size / (1.0 / v).sum()))
