"""Calibration-conditional adjustment sequences.

An adjustment sequence is a nondecreasing vector b_1 <= ... <= b_n in [0, 1]
such that n iid uniform order statistics satisfy U_(i) <= b_i for all i with
probability at least 1 - delta.  Composing h(t) = b_{ceil((n+1) t)} with a
marginal conformal p-value yields a p-value that is super-uniform
conditionally on the calibration data, with probability >= 1 - delta over
calibration draws.

Constructors:

* ``simes_sequence``        exact finite-sample bound, tight at small indices
* ``dkwm_sequence``         constant-width empirical-CDF bound
* ``asymptotic_sequence``   standardized empirical-process bound, large-n
* ``monte_carlo_sequence``  min(simes, scaled asymptotic) recalibrated by
                            simulation; exact up to Monte-Carlo error
* ``dempster_sequence``     linear boundary with exactly computable crossing
                            probability
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .randomness import RandomStream, chunk_sizes
from .special import log_gamma

_MC_CHUNK_ELEMENTS = 16_000_000


@dataclass(frozen=True)
class AdjustmentSequence:
    """Nondecreasing b_1..b_n in [0, 1] with construction metadata."""

    n: int
    delta: float
    method: str
    b: np.ndarray
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        b = np.asarray(self.b, dtype=np.float64)
        if b.shape != (self.n,):
            raise ValueError(f"b must have shape ({self.n},), got {b.shape}")
        if b.size and (b[0] < 0.0 or b[-1] > 1.0):
            raise ValueError("b values must lie in [0, 1]")
        if np.any(np.diff(b) < 0.0):
            raise ValueError("b must be nondecreasing")
        object.__setattr__(self, "b", b)
        self.b.setflags(write=False)


def _as_checked(n: int, delta: float) -> None:
    if n < 1 or n != int(n):
        raise ValueError(f"n must be a positive integer, got {n}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")


def default_simes_k(n: int) -> int:
    """Default Simes parameter: half the calibration size."""
    return int(math.ceil(n / 2))


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def simes_sequence(n: int, delta: float, k: int | None = None) -> AdjustmentSequence:
    """Generalized-Simes sequence with parameter k (default ceil(n/2)).

    b_{n+1-i} = 1 - delta^{1/k} (i (i-1) ... (i-k+1) / (n ... (n-k+1)))^{1/k}
    for i = k..n; the trailing entries (i < k, i.e. index > n-k+1) are 1.
    Products are evaluated in log space.
    """
    _as_checked(n, delta)
    if k is None:
        k = default_simes_k(n)
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= n, got k={k}, n={n}")
    logs = np.concatenate([[0.0], np.cumsum(np.log(np.arange(1, n + 1)))])
    b = np.ones(n)
    i = np.arange(k, n + 1)
    log_ratio = (logs[i] - logs[i - k]) - (logs[n] - logs[n - k])
    b[n - i] = -np.expm1((math.log(delta) + log_ratio) / k)
    return AdjustmentSequence(n=n, delta=delta, method="simes", b=b, params={"k": int(k)})


def dkwm_sequence(n: int, delta: float) -> AdjustmentSequence:
    """Constant-width sequence b_i = min(i/n + sqrt(log(2/delta)/(2n)), 1)."""
    _as_checked(n, delta)
    eps = math.sqrt(math.log(2.0 / delta) / (2.0 * n))
    b = np.minimum(np.arange(1, n + 1) / n + eps, 1.0)
    return AdjustmentSequence(n=n, delta=delta, method="dkwm", b=b, params={})


def asymptotic_constant(n: int, delta: float) -> float:
    """Normalizing constant c_n(delta) of the standardized empirical-process
    bound; grows like sqrt(2 log log n) and diverges as delta -> 0."""
    if n < 3:
        raise ValueError(f"asymptotic constant needs n >= 3, got {n}")
    lln = math.log(math.log(n))
    num = (-math.log(-math.log1p(-delta)) + 2.0 * lln
           + 0.5 * math.log(lln) - 0.5 * math.log(math.pi))
    return num / math.sqrt(2.0 * lln)


def _asymptotic_b(n: int, c: float) -> np.ndarray:
    i = np.arange(1, n + 1)
    b = np.minimum(i / n + c * np.sqrt(i * (n - i)) / (n * math.sqrt(n)), 1.0)
    # analytically b_i = 1 from t_n on; pin it to avoid fp dust below 1
    an2 = c * c / n
    t_n = int(math.ceil(n / (an2 + 1.0)))
    b[t_n - 1:] = 1.0
    return b


def asymptotic_sequence(n: int, delta: float) -> AdjustmentSequence:
    """Large-sample sequence b_i = min(i/n + c_n(delta) sqrt(i(n-i))/(n sqrt n), 1).

    Nondecreasing for any n, with entries equal to 1 from index
    ceil(n / (c_n^2/n + 1)) onward.  Approximate: the 1 - delta coverage holds
    in the large-n limit.
    """
    _as_checked(n, delta)
    if n < 3:
        raise ValueError(f"asymptotic_sequence requires n >= 3, got {n}")
    c = asymptotic_constant(n, delta)
    if c <= 0.0:
        raise ValueError(
            f"asymptotic_sequence is not monotone for n={n}, delta={delta} "
            f"(c_n = {c:.4f} <= 0); use a smaller delta or another method"
        )
    b = _asymptotic_b(n, c)
    return AdjustmentSequence(n=n, delta=delta, method="asymptotic", b=b,
                              params={"c_n": c})


def _hybrid_band(n: int, delta: float, k: int, delta_hat: float) -> np.ndarray:
    """Candidate Monte-Carlo band for a given conservativeness knob delta_hat.

    The band is min(simes, large-sample envelope at level 1 - delta_hat) on
    indices i <= ceil((n+1)/2), extended beyond 1/2 as the tangent straight
    line of that construction at t = 1/2 (slope = right-difference over the
    last two grid points at or below 1/2), capped at 1.  At delta_hat = 1 the
    envelope is infinitely conservative and the band is exactly the Simes
    sequence.
    """
    b_s = simes_sequence(n, delta, k).b
    if delta_hat >= 1.0:
        return b_s.copy()
    level = 1.0 - delta_hat
    c = asymptotic_constant(n, level) if n >= 3 else 0.0
    b_a = _asymptotic_b(n, max(c, 0.0))
    b = np.minimum(b_s, b_a)
    i_half = int(math.ceil((n + 1) / 2))
    if i_half >= 2 and i_half < n:
        t = np.arange(1, n + 1) / (n + 1)
        slope = (b[i_half - 1] - b[i_half - 2]) * (n + 1)
        line = b[i_half - 1] + slope * (t[i_half:] - t[i_half - 1])
        b[i_half:] = np.minimum(line, 1.0)
    return np.minimum(np.maximum.accumulate(b), 1.0)


def monte_carlo_sequence(
    n: int,
    delta: float,
    k: int | None = None,
    reps: int = 20_000,
    rng: RandomStream | None = None,
) -> AdjustmentSequence:
    """Simulation-calibrated hybrid of the Simes and large-sample sequences.

    Bisects a conservativeness knob delta_hat in (0, 1]: coverage of the
    hybrid band is increasing in delta_hat, and the Simes anchor at
    delta_hat = 1 is always feasible.  The smallest delta_hat whose
    estimated coverage is >= 1 - delta (plus a 1.5 s.e. safety margin, since
    the construction operates exactly at the coverage boundary) is returned;
    bisection stops when the bracket is narrower than 1e-3.
    """
    _as_checked(n, delta)
    if k is None:
        k = default_simes_k(n)
    min_reps = int(math.ceil(1000.0 / delta))
    if reps < min_reps:
        raise ValueError(
            f"reps={reps} cannot resolve coverage at delta={delta}; "
            f"need at least {min_reps} replicates"
        )
    if rng is None:
        raise ValueError("monte_carlo_sequence needs a RandomStream")

    target = 1.0 - delta
    cal_stream = rng.split(0)  # common random numbers: coverage monotone in the knob

    def feasible(delta_hat: float) -> bool:
        b = _hybrid_band(n, delta, k, delta_hat)
        cov, se = _coverage_mc(b, reps, cal_stream)
        return cov >= target + 1.5 * se

    lo, hi = 0.0, 1.0
    while hi - lo > 1e-3:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    delta_hat = hi
    b = _hybrid_band(n, delta, k, delta_hat)
    return AdjustmentSequence(
        n=n, delta=delta, method="monte-carlo", b=b,
        params={"k": int(k), "delta_hat": float(delta_hat), "reps": int(reps)},
    )


# -- Dempster linear boundary ------------------------------------------------

def dempster_crossing_probability(a: float, b: float, n: int) -> float:
    """Exact probability that some U_(i) exceeds a + (1-a)/(1-b) (i-1)/n.

    Equivalently, the probability that the empirical CDF of n uniforms ever
    crosses the line with intercept b and slope (1-b)/(1-a); computed from the
    closed-form sum with log-binomial coefficients.
    """
    if not (0.0 < a < 1.0 and 0.0 < b < 1.0):
        raise ValueError(f"dempster crossing needs a, b in (0, 1), got a={a}, b={b}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    s = (1.0 - a) / (1.0 - b)
    j_max = int(math.floor(n * (1.0 - b)))
    j = np.arange(0, j_max + 1)
    u = a + s * j / n
    v = 1.0 - u
    log_binom = (log_gamma(n + 1)
                 - np.array([log_gamma(x) for x in j + 1.0])
                 - np.array([log_gamma(x) for x in n - j + 1.0]))
    with np.errstate(divide="ignore"):
        log_terms = log_binom + (j - 1) * np.log(u) \
            + np.where(v > 0, (n - j) * np.log(np.maximum(v, 1e-300)), 0.0)
    log_terms = np.where((v <= 0) & (n - j > 0), -np.inf, log_terms)
    peak = log_terms.max()
    return float(min(1.0, a * math.exp(peak) * np.exp(log_terms - peak).sum()))


def _dempster_solve_b(a: float, delta: float, n: int) -> float | None:
    """Slope parameter b with crossing probability delta at intercept a, or
    None when even the shallowest line is conservative enough."""
    lo, hi = 1e-9, 1.0 - 1e-9
    if dempster_crossing_probability(a, lo, n) < delta:
        return None  # crossing prob decreasing in b; whole range below delta
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if dempster_crossing_probability(a, mid, n) > delta:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def dempster_sequence(n: int, delta: float, b1_target: float | None = None) -> AdjustmentSequence:
    """Linear sequence b_i = a + (1-a)/(1-b) i/n with exact crossing level delta.

    The outer search picks the intercept a so that b_1 matches ``b1_target``
    (default: the Simes b_1 at the same n, delta); the inner binary search
    solves the slope parameter for the exact crossing probability.  When the
    target is below the smallest achievable b_1, the b_1-minimizing sequence
    is returned with ``params["warning"]`` set.
    """
    _as_checked(n, delta)
    if b1_target is None:
        b1_target = float(simes_sequence(n, delta).b[0])

    def b1_of(a: float) -> tuple[float, float]:
        b = _dempster_solve_b(a, delta, n)
        if b is None:
            return a + (1.0 - a) / n, math.nan  # essentially slope 1, flag
        return a + (1.0 - a) / ((1.0 - b) * n), b

    # golden-section search for the b1 minimizer (b1(a) is U-shaped)
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    lo, hi = 1e-7, 1.0 - 1e-7
    x1 = hi - inv_phi * (hi - lo)
    x2 = lo + inv_phi * (hi - lo)
    f1, _ = b1_of(x1)
    f2, _ = b1_of(x2)
    for _ in range(60):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - inv_phi * (hi - lo)
            f1, _ = b1_of(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + inv_phi * (hi - lo)
            f2, _ = b1_of(x2)
    a_min = 0.5 * (lo + hi)
    b1_min, _ = b1_of(a_min)

    warning = None
    if b1_target < b1_min - 1e-12:
        a_star = a_min
        warning = (f"b1_target={b1_target:.6g} below the achievable minimum "
                   f"{b1_min:.6g}; returning the b1-minimizing sequence")
    else:
        # match on the right (increasing) branch: shallower slope, smaller b_i
        lo, hi = a_min, 1.0 - 1e-9
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if b1_of(mid)[0] < b1_target:
                lo = mid
            else:
                hi = mid
        a_star = 0.5 * (lo + hi)

    b_param = _dempster_solve_b(a_star, delta, n)
    if b_param is None:
        b_param = 1e-9
    slope = (1.0 - a_star) / (1.0 - b_param)
    b = np.minimum(a_star + slope * np.arange(1, n + 1) / n, 1.0)
    params: dict[str, Any] = {"a": float(a_star), "b": float(b_param)}
    if warning:
        params["warning"] = warning
    return AdjustmentSequence(n=n, delta=delta, method="dempster", b=b, params=params)


# ---------------------------------------------------------------------------
# Using a sequence
# ---------------------------------------------------------------------------

def apply(seq: AdjustmentSequence, p: float | np.ndarray) -> float | np.ndarray:
    """Map marginal p-value(s) through h(t) = b_{ceil((n+1) t)}, b_{n+1} = 1.

    Grid points i/(n+1) map exactly to b_i (a half-ulp guard keeps float
    round-off from bumping the index).
    """
    arr = np.asarray(p, dtype=np.float64)
    if arr.size and (arr.min() <= 0.0 or arr.max() > 1.0):
        raise ValueError("p-values must lie in (0, 1]")
    q = (seq.n + 1) * arr
    near = np.rint(q)
    idx = np.where(np.abs(q - near) < 1e-9, near, np.ceil(q)).astype(np.int64)
    ext = np.concatenate([seq.b, [1.0]])
    out = ext[idx - 1]
    return float(out) if np.isscalar(p) or arr.ndim == 0 else out


def adjust_pvalues(seq: AdjustmentSequence, p):
    """PValueVector version of ``apply`` with provenance carried over."""
    from .conformal import PValueVector

    if p.n != seq.n:
        raise ValueError(f"sequence n={seq.n} does not match p-value n={p.n}")
    values = apply(seq, p.values)
    return PValueVector(values=values, kind="conditional", n=seq.n,
                        delta=seq.delta, method=seq.method)


def _coverage_mc(b: np.ndarray, reps: int, rng: RandomStream) -> tuple[float, float]:
    n = b.size
    hits = 0
    for chunk_idx, rows in enumerate(chunk_sizes(reps, _MC_CHUNK_ELEMENTS, n + 1)):
        g = rng.split(chunk_idx).generator()
        e = g.standard_exponential((rows, n + 1))
        u = np.cumsum(e[:, :-1], axis=1)
        u /= e.sum(axis=1, keepdims=True)
        hits += int((u <= b).all(axis=1).sum())
    cov = hits / reps
    se = math.sqrt(max(cov * (1.0 - cov), 1.0 / reps) / reps)
    return cov, se


def coverage_probability_mc(
    seq: AdjustmentSequence, reps: int, rng: RandomStream
) -> tuple[float, float]:
    """Monte-Carlo estimate (and binomial s.e.) of P[U_(i) <= b_i for all i]."""
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    return _coverage_mc(seq.b, reps, rng)


def dempster_crossing_mc(
    seq: AdjustmentSequence, reps: int, rng: RandomStream
) -> tuple[float, float]:
    """Monte-Carlo estimate of the exact linear-boundary crossing event
    {exists i: U_(i) > a + slope (i-1)/n} for a dempster sequence."""
    if seq.method != "dempster":
        raise ValueError("dempster_crossing_mc needs a dempster sequence")
    a, bp = seq.params["a"], seq.params["b"]
    slope = (1.0 - a) / (1.0 - bp)
    n = seq.n
    boundary = a + slope * np.arange(0, n) / n
    hits = 0
    for chunk_idx, rows in enumerate(chunk_sizes(reps, _MC_CHUNK_ELEMENTS, n + 1)):
        g = rng.split(chunk_idx).generator()
        e = g.standard_exponential((rows, n + 1))
        u = np.cumsum(e[:, :-1], axis=1)
        u /= e.sum(axis=1, keepdims=True)
        hits += int((u > boundary).any(axis=1).sum())
    p = hits / reps
    se = math.sqrt(max(p * (1.0 - p), 1.0 / reps) / reps)
    return p, se


def effective_level(seq: AdjustmentSequence, alpha: float) -> float:
    """i*(alpha)/(n+1) where i* = max{i : b_i <= alpha}; 0 when no b_i <= alpha."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    i_star = int(np.searchsorted(seq.b, alpha, side="right"))
    return i_star / (seq.n + 1)
