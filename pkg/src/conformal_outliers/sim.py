"""Data generation and Monte-Carlo experimental protocols.

Simulates a world of J practitioners, each committed to one calibration data
set and facing L future test sets, and measures conditional and marginal
error rates of the different p-value calibration methods.  Also houses the
fast null checks (Fisher inflation, pairwise correlation, FPR Beta law, batch
FWER) that run on uniform scores: for continuous score functions the null
behaviour of conformal p-values does not depend on the score distribution, so
uniform scores lose no generality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import adjust, mtest, scoring
from .conformal import CalibrationSet, marginal_pvalues_batch
from .randomness import RandomStream, chunk_sizes
from .special import beta_cdf, chi_square_quantile, gamma_q, ks_test_pvalue

_MC_CHUNK_ELEMENTS = 16_000_000


# ---------------------------------------------------------------------------
# Data generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixtureSpec:
    """Fixed set of mixture centers; drawn once per experiment suite."""

    d: int
    centers: np.ndarray
    box: float

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=np.float64)
        if c.ndim != 2 or c.shape[1] != self.d:
            raise ValueError("centers must be (n_centers, d)")
        object.__setattr__(self, "centers", c)
        self.centers.setflags(write=False)


def make_mixture(d: int = 50, n_centers: int = 50, box: float = 3.0,
                 rng: RandomStream | None = None) -> MixtureSpec:
    """Centers drawn iid uniform on [-box, box]^d, then held constant."""
    if d < 1 or n_centers < 1 or box <= 0:
        raise ValueError("d, n_centers must be >= 1 and box > 0")
    if rng is None:
        raise ValueError("make_mixture needs a RandomStream")
    centers = rng.generator().uniform(-box, box, size=(n_centers, d))
    return MixtureSpec(d=d, centers=centers, box=box)


def sample_mixture(spec: MixtureSpec, a: float, n: int,
                   rng: RandomStream) -> np.ndarray:
    """n rows of sqrt(a) * N(0, I) + a uniformly chosen center."""
    if a < 1.0:
        raise ValueError(f"signal strength a must be >= 1, got {a}")
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if n == 0:
        return np.empty((0, spec.d))
    g = rng.generator()
    which = g.integers(0, spec.centers.shape[0], size=n)
    return math.sqrt(a) * g.standard_normal((n, spec.d)) + spec.centers[which]


# ---------------------------------------------------------------------------
# Experiment configuration and report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """Knobs of the practitioner-world experiments (desk-scale defaults)."""

    n_practitioners: int = 25           # J
    n_test_sets: int = 25               # L
    n_train: int = 1000
    n_cal: int = 1000
    n_test: int = 1000
    outlier_frac: float = 0.1
    signal_a: float = 1.75
    scorer: str = "oracle-mixture"      # oracle-mixture | knn | mahalanobis
    knn_k: int = 5
    ridge: float = 0.1
    methods: tuple[str, ...] = ("marginal", "simes", "asymptotic", "monte-carlo")
    delta: float = 0.1
    alphas: tuple[float, ...] = (0.1,)
    storey_lambda: float | None = None  # None -> on-grid value nearest 0.5
    procedures: tuple[str, ...] = ("bh", "storey-bh")
    # batch mode
    batch_size: int = 10
    batch_null_frac: float = 0.9
    batch_outlier_frac: float = 0.5
    combine: str = "fisher"
    fwer_cut: float = 0.1
    # mixture geometry
    d: int = 50
    n_centers: int = 50
    box: float = 3.0
    mc_reps: int = 20_000               # monte-carlo sequence calibration


@dataclass(frozen=True)
class ExperimentRecord:
    practitioner: int
    method: str
    procedure: str
    alpha: float
    fdr: float
    power: float


@dataclass(frozen=True)
class ExperimentReport:
    """Per-practitioner conditional FDR/power samples plus summaries."""

    records: tuple[ExperimentRecord, ...]
    config: ExperimentConfig
    kind: str = "outlier"

    def select(self, method: str, procedure: str, alpha: float) -> np.ndarray:
        """(J, 2) array of (conditional FDR, conditional power), one row per
        practitioner, ordered by practitioner index."""
        rows = [(r.fdr, r.power) for r in self.records
                if r.method == method and r.procedure == procedure
                and abs(r.alpha - alpha) < 1e-12]
        if not rows:
            raise KeyError(f"no records for {method}/{procedure}/alpha={alpha}")
        return np.asarray(rows)

    def mfdr(self, method: str, procedure: str, alpha: float) -> float:
        return float(self.select(method, procedure, alpha)[:, 0].mean())

    def mpower(self, method: str, procedure: str, alpha: float) -> float:
        return float(self.select(method, procedure, alpha)[:, 1].mean())

    def cfdr_quantile(self, method: str, procedure: str, alpha: float,
                      q: float = 0.9) -> float:
        return float(np.quantile(self.select(method, procedure, alpha)[:, 0], q))

    def combos(self) -> list[tuple[str, str, float]]:
        seen: list[tuple[str, str, float]] = []
        for r in self.records:
            key = (r.method, r.procedure, r.alpha)
            if key not in seen:
                seen.append(key)
        return seen


def _on_grid_lambda(n: int, target: float = 0.5) -> float:
    return round(target * (n + 1)) / (n + 1)


def _build_sequences(config: ExperimentConfig, rng: RandomStream
                     ) -> dict[str, adjust.AdjustmentSequence]:
    seqs: dict[str, adjust.AdjustmentSequence] = {}
    n, delta = config.n_cal, config.delta
    for method in config.methods:
        if method == "marginal":
            continue
        if method == "simes":
            seqs[method] = adjust.simes_sequence(n, delta)
        elif method == "dkwm":
            seqs[method] = adjust.dkwm_sequence(n, delta)
        elif method == "asymptotic":
            seqs[method] = adjust.asymptotic_sequence(n, delta)
        elif method == "monte-carlo":
            seqs[method] = adjust.monte_carlo_sequence(
                n, delta, reps=config.mc_reps, rng=rng.split(41))
        elif method == "dempster":
            seqs[method] = adjust.dempster_sequence(n, delta)
        else:
            raise ValueError(f"unknown adjustment method {method!r}")
    return seqs


def _fit_scorer(config: ExperimentConfig, spec: MixtureSpec,
                train: np.ndarray | None):
    if config.scorer == "oracle-mixture":
        return scoring.oracle_mixture(spec, 1.0)
    if config.scorer == "knn":
        return scoring.fit_knn(train, config.knn_k)
    if config.scorer == "mahalanobis":
        return scoring.fit_mahalanobis(train, ridge=config.ridge)
    raise ValueError(f"unknown scorer {config.scorer!r}")


def _practitioner_pvalues(config: ExperimentConfig, spec: MixtureSpec,
                          sub: RandomStream):
    """One practitioner's marginal p-values for all L test sets.

    Returns (p_marg (L, n_test), truth mask (n_test,)): outliers occupy the
    trailing block of each test set.
    """
    needs_train = config.scorer != "oracle-mixture"
    train = (sample_mixture(spec, 1.0, config.n_train, sub.split(1))
             if needs_train else None)
    cal_x = sample_mixture(spec, 1.0, config.n_cal, sub.split(2))
    scorer = _fit_scorer(config, spec, train)
    cal = CalibrationSet(scorer.score(cal_x))

    n_out = int(round(config.n_test * config.outlier_frac))
    n_in = config.n_test - n_out
    L = config.n_test_sets
    inl = sample_mixture(spec, 1.0, n_in * L, sub.split(3))
    out = (sample_mixture(spec, config.signal_a, n_out * L, sub.split(4))
           if n_out else np.empty((0, spec.d)))
    s_in = scorer.score(inl).reshape(L, n_in) if n_in else np.empty((L, 0))
    s_out = scorer.score(out).reshape(L, n_out) if n_out else np.empty((L, 0))
    scores = np.concatenate([s_in, s_out], axis=1)
    p_marg = np.stack([
        marginal_pvalues_batch(cal, scores[l]).values for l in range(L)
    ])
    truth = np.zeros(config.n_test, dtype=bool)
    truth[n_in:] = True
    return p_marg, truth


def run_outlier_experiment(config: ExperimentConfig,
                           rng: RandomStream) -> ExperimentReport:
    """Individual outlier detection: BH / Storey-BH over per-point p-values.

    For each practitioner, fits the scorer once, calibrates once, and records
    conditional FDR and power (averaged over the L test sets) for every
    (method, procedure, alpha) combination.  Deterministic given config and
    stream; practitioners use disjoint substreams.
    """
    spec = make_mixture(config.d, config.n_centers, config.box, rng.split(0))
    seqs = _build_sequences(config, rng.split(1))
    lam = (config.storey_lambda if config.storey_lambda is not None
           else _on_grid_lambda(config.n_cal))
    truth_idx: np.ndarray | None = None
    records: list[ExperimentRecord] = []
    for j in range(config.n_practitioners):
        p_marg, truth = _practitioner_pvalues(config, spec, rng.split(100 + j))
        if truth_idx is None:
            truth_idx = np.nonzero(truth)[0]
        L = p_marg.shape[0]
        for method in config.methods:
            per_proc: dict[tuple[str, float], list[tuple[float, float]]] = {}
            for l in range(L):
                p = p_marg[l] if method == "marginal" else adjust.apply(
                    seqs[method], p_marg[l])
                for alpha in config.alphas:
                    if "bh" in config.procedures:
                        rep = mtest.bh(p, alpha)
                        per_proc.setdefault(("bh", alpha), []).append(
                            mtest.fdp_power(rep, truth_idx, config.n_test))
                    if "storey-bh" in config.procedures:
                        rep = mtest.storey_bh(p, alpha, lam)
                        per_proc.setdefault(("storey-bh", alpha), []).append(
                            mtest.fdp_power(rep, truth_idx, config.n_test))
            for (proc, alpha), vals in per_proc.items():
                arr = np.asarray(vals)
                records.append(ExperimentRecord(
                    practitioner=j, method=method, procedure=proc, alpha=alpha,
                    fdr=float(arr[:, 0].mean()), power=float(arr[:, 1].mean())))
    return ExperimentReport(records=tuple(records), config=config, kind="outlier")


def _combine_batch(p: np.ndarray, method: str) -> float:
    """Combined p-value of one batch; p-values equal to 1 make Stouffer's
    z-score -inf, i.e. a combined p of 1 (no evidence)."""
    if method == "fisher":
        stat = float(-2.0 * np.log(p).sum())
        return gamma_q(p.size, 0.5 * stat)
    if method == "stouffer":
        if (p >= 1.0).any():
            return 1.0
        return mtest.stouffer_pvalue(p)
    if method == "simes-global":
        return mtest.simes_global_pvalue(p)
    if method == "harmonic":
        return mtest.harmonic_mean_pvalue(p)
    raise ValueError(f"unknown combination method {method!r}")


def run_batch_experiment(config: ExperimentConfig,
                         rng: RandomStream) -> ExperimentReport:
    """Batch-level testing: combine p-values within batches, then Storey-BH
    across batch p-values; also records the fixed-cut Fisher FWER mode.

    Test sets are divided into n_test/batch_size batches; a
    ``batch_null_frac`` fraction of them are all-inlier, the rest contain
    ``batch_outlier_frac`` outliers each.  FWER rows (procedure
    "fisher-fwer") report the rejection frequency of the fixed 0.1-cut Fisher
    test among null batches.
    """
    if config.n_test % config.batch_size:
        raise ValueError(
            f"n_test={config.n_test} not divisible by batch_size={config.batch_size}")
    n_batches = config.n_test // config.batch_size
    n_null_batches = int(round(config.batch_null_frac * n_batches))
    n_out_per_batch = int(round(config.batch_outlier_frac * config.batch_size))
    # trailing batches are non-null; within a batch, trailing members are outliers
    outlier_frac = ((n_batches - n_null_batches) * n_out_per_batch) / config.n_test
    point_config = replace(config, outlier_frac=outlier_frac)

    spec = make_mixture(config.d, config.n_centers, config.box, rng.split(0))
    seqs = _build_sequences(config, rng.split(1))
    lam = (config.storey_lambda if config.storey_lambda is not None
           else _on_grid_lambda(config.n_cal))
    batch_truth = np.zeros(n_batches, dtype=bool)
    batch_truth[n_null_batches:] = True
    truth_idx = np.nonzero(batch_truth)[0]

    records: list[ExperimentRecord] = []
    for j in range(config.n_practitioners):
        p_marg, _ = _practitioner_pvalues(point_config, spec, rng.split(100 + j))
        L = p_marg.shape[0]
        # rearrange each test set so batch b gets batch_size members, the
        # non-null batches taking their outliers from the trailing block
        order = _batch_member_order(config.n_test, n_batches, n_null_batches,
                                    n_out_per_batch)
        for method in config.methods:
            per_proc: dict[tuple[str, float], list[tuple[float, float]]] = {}
            fwer_hits: list[float] = []
            for l in range(L):
                p = p_marg[l] if method == "marginal" else adjust.apply(
                    seqs[method], p_marg[l])
                pb = p[order].reshape(n_batches, config.batch_size)
                combined = np.array([
                    _combine_batch(pb[bb], config.combine) for bb in range(n_batches)])
                for alpha in config.alphas:
                    rep = mtest.storey_bh(combined, alpha, lam)
                    per_proc.setdefault(("storey-bh", alpha), []).append(
                        mtest.fdp_power(rep, truth_idx, n_batches))
                if config.combine == "fisher":
                    null_p = combined[:n_null_batches]
                    if null_p.size:
                        fwer_hits.append(float((null_p < config.fwer_cut).mean()))
            for (proc, alpha), vals in per_proc.items():
                arr = np.asarray(vals)
                records.append(ExperimentRecord(
                    practitioner=j, method=method, procedure=proc, alpha=alpha,
                    fdr=float(arr[:, 0].mean()), power=float(arr[:, 1].mean())))
            if fwer_hits:
                records.append(ExperimentRecord(
                    practitioner=j, method=method, procedure="fisher-fwer",
                    alpha=config.fwer_cut, fdr=float(np.mean(fwer_hits)),
                    power=math.nan))
    return ExperimentReport(records=tuple(records), config=config, kind="batch")


def _batch_member_order(n_test: int, n_batches: int, n_null: int,
                        n_out_per_batch: int) -> np.ndarray:
    """Index order assigning inliers (leading block) and outliers (trailing
    block) of a test set to batches: null batches first, each non-null batch
    ending with its outliers."""
    batch_size = n_test // n_batches
    n_nonnull = n_batches - n_null
    n_outliers = n_nonnull * n_out_per_batch
    inlier_pool = iter(range(n_test - n_outliers))
    outlier_pool = iter(range(n_test - n_outliers, n_test))
    order = []
    for b in range(n_batches):
        take_out = n_out_per_batch if b >= n_null else 0
        order.extend(next(inlier_pool) for _ in range(batch_size - take_out))
        order.extend(next(outlier_pool) for _ in range(take_out))
    return np.asarray(order, dtype=np.int64)


# ---------------------------------------------------------------------------
# Uniform-score null checks
# ---------------------------------------------------------------------------

def _null_pvalue_rows(n: int, m: int, rows: int,
                      g: np.random.Generator) -> np.ndarray:
    """rows x m marginal null p-values, each row sharing one calibration set
    of n uniform scores (drawn as order statistics via exponential spacings)."""
    e = g.standard_exponential((rows, n + 1))
    cal = np.cumsum(e[:, :-1], axis=1)
    cal /= e.sum(axis=1, keepdims=True)
    u = g.random((rows, m))
    counts = np.empty((rows, m), dtype=np.int64)
    for r in range(rows):
        counts[r] = np.searchsorted(cal[r], u[r], side="right")
    return (1.0 + counts) / (n + 1)


@dataclass(frozen=True)
class FisherNullResult:
    n: int
    m: int
    alpha: float
    reps: int
    uncorrected_rate: float
    uncorrected_se: float
    corrected_rate: float
    corrected_se: float


def fisher_null_calibration(n: int, gamma: float, alpha: float, reps: int,
                            rng: RandomStream) -> FisherNullResult:
    """Empirical type-I error of the plain and corrected Fisher tests under
    the global null, with m = floor(gamma n) test points per replicate."""
    m = int(math.floor(gamma * n))
    if m < 1:
        raise ValueError(f"floor(gamma n) = {m} < 1")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    thr = chi_square_quantile(2 * m, 1.0 - alpha)
    ratio = m / n
    xi = math.sqrt(1.0 + ratio)
    hits_u = hits_c = 0
    for idx, rows in enumerate(chunk_sizes(reps, _MC_CHUNK_ELEMENTS, n + 1 + m)):
        g = rng.split(idx).generator()
        p = _null_pvalue_rows(n, m, rows, g)
        stat = -2.0 * np.log(p).sum(axis=1)
        hits_u += int((stat >= thr).sum())
        hits_c += int((((stat + 2.0 * (xi - 1.0) * m) / xi) >= thr).sum())
    ru, rc = hits_u / reps, hits_c / reps
    return FisherNullResult(
        n=n, m=m, alpha=alpha, reps=reps,
        uncorrected_rate=ru, uncorrected_se=math.sqrt(max(ru * (1 - ru), 1 / reps) / reps),
        corrected_rate=rc, corrected_se=math.sqrt(max(rc * (1 - rc), 1 / reps) / reps),
    )


def conditional_fisher_check(n: int, gamma: float, alpha: float,
                             cal_draws: int, test_reps: int,
                             rng: RandomStream) -> np.ndarray:
    """Conditional type-I error of the plain Fisher test, one estimate per
    calibration draw (each estimated from ``test_reps`` fresh test sets)."""
    m = int(math.floor(gamma * n))
    if m < 1:
        raise ValueError(f"floor(gamma n) = {m} < 1")
    thr = chi_square_quantile(2 * m, 1.0 - alpha)
    rates = np.empty(cal_draws)
    for j in range(cal_draws):
        g = rng.split(j).generator()
        e = g.standard_exponential(n + 1)
        cal = np.cumsum(e[:-1]) / e.sum()
        u = g.random((test_reps, m))
        counts = np.searchsorted(cal, u.ravel(), side="right").reshape(test_reps, m)
        stat = -2.0 * np.log((1.0 + counts) / (n + 1)).sum(axis=1)
        rates[j] = (stat >= thr).mean()
    return rates


_TRANSFORMS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "identity": lambda p: p,
    "neg2log": lambda p: -2.0 * np.log(p),
}


def lemma1_correlation_check(n: int, reps: int, transform: str,
                             rng: RandomStream,
                             shared: bool = True) -> tuple[float, float]:
    """MC correlation of G(p1), G(p2) for two null p-values.

    With a shared calibration set the correlation is 1/(n+2) for any
    finite-valued G; with independent calibration sets it is 0.
    """
    try:
        gfun = _TRANSFORMS[transform]
    except KeyError:
        raise ValueError(f"unknown transform {transform!r}; "
                         f"choose from {sorted(_TRANSFORMS)}") from None
    g1 = np.empty(reps)
    g2 = np.empty(reps)
    done = 0
    for idx, rows in enumerate(chunk_sizes(reps, _MC_CHUNK_ELEMENTS // 4, 2 * (n + 1))):
        g = rng.split(idx).generator()
        if shared:
            p = _null_pvalue_rows(n, 2, rows, g)
        else:
            pa = _null_pvalue_rows(n, 1, rows, g)
            pb = _null_pvalue_rows(n, 1, rows, g)
            p = np.concatenate([pa, pb], axis=1)
        g1[done:done + rows] = gfun(p[:, 0])
        g2[done:done + rows] = gfun(p[:, 1])
        done += rows
    corr = float(np.corrcoef(g1, g2)[0, 1])
    se = (1.0 - corr * corr) / math.sqrt(max(reps - 3, 1))
    return corr, se


@dataclass(frozen=True)
class BetaFprResult:
    n: int
    alpha: float
    ell: int
    reps: int
    ks_stat: float
    ks_pvalue: float
    passed: bool
    sample_mean: float
    sample_sd: float


def fpr_beta_check(n: int, alpha: float, reps: int,
                   rng: RandomStream) -> BetaFprResult:
    """KS test of simulated conditional FPR samples against Beta(l, n+1-l).

    The conditional FPR of the level-alpha conformal test with uniform scores
    is exactly the l-th calibration order statistic, l = floor((n+1) alpha).
    """
    ell = int(math.floor((n + 1) * alpha))
    if ell < 1:
        raise ValueError(f"floor((n+1) alpha) = {ell} < 1")
    samples = np.empty(reps)
    done = 0
    for idx, rows in enumerate(chunk_sizes(reps, _MC_CHUNK_ELEMENTS, n + 1)):
        g = rng.split(idx).generator()
        e = g.standard_exponential((rows, n + 1))
        u = np.cumsum(e[:, :-1], axis=1)
        u /= e.sum(axis=1, keepdims=True)
        samples[done:done + rows] = u[:, ell - 1]
        done += rows
    samples.sort()
    cdf = np.array([beta_cdf(ell, n + 1 - ell, x) for x in samples])
    i = np.arange(1, reps + 1)
    ks = float(max((i / reps - cdf).max(), (cdf - (i - 1) / reps).max()))
    pval = ks_test_pvalue(ks, reps)
    return BetaFprResult(n=n, alpha=alpha, ell=ell, reps=reps, ks_stat=ks,
                         ks_pvalue=pval, passed=pval > 0.01,
                         sample_mean=float(samples.mean()),
                         sample_sd=float(samples.std(ddof=1)))


@dataclass(frozen=True)
class BatchFwerResult:
    n: int
    batch_size: int
    cut: float
    method: str
    fwer: float
    se: float  # clustered by practitioner
    n_practitioners: int
    batches_per_practitioner: int


def batch_fwer_check(n: int, batch_size: int, cut: float,
                     n_practitioners: int, batches_per_practitioner: int,
                     rng: RandomStream,
                     seq: adjust.AdjustmentSequence | None = None) -> BatchFwerResult:
    """All-null batch FWER of the fixed-cut Fisher test on uniform scores.

    Each practitioner keeps one calibration set for all its batches, so the
    standard error is clustered at the practitioner level.  Pass ``seq`` to
    evaluate calibration-conditional p-values instead of marginal ones.
    """
    B = batch_size
    thr = chi_square_quantile(2 * B, 1.0 - cut)
    fw = np.empty(n_practitioners)
    for j in range(n_practitioners):
        g = rng.split(j).generator()
        p = _null_pvalue_rows(n, batches_per_practitioner * B, 1, g)
        p = p.reshape(batches_per_practitioner, B)
        if seq is not None:
            p = adjust.apply(seq, p.ravel()).reshape(batches_per_practitioner, B)
        stat = -2.0 * np.log(p).sum(axis=1)
        fw[j] = (stat >= thr).mean()
    method = "marginal" if seq is None else seq.method
    return BatchFwerResult(
        n=n, batch_size=B, cut=cut, method=method, fwer=float(fw.mean()),
        se=float(fw.std(ddof=1) / math.sqrt(n_practitioners)),
        n_practitioners=n_practitioners,
        batches_per_practitioner=batches_per_practitioner)


@dataclass(frozen=True)
class FdrNullResult:
    n: int
    m: int
    n_outliers: int
    alpha: float
    reps: int
    bh_fdr: float
    bh_fdr_se: float
    bh_power: float
    storey_fdr: float
    storey_fdr_se: float
    storey_power: float
    storey_lambda: float


def bh_fdr_check(n: int, m: int, n_outliers: int, alpha: float, reps: int,
                 rng: RandomStream, outlier_exponent: float = 40.0,
                 lam: float | None = None) -> FdrNullResult:
    """Mean FDP of BH and Storey-BH over fresh (calibration, test) draws.

    Inlier scores are uniform; outlier scores are u^outlier_exponent
    (stochastically much smaller).  lam defaults to the on-grid value nearest
    0.5.
    """
    if not 0 <= n_outliers <= m:
        raise ValueError("need 0 <= n_outliers <= m")
    if lam is None:
        lam = _on_grid_lambda(n)
    truth_idx = np.arange(m - n_outliers, m)
    fdp_b = np.empty(reps)
    pow_b = np.empty(reps)
    fdp_s = np.empty(reps)
    pow_s = np.empty(reps)
    for r in range(reps):
        g = rng.split(r).generator()
        e = g.standard_exponential(n + 1)
        cal = np.cumsum(e[:-1]) / e.sum()
        s = g.random(m)
        if n_outliers:
            s[m - n_outliers:] = s[m - n_outliers:] ** outlier_exponent
        p = (1.0 + np.searchsorted(cal, s, side="right")) / (n + 1)
        rep_b = mtest.bh(p, alpha)
        fdp_b[r], pow_b[r] = mtest.fdp_power(rep_b, truth_idx, m)
        rep_s = mtest.storey_bh(p, alpha, lam)
        fdp_s[r], pow_s[r] = mtest.fdp_power(rep_s, truth_idx, m)
    return FdrNullResult(
        n=n, m=m, n_outliers=n_outliers, alpha=alpha, reps=reps,
        bh_fdr=float(fdp_b.mean()),
        bh_fdr_se=float(fdp_b.std(ddof=1) / math.sqrt(reps)),
        bh_power=float(pow_b.mean()),
        storey_fdr=float(fdp_s.mean()),
        storey_fdr_se=float(fdp_s.std(ddof=1) / math.sqrt(reps)),
        storey_power=float(pow_s.mean()),
        storey_lambda=lam)


# ---------------------------------------------------------------------------
# Effective-level (power-proxy) curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerCurveRecord:
    n: int
    method: str
    setting: str  # single | needle | fisher-global
    effective_level: float


def _fisher_effective_level_mc(seq: adjust.AdjustmentSequence, m: int,
                               alpha: float, reps: int,
                               rng: RandomStream) -> float:
    """Null rejection rate of Fisher's test on adjusted p-values, under
    idealized iid grid-uniform marginal p-values (the matched marginal-test
    level, to MC accuracy)."""
    n = seq.n
    thr = chi_square_quantile(2 * m, 1.0 - alpha)
    ext = np.concatenate([seq.b, [1.0]])
    hits = 0
    for idx, rows in enumerate(chunk_sizes(reps, _MC_CHUNK_ELEMENTS, m)):
        g = rng.split(idx).generator()
        grid = g.integers(1, n + 2, size=(rows, m))
        adj = ext[grid - 1]
        with np.errstate(divide="ignore"):  # an adjusted value of 0 is certain rejection
            stat = -2.0 * np.log(adj).sum(axis=1)
        hits += int((stat >= thr).sum())
    return hits / reps


def power_curves(n_grid, alpha: float, delta: float, rng: RandomStream,
                 methods: tuple[str, ...] = ("simes", "dkwm", "asymptotic"),
                 m_rule: Callable[[int], int] | None = None,
                 fisher_reps: int = 10_000,
                 mc_reps: int = 20_000) -> list[PowerCurveRecord]:
    """Effective levels of adjusted tests across calibration sizes.

    Three settings per (n, method): a single test (grid index of the largest
    adjusted value below alpha), a Bonferroni needle search at level alpha/m,
    and the Fisher global test (by MC, no closed forms exist).  m grows as
    sqrt(n) unless another rule is given.
    """
    if m_rule is None:
        m_rule = lambda n: max(1, int(round(math.sqrt(n))))
    records: list[PowerCurveRecord] = []
    for gi, n in enumerate(n_grid):
        m = m_rule(n)
        for method in methods:
            if method == "simes":
                seq = adjust.simes_sequence(n, delta)
            elif method == "dkwm":
                seq = adjust.dkwm_sequence(n, delta)
            elif method == "asymptotic":
                seq = adjust.asymptotic_sequence(n, delta)
            elif method == "monte-carlo":
                seq = adjust.monte_carlo_sequence(
                    n, delta, reps=mc_reps, rng=rng.split(7000 + gi))
            else:
                raise ValueError(f"unknown adjustment method {method!r}")
            records.append(PowerCurveRecord(
                n=n, method=method, setting="single",
                effective_level=adjust.effective_level(seq, alpha)))
            records.append(PowerCurveRecord(
                n=n, method=method, setting="needle",
                effective_level=m * adjust.effective_level(seq, alpha / m)))
            records.append(PowerCurveRecord(
                n=n, method=method, setting="fisher-global",
                effective_level=_fisher_effective_level_mc(
                    seq, m, alpha, fisher_reps, rng.split(9000 + gi))))
    return records
