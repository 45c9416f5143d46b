"""Built-in acceptance suite: every statistical guarantee as a numbered check.

``run_validation(level, seed)`` executes the checks at their stated
tolerances and returns a machine-readable report; the CLI wraps it as
``validate``.  The ``quick`` level runs the cheap subset (< 5 min), ``full``
runs everything (< 15 min).

Check 12a (marginal batch FWER above 0.1 at batch size 10) is implemented
exactly as stated but is not attainable for continuous scores: the p-value
grid makes the batch Fisher statistic stochastically smaller than its chi-
square reference, and that deficit exceeds the shared-calibration inflation
at every calibration size (the rate approaches 0.1 from below as n grows).
It is reported honestly as failing, with a supplementary large-batch check
(12s) demonstrating the genuine effect.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import adjust, mtest, sim
from .randomness import RandomStream

# Test seam: when set, every adjustment sequence used by the suite passes
# through this hook (lets the negative-control test inject a tampered band).
_sequence_hook: Callable[[adjust.AdjustmentSequence], adjust.AdjustmentSequence] | None = None


def _hooked(seq: adjust.AdjustmentSequence) -> adjust.AdjustmentSequence:
    return _sequence_hook(seq) if _sequence_hook is not None else seq


@dataclass(frozen=True)
class CheckResult:
    cid: str
    name: str
    target: str
    observed: str
    passed: bool
    seconds: float
    primary: bool = True
    details: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ValidationReport:
    level: str
    seed: int
    results: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results if r.primary)


def _result(cid, name, target, observed, passed, t0, primary=True, **details):
    return CheckResult(cid=cid, name=name, target=target, observed=observed,
                       passed=bool(passed), seconds=time.time() - t0,
                       primary=primary, details=details)


def _se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 1.0 / n) / n)


# ---------------------------------------------------------------------------
# Individual checks
# ---------------------------------------------------------------------------

def _check_fisher_null(rng: RandomStream) -> list[CheckResult]:
    t0 = time.time()
    res = sim.fisher_null_calibration(n=2000, gamma=3.0, alpha=0.05,
                                      reps=5000, rng=rng)
    elapsed = time.time() - t0
    out = []
    ok1 = 0.185 <= res.uncorrected_rate <= 0.225 and elapsed < 60.0
    out.append(_result(
        "1", "Fisher combination type-I inflation (uncorrected)",
        "rate in [0.185, 0.225], runtime < 60 s",
        f"rate={res.uncorrected_rate:.4f}, {elapsed:.1f} s", ok1, t0,
        rate=res.uncorrected_rate, se=res.uncorrected_se, seconds=elapsed))
    ok2 = 0.03 <= res.corrected_rate <= 0.07
    out.append(_result(
        "2", "Corrected Fisher combination validity",
        "rate in [0.03, 0.07]", f"rate={res.corrected_rate:.4f}", ok2, t0,
        rate=res.corrected_rate, se=res.corrected_se))
    return out


def _check_conditional_fisher(rng: RandomStream) -> CheckResult:
    t0 = time.time()
    rates = sim.conditional_fisher_check(n=1000, gamma=3.0, alpha=0.05,
                                         cal_draws=200, test_reps=300, rng=rng)
    q90 = float(np.quantile(rates, 0.9))
    return _result("3", "Conditional Fisher type-I failure (90th pct)",
                   "q90 > 0.5 (limit 0.717)", f"q90={q90:.3f}", q90 > 0.5, t0,
                   q90=q90, mean=float(rates.mean()))


def _check_lemma1(rng: RandomStream) -> CheckResult:
    t0 = time.time()
    target = 1.0 / 102.0
    obs = {}
    ok = True
    for i, transform in enumerate(("identity", "neg2log")):
        corr, se = sim.lemma1_correlation_check(n=100, reps=100_000,
                                                transform=transform,
                                                rng=rng.split(i))
        obs[transform] = (corr, se)
        ok &= abs(corr - target) <= 4.0 * se
    text = ", ".join(f"{k}={v[0]:.5f}±{v[1]:.5f}" for k, v in obs.items())
    return _result("4", "Pairwise p-value correlation 1/(n+2)",
                   f"within 4 s.e. of {target:.5f}", text, ok, t0,
                   **{k: v[0] for k, v in obs.items()})


def _check_fdr(rng: RandomStream) -> list[CheckResult]:
    t0 = time.time()
    res = sim.bh_fdr_check(n=999, m=100, n_outliers=10, alpha=0.1,
                           reps=4000, rng=rng)
    pi0a = 0.9 * 0.1
    ok5 = abs(res.bh_fdr - pi0a) <= 3.0 * res.bh_fdr_se
    r5 = _result("5", "BH FDR under conformal nulls = pi0*alpha",
                 f"|FDR - {pi0a:.3f}| <= 3 s.e.",
                 f"FDR={res.bh_fdr:.4f}±{res.bh_fdr_se:.4f}", ok5, t0,
                 fdr=res.bh_fdr, se=res.bh_fdr_se, power=res.bh_power)
    ok6 = res.storey_fdr <= 0.1 + 3.0 * res.storey_fdr_se
    r6 = _result("6", "Storey-BH FDR control (on-grid lambda)",
                 "FDR <= 0.1 + 3 s.e.",
                 f"FDR={res.storey_fdr:.4f}±{res.storey_fdr_se:.4f}", ok6, t0,
                 fdr=res.storey_fdr, se=res.storey_fdr_se,
                 lam=res.storey_lambda, power=res.storey_power)
    return [r5, r6]


def _check_beta_fpr(rng: RandomStream) -> CheckResult:
    t0 = time.time()
    res = sim.fpr_beta_check(n=100, alpha=0.1, reps=10_000, rng=rng)
    return _result("7", "Beta law of the conditional FPR",
                   "KS vs Beta(10, 91) not rejected at 1%",
                   f"KS={res.ks_stat:.4f}, p={res.ks_pvalue:.3f}",
                   res.passed, t0, ks=res.ks_stat, pvalue=res.ks_pvalue,
                   mean=res.sample_mean)


def _check_simes(rng: RandomStream) -> CheckResult:
    t0 = time.time()
    seq = _hooked(adjust.simes_sequence(1000, 0.1, 500))
    b1_exact = -math.expm1(0.002 * math.log(0.1))  # 1 - 0.1^0.002
    ok_b1 = abs(seq.b[0] - b1_exact) <= 1e-12
    ok_b25 = abs(seq.b[24] - 0.0377) <= 0.0005
    cov, se = adjust.coverage_probability_mc(seq, 100_000, rng)
    ok_cov = cov >= 0.9 - 3.0 * se
    ok_shape = bool(np.all(np.diff(seq.b) >= 0) and seq.b[0] >= 0
                    and seq.b[-1] <= 1.0 and np.all(seq.b[1000 - 500 + 1:] == 1.0))
    ok = ok_b1 and ok_b25 and ok_cov and ok_shape
    return _result(
        "8", "Simes sequence exactness and coverage",
        "b1 = 1-0.1^0.002 (1e-12), b25 = 0.0377±0.0005, coverage >= 0.9-3 s.e.",
        f"b1={seq.b[0]:.10f}, b25={seq.b[24]:.5f}, cov={cov:.4f}±{se:.4f}",
        ok, t0, b1=float(seq.b[0]), b25=float(seq.b[24]), coverage=cov,
        monotone=ok_shape)


def _mc_sequence(rng: RandomStream) -> adjust.AdjustmentSequence:
    return _hooked(adjust.monte_carlo_sequence(1000, 0.1, reps=50_000,
                                               rng=rng))


def _check_monte_carlo(rng: RandomStream,
                       seq: adjust.AdjustmentSequence) -> CheckResult:
    t0 = time.time()
    cov, se = adjust.coverage_probability_mc(seq, 100_000, rng.split(1))
    ok_cov = cov >= 0.9 - 3.0 * se
    b_s = adjust.simes_sequence(1000, 0.1, 500).b
    half = math.ceil((1000 + 1) / 2)
    ok_half = bool(np.all(seq.b[:half] <= b_s[:half]))
    ok_shape = bool(np.all(np.diff(seq.b) >= 0))
    return _result(
        "9", "Monte-Carlo sequence coverage (independent seed)",
        "coverage >= 0.9 - 3 s.e. at 1e5 reps; b_mc <= b_simes on lower half",
        f"cov={cov:.4f}±{se:.4f}, lower-half ok={ok_half}",
        ok_cov and ok_half and ok_shape, t0, coverage=cov, se=se,
        delta_hat=seq.params.get("delta_hat"))


def _check_dempster(rng: RandomStream) -> CheckResult:
    t0 = time.time()
    seq = _hooked(adjust.dempster_sequence(1000, 0.1))
    a, bp = seq.params["a"], seq.params["b"]
    delta_exact = adjust.dempster_crossing_probability(a, bp, 1000)
    ok_exact = abs(delta_exact - 0.1) <= 1e-6
    cross, se = adjust.dempster_crossing_mc(seq, 100_000, rng)
    ok_mc = abs(cross - 0.1) <= 3.0 * se
    return _result(
        "10", "Dempster boundary consistency",
        "exact crossing = 0.1 within 1e-6; MC crossing within 3 s.e.",
        f"exact={delta_exact:.8f}, MC={cross:.4f}±{se:.4f}",
        ok_exact and ok_mc, t0, exact=delta_exact, mc=cross, a=a, b=bp)


def _check_ccv(rng: RandomStream,
               mc_seq: adjust.AdjustmentSequence | None) -> CheckResult:
    t0 = time.time()
    n, delta = 1000, 0.1
    threshold = 0.9 - 3.0 * _se(0.9, 500)
    seqs = {
        "simes": _hooked(adjust.simes_sequence(n, delta)),
        "asymptotic": _hooked(adjust.asymptotic_sequence(n, delta)),
    }
    if mc_seq is not None:
        seqs["monte-carlo"] = mc_seq
    freqs = {}
    ok = True
    for i, (name, seq) in enumerate(seqs.items()):
        cov, _ = adjust.coverage_probability_mc(seq, 500, rng.split(i))
        freqs[name] = cov
        ok &= cov >= threshold

    # desk-scale practitioner world: conditional FDR of BH on adjusted
    # p-values should be <= alpha for at least 90% (- 3 s.e.) of practitioners
    config = sim.ExperimentConfig(
        n_practitioners=25, n_test_sets=25, n_cal=1000, n_test=1000,
        signal_a=1.75, methods=("marginal", "simes", "asymptotic", "monte-carlo"),
        alphas=(0.1,), procedures=("bh",))
    report = sim.run_outlier_experiment(config, rng.split(100))
    frac_threshold = 0.9 - 3.0 * _se(0.9, config.n_practitioners)
    fracs = {}
    for method in ("simes", "asymptotic", "monte-carlo"):
        cfdr = report.select(method, "bh", 0.1)[:, 0]
        fracs[method] = float((cfdr <= 0.1).mean())
        ok &= fracs[method] >= frac_threshold
    text = ("event " + ", ".join(f"{k}={v:.3f}" for k, v in freqs.items())
            + "; cFDR<=alpha frac "
            + ", ".join(f"{k}={v:.2f}" for k, v in fracs.items()))
    return _result(
        "11", "Calibration-conditional validity (event + practitioner world)",
        f"event freq >= {threshold:.3f}; practitioner frac >= {frac_threshold:.3f}",
        text, ok, t0, event_freqs=freqs, practitioner_fracs=fracs,
        marginal_q90=report.cfdr_quantile("marginal", "bh", 0.1))


def _check_batch_fwer(rng: RandomStream) -> list[CheckResult]:
    t0 = time.time()
    res_m = sim.batch_fwer_check(n=1000, batch_size=10, cut=0.1,
                                 n_practitioners=400,
                                 batches_per_practitioner=500,
                                 rng=rng.split(0))
    ok_m = res_m.fwer > 0.1 + 3.0 * res_m.se
    out = [_result(
        "12a", "Batch FWER, marginal p-values, batch size 10",
        "FWER > 0.1 + 3 s.e. (unattainable for continuous scores; see notes)",
        f"FWER={res_m.fwer:.4f}±{res_m.se:.4f}", ok_m, t0,
        fwer=res_m.fwer, se=res_m.se,
        note="p-value grid discreteness outweighs shared-calibration "
             "inflation at batch size 10 for every n; rate -> 0.1 from below")]

    t1 = time.time()
    seq = _hooked(adjust.simes_sequence(1000, 0.1))
    res_c = sim.batch_fwer_check(n=1000, batch_size=10, cut=0.1,
                                 n_practitioners=400,
                                 batches_per_practitioner=500,
                                 rng=rng.split(1), seq=seq)
    ok_c = res_c.fwer <= 0.1 + 3.0 * res_c.se
    out.append(_result(
        "12b", "Batch FWER, conditional p-values, batch size 10",
        "FWER <= 0.1 + 3 s.e.", f"FWER={res_c.fwer:.4f}±{res_c.se:.4f}",
        ok_c, t1, fwer=res_c.fwer, se=res_c.se))

    t2 = time.time()
    res_s = sim.batch_fwer_check(n=1000, batch_size=1000, cut=0.1,
                                 n_practitioners=300,
                                 batches_per_practitioner=30,
                                 rng=rng.split(2))
    ok_s = res_s.fwer > 0.1 + 3.0 * res_s.se
    out.append(_result(
        "12s", "Batch FWER direction at large batches (supplementary)",
        "FWER > 0.1 + 3 s.e. at batch size 1000",
        f"FWER={res_s.fwer:.4f}±{res_s.se:.4f}", ok_s, t2, primary=False,
        fwer=res_s.fwer, se=res_s.se))
    return out


def _check_effective_levels(rng: RandomStream) -> CheckResult:
    t0 = time.time()
    n, alpha, delta, m = 10_000, 0.05, 0.1, 100
    seq_s = _hooked(adjust.simes_sequence(n, delta))
    seq_a = _hooked(adjust.asymptotic_sequence(n, delta))
    seq_d = _hooked(adjust.dkwm_sequence(n, delta))
    single = {name: adjust.effective_level(s, alpha)
              for name, s in (("simes", seq_s), ("asymptotic", seq_a))}
    needle = {name: m * adjust.effective_level(s, alpha / m)
              for name, s in (("simes", seq_s), ("asymptotic", seq_a),
                              ("dkwm", seq_d))}
    fisher = {name: sim._fisher_effective_level_mc(s, m, alpha, 10_000,
                                                   rng.split(i))
              for i, (name, s) in enumerate((("simes", seq_s),
                                             ("asymptotic", seq_a)))}
    ok = (single["asymptotic"] > single["simes"]
          and needle["dkwm"] == 0.0
          and needle["simes"] > 0.0 and needle["asymptotic"] > 0.0
          and fisher["simes"] < fisher["asymptotic"])
    text = (f"single a={single['asymptotic']:.4f}>s={single['simes']:.4f}; "
            f"needle d={needle['dkwm']:.4f}, s={needle['simes']:.4f}, "
            f"a={needle['asymptotic']:.4f}; "
            f"fisher s={fisher['simes']:.4f}<a={fisher['asymptotic']:.4f}")
    return _result(
        "13", "Effective-level orderings at n=10^4",
        "single: asym > simes; needle: dkwm = 0 < simes, asym; "
        "fisher: simes < asym", text, ok, t0,
        single=single, needle=needle, fisher=fisher)


def _check_structure() -> CheckResult:
    """Structural gate: every constructor emits a nondecreasing band in [0, 1]."""
    t0 = time.time()
    rng = RandomStream(20240)
    seqs = [
        _hooked(adjust.simes_sequence(200, 0.1)),
        _hooked(adjust.dkwm_sequence(200, 0.1)),
        _hooked(adjust.asymptotic_sequence(200, 0.1)),
        _hooked(adjust.dempster_sequence(200, 0.1)),
        _hooked(adjust.monte_carlo_sequence(200, 0.1, reps=10_000, rng=rng)),
    ]
    bad = []
    for s in seqs:
        b = np.asarray(s.b, dtype=np.float64)
        if (b.size != s.n or np.any(np.diff(b) < 0)
                or b[0] < 0.0 or b[-1] > 1.0):
            bad.append(s.method)
    return _result("S", "Adjustment sequences are monotone in [0, 1]",
                   "all constructors", "ok" if not bad else f"bad: {bad}",
                   not bad, t0, bad=bad)


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

QUICK_CHECKS = ("S", "1", "2", "4", "5", "6", "7", "8", "10", "13")


def run_validation(level: str = "quick", seed: int = 20240,
                   progress: Callable[[CheckResult], None] | None = None
                   ) -> ValidationReport:
    """Run the acceptance checks; ``level`` is "quick" or "full"."""
    if level not in ("quick", "full"):
        raise ValueError(f"level must be 'quick' or 'full', got {level!r}")
    root = RandomStream(seed)
    results: list[CheckResult] = []

    def emit(rs):
        for r in (rs if isinstance(rs, list) else [rs]):
            results.append(r)
            if progress is not None:
                progress(r)

    emit(_check_structure())
    emit(_check_fisher_null(root.split(1)))
    if level == "full":
        emit(_check_conditional_fisher(root.split(3)))
    emit(_check_lemma1(root.split(4)))
    emit(_check_fdr(root.split(5)))
    emit(_check_beta_fpr(root.split(7)))
    emit(_check_simes(root.split(8)))
    mc_seq = None
    if level == "full":
        mc_seq = _mc_sequence(root.split(9))
        emit(_check_monte_carlo(root.split(19), mc_seq))
    emit(_check_dempster(root.split(10)))
    if level == "full":
        emit(_check_ccv(root.split(11), mc_seq))
        emit(_check_batch_fwer(root.split(12)))
    emit(_check_effective_levels(root.split(13)))
    return ValidationReport(level=level, seed=seed, results=tuple(results))
