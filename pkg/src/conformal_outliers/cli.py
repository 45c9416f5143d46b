"""Command-line surface: reproducible pipelines over CSV files.

Subcommands: ``adjust``, ``pvalues``, ``test``, ``band``, ``simulate``,
``validate``.  Every run honors ``--seed`` (outputs are byte-identical across
re-runs) and ``--threads`` (recorded in the manifest; results never depend on
worker count), writes a JSON run manifest sufficient to replay it, and
resolves relative output paths against $CONFORMAL_OUTLIERS_OUTDIR when set.

Exit codes: 0 ok, 2 usage error, 3 data error, 4 validation failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import adjust, bands, mtest, sim, tables, validate
from .conformal import CalibrationSet, marginal_pvalues_batch
from .randomness import RandomStream


class DataError(Exception):
    """Bad or mismatched input data (exit code 3)."""


def _outpath(path: str) -> Path:
    base = os.environ.get("CONFORMAL_OUTLIERS_OUTDIR")
    p = Path(path)
    if base and not p.is_absolute():
        return Path(base) / p
    return p


def _manifest_for(out: Path, args: argparse.Namespace, subcommand: str,
                  outputs: list[Path], started: float,
                  extra: dict | None = None) -> Path:
    params = {k: v for k, v in vars(args).items()
              if k not in ("func", "command") and v is not None}
    return tables.write_manifest(
        out.with_suffix(".manifest.json"), subcommand, params,
        getattr(args, "seed", 0), [str(o) for o in outputs], started, extra)


# ---------------------------------------------------------------------------
# adjust
# ---------------------------------------------------------------------------

def _build_sequence(args) -> adjust.AdjustmentSequence:
    method = args.method
    if method == "simes":
        return adjust.simes_sequence(args.n, args.delta, args.k)
    if method == "dkwm":
        return adjust.dkwm_sequence(args.n, args.delta)
    if method == "asymptotic":
        return adjust.asymptotic_sequence(args.n, args.delta)
    if method == "monte-carlo":
        return adjust.monte_carlo_sequence(args.n, args.delta, args.k,
                                           reps=args.reps,
                                           rng=RandomStream(args.seed))
    if method == "dempster":
        return adjust.dempster_sequence(args.n, args.delta, args.b1_target)
    raise DataError(f"unknown method {method!r}")


def _write_sequence(seq: adjust.AdjustmentSequence, out: Path) -> list[Path]:
    csv = tables.write_csv(out, ["index", "b"],
                           [(i + 1, float(v)) for i, v in enumerate(seq.b)])
    sidecar = out.with_suffix(".json")
    doc = {"method": seq.method, "n": seq.n, "delta": seq.delta}
    doc.update(seq.params)
    sidecar.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                       encoding="utf-8")
    return [csv, sidecar]


def cmd_adjust(args) -> int:
    started = time.time()
    out = _outpath(args.out)
    seq = _build_sequence(args)
    outputs = _write_sequence(seq, out)
    _manifest_for(out, args, "adjust", outputs, started)
    return 0


def _load_sequence_csv(path: str) -> adjust.AdjustmentSequence:
    cols = tables.read_csv_columns(path)
    if "b" not in cols:
        raise DataError(f"{path}: missing 'b' column")
    b = np.asarray([float(x) for x in cols["b"]])
    meta = {}
    sidecar = Path(path).with_suffix(".json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
    return adjust.AdjustmentSequence(
        n=b.size, delta=float(meta.get("delta", 0.1)),
        method=str(meta.get("method", "file")), b=b,
        params={k: v for k, v in meta.items()
                if k not in ("method", "n", "delta")})


# ---------------------------------------------------------------------------
# pvalues
# ---------------------------------------------------------------------------

def cmd_pvalues(args) -> int:
    started = time.time()
    out = _outpath(args.out)
    cal_scores = tables.read_score_column(args.cal_csv)
    if cal_scores.size == 0:
        raise DataError(f"{args.cal_csv}: empty calibration file")
    cal = CalibrationSet(cal_scores)
    tests = tables.read_score_column(args.test_csv)

    seq = None
    if args.adjustment_csv:
        seq = _load_sequence_csv(args.adjustment_csv)
        if seq.n != cal.n:
            raise DataError(
                f"adjustment length {seq.n} does not match calibration size {cal.n}")

    header = ["index", "score", "p_marginal"]
    if seq is not None:
        header.append("p_conditional")
    rows = []
    if tests.size:
        p = marginal_pvalues_batch(cal, tests, rng=RandomStream(args.seed),
                                   randomized=args.randomized)
        cond = adjust.apply(seq, p.values) if seq is not None else None
        for i in range(tests.size):
            row = [i, float(tests[i]), float(p.values[i])]
            if cond is not None:
                row.append(float(cond[i]))
            rows.append(row)
    outputs = [tables.write_csv(out, header, rows)]
    _manifest_for(out, args, "pvalues", outputs, started)
    return 0


# ---------------------------------------------------------------------------
# test
# ---------------------------------------------------------------------------

def _load_pvalues(path: str, column: str | None) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8").strip()
    if not text:
        raise DataError(f"{path}: empty p-value file")
    first = text.splitlines()[0]
    try:
        float(first.split(",")[0])
        has_header = False
    except ValueError:
        has_header = True
    if has_header:
        cols = tables.read_csv_columns(path)
        name = column
        if name is None:
            for cand in ("p_conditional", "p_marginal", "pvalue", "p"):
                if cand in cols:
                    name = cand
                    break
        if name is None or name not in cols:
            raise DataError(f"{path}: no p-value column found "
                            f"(have {sorted(cols)})")
        return np.asarray([float(x) for x in cols[name]])
    return tables.read_score_column(path)


def cmd_test(args) -> int:
    started = time.time()
    out = _outpath(args.out)
    p = _load_pvalues(args.pvalues_csv, args.column)
    if p.size == 0:
        raise DataError(f"{args.pvalues_csv}: no p-values")
    truth = None
    if args.truth_csv:
        truth = tables.read_score_column(args.truth_csv).astype(np.int64)

    proc = args.procedure
    metrics: dict = {"procedure": proc, "alpha": args.alpha, "m": int(p.size)}
    rejected = np.empty(0, dtype=np.int64)
    if proc == "bh":
        rep = mtest.bh(p, args.alpha)
        rejected = rep.rejected
    elif proc == "storey-bh":
        rep = mtest.storey_bh(p, args.alpha, args.storey_lambda)
        rejected = rep.rejected
        metrics["pi0"] = rep.params["pi0"]
        metrics["lambda"] = args.storey_lambda
        if rep.warnings:
            metrics["warnings"] = list(rep.warnings)
    elif proc in ("fisher", "fisher-corrected"):
        if proc == "fisher":
            res = mtest.fisher_test(p, args.alpha)
        else:
            res = mtest.fisher_corrected_test(p, args.alpha, args.gamma)
        metrics.update(statistic=res.statistic, threshold=res.threshold,
                       reject=res.reject, combined_p=res.combined_p)
        rejected = np.arange(p.size) if res.reject else rejected
    elif proc in ("stouffer", "simes-global", "harmonic"):
        combined = {"stouffer": mtest.stouffer_pvalue,
                    "simes-global": mtest.simes_global_pvalue,
                    "harmonic": mtest.harmonic_mean_pvalue}[proc](p)
        reject = combined <= args.alpha
        metrics.update(combined_p=combined, reject=bool(reject))
        if proc == "harmonic":
            metrics["note"] = ("raw harmonic mean, no tail correction; "
                               "slightly anti-conservative")
        rejected = np.arange(p.size) if reject else rejected
    else:
        raise DataError(f"unknown procedure {proc!r}")

    mask = np.zeros(p.size, dtype=bool)
    mask[rejected] = True
    if truth is not None:
        rep = mtest.RejectionReport(rejected=rejected, procedure=proc)
        fdp, power = mtest.fdp_power(rep, truth, p.size)
        metrics.update(fdp=fdp, power=power)
    metrics["num_rejected"] = int(mask.sum())

    csv = tables.write_csv(out, ["index", "pvalue", "rejected"],
                           [(i, float(p[i]), bool(mask[i]))
                            for i in range(p.size)])
    mjson = out.with_suffix(".metrics.json")
    mjson.write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n",
                     encoding="utf-8")
    _manifest_for(out, args, "test", [csv, mjson], started)
    return 0


# ---------------------------------------------------------------------------
# band
# ---------------------------------------------------------------------------

def cmd_band(args) -> int:
    started = time.time()
    out = _outpath(args.out)
    cal_scores = tables.read_score_column(args.cal_csv)
    if cal_scores.size == 0:
        raise DataError(f"{args.cal_csv}: empty calibration file")
    cal = CalibrationSet(cal_scores)
    if args.adjustment_csv:
        seq = _load_sequence_csv(args.adjustment_csv)
    else:
        args.n = cal.n
        seq = _build_sequence(args)
    if seq.n != cal.n:
        raise DataError(
            f"adjustment length {seq.n} does not match calibration size {cal.n}")
    band = bands.fpr_band(cal, seq)
    rows = band.rows()
    values = [r[2] for r in rows]
    if any(b2 < b1 for b1, b2 in zip(values, values[1:])):
        raise DataError("band values are not nondecreasing")  # invariant echo
    csv = tables.write_csv(out, ["threshold", "empirical_fpr", "band"], rows)
    _manifest_for(out, args, "band", [csv], started)
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _experiment_csv(report: sim.ExperimentReport, outdir: Path,
                    name: str) -> list[Path]:
    rows = [(r.practitioner, r.method, r.procedure, r.alpha, "fdr", r.fdr)
            for r in report.records]
    rows += [(r.practitioner, r.method, r.procedure, r.alpha, "power", r.power)
             for r in report.records]
    per = tables.write_csv(outdir / f"{name}.csv",
                           ["practitioner", "method", "procedure", "alpha",
                            "metric", "value"], rows)
    srows = []
    for method, proc, alpha in report.combos():
        srows.append((method, proc, alpha, "mfdr", report.mfdr(method, proc, alpha)))
        srows.append((method, proc, alpha, "mpower", report.mpower(method, proc, alpha)))
        srows.append((method, proc, alpha, "cfdr_q90",
                      report.cfdr_quantile(method, proc, alpha)))
    summ = tables.write_csv(outdir / f"{name}_summary.csv",
                            ["method", "procedure", "alpha", "metric", "value"],
                            srows)
    return [per, summ]


def cmd_simulate(args) -> int:
    started = time.time()
    outdir = _outpath(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rng = RandomStream(args.seed)
    suite = args.suite
    outputs: list[Path] = []

    if suite in ("outlier", "batch"):
        config = sim.ExperimentConfig()
        overrides = {}
        for key in ("n_practitioners", "n_test_sets", "n_train", "n_cal",
                    "n_test", "outlier_frac", "signal_a", "scorer", "delta",
                    "batch_size", "combine", "mc_reps"):
            v = getattr(args, key, None)
            if v is not None:
                overrides[key] = v
        if args.alpha is not None:
            overrides["alphas"] = (args.alpha,)
        if args.methods:
            overrides["methods"] = tuple(args.methods.split(","))
        config = replace(config, **overrides)
        if suite == "outlier":
            report = sim.run_outlier_experiment(config, rng)
        else:
            report = sim.run_batch_experiment(config, rng)
        outputs += _experiment_csv(report, outdir, suite)
    elif suite == "fisher-null":
        res = sim.fisher_null_calibration(
            n=args.n or 2000, gamma=args.gamma, alpha=args.alpha or 0.05,
            reps=args.reps or 5000, rng=rng)
        outputs.append(tables.write_csv(
            outdir / "fisher_null.csv",
            ["variant", "rate", "se", "n", "m", "alpha", "reps"],
            [("uncorrected", res.uncorrected_rate, res.uncorrected_se,
              res.n, res.m, res.alpha, res.reps),
             ("corrected", res.corrected_rate, res.corrected_se,
              res.n, res.m, res.alpha, res.reps)]))
    elif suite == "beta-fpr":
        res = sim.fpr_beta_check(n=args.n or 100, alpha=args.alpha or 0.1,
                                 reps=args.reps or 10_000, rng=rng)
        outputs.append(tables.write_csv(
            outdir / "beta_fpr.csv",
            ["n", "alpha", "ell", "reps", "ks_stat", "ks_pvalue", "passed",
             "sample_mean", "sample_sd"],
            [(res.n, res.alpha, res.ell, res.reps, res.ks_stat,
              res.ks_pvalue, res.passed, res.sample_mean, res.sample_sd)]))
    elif suite == "correlation":
        rows = []
        for i, transform in enumerate(("identity", "neg2log")):
            corr, se = sim.lemma1_correlation_check(
                n=args.n or 100, reps=args.reps or 100_000,
                transform=transform, rng=rng.split(i))
            rows.append((transform, corr, se, 1.0 / ((args.n or 100) + 2)))
        outputs.append(tables.write_csv(
            outdir / "correlation.csv",
            ["transform", "correlation", "se", "target"], rows))
    elif suite == "power-curves":
        n_grid = ([int(x) for x in args.n_grid.split(",")]
                  if args.n_grid else [100, 316, 1000, 3162, 10000])
        methods = (tuple(args.methods.split(","))
                   if args.methods else ("simes", "dkwm", "asymptotic"))
        records = sim.power_curves(n_grid, args.alpha or 0.05,
                                   args.delta or 0.1, rng, methods=methods)
        outputs.append(tables.write_csv(
            outdir / "power_curves.csv",
            ["n", "method", "setting", "effective_level"],
            [(r.n, r.method, r.setting, r.effective_level) for r in records]))
    else:
        raise DataError(f"unknown suite {suite!r}")

    _manifest_for(outdir / suite, args, "simulate", outputs, started)
    return 0


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def cmd_validate(args) -> int:
    started = time.time()
    out = _outpath(args.out) if args.out else None

    def progress(r: validate.CheckResult):
        flag = "PASS" if r.passed else "FAIL"
        print(f"[{flag}] {r.cid:>3}  {r.name}: {r.observed}  "
              f"(target: {r.target}; {r.seconds:.1f}s)")

    report = validate.run_validation(level=args.level, seed=args.seed,
                                     progress=progress)
    doc = {
        "level": report.level,
        "seed": report.seed,
        "passed": report.passed,
        "criteria": [asdict(r) for r in report.results],
    }
    if out:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(doc, indent=2, sort_keys=True, default=str)
                       + "\n", encoding="utf-8")
        _manifest_for(out, args, "validate", [out], started)
    print(f"validation {'PASSED' if report.passed else 'FAILED'} "
          f"({sum(r.passed for r in report.results)}/{len(report.results)} checks)")
    return 0 if report.passed else 4


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--threads", type=int, default=1,
                   help="worker hint; recorded in the manifest, never "
                        "changes results")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="conformal-outliers",
        description="Outlier testing with marginal and calibration-conditional "
                    "conformal p-values")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("adjust", help="construct an adjustment sequence")
    p.add_argument("--method", required=True,
                   choices=["simes", "dkwm", "asymptotic", "monte-carlo",
                            "dempster"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--k", type=int, default=None,
                   help="Simes parameter (default ceil(n/2))")
    p.add_argument("--reps", type=int, default=20_000,
                   help="Monte-Carlo calibration replicates")
    p.add_argument("--b1-target", type=float, default=None, dest="b1_target")
    p.add_argument("--out", default="sequence.csv")
    _add_common(p)
    p.set_defaults(func=cmd_adjust)

    p = sub.add_parser("pvalues", help="conformal p-values for test scores")
    p.add_argument("--cal-csv", required=True)
    p.add_argument("--test-csv", required=True)
    p.add_argument("--adjustment-csv", default=None)
    p.add_argument("--randomized", action="store_true",
                   help="tie-randomized p-values (for non-continuous scores)")
    p.add_argument("--out", default="pvalues.csv")
    _add_common(p)
    p.set_defaults(func=cmd_pvalues)

    p = sub.add_parser("test", help="multiple-testing / global-null procedures")
    p.add_argument("--pvalues-csv", required=True)
    p.add_argument("--column", default=None,
                   help="p-value column name (default: auto-detect)")
    p.add_argument("--procedure", required=True,
                   choices=["bh", "storey-bh", "fisher", "fisher-corrected",
                            "stouffer", "simes-global", "harmonic"])
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--lambda", type=float, default=0.5, dest="storey_lambda")
    p.add_argument("--gamma", type=float, default=0.0,
                   help="m/n ratio for fisher-corrected")
    p.add_argument("--truth-csv", default=None,
                   help="outlier indices, one per line")
    p.add_argument("--out", default="rejections.csv")
    _add_common(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("band", help="FPR upper confidence band")
    p.add_argument("--cal-csv", required=True)
    p.add_argument("--adjustment-csv", default=None)
    p.add_argument("--method", default="simes",
                   choices=["simes", "dkwm", "asymptotic", "monte-carlo",
                            "dempster"])
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--reps", type=int, default=20_000)
    p.add_argument("--b1-target", type=float, default=None, dest="b1_target")
    p.add_argument("--out", default="band.csv")
    _add_common(p)
    p.set_defaults(func=cmd_band)

    p = sub.add_parser("simulate", help="Monte-Carlo experiment suites")
    p.add_argument("--suite", required=True,
                   choices=["outlier", "batch", "fisher-null", "beta-fpr",
                            "correlation", "power-curves"])
    p.add_argument("--outdir", default="simulations")
    p.add_argument("--n", type=int, default=None, help="calibration size")
    p.add_argument("--gamma", type=float, default=3.0)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--n-grid", default=None, dest="n_grid")
    p.add_argument("--methods", default=None,
                   help="comma-separated adjustment methods")
    p.add_argument("--n-practitioners", type=int, default=None)
    p.add_argument("--n-test-sets", type=int, default=None)
    p.add_argument("--n-train", type=int, default=None)
    p.add_argument("--n-cal", type=int, default=None)
    p.add_argument("--n-test", type=int, default=None)
    p.add_argument("--outlier-frac", type=float, default=None)
    p.add_argument("--a", type=float, default=None, dest="signal_a",
                   help="outlier signal strength")
    p.add_argument("--scorer", default=None,
                   choices=["oracle-mixture", "knn", "mahalanobis"])
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--combine", default=None,
                   choices=["fisher", "stouffer", "simes-global", "harmonic"])
    p.add_argument("--mc-reps", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="run the acceptance suite")
    p.add_argument("--level", default="quick", choices=["quick", "full"])
    p.add_argument("--out", default=None, help="JSON report path")
    _add_common(p)
    p.set_defaults(func=cmd_validate)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
