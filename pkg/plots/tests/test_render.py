"""Render every figure kind from fixture CSVs produced by the primary CLI."""

import json
import shutil
import subprocess

import numpy as np
import pytest

from conformal_plots import FigureSpec, SchemaError, build_figure, render
from conformal_plots.cli import main as plots_main

PRIMARY = shutil.which("conformal-outliers")

pytestmark = pytest.mark.skipif(
    PRIMARY is None, reason="conformal-outliers CLI not installed")


def _run(*args):
    proc = subprocess.run([PRIMARY, *args], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="session")
def fixtures(tmp_path_factory):
    """CSV fixtures generated through the primary CLI (its public surface)."""
    root = tmp_path_factory.mktemp("fixtures")

    for method, extra in (("simes", ["--k", "500"]), ("dkwm", []),
                          ("asymptotic", []),
                          ("monte-carlo", ["--reps", "10000", "--seed", "3"])):
        _run("adjust", "--method", method, "--n", "1000", "--delta", "0.1",
             *extra, "--out", str(root / f"seq_{method}.csv"))

    cal = root / "cal.csv"
    g = np.random.default_rng(0)
    cal.write_text("\n".join(str(v) for v in np.sort(g.normal(size=400))) + "\n")
    _run("band", "--cal-csv", str(cal), "--method", "simes", "--delta", "0.1",
         "--out", str(root / "band.csv"))

    _run("simulate", "--suite", "outlier", "--n-practitioners", "6",
         "--n-test-sets", "4", "--n-train", "60", "--n-cal", "80",
         "--n-test", "100", "--a", "2.5", "--alpha", "0.2",
         "--methods", "marginal,simes", "--seed", "11",
         "--outdir", str(root / "sims"))

    for gamma, sub in (("1", "g1"), ("3", "g3")):
        _run("simulate", "--suite", "fisher-null", "--n", "200", "--gamma",
             gamma, "--alpha", "0.05", "--reps", "600", "--seed", "2",
             "--outdir", str(root / sub))

    _run("simulate", "--suite", "power-curves", "--n-grid", "100,300",
         "--methods", "simes,dkwm,asymptotic", "--alpha", "0.05",
         "--delta", "0.1", "--seed", "8", "--outdir", str(root / "pc"))
    return root


def _spec(kind, inputs, out, **options):
    return FigureSpec(kind=kind, inputs=tuple(str(i) for i in inputs),
                      output=str(out), options=options)


class TestRenderKinds:
    def test_sequences(self, fixtures, tmp_path):
        out = render(_spec("sequences",
                           [fixtures / f"seq_{m}.csv" for m in
                            ("simes", "dkwm", "asymptotic", "monte-carlo")],
                           tmp_path / "sequences.png"))
        assert out.exists() and out.stat().st_size > 0

    def test_band(self, fixtures, tmp_path):
        out = render(_spec("band", [fixtures / "band.csv"],
                           tmp_path / "band.png"))
        assert out.exists() and out.stat().st_size > 0

    def test_boxplot(self, fixtures, tmp_path):
        out = render(_spec("boxplot-fdr-power",
                           [fixtures / "sims" / "outlier.csv"],
                           tmp_path / "box.png", procedure="bh"))
        assert out.exists() and out.stat().st_size > 0

    def test_type1(self, fixtures, tmp_path):
        out = render(_spec("typeI",
                           [fixtures / "g1" / "fisher_null.csv",
                            fixtures / "g3" / "fisher_null.csv"],
                           tmp_path / "type1.png"))
        assert out.exists() and out.stat().st_size > 0

    def test_power_curves(self, fixtures, tmp_path):
        out = render(_spec("power-curves",
                           [fixtures / "pc" / "power_curves.csv"],
                           tmp_path / "pc.png", alpha=0.05))
        assert out.exists() and out.stat().st_size > 0

    def test_deterministic_rerun(self, fixtures, tmp_path):
        spec = _spec("band", [fixtures / "band.csv"], tmp_path / "b.png")
        a = render(spec).read_bytes()
        b = render(spec).read_bytes()
        assert a == b  # Agg backend with fixed dpi; no timestamps in PNG


class TestQuantileOverlay:
    def test_matches_hand_computed_quantile(self, fixtures, tmp_path):
        # read the per-practitioner samples straight from the fixture and
        # interpolate the 0.9 quantile by hand, then compare against the
        # overlay line the figure actually draws
        path = fixtures / "sims" / "outlier.csv"
        lines = path.read_text().strip().splitlines()
        header = lines[0].split(",")
        icol = {h: i for i, h in enumerate(header)}
        samples = {}
        for ln in lines[1:]:
            parts = ln.split(",")
            if parts[icol["metric"]] != "fdr" or parts[icol["procedure"]] != "bh":
                continue
            samples.setdefault(parts[icol["method"]], []).append(
                float(parts[icol["value"]]))

        def hand_quantile(vals, q):
            v = sorted(vals)
            h = (len(v) - 1) * q
            lo = int(h)
            if lo == len(v) - 1:
                return v[lo]
            return v[lo] + (h - lo) * (v[lo + 1] - v[lo])

        fig = build_figure(_spec("boxplot-fdr-power", [path],
                                 tmp_path / "unused.png", procedure="bh"))
        drawn = {}
        for ax in fig.axes:
            for line in ax.lines:
                gid = line.get_gid() or ""
                if gid.startswith("q90:fdr:"):
                    drawn[gid.split(":")[2]] = line.get_ydata()
        assert set(drawn) == set(samples)
        for method, vals in samples.items():
            expected = hand_quantile(vals, 0.9)
            assert drawn[method][-1] == pytest.approx(expected, abs=1e-12)


class TestSchemaErrors:
    def test_missing_column_named(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("threshold,unrelated\n1,2\n")
        with pytest.raises(SchemaError, match="empirical_fpr"):
            render(_spec("band", [bad], tmp_path / "x.png"))

    def test_empty_csv(self, tmp_path):
        bad = tmp_path / "empty.csv"
        bad.write_text("")
        with pytest.raises(SchemaError, match="empty"):
            render(_spec("band", [bad], tmp_path / "x.png"))

    def test_cli_exit_code_and_message(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("threshold,band\n1,0.5\n")
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({
            "kind": "band", "input": str(bad),
            "output": str(tmp_path / "x.png")}))
        rc = plots_main(["render", "--spec", str(spec)])
        assert rc == 3
        assert "empirical_fpr" in capsys.readouterr().err

    def test_unknown_kind_in_spec(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"kind": "pie", "input": "x.csv",
                                    "output": "y.png"}))
        with pytest.raises(SchemaError, match="kind"):
            FigureSpec.from_json(spec)


class TestCliRoundTrip:
    def test_render_from_spec_file(self, fixtures, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({
            "kind": "sequences",
            "inputs": [str(fixtures / "seq_simes.csv"),
                       str(fixtures / "seq_dkwm.csv")],
            "output": str(tmp_path / "cmp.png"),
            "title": "adjustment comparison",
        }))
        rc = plots_main(["render", "--spec", str(spec)])
        assert rc == 0
        assert (tmp_path / "cmp.png").stat().st_size > 0
