"""Figure builders over the conformal-outliers CSV schemas.

The renderer never computes statistics beyond quantiles of provided columns;
all science lives in the producing package.  Inputs are read-only and a given
spec always draws the same figure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("boxplot-fdr-power", "band", "sequences", "typeI", "power-curves")


class SchemaError(Exception):
    """Input CSV does not match the expected schema."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple[str, ...]
    output: str
    title: str | None = None
    options: dict = field(default_factory=dict)

    @staticmethod
    def from_json(path: str | Path) -> "FigureSpec":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        kind = doc.get("kind")
        if kind not in KINDS:
            raise SchemaError(f"unknown figure kind {kind!r}; choose from {KINDS}")
        inputs = doc.get("inputs") or ([doc["input"]] if "input" in doc else [])
        if not inputs:
            raise SchemaError("spec needs 'input' or 'inputs'")
        if "output" not in doc:
            raise SchemaError("spec needs 'output'")
        return FigureSpec(kind=kind, inputs=tuple(inputs), output=doc["output"],
                          title=doc.get("title"), options=doc.get("options", {}))


def _read_csv(path: str, required: tuple[str, ...]) -> dict[str, list[str]]:
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not lines or not lines[0].strip():
        raise SchemaError(f"{path}: empty CSV")
    header = [h.strip() for h in lines[0].split(",")]
    for col in required:
        if col not in header:
            raise SchemaError(f"{path}: missing column {col!r} "
                              f"(have {header})")
    cols: dict[str, list[str]] = {h: [] for h in header}
    for ln in lines[1:]:
        if not ln.strip():
            continue
        parts = ln.split(",")
        if len(parts) != len(header):
            raise SchemaError(f"{path}: ragged row {ln!r}")
        for h, v in zip(header, parts):
            cols[h].append(v)
    if not cols[required[0]]:
        raise SchemaError(f"{path}: no data rows")
    return cols


def _floats(cols: dict[str, list[str]], name: str) -> np.ndarray:
    return np.asarray([float(x) for x in cols[name]])


def quantile_overlay(values_by_group: dict, q: float = 0.9) -> dict:
    """Per-group q-quantile of per-practitioner samples (linear interpolation,
    the numpy default); the solid overlay of the box plots."""
    return {k: float(np.quantile(np.asarray(v), q))
            for k, v in values_by_group.items()}


# ---------------------------------------------------------------------------
# Builders, one per kind
# ---------------------------------------------------------------------------

def _build_boxplot(spec: FigureSpec) -> plt.Figure:
    cols = _read_csv(spec.inputs[0],
                     ("practitioner", "method", "procedure", "alpha",
                      "metric", "value"))
    alpha = _floats(cols, "alpha")
    value = _floats(cols, "value")
    metric = cols["metric"]
    method = cols["method"]
    procedure = cols["procedure"]
    proc_filter = spec.options.get("procedure")
    q = float(spec.options.get("quantile", 0.9))

    fig, axes = plt.subplots(1, 2, figsize=(11, 4.2), sharex=True)
    for ax, want in zip(axes, ("fdr", "power")):
        groups: dict[tuple[str, float], list[float]] = {}
        for i in range(len(value)):
            if metric[i] != want:
                continue
            if proc_filter and procedure[i] != proc_filter:
                continue
            if not np.isfinite(value[i]):
                continue
            groups.setdefault((method[i], alpha[i]), []).append(value[i])
        if not groups:
            continue
        methods = sorted({m for m, _ in groups})
        alphas = sorted({a for _, a in groups})
        width = 0.8 / len(methods)
        for mi, m in enumerate(methods):
            pos, data = [], []
            for ai, a in enumerate(alphas):
                if (m, a) in groups:
                    pos.append(ai + mi * width - 0.4 + width / 2)
                    data.append(groups[(m, a)])
            bp = ax.boxplot(data, positions=pos, widths=width * 0.85,
                            patch_artist=True, manage_ticks=False)
            color = f"C{mi}"
            for box in bp["boxes"]:
                box.set_facecolor(color)
                box.set_alpha(0.45)
            overlay = quantile_overlay(
                {a: groups[(m, a)] for a in alphas if (m, a) in groups}, q)
            xs = [ai + mi * width - 0.4 + width / 2
                  for ai, a in enumerate(alphas) if a in overlay]
            ys = [overlay[a] for a in alphas if a in overlay]
            line, = ax.plot(xs, ys, color=color, marker="o", lw=2,
                            label=m, zorder=5)
            line.set_gid(f"q{int(q * 100)}:{want}:{m}")
        if want == "fdr":
            for ai, a in enumerate(alphas):
                ax.hlines(a, ai - 0.45, ai + 0.45, colors="k",
                          linestyles="dashed", lw=1)
        ax.set_xticks(range(len(alphas)))
        ax.set_xticklabels([f"{a:g}" for a in alphas])
        ax.set_xlabel("nominal level")
        ax.set_ylabel(want.upper() if want == "fdr" else "Power")
        ax.legend(fontsize=8)
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    return fig


def _build_band(spec: FigureSpec) -> plt.Figure:
    cols = _read_csv(spec.inputs[0], ("threshold", "empirical_fpr", "band"))
    t = _floats(cols, "threshold")
    emp = _floats(cols, "empirical_fpr")
    band = _floats(cols, "band")
    fig, axes = plt.subplots(1, 2, figsize=(11, 4.2))
    zoom = float(spec.options.get("zoom_fraction", 0.1))
    for ax, frac in zip(axes, (1.0, zoom)):
        k = max(2, int(len(t) * frac))
        ax.step(t[:k], band[:k], where="pre", label="upper bound", lw=2)
        ax.step(t[:k], emp[:k], where="pre", linestyle="dashed",
                label="empirical FPR")
        ax.set_xlabel("score threshold")
        ax.set_ylabel("FPR")
        ax.legend(fontsize=8)
    axes[1].set_title("low-threshold detail")
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    return fig


def _sequence_label(path: str) -> str:
    sidecar = Path(path).with_suffix(".json")
    if sidecar.exists():
        try:
            return json.loads(sidecar.read_text(encoding="utf-8"))["method"]
        except (KeyError, json.JSONDecodeError):
            pass
    return Path(path).stem


def _build_sequences(spec: FigureSpec) -> plt.Figure:
    fig, axes = plt.subplots(1, 2, figsize=(11, 4.2))
    zoom = float(spec.options.get("zoom_fraction", 0.05))
    for path in spec.inputs:
        cols = _read_csv(path, ("index", "b"))
        idx = _floats(cols, "index")
        b = _floats(cols, "b")
        n = len(b)
        label = _sequence_label(path)
        axes[0].plot(idx / (n + 1), b, label=label, lw=1.5)
        k = max(2, int(n * zoom))
        axes[1].plot(idx[:k] / (n + 1), b[:k], label=label, lw=1.5)
    for ax in axes:
        ax.set_xlabel("marginal p-value")
        ax.set_ylabel("adjusted value")
        ax.legend(fontsize=8)
    axes[0].plot([0, 1], [0, 1], color="gray", lw=0.8, linestyle="dotted")
    axes[1].set_title("small p-value detail")
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    return fig


def _build_type1(spec: FigureSpec) -> plt.Figure:
    rows: dict[str, list[tuple[float, float, float]]] = {}
    for path in spec.inputs:
        cols = _read_csv(path, ("variant", "rate", "se", "n", "m", "alpha"))
        m = _floats(cols, "m")
        n = _floats(cols, "n")
        rate = _floats(cols, "rate")
        se = _floats(cols, "se")
        for i, variant in enumerate(cols["variant"]):
            rows.setdefault(variant, []).append((m[i] / n[i], rate[i], se[i]))
    alpha = float(_read_csv(spec.inputs[0], ("alpha",))["alpha"][0])
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    for variant, pts in sorted(rows.items()):
        pts.sort()
        g = np.asarray([p[0] for p in pts])
        r = np.asarray([p[1] for p in pts])
        e = np.asarray([p[2] for p in pts])
        ax.errorbar(g, r, yerr=2 * e, marker="o", capsize=3, label=variant)
    ax.axhline(alpha, color="k", linestyle="dashed", lw=1, label="nominal")
    ax.set_xlabel("test-to-calibration ratio")
    ax.set_ylabel("type-I error")
    ax.set_xscale("log", base=2) if len(next(iter(rows.values()))) > 1 else None
    ax.legend(fontsize=8)
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    return fig


def _build_power_curves(spec: FigureSpec) -> plt.Figure:
    cols = _read_csv(spec.inputs[0], ("n", "method", "setting",
                                      "effective_level"))
    n = _floats(cols, "n")
    lvl = _floats(cols, "effective_level")
    settings = sorted(set(cols["setting"]))
    methods = sorted(set(cols["method"]))
    fig, axes = plt.subplots(1, len(settings), figsize=(4.2 * len(settings), 4.0),
                             squeeze=False)
    for ax, setting in zip(axes[0], settings):
        for m in methods:
            mask = [(cols["setting"][i] == setting and cols["method"][i] == m)
                    for i in range(len(lvl))]
            mask = np.asarray(mask)
            order = np.argsort(n[mask])
            ax.plot(n[mask][order], lvl[mask][order], marker="o", label=m)
        nominal = spec.options.get("alpha")
        if nominal is not None:
            ax.axhline(float(nominal), color="k", linestyle="dashed", lw=1)
        ax.set_xscale("log")
        ax.set_title(setting)
        ax.set_xlabel("calibration size")
        ax.set_ylabel("effective level")
        ax.legend(fontsize=8)
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    return fig


_BUILDERS = {
    "boxplot-fdr-power": _build_boxplot,
    "band": _build_band,
    "sequences": _build_sequences,
    "typeI": _build_type1,
    "power-curves": _build_power_curves,
}


def build_figure(spec: FigureSpec) -> plt.Figure:
    return _BUILDERS[spec.kind](spec)


def render(spec: FigureSpec) -> Path:
    """Draw the figure described by the spec and write the image file."""
    fig = build_figure(spec)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=int(spec.options.get("dpi", 130)))
    plt.close(fig)
    return out
