#!/usr/bin/env python3
"""Render publication-style figures from completed run directories.

Reads only the documented artifacts (config.json, diagnostics.csv,
report.json, snaps/snap_*.json); no import of the solver package.

Usage:
    render.py --run <dir> --kind modulation|decay|waterfall|spectrum --out <png>
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

KINDS = ("modulation", "decay", "waterfall", "spectrum")

STYLE = {
    "figure.figsize": (7.0, 4.2),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
}

PNG_METADATA = {"Software": "miura-lab-figures"}


class RenderError(RuntimeError):
    pass


def load_run(run_dir: Path) -> dict:
    if not run_dir.is_dir():
        raise RenderError(f"run directory not found: {run_dir}")
    paths = {
        "config": run_dir / "config.json",
        "diagnostics": run_dir / "diagnostics.csv",
        "report": run_dir / "report.json",
    }
    for label in ("diagnostics", "config"):
        if not paths[label].exists():
            raise RenderError(f"missing input: {paths[label]}")
    if not paths["report"].exists():
        raise RenderError(f"run incomplete, missing input: {paths['report']}")
    rows = []
    with paths["diagnostics"].open() as handle:
        for row in csv.DictReader(handle):
            rows.append({k: (float(v) if v else math.nan) for k, v in row.items()})
    if not rows:
        raise RenderError(f"no diagnostic rows in {paths['diagnostics']}")
    return {
        "dir": run_dir,
        "config": json.loads(paths["config"].read_text()),
        "report": json.loads(paths["report"].read_text()),
        "series": {key: np.array([row.get(key, math.nan) for row in rows]) for key in rows[0]},
    }


def load_snapshots(run_dir: Path) -> list:
    snap_dir = run_dir / "snaps"
    if not snap_dir.is_dir():
        raise RenderError(f"missing input: {snap_dir}")
    snaps = []
    for path in sorted(snap_dir.glob("snap_*.json"), key=lambda p: int(p.stem.split("_")[1])):
        payload = json.loads(path.read_text())
        L, N = payload["L"], payload["N"]
        x = -L + (2.0 * L / N) * np.arange(N)
        snaps.append((int(path.stem.split("_")[1]), x, np.array(payload["samples"])))
    if not snaps:
        raise RenderError(f"no snapshots under {snap_dir}")
    return snaps


def render_modulation(run: dict, ax) -> None:
    t = run["series"]["t"]
    y = run["series"]["y"]
    if np.all(np.isnan(y)):
        raise RenderError("diagnostics carry no modulation track (column y empty)")
    y_lab = y - 2.0 * t  # kink runs evolve in the frame xi = x + 2t
    ax.plot(t, y_lab, lw=1.4, label="tracked center (lab frame)")
    ax.plot(t, y_lab[0] - 2.0 * t, "--", lw=1.0, label="reference slope -2")
    ax.set_xlabel("t")
    ax.set_ylabel("kink center")
    ax.set_title("modulation track")
    ax.legend(loc="upper right")


def render_decay(run: dict, ax) -> None:
    t = run["series"]["t"]
    plotted = False
    windowed = run["report"].get("windowed_norms") or {}
    for order, series in sorted(windowed.items()):
        arr = np.asarray(series, dtype=float)
        if len(arr) == len(t) and np.any(arr > 0):
            ax.semilogy(t, arr, lw=1.4, label=f"windowed H^{order}")
            plotted = True
    for column, label in (("eta_mass", "weighted mass"), ("l2", "L2 norm")):
        arr = run["series"].get(column)
        if arr is not None and np.any(np.isfinite(arr)) and np.any(arr > 0):
            ax.semilogy(t, arr, lw=1.0, alpha=0.8, label=label)
            plotted = True
    if not plotted:
        raise RenderError("no positive decay series available to plot")
    handles, _ = ax.get_legend_handles_labels()
    first = ax.get_lines()[0]
    ydata = first.get_ydata()
    factor = ydata[-1] / ydata[0] if ydata[0] else math.nan
    trend = "monotone decay" if np.all(np.diff(ydata) <= 1e-12) else "net decay"
    ax.annotate(
        f"{trend}: final/initial = {factor:.3e}",
        xy=(0.02, 0.04),
        xycoords="axes fraction",
        fontsize=9,
    )
    ax.set_xlabel("t")
    ax.set_ylabel("norm / mass")
    ax.set_title("decay series")
    ax.legend(loc="upper right")


def render_waterfall(run: dict, ax) -> None:
    snaps = load_snapshots(run["dir"])
    amplitude = max(np.max(np.abs(s[2])) for s in snaps) or 1.0
    for level, (index, x, samples) in enumerate(snaps):
        ax.plot(x, samples / amplitude + level, lw=0.9, color="C0")
        ax.text(x[-1], level + 0.08, f"#{index}", fontsize=8, ha="right", color="C0")
    ax.set_xlabel("x")
    ax.set_ylabel("snapshot (offset, normalized)")
    ax.set_title("field evolution waterfall")


def render_spectrum(run: dict, ax) -> None:
    snaps = load_snapshots(run["dir"])
    for index, x, samples in (snaps[0], snaps[-1]) if len(snaps) > 1 else snaps:
        n = len(samples)
        L = (x[-1] - x[0]) * n / (n - 1) / 2.0
        k = np.pi / L * np.arange(n // 2 + 1)
        amp = np.abs(np.fft.rfft(samples)) * (2.0 * L / n)
        floor = max(np.max(amp) * 1e-18, 1e-300)
        ax.semilogy(k, np.maximum(amp, floor), lw=1.0, label=f"snapshot #{index}")
    ax.set_xlabel("wavenumber k")
    ax.set_ylabel("|amplitude|")
    ax.set_title("field spectra")
    ax.legend(loc="upper right")


RENDERERS = {
    "modulation": render_modulation,
    "decay": render_decay,
    "waterfall": render_waterfall,
    "spectrum": render_spectrum,
}


def render(run_dir: Path, kind: str, out_path: Path) -> None:
    if kind not in RENDERERS:
        raise RenderError(f"unknown figure kind {kind!r}; expected one of {KINDS}")
    run = load_run(run_dir)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        RENDERERS[kind](run, ax)
        fig.tight_layout()
        out_path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out_path, metadata=PNG_METADATA)
        plt.close(fig)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--run", required=True, type=Path)
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--out", required=True, type=Path)
    args = parser.parse_args(argv)
    try:
        render(args.run, args.kind, args.out)
    except RenderError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
