#!/usr/bin/env python3
"""Publication figures from solver run artifacts.

Standalone script: it reads the emitted CSV/JSON files and nothing
else, so it works on any directory of run outputs without the solver
installed.  Five figure kinds:

  evolution  family h(x, t), one curve per time value, mirrored to
             x < 0 (the profiles are even in x by construction)
  profile    f(y) together with its linear asymptote a*y
  energies   E1 and E2 against y
  ratefit    decay-rate panel: -ln(a*y - f) against y^p with the
             fitted and theoretical slopes, p = (4 - m)/3
  spectrum   cone eigenvalues in the complex plane

Unknown CSV columns and JSON keys are ignored; missing required ones
are a schema error.  Exit 0 on success, 1 on any argument, parse, or
schema problem (message on stderr).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # never touch a display
matplotlib.rcParams["svg.hashsalt"] = "filmlift"  # fixed ids in SVG output

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.figure import Figure

KINDS = ("evolution", "profile", "energies", "ratefit", "spectrum")


class SchemaError(ValueError):
    """An input file exists but does not carry what the figure needs."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple[Path, ...]
    out: Path
    xlim: tuple[float, float] | None = None
    ylim: tuple[float, float] | None = None


def read_table(path: Path, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    """Named columns from a CSV; blank cells become NaN, extras are dropped."""
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty table")
    missing = [c for c in required if c not in rows[0]]
    if missing:
        raise SchemaError(f"{path}: missing columns {', '.join(missing)}")
    out: dict[str, np.ndarray] = {}
    for c in required:
        try:
            out[c] = np.array([float(r[c]) if r[c] else math.nan for r in rows])
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{path}: column {c} is not numeric") from exc
    return out


def read_doc(path: Path, required: tuple[str, ...]) -> dict:
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: expected a JSON object")
    missing = [k for k in required if doc.get(k) is None]
    if missing:
        raise SchemaError(f"{path}: missing keys {', '.join(missing)}")
    return doc


def _pick(spec: FigureSpec, suffix: str) -> Path:
    for p in spec.inputs:
        if p.suffix == suffix:
            return p
    raise SchemaError(f"{spec.kind} needs a {suffix} input")


def fig_evolution(spec: FigureSpec) -> Figure:
    tab = read_table(_pick(spec, ".csv"), ("t", "x", "h"))
    fig, ax = plt.subplots(figsize=(6.4, 4.2), constrained_layout=True)
    for t in sorted(set(tab["t"].tolist())):
        sel = tab["t"] == t
        order = np.argsort(tab["x"][sel])
        x = tab["x"][sel][order]
        h = tab["h"][sel][order]
        keep = x >= 0.0  # the table carries the right half; mirror it exactly
        x, h = x[keep], h[keep]
        ax.plot(np.concatenate((-x[x > 0.0][::-1], x)),
                np.concatenate((h[x > 0.0][::-1], h)),
                lw=1.2, label=f"t = {t:g}")
    ax.set_xlabel("x")
    ax.set_ylabel("h(x, t)")
    ax.legend(frameon=False, fontsize=8)
    return fig


def fig_profile(spec: FigureSpec) -> Figure:
    tab = read_table(_pick(spec, ".csv"), ("y", "f"))
    a = float(read_doc(_pick(spec, ".json"), ("a",))["a"])
    fig, ax = plt.subplots(figsize=(6.4, 4.2), constrained_layout=True)
    ax.plot(tab["y"], tab["f"], lw=1.4, label="f(y)")
    ax.plot(tab["y"], a * tab["y"], "--", lw=1.0, label=f"a y, a = {a:.6g}")
    ax.set_xlabel("y")
    ax.set_ylabel("f")
    ax.legend(frameon=False)
    return fig


def fig_energies(spec: FigureSpec) -> Figure:
    tab = read_table(_pick(spec, ".csv"), ("y", "E1", "E2"))
    fig, (top, bot) = plt.subplots(2, 1, figsize=(6.4, 5.2), sharex=True,
                                   constrained_layout=True)
    top.plot(tab["y"], tab["E1"], lw=1.2)
    top.set_ylabel("E1")
    ok = np.isfinite(tab["E2"])  # E2 is undefined on the y = 0 row
    bot.plot(tab["y"][ok], tab["E2"][ok], lw=1.2, color="C1")
    bot.set_ylabel("E2")
    bot.set_xlabel("y")
    return fig


def fig_ratefit(spec: FigureSpec) -> Figure:
    tab = read_table(_pick(spec, ".csv"), ("y", "f"))
    doc = read_doc(_pick(spec, ".json"), ("m", "a", "K0_theory", "K0_fitted"))
    a, m = float(doc["a"]), float(doc["m"])
    if not 0.0 < m < 4.0:
        raise SchemaError(f"ratefit needs 0 < m < 4, got m = {m:g}")
    p = (4.0 - m) / 3.0
    dev = a * tab["y"] - tab["f"]
    sel = (tab["y"] > 0.0) & (dev > 0.0)
    if sel.sum() < 4:
        raise SchemaError("ratefit: no usable deviation samples")
    Y = tab["y"][sel] ** p
    S = -np.log(dev[sel])
    fig, ax = plt.subplots(figsize=(6.4, 4.2), constrained_layout=True)
    ax.plot(Y, S, ".", ms=3, label="-ln(a y - f)")
    for key, style in (("K0_fitted", "-"), ("K0_theory", "--")):
        K = float(doc[key])
        # slope comparison: anchor each line at the deepest sample
        ax.plot(Y, K * (Y - Y[-1]) + S[-1], style, lw=1.0,
                label=f"slope {key} = {K:.4g}")
    ax.set_xlabel(f"y^p, p = {p:g}")
    ax.set_ylabel("-ln(a y - f)")
    ax.legend(frameon=False, fontsize=8)
    return fig


def fig_spectrum(spec: FigureSpec) -> Figure:
    doc = read_doc(_pick(spec, ".json"), ("roots", "z0", "lambda0"))
    try:
        re = [float(r["re"]) for r in doc["roots"]]
        im = [float(r["im"]) for r in doc["roots"]]
        z0 = (float(doc["z0"]["re"]), float(doc["z0"]["im"]))
    except (TypeError, KeyError) as exc:
        raise SchemaError("spectrum: roots/z0 must carry re and im") from exc
    fig, ax = plt.subplots(figsize=(5.2, 5.2), constrained_layout=True)
    ax.axhline(0.0, color="0.8", lw=0.8)
    ax.axvline(0.0, color="0.8", lw=0.8)
    ax.plot(re, im, "o", ms=7, mfc="none", label="roots")
    ax.plot(*z0, "x", ms=9, color="C3",
            label=f"z0, lambda0 = {float(doc['lambda0']):.4g}")
    ax.set_xlabel("Re z")
    ax.set_ylabel("Im z")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(frameon=False, fontsize=8)
    return fig


_BUILDERS = {
    "evolution": fig_evolution,
    "profile": fig_profile,
    "energies": fig_energies,
    "ratefit": fig_ratefit,
    "spectrum": fig_spectrum,
}


def build_figure(spec: FigureSpec) -> Figure:
    for p in spec.inputs:
        if not p.exists():
            raise SchemaError(f"input {p} does not exist")
    fig = _BUILDERS[spec.kind](spec)
    ax = fig.axes[0]
    if spec.xlim is not None:
        ax.set_xlim(*spec.xlim)
    if spec.ylim is not None:
        ax.set_ylim(*spec.ylim)
    return fig


def _parse_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise SchemaError(f"bad range '{text}': want lo:hi") from exc
    return lo, hi


def parse_spec(argv: list[str] | None) -> FigureSpec:
    ap = argparse.ArgumentParser(
        prog="render",
        description="render one figure from run CSV/JSON artifacts")
    ap.add_argument("--kind", required=True, choices=KINDS)
    ap.add_argument("--out", required=True, type=Path,
                    help="output image path (.png or .svg)")
    ap.add_argument("--xlim", type=str, default=None, help="lo:hi")
    ap.add_argument("--ylim", type=str, default=None, help="lo:hi")
    ap.add_argument("inputs", nargs="+", type=Path,
                    help="CSV/JSON files emitted by a run")
    ns = ap.parse_args(argv)
    return FigureSpec(
        kind=ns.kind, inputs=tuple(ns.inputs), out=ns.out,
        xlim=_parse_range(ns.xlim) if ns.xlim else None,
        ylim=_parse_range(ns.ylim) if ns.ylim else None)


def main(argv: list[str] | None = None) -> int:
    try:
        spec = parse_spec(argv)
        fig = build_figure(spec)
        fig.savefig(spec.out, dpi=150)
        plt.close(fig)
    except SystemExit as exc:  # argparse already printed usage
        return 0 if exc.code in (0, None) else 1
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
