"""Command-line front end.

Subcommands: shoot, profile, evolve, spectrum, merge, diagnose.  Every
run resolves its full configuration from the command line (no
environment state), writes its data files plus a manifest.json into
--out, and exits 0 on success, 1 on configuration errors, 2 on
numerical failure with a machine-readable error.json.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .integrate import TerminalEvent, Trajectory, evolution_snapshots, integrate, seed
from .merging import BasisDegenerate, CorrectionProblem, solve_correction
from .model import ProblemConfig, alpha, classify_raw, from_phase_raw, to_phase_raw
from .shooting import (BracketNotFound, ShootingResult, WindowTooShort,
                       accepted_run, shoot, slope_estimate)
from .spectral import (SignalBelowNoise, SpectralResult, characteristic_roots,
                       tail_expansion_check)
from .spectral import WindowTooShort as SpectralWindowTooShort

SCHEMA_VERSION = 1
CSV_HEADER = "y,f,fy,fyy,fyyy,phi,W,Q,Z,E1,E2"

_NUMERICAL_ERRORS = (BracketNotFound, BasisDegenerate, WindowTooShort,
                     SpectralWindowTooShort, SignalBelowNoise)


class ConfigError(ValueError):
    pass


def _fmt(v: float) -> str:
    return "%.17g" % v


def _parse_times(spec: str) -> list[float]:
    """start:stop:step, stop inclusive (within one part in 1e12)."""
    try:
        start, stop, step = (float(p) for p in spec.split(":"))
    except ValueError as exc:
        raise ConfigError(f"bad --times '{spec}': want start:stop:step") from exc
    if step <= 0 or stop < start:
        raise ConfigError(f"bad --times '{spec}': need step > 0 and stop >= start")
    out = []
    k = 0
    while True:
        t = start + k * step
        if t > stop + 1e-12 * max(1.0, abs(stop)):
            break
        out.append(t)
        k += 1
    return out


def _parse_xgrid(spec: str) -> np.ndarray:
    try:
        start, stop, n = spec.split(":")
        start, stop, n = float(start), float(stop), int(n)
    except ValueError as exc:
        raise ConfigError(f"bad --xgrid '{spec}': want start:stop:n") from exc
    if n < 2 or stop <= start:
        raise ConfigError(f"bad --xgrid '{spec}': need n >= 2 and stop > start")
    return np.linspace(start, stop, n)


def _build_config(ns: argparse.Namespace) -> ProblemConfig:
    if ns.m is None:
        raise ConfigError("--m is required")
    kw = dict(m=ns.m, b=ns.b)
    for flag, field in (("ystart", "y_start"), ("ymax", "y_max"), ("fmin", "f_min"),
                        ("rtol", "rtol"), ("atol", "atol"), ("kappa_tol", "kappa_tol")):
        v = getattr(ns, flag)
        if v is not None:
            kw[field] = v
    try:
        return ProblemConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _write_csv(path: Path, traj: Trajectory) -> None:
    """Trajectory table; phi and E2 are undefined at the y = 0 seed row."""
    m = traj.cfg.m
    lines = [CSV_HEADER]
    for i, y in enumerate(traj.y):
        f, fy, fyy, fyyy = traj.states[i]
        if y > 0.0:
            _, p = to_phase_raw(float(y), traj.states[i], m)
            phi_s = _fmt(p[0])
            w, q, z = p[1], p[2], p[3]
            e2_s = _fmt(traj.E2[i])
        else:
            phi_s, e2_s = "", ""
            w = q = z = 0.0
        lines.append(",".join([
            _fmt(y), _fmt(f), _fmt(fy), _fmt(fyy), _fmt(fyyy),
            phi_s, _fmt(w), _fmt(q), _fmt(z), _fmt(traj.E1[i]), e2_s]))
    path.write_text("\n".join(lines) + "\n")


def _result_json(cfg: ProblemConfig, *, kappa_lo=None, kappa_hi=None,
                 kappa_star=None, a=None, dissipation=None, dissipation_tail=None,
                 K0_theory=None, K0_fitted=None, iterations=None,
                 terminal_event=None, flags=(), extra=None) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "m": cfg.m,
        "b": cfg.b,
        "alpha": cfg.exponent,
        "kappa_lo": kappa_lo,
        "kappa_hi": kappa_hi,
        "kappa_star": kappa_star,
        "a": a,
        "dissipation": dissipation,
        "dissipation_tail": dissipation_tail,
        "K0_theory": K0_theory,
        "K0_fitted": K0_fitted,
        "iterations": iterations,
        "terminal_event": terminal_event,
        "flags": list(flags),
    }
    if extra:
        doc.update(extra)
    return doc


def _shoot_result_json(cfg: ProblemConfig, res: ShootingResult, extra=None) -> dict:
    fit = res.rate_fit
    return _result_json(
        cfg,
        kappa_lo=res.kappa_lo, kappa_hi=res.kappa_hi, kappa_star=res.kappa_star,
        a=res.a, dissipation=res.dissipation, dissipation_tail=res.dissipation_tail,
        K0_theory=fit.K0_theory if fit else None,
        K0_fitted=fit.K0_fitted if fit else None,
        iterations=res.iterations,
        terminal_event=res.trajectory.event.value,
        flags=res.flags, extra=extra)


def _seed_check(kappa: float, cfg: ProblemConfig) -> float:
    """Integrate from y_start/10 up to y_start and compare with the series."""
    from .integrate import adaptive_rk45
    from .model import rhs_physical_raw
    se = seed(kappa, cfg)
    y0 = cfg.y_start / 10.0
    rhs = lambda y, s: rhs_physical_raw(y, s, cfg.m, cfg.exponent)
    nodes, states, _, ok = adaptive_rk45(rhs, y0, se.eval(y0), cfg.y_start,
                                         1e-13, 1e-15)
    if not ok:
        return math.inf
    return float(np.max(np.abs(states[-1] - se.eval(cfg.y_start))))


def _spectral_extra(spec: SpectralResult) -> dict:
    return {
        "roots": [{"re": z.real, "im": z.imag} for z in spec.roots],
        "z0": {"re": spec.z0.real, "im": spec.z0.imag},
        "lambda0": spec.lambda0,
        "omega0": spec.omega0,
    }


def _read_csv(path: Path) -> tuple[np.ndarray, dict[str, int]]:
    text = path.read_text().strip().split("\n")
    header = text[0].split(",")
    if header != CSV_HEADER.split(","):
        raise ConfigError(f"{path}: unexpected CSV header {header}")
    rows = []
    for line in text[1:]:
        rows.append([float(v) if v != "" else math.nan for v in line.split(",")])
    return np.asarray(rows), {name: j for j, name in enumerate(header)}


def _emit(out: Path, name: str, text: str, outputs: list[str]) -> None:
    (out / name).write_text(text)
    outputs.append(name)


def _cmd_shoot(ns: argparse.Namespace, out: Path, outputs: list[str]) -> int:
    cfg = _build_config(ns)
    res = shoot(cfg)
    extra = {"seed_check": _seed_check(res.kappa_star, cfg)} if ns.seed_check else None
    _emit(out, "result.json",
          json.dumps(_shoot_result_json(cfg, res, extra), indent=2) + "\n", outputs)
    _write_csv(out / "trajectory.csv", res.trajectory)
    outputs.append("trajectory.csv")
    return 0


def _cmd_profile(ns: argparse.Namespace, out: Path, outputs: list[str]) -> int:
    cfg = _build_config(ns)
    if ns.kappa is None:
        raise ConfigError("profile requires --kappa")
    traj = integrate(ns.kappa, cfg)
    extra = {"seed_check": _seed_check(ns.kappa, cfg)} if ns.seed_check else None
    doc = _result_json(cfg, kappa_star=ns.kappa,
                       terminal_event=traj.event.value, extra=extra)
    _emit(out, "profile.json", json.dumps(doc, indent=2) + "\n", outputs)
    _write_csv(out / "profile.csv", traj)
    outputs.append("profile.csv")
    if traj.event is TerminalEvent.NON_FINITE:
        raise FloatingPointError(f"integration broke down at y = {traj.y_event:.6g}")
    return 0


def _cmd_evolve(ns: argparse.Namespace, out: Path, outputs: list[str]) -> int:
    cfg = _build_config(ns)
    if ns.kappa is not None:
        traj, _ = accepted_run(ns.kappa, cfg)
        a = slope_estimate(traj).a
    else:
        res = shoot(cfg)
        traj, a = res.trajectory, res.a
        _emit(out, "result.json",
              json.dumps(_shoot_result_json(cfg, res), indent=2) + "\n", outputs)
    times = _parse_times(ns.times)
    x_grid = _parse_xgrid(ns.xgrid)
    h = evolution_snapshots(traj, cfg, times, x_grid, a=a)
    lines = ["t,x,h"]
    for i, t in enumerate(times):
        for j, x in enumerate(x_grid):
            lines.append(f"{_fmt(t)},{_fmt(x)},{_fmt(h[i, j])}")
    _emit(out, "snapshots.csv", "\n".join(lines) + "\n", outputs)
    return 0


def _cmd_spectrum(ns: argparse.Namespace, out: Path, outputs: list[str]) -> int:
    if ns.m != 4.0:
        raise ConfigError("spectrum applies to m = 4 only")
    if ns.b is None:
        raise ConfigError("spectrum requires --b")
    extra_doc = {}
    traj = None
    cfg = _build_config(ns)
    if ns.input is not None:
        path = Path(ns.input)
        if not path.exists():
            raise ConfigError(f"input {path} does not exist")
        if path.suffix == ".json":
            doc = json.loads(path.read_text())
            a = doc.get("a")
            if a is None:
                raise ConfigError(f"{path} carries no far-field slope")
        else:
            data, col = _read_csv(path)
            y, f = data[:, col["y"]], data[:, col["f"]]
            a = float(f[-1] / y[-1])
    else:
        res = shoot(cfg)
        a = res.a
        traj = res.trajectory
        extra_doc["kappa_star"] = res.kappa_star
    spec = characteristic_roots(a, ns.b)
    extra = _spectral_extra(spec)
    if traj is not None:
        tc = tail_expansion_check(traj, spec)
        extra["tail_check"] = {
            "lambda_measured": tc.lambda_measured,
            "amplitude_cos": tc.amplitudes[0],
            "amplitude_sin": tc.amplitudes[1],
            "residual_rel": tc.residual_rel,
            "passed": tc.passed,
        }
    doc = _result_json(cfg, a=a, flags=(), extra=extra)
    doc.update(extra_doc)
    _emit(out, "spectrum.json", json.dumps(doc, indent=2) + "\n", outputs)
    return 0


def _cmd_merge(ns: argparse.Namespace, out: Path, outputs: list[str]) -> int:
    # --b names the droplet curvature here, not the m = 4 rate
    b_drop = ns.b if ns.b is not None else 1.0
    cfg = _build_config(argparse.Namespace(**{**vars(ns), "b": None}))
    if cfg.m >= 4.0:
        raise ConfigError("merge describes power-law droplets, m < 4 only")
    if b_drop < 0.0:
        raise ConfigError("droplet curvature b must be >= 0")
    res = shoot(cfg)
    y_match = 0.6 * float(res.trajectory.y[-1])
    sol = solve_correction(CorrectionProblem(base=res.trajectory, b_drop=b_drop,
                                             y_match=y_match))
    lines = ["y,P,Py,Pyy,Pyyy"]
    for yv, row in zip(sol.y, sol.states):
        lines.append(",".join(_fmt(v) for v in (yv, *row)))
    _emit(out, "merge.csv", "\n".join(lines) + "\n", outputs)
    doc = _result_json(cfg, kappa_star=res.kappa_star, a=res.a,
                       terminal_event=res.trajectory.event.value, flags=res.flags,
                       extra={"b_drop": b_drop, "y_match": y_match,
                              "p0": sol.p0, "q0": sol.q0,
                              "residual_match": sol.residual_match})
    _emit(out, "merge.json", json.dumps(doc, indent=2) + "\n", outputs)
    return 0


def _cmd_diagnose(ns: argparse.Namespace, out: Path, outputs: list[str]) -> int:
    if ns.input is None:
        raise ConfigError("diagnose requires a trajectory CSV path")
    cfg = _build_config(ns)
    data, col = _read_csv(Path(ns.input))
    y = data[:, col["y"]]
    states = data[:, [col["f"], col["fy"], col["fyy"], col["fyyy"]]]
    E1 = data[:, col["E1"]]
    E2 = data[:, col["E2"]]

    checks: dict[str, bool] = {}
    body = data[y > 0.0]
    checks["finite"] = bool(np.all(np.isfinite(body)) and np.all(np.isfinite(E1)))

    slack = cfg.rtol * (1.0 + np.abs(E1[:-1]))
    checks["E1_monotone"] = bool(np.all(np.diff(E1) >= -slack))
    checks["E1_positive"] = bool(np.all(E1[y > cfg.y_start] > 0.0))
    pos = y > 0.0
    e2 = E2[pos]
    slack2 = cfg.rtol * (1.0 + np.abs(e2[:-1]))
    checks["E2_monotone"] = bool(np.all(np.diff(e2) >= -slack2))

    tags = np.array([classify_raw(float(yi), s, cfg.eps_c)
                     for yi, s in zip(y, states)], dtype=int)
    decided = tags[tags != 0]
    checks["persistence"] = bool(len(decided) == 0 or np.all(decided == decided[0]))

    ok_phase = True
    for i in np.nonzero(pos)[0]:
        xi, p = to_phase_raw(float(y[i]), states[i], cfg.m)
        stored = data[i, [col["phi"], col["W"], col["Q"], col["Z"]]]
        if np.any(np.abs(p - stored) > 1e-9 * (1.0 + np.abs(p))):
            ok_phase = False
            break
        _, back = from_phase_raw(xi, p, cfg.m)
        if np.any(np.abs(back - states[i]) > 1e-9 * (1.0 + np.abs(states[i]))):
            ok_phase = False
            break
    checks["phase_round_trip"] = ok_phase

    passed = all(checks.values())
    report = {"schema_version": SCHEMA_VERSION, "input": str(ns.input),
              "checks": checks, "passed": passed}
    _emit(out, "diagnose.json", json.dumps(report, indent=2) + "\n", outputs)
    if not passed:
        bad = [k for k, v in checks.items() if not v]
        raise FloatingPointError(f"diagnosis failed: {', '.join(bad)}")
    return 0


_COMMANDS = {
    "shoot": _cmd_shoot,
    "profile": _cmd_profile,
    "evolve": _cmd_evolve,
    "spectrum": _cmd_spectrum,
    "merge": _cmd_merge,
    "diagnose": _cmd_diagnose,
}


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--m", type=float, default=None, help="mobility exponent")
    sp.add_argument("--b", type=float, default=None,
                    help="exponential rate (m = 4); droplet curvature for merge")
    sp.add_argument("--kappa", type=float, default=None)
    sp.add_argument("--kappa-tol", dest="kappa_tol", type=float, default=None)
    sp.add_argument("--ymax", type=float, default=None)
    sp.add_argument("--ystart", type=float, default=None)
    sp.add_argument("--rtol", type=float, default=None)
    sp.add_argument("--atol", type=float, default=None)
    sp.add_argument("--fmin", type=float, default=None)
    sp.add_argument("--out", type=str, default=".")
    sp.add_argument("--times", type=str, default="0.01:1.01:0.2")
    sp.add_argument("--xgrid", type=str, default="0:6:241")
    sp.add_argument("--seed-check", dest="seed_check", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="filmlift",
                                 description="self-similar lifting profiles of the thin-film equation")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        _add_common(sp)
        if name in ("spectrum", "diagnose"):
            sp.add_argument("input", nargs="?", default=None,
                            help="trajectory CSV or result JSON")
    return ap


def main(argv: list[str] | None = None) -> int:
    t0 = time.monotonic()
    try:
        ns = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; remap to the config-error code
        return 0 if exc.code in (0, None) else 1
    out = Path(ns.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return 1

    outputs: list[str] = []
    code = 0
    try:
        code = _COMMANDS[ns.command](ns, out, outputs)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (*_NUMERICAL_ERRORS, FloatingPointError, ValueError) as exc:
        doc = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        _emit(out, "error.json", json.dumps(doc, indent=2) + "\n", outputs)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = 2

    # every data file this run emitted is accounted for here, even on failure
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "subcommand": ns.command,
        "artifact_version": __version__,
        "config": {k: v for k, v in sorted(vars(ns).items())
                   if k not in ("command", "out")},
        "outputs": outputs,
        "duration_seconds": time.monotonic() - t0,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
