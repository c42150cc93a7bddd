"""Command-line front end.

Every subcommand reads an optional JSON config, lets flags override it, and
writes CSV (``%.16e`` throughout, so output is byte-stable) to ``--out`` or
stdout.  Exit codes: 0 success, 1 validation failure, 2 numerical failure.

Config schema (all keys optional)::

    {
      "profile": "compact" | {"family": ..., "params": {...}},
      "k": {"min": .., "max": .., "num": ..}   or  "k_values": [..],
      "t": {"max": .., "num": ..},
      "tol": 1e-4,
      "data": {"spatial": "compact", "amplitude": 1, "width": 1,
               "smoothness": 6, "zero_mean": false},
      "synthesis": {"t_min": 10, "t_max": 200, "num": 40}
    }
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .equilibria import (
    BUILTIN_PROFILES,
    EquilibriumProfile,
    moment_table,
    profile_from_config,
    survival_threshold,
    validate_profile,
)
from .errors import NumericalError, ValidationError, VPSpecError

SPECTRAL_COLUMNS = ["k", "tau_star", "dtau", "d2tau", "nu_star", "re_lambda", "im_lambda", "residual"]
GREEN_COLUMNS = ["k", "t", "re_G_osc", "im_G_osc", "re_G_r", "im_G_r", "rho_green", "rho_volterra"]
FIELD_COLUMNS = ["k", "t", "re_S", "im_S", "re_E", "im_E", "re_E_osc", "im_E_osc", "re_E_r", "im_E_r"]
SYNTHESIS_COLUMNS = ["t", "E_osc_point", "fitted_alpha"]


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# --------------------------------------------------------------------------
# configuration

def _load_config(args) -> dict:
    if args.config is None:
        return {}
    path = Path(args.config)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    return cfg


def _profile(args, cfg) -> EquilibriumProfile:
    spec = args.profile if args.profile is not None else cfg.get("profile", "compact")
    if isinstance(spec, str):
        if spec not in BUILTIN_PROFILES:
            raise UsageError(f"unknown profile {spec!r}; choose from {sorted(BUILTIN_PROFILES)}")
        prof = BUILTIN_PROFILES[spec]()
    else:
        prof = profile_from_config(spec)
    report = validate_profile(prof)
    if not report:
        raise ValidationError("invalid profile: " + "; ".join(report.failures))
    return prof


def _k_grid(args, cfg, default_min, default_max, default_num):
    if "k_values" in cfg and args.kmin is None and args.kmax is None and args.knum is None:
        grid = np.asarray(cfg["k_values"], dtype=float)
    else:
        kc = cfg.get("k", {})
        lo = args.kmin if args.kmin is not None else kc.get("min", default_min)
        hi = args.kmax if args.kmax is not None else kc.get("max", default_max)
        num = args.knum if args.knum is not None else kc.get("num", default_num)
        if num < 1:
            raise UsageError("empty k grid")
        grid = np.linspace(lo, hi, int(num)) if num > 1 else np.array([float(lo)])
    if grid.size == 0:
        raise UsageError("empty k grid")
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise UsageError("k grid must be positive and strictly increasing")
    return grid


def _t_grid(args, cfg, default_max, default_num):
    tc = cfg.get("t", {})
    tmax = args.tmax if args.tmax is not None else tc.get("max", default_max)
    num = args.tnum if args.tnum is not None else tc.get("num", default_num)
    if not tmax > 0 or num < 2:
        raise UsageError("time grid needs tmax > 0 and at least 2 points")
    return np.linspace(0.0, float(tmax), int(num))


def _tol(args, cfg, default):
    tol = args.tol if args.tol is not None else cfg.get("tol", default)
    if not tol > 0:
        raise UsageError("tolerance must be positive")
    return float(tol)


def _data(cfg, profile):
    from .field import data_from_config

    return data_from_config(cfg.get("data", {}), profile)


# --------------------------------------------------------------------------
# output

def _csv(columns, rows, comments=()) -> str:
    buf = io.StringIO()
    arr = np.asarray(rows, dtype=float).reshape(-1, len(columns))
    np.savetxt(buf, arr, fmt="%.16e", delimiter=",", header=",".join(columns), comments="")
    for line in comments:
        buf.write(f"# {line}\n")
    return buf.getvalue()


def _emit(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# --------------------------------------------------------------------------
# commands

def cmd_moments(args, cfg):
    prof = _profile(args, cfg)
    tab = moment_table(prof)
    lines = [f"family: {prof.family.value}"]
    for j, v in enumerate(tab.tau_sq):
        lines.append(f"tau_{j}^2 = {v:.16e}")
    for j, v in enumerate(tab.kappa_sq):
        lines.append(f"kappa_{j}^2 = {v:.16e}")
    lines.append(f"kappa0 = {tab.kappa0:.16e}")
    if tab.identity_residual is not None:
        lines.append(f"kappa0^2 upsilon^2 - (tau_0^2 + kappa_1^2) = {tab.identity_residual:.16e}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_branch(args, cfg):
    from .spectral import branch_scan

    prof = _profile(args, cfg)
    k0 = survival_threshold(prof)
    if k0 == 0:
        raise ValidationError("the undamped branch needs compact support")
    grid = _k_grid(args, cfg, k0 / 200, k0, 200)
    if grid[-1] > k0 * (1 + 1e-12):
        raise ValidationError("branch scan is limited to (0, kappa0]")
    scan = branch_scan(prof, grid)
    rows = [[p.k, p.tau_star, p.dtau, p.d2tau, p.phase_velocity, 0.0, p.tau_star, p.x_residual]
            for p in scan.points]
    notes = [f"increasing={scan.increasing} phase_decreasing={scan.phase_decreasing} "
             f"convex={scan.convex} d2tau_min={scan.d2tau_min:.16e}"]
    _emit(_csv(SPECTRAL_COLUMNS, rows, notes), args.out)
    return 0 if scan.increasing and scan.phase_decreasing and scan.convex else 2


def cmd_landau(args, cfg):
    from .spectral import continue_roots, landau_rate_asymptotic

    prof = _profile(args, cfg)
    k0 = survival_threshold(prof)
    grid = _k_grid(args, cfg, k0 + 1e-3, k0 + 5e-2, 8)
    if np.any(grid <= k0):
        raise ValidationError("damped roots exist only for k > kappa0")
    columns = SPECTRAL_COLUMNS + ["predicted_rate", "ratio", "flag"]
    rows = []
    try:
        found = continue_roots(prof, grid)
    except NumericalError:
        found = [None] * grid.size
    for k, r in zip(grid, found):
        if r is None:
            rows.append([k] + [math.nan] * 9 + [1.0])
            continue
        lam = r.lam
        pred = landau_rate_asymptotic(prof, float(k)) if prof.compact else math.nan
        rows.append([k, lam.imag, math.nan, math.nan, lam.imag / k, lam.real, lam.imag,
                     r.newton_residual, pred, lam.real / pred if pred else math.nan, 0.0])
    _emit(_csv(columns, rows), args.out)
    return 0


def cmd_green(args, cfg):
    from .field import free_density
    from .green import green_density, green_oscillatory, green_remainder, volterra_density
    from .spectral import tau_star

    prof = _profile(args, cfg)
    k0 = survival_threshold(prof)
    k_default = k0 / 2 if k0 > 0 else 1.0
    grid = _k_grid(args, cfg, k_default, k_default, 1)
    t = _t_grid(args, cfg, 50.0, 5001)
    data = _data(cfg, prof)
    rows, notes = [], []
    h = t[1] - t[0]
    for k in grid:
        k = float(k)
        freq = tau_star(prof, k) if prof.compact and k <= k0 else 1.0
        if h > 0.01 / max(1.0, freq):
            msg = f"warning: step {h:.3g} exceeds 0.01/max(1, tau*) at k={k:.6g}"
            print(msg, file=sys.stderr)
            notes.append(msg)
        S_func = lambda s, k=k: free_density(data, k, s)  # noqa: E731
        S = S_func(t)
        flag = 0.0
        try:
            dec = green_remainder(prof, k, t)
            rg = green_density(prof, k, t, S, S_func, dec)
            gr = dec.remainder
            go = green_oscillatory(prof, k, t)
        except NumericalError as exc:
            notes.append(f"k={k:.6g}: {exc}")
            gr = go = rg = np.full(t.shape, math.nan)
            flag = 1.0
        rv = volterra_density(prof, k, t, S, S_func, refine=1)
        if flag == 0.0:
            delta = float(np.abs(rg - rv).max() / max(np.abs(rv).max(), 1e-300))
            notes.append(f"k={k:.6g}: max relative oracle delta {delta:.3e}")
        for i in range(t.size):
            rows.append([k, t[i], go[i].real, go[i].imag, gr[i], 0.0, rg[i], rv[i]])
    _emit(_csv(GREEN_COLUMNS, rows, notes), args.out)
    return 0


def _synthesis_path(out):
    if out is None:
        return None
    p = Path(out)
    return p.with_name(p.stem + ".synthesis" + (p.suffix or ".csv"))


def cmd_evolve(args, cfg):
    from .field import decay_exponent_fit, field_decomposition, synth_osc_point

    prof = _profile(args, cfg)
    k0 = survival_threshold(prof)
    k_default = k0 / 2 if k0 > 0 else 1.0
    grid = _k_grid(args, cfg, k_default, k_default, 1)
    t = _t_grid(args, cfg, 50.0, 5001)
    data = _data(cfg, prof)
    rows, notes = [], []
    for k in grid:
        tr = field_decomposition(prof, data, float(k), t)
        notes.append(f"k={k:.6g}: decomposition identity residual {tr.identity_residual:.3e}")
        for i in range(t.size):
            e, eo, er = tr.E_hat[i], tr.E_osc[i], tr.E_r[i]
            rows.append([k, t[i], tr.S_hat[i].real, tr.S_hat[i].imag, e.real, e.imag,
                         eo.real, eo.imag, er.real, er.imag])
    _emit(_csv(FIELD_COLUMNS, rows, notes), args.out)

    sc = cfg.get("synthesis", {})
    if prof.compact and sc is not None:
        ts = np.geomspace(sc.get("t_min", 10.0), sc.get("t_max", 200.0), int(sc.get("num", 40)))
        values = synth_osc_point(prof, data, ts)
        if np.all(values > 0):
            alpha = decay_exponent_fit(ts, values).alpha
        else:
            alpha = math.nan
        text = _csv(SYNTHESIS_COLUMNS, [[tt, v, alpha] for tt, v in zip(ts, values)])
        path = _synthesis_path(args.out)
        if path is None:
            sys.stdout.write(text)
        else:
            path.write_text(text)
    return 0


def cmd_verify(args, cfg):
    from .verify import run_suite

    tol = args.tol if args.tol is not None else cfg.get("tol")
    if tol is not None and not tol > 0:
        raise UsageError("tolerance must be positive")
    results = run_suite(tol)
    summary = {
        "passed": all(r["passed"] for r in results),
        "checks": results,
    }
    _emit(json.dumps(summary, indent=2, sort_keys=True) + "\n", args.out)
    return 0 if summary["passed"] else 1


COMMANDS = {
    "moments": cmd_moments,
    "branch": cmd_branch,
    "landau": cmd_landau,
    "green": cmd_green,
    "evolve": cmd_evolve,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vpspec", description="Spectral and Green-function toolkit for linearized Vlasov-Poisson.")
    parser.add_argument("--version", action="version", version=f"vpspec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--profile", help="built-in profile: " + ", ".join(sorted(BUILTIN_PROFILES)))
        p.add_argument("--kmin", type=float)
        p.add_argument("--kmax", type=float)
        p.add_argument("--knum", type=int)
        p.add_argument("--tmax", type=float)
        p.add_argument("--tnum", type=int)
        p.add_argument("--tol", type=float)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _load_config(args)
        return COMMANDS[args.command](args, cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except VPSpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
