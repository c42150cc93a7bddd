"""Property suite behind ``vpspec verify``.

Each check returns a record ``{name, profile, value, tolerance, passed}``.
Passing ``tol`` replaces every agreement tolerance; sign and count checks have
no tolerance and are unaffected.
"""

from __future__ import annotations

import math

import numpy as np

from .dispersion import dielectric, eval_H, interior_limit
from .equilibria import compact_polynomial, gaussian, moment_tau, survival_threshold
from .errors import VPSpecError


def _record(name, profile, value, tolerance, passed):
    return {
        "name": name,
        "profile": profile,
        "value": None if value is None or not math.isfinite(value) else float(value),
        "tolerance": tolerance,
        "passed": bool(passed),
    }


def _agree(name, profile, value, default, tol):
    t = default if tol is None else tol
    return _record(name, profile, value, t, value <= t)


def _threshold(tol):
    c = compact_polynomial()
    k0 = survival_threshold(c)
    exact = 64 * math.sqrt(2) * math.pi / 315
    return [_agree("threshold_closed_form", "compact", abs(k0 * k0 - exact) / exact, 1e-8, tol)]


def _endpoints(tol):
    c = compact_polynomial()
    k0 = survival_threshold(c)
    err = 0.0
    for k in (k0 / 2, k0, 2 * k0):
        for s in (1, -1):
            d = complex(dielectric(c, s * 1j * k * c.upsilon, k))
            err = max(err, abs(d - (1 - k0 * k0 / (k * k))))
    err = max(err, abs(eval_H(c, c.upsilon)[0] - k0 * k0))
    return [_agree("endpoint_identity", "compact", err, 1e-8, tol)]


def _branch(tol):
    from .spectral import branch_scan

    c = compact_polynomial()
    k0 = survival_threshold(c)
    scan = branch_scan(c, np.linspace(k0 / 40, k0, 40))
    out = [_record("branch_monotone_convex", "compact", None, None,
                   scan.increasing and scan.phase_decreasing and scan.convex)]
    out.append(_agree("branch_endpoint_speed", "compact", abs(scan.points[-1].phase_velocity - c.upsilon), 1e-8, tol))
    out.append(_agree("branch_fixed_point", "compact", max(p.x_residual for p in scan.points), 1e-9, tol))
    return out


def _roots(tol):
    from .green import contour_residue, residue_weight, roots
    from .spectral import damped_root

    c, g = compact_polynomial(), gaussian()
    k0 = survival_threshold(c)
    out = []
    lp, lm = roots(c, k0 + 0.01)
    out.append(_agree("conjugate_pairing", "compact", abs(lm - lp.conjugate()), 1e-10, tol))
    damped = [roots(c, k0 + d)[0].real for d in (1e-3, 1e-2, 0.3)] + [damped_root(g, 1.0).lam.real]
    out.append(_record("damping_sign", "both", max(damped), None, max(damped) < 0))
    err = 0.0
    for prof, k in ((c, k0 / 2), (c, k0 + 0.3), (g, 0.5)):
        err = max(err, abs(contour_residue(prof, k) - residue_weight(prof, k, tapered=False)[0]))
    out.append(_agree("residue_contour", "both", err, 1e-8, tol))
    a = residue_weight(g, 1e-3)[0]
    out.append(_agree("residue_small_k", "gaussian", abs(a - 0.5j * math.sqrt(moment_tau(g, 0))), 1e-6, tol))
    return out


def _stability(tol):
    from .spectral import penrose_margin, tau_star, winding_number

    c, g = compact_polynomial(), gaussian()
    k0 = survival_threshold(c)
    out = []
    for name, prof in (("compact", c), ("gaussian", g)):
        for k in ((k0 / 2 if prof.compact else 0.5), 1.0, 2.0):
            ts = tau_star(prof, k) if prof.compact and k <= k0 else 1.0
            h = 10 * max(1.0, ts)
            cert = winding_number(prof, k, (1e-2, 10.0, -h, h))
            out.append(_record(f"winding_zero_k{k:.3g}", name, cert.winding, None, cert.winding == 0))
    m = penrose_margin(c, k0 + 0.2, k0 + 2.0, nk=11, ntau=600)
    out.append(_record("penrose_positive", "compact", m, None, m > 0))
    return out


def _oracle(tol):
    from .field import default_data, field_decomposition, free_density
    from .green import green_density, volterra_density

    c, g = compact_polynomial(), gaussian()
    k0 = survival_threshold(c)
    out = []
    for name, prof, k in (("gaussian", g, 1.0), ("compact", c, k0 / 2)):
        t = np.linspace(0.0, 20.0, 2401)
        data = default_data(prof)
        S_func = lambda s, k=k, data=data: free_density(data, k, s)  # noqa: E731
        S = S_func(t)
        rg = green_density(prof, k, t, S, S_func)
        rv = volterra_density(prof, k, t, S, S_func, refine=1)
        out.append(_agree("oracle_equivalence", name, np.abs(rg - rv).max() / np.abs(rv).max(), 1e-4, tol))
    tr = field_decomposition(c, default_data(c), k0 / 2, np.linspace(0.0, 20.0, 2001))
    out.append(_agree("decomposition_identity", "compact", tr.identity_residual, 1e-6, tol))
    return out


def _plemelj(tol):
    rng = np.random.default_rng(12)
    out = []
    for name, prof in (("compact", compact_polynomial()), ("gaussian", gaussian())):
        top = 0.9 * (prof.upsilon if prof.compact else 3 * prof.velocity_scale)
        xs = rng.uniform(-top, top, 5)
        err = max(abs(interior_limit(prof, x) - eval_H(prof, x)[0]) for x in xs)
        out.append(_agree("plemelj_boundary", name, err, 1e-6, tol))
    return out


SUITE = (_threshold, _endpoints, _branch, _roots, _stability, _oracle, _plemelj)


def run_suite(tol: float | None = None):
    results = []
    for check in SUITE:
        try:
            results.extend(check(tol))
        except VPSpecError as exc:
            results.append({"name": check.__name__.strip("_"), "profile": None, "value": None,
                            "tolerance": tol, "passed": False, "error": str(exc)})
    return results
