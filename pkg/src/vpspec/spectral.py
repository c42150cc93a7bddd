"""Roots of the dispersion relation ``D(lam, k) = 0``.

For ``0 < k <= kappa0`` the roots sit on the imaginary axis at
``lam = +-i tau*(k)``; ``tau*`` is found from ``H(z) = k^2`` with real
``z >= upsilon`` and ``tau* = k z``.  Past the threshold the roots move into
``Re lam < 0`` and are tracked on the continued dielectric function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize

from .dispersion import cauchy_transform, dielectric, eval_omega
from .equilibria import EquilibriumProfile, moment_kappa, moment_tau, survival_threshold
from .errors import (
    ContinuationUnavailable,
    ContourTooCoarse,
    InfiniteSupport,
    NewtonDiverged,
    NumericalError,
    OutOfRange,
    ValidationError,
)

FD_TOLERANCE = 1e-4


@dataclass(frozen=True)
class BranchPoint:
    k: float
    tau_star: float
    dtau: float
    d2tau: float
    phase_velocity: float
    group_velocity: float
    x_residual: float = 0.0
    fd_discrepancy: float = 0.0


@dataclass(frozen=True)
class DampedRoot:
    k: float
    lam: complex
    newton_residual: float
    predicted_rate: float
    iterations: int = 0


@dataclass
class BranchScan:
    points: list
    increasing: bool
    phase_decreasing: bool
    convex: bool
    d2tau_min: float
    d2tau_max: float


@dataclass(frozen=True)
class StabilityCertificate:
    k: float
    contour: tuple
    winding: int
    value: complex
    residual: float
    penrose_margin: float | None = None


# --------------------------------------------------------------------------
# Langmuir branch

def _h_real(profile, z):
    return float(cauchy_transform(profile, z).real)


def _phase_speed(profile, k):
    """Solve ``H(z) = k^2`` for ``z >= upsilon``."""
    ups = profile.upsilon
    k0 = survival_threshold(profile)
    if k >= k0:
        return ups
    tau0 = moment_tau(profile, 0)
    hi = math.sqrt(ups * ups + tau0 / (k * k)) * 1.01
    f = lambda z: _h_real(profile, z) - k * k
    z = optimize.brentq(f, ups, hi, xtol=1e-15 * hi, rtol=1e-15, maxiter=200)
    # Newton polish; H is smooth and monotone here
    for _ in range(2):
        dh = float(cauchy_transform(profile, z, 1).real)
        step = f(z) / dh
        if not math.isfinite(step) or z - step < ups:
            break
        z -= step
    return z


def _check_branch_k(profile, k):
    if not profile.compact:
        raise InfiniteSupport("the Langmuir branch collapses to k = 0 for unbounded support")
    k0 = survival_threshold(profile)
    if not 0 < k <= k0 * (1 + 1e-14):
        raise OutOfRange(f"k = {k} outside (0, kappa0 = {k0}]")
    return min(k, k0)


def tau_star(profile: EquilibriumProfile, k: float) -> float:
    k = _check_branch_k(profile, k)
    return k * _phase_speed(profile, k)


def _omega_derivatives(profile, k, z):
    """``tau*'``, ``tau*''`` from implicit differentiation of ``x = omega(k^2/x)``."""
    x = (k * z) ** 2
    y = 1.0 / (z * z)
    w1 = eval_omega(profile, y, 1)
    w2 = eval_omega(profile, y, 2)
    denom = 1 + k * k * w1 / (x * x)
    dx = (2 * k / x) * w1 / denom
    d2x = (2 * (x - k * dx) ** 2 * w1 / x ** 3 + k * k * (2 * x - k * dx) ** 2 * w2 / x ** 4) / denom
    tau = math.sqrt(x)
    return dx / (2 * tau), (2 * d2x * x - dx * dx) / (4 * x ** 1.5), x - eval_omega(profile, y, 0)


def _fd_derivatives(profile, k):
    k0 = survival_threshold(profile)
    h = 1e-4 * k0
    t = lambda q: q * _phase_speed(profile, q)
    if k + h <= k0 and k - h > 0:
        tp, tm, tc = t(k + h), t(k - h), t(k)
        return (tp - tm) / (2 * h), (tp - 2 * tc + tm) / h ** 2
    f = [t(k - i * h) for i in range(4)]
    d1 = (3 * f[0] - 4 * f[1] + f[2]) / (2 * h)
    d2 = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / h ** 2
    return d1, d2


def langmuir_branch(profile: EquilibriumProfile, k: float, fd_check: bool = True) -> BranchPoint:
    """Undamped root ``lam = i tau*(k)`` for ``0 < k <= kappa0``."""
    k = _check_branch_k(profile, k)
    z = _phase_speed(profile, k)
    dtau, d2tau, xres = _omega_derivatives(profile, k, z)
    disc = 0.0
    if fd_check:
        fd1, fd2 = _fd_derivatives(profile, k)
        disc = max(abs(fd1 - dtau) / abs(dtau), abs(fd2 - d2tau) / abs(d2tau))
        if disc > FD_TOLERANCE:
            raise NumericalError(f"branch derivatives disagree with finite differences ({disc:.2e})")
    return BranchPoint(k, k * z, dtau, d2tau, z, dtau, abs(xres), disc)


def branch_scan(profile: EquilibriumProfile, k_grid, fd_check: bool = False) -> BranchScan:
    k_grid = np.asarray(k_grid, dtype=float)
    if k_grid.size == 0:
        raise ValidationError("empty k grid")
    if np.any(np.diff(k_grid) <= 0):
        raise ValidationError("k grid must be strictly increasing")
    pts = [langmuir_branch(profile, float(k), fd_check) for k in k_grid]
    tau = np.array([p.tau_star for p in pts])
    nu = np.array([p.phase_velocity for p in pts])
    d2 = np.array([p.d2tau for p in pts])
    return BranchScan(pts, bool(np.all(np.diff(tau) > 0)), bool(np.all(np.diff(nu) < 0)),
                      bool(np.all(d2 > 0)), float(d2.min()), float(d2.max()))


# --------------------------------------------------------------------------
# damped roots

def _linear_phase_speed(profile, k):
    k0 = survival_threshold(profile)
    if profile.compact:
        return profile.upsilon - 2 * k0 / moment_kappa(profile, 1) * (k - k0)
    return math.sqrt(moment_tau(profile, 0)) / k


def landau_rate_asymptotic(profile: EquilibriumProfile, k: float, form: str = "scaled") -> float:
    """Leading-order damping rate ``Re lam(k)``.

    Unbounded support: ``-(pi^2/tau0) nu^3 mu(nu^2/2)`` at ``nu = tau0/k``.
    Compact support: ``-(2 pi^2 / kappa1^2) k nu mu(nu^2/2)`` at the linearized
    phase speed ``nu = upsilon - (2 kappa0/kappa1^2)(k - kappa0)``.
    ``form="unscaled"`` drops the factor ``k`` in the compact law, for
    comparison only; it is not dimensionally consistent.
    """
    if not k > 0:
        raise OutOfRange("k must be positive")
    nu = _linear_phase_speed(profile, k)
    mu = float(profile.mu(0.5 * nu * nu))
    if not profile.compact:
        return -(math.pi ** 2 / math.sqrt(moment_tau(profile, 0))) * nu ** 3 * mu
    if k <= survival_threshold(profile):
        raise OutOfRange("the compact-support law applies only past kappa0")
    if nu <= 0:
        raise OutOfRange("linearized phase speed left the support")
    rate = -(2 * math.pi ** 2 / moment_kappa(profile, 1)) * nu * mu
    return rate * k if form == "scaled" else rate


def default_seed(profile: EquilibriumProfile, k: float, sign: int = 1) -> complex:
    if profile.compact:
        nu = max(_linear_phase_speed(profile, k), 0.05 * profile.upsilon)
        try:
            rate = landau_rate_asymptotic(profile, k)
        except OutOfRange:
            rate = 0.0
        return complex(rate, sign * k * nu)
    tau0 = moment_tau(profile, 0)
    tau = math.sqrt(tau0 + moment_tau(profile, 1) / tau0 * k * k)
    return complex(landau_rate_asymptotic(profile, k), sign * tau)


def damped_root(profile: EquilibriumProfile, k: float, seed: complex | None = None, sign: int = 1,
                tol: float = 1e-12, max_iter: int = 60) -> DampedRoot:
    """Newton iteration for ``H(z) = k^2`` on the continued sheet (``z = i lam / k``)."""
    k0 = survival_threshold(profile)
    if not k > 0 or (profile.compact and k <= k0):
        raise OutOfRange(f"damped roots need k > kappa0 = {k0}")
    if seed is None:
        seed = default_seed(profile, k, sign)
    z = 1j * complex(seed) / k
    k2 = k * k
    res = math.inf
    for it in range(1, max_iter + 1):
        h = complex(cauchy_transform(profile, z))
        res = abs(h - k2) / k2
        if res < tol:
            break
        dh = complex(cauchy_transform(profile, z, 1))
        step = (h - k2) / dh
        if abs(step) > 0.5 * profile.velocity_scale:
            step *= 0.5 * profile.velocity_scale / abs(step)
        z -= step
        if not np.isfinite(z):
            raise NewtonDiverged("non-finite Newton iterate")
        if profile.compact and abs(z.real) >= profile.upsilon:
            raise ContinuationUnavailable("root left the strip |Im lam / k| < upsilon")
    else:
        raise NewtonDiverged(f"no convergence after {max_iter} steps (|D| = {res:.2e})")
    lam = -1j * k * z
    try:
        pred = landau_rate_asymptotic(profile, k)
    except OutOfRange:
        pred = math.nan
    return DampedRoot(float(k), complex(lam), float(res), pred, it)


def root_pair(profile: EquilibriumProfile, k: float, seed: complex | None = None):
    """Both roots; the second is obtained from the conjugate seed."""
    plus = damped_root(profile, k, seed, 1)
    minus = damped_root(profile, k, plus.lam.conjugate(), -1)
    return plus, minus


def _extrapolated_seed(history, k):
    if len(history) >= 2:
        (ka, la), (kb, lb) = (history[-2].k, history[-2].lam), (history[-1].k, history[-1].lam)
        return lb + (lb - la) * (k - kb) / (kb - ka)
    return history[-1].lam if history else None


def continue_roots(profile: EquilibriumProfile, k_values, sign: int = 1):
    """Track one damped root along increasing ``k`` with extrapolated seeds."""
    out = []
    for k in k_values:
        seed = _extrapolated_seed(out, k)
        try:
            out.append(damped_root(profile, float(k), seed, sign))
        except (NewtonDiverged, ContinuationUnavailable):
            if seed is None:
                raise
            out.append(damped_root(profile, float(k), None, sign))
    return out


@lru_cache(maxsize=32)
def validity_width(profile: EquilibriumProfile, cap: float = 1.0, step: float = 0.02) -> float:
    """Width past ``kappa0`` over which damped roots are tracked reliably (capped).

    Roots are continued upward in ``k`` until Newton fails, the root leaves
    the continuation strip, or ``Re lam`` stops being negative.
    """
    k0 = survival_threshold(profile)
    start = k0 + 1e-3 if profile.compact else 0.1
    history = []
    for k in np.arange(start, k0 + cap + 0.5 * step, step):
        try:
            root = damped_root(profile, float(k), _extrapolated_seed(history, k))
        except (NewtonDiverged, ContinuationUnavailable):
            break
        if root.lam.real >= 0:
            break
        history.append(root)
    if not history:
        return 0.0
    return float(min(cap, history[-1].k - k0))


# --------------------------------------------------------------------------
# stability

_GL8_X, _GL8_W = np.polynomial.legendre.leggauss(8)


def _rect_path(rect):
    x0, x1, y0, y1 = rect
    c = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
    return list(zip(c, c[1:] + c[:1]))


def winding_number(profile: EquilibriumProfile, k: float, rect, continuation: str | None = None,
                   base_segments: int = 64, max_segments: int = 200_000) -> StabilityCertificate:
    """Zeros of ``D(., k)`` inside ``rect = (re_min, re_max, im_min, im_max)``.

    ``(1/2 pi i) oint D'/D`` with Gauss-Legendre panels refined until the
    phase of ``D`` changes by less than 0.3 rad across every panel.
    """
    x0, x1, y0, y1 = map(float, rect)
    if not (x1 > x0 and y1 > y0):
        raise ValidationError("degenerate rectangle")
    if continuation is None:
        if x0 < 1e-3:
            raise ValidationError("contour must stay at least 1e-3 right of the imaginary axis")
        continuation = "segment"
    D = lambda lam: dielectric(profile, lam, k, 0, continuation)
    segs = []
    for a, b in _rect_path((x0, x1, y0, y1)):
        t = np.linspace(0, 1, base_segments + 1)
        segs.extend(zip(a + (b - a) * t[:-1], a + (b - a) * t[1:]))
    starts = np.array([s[0] for s in segs])
    ends = np.array([s[1] for s in segs])
    while True:
        da, db = D(starts), D(ends)
        mid = 0.5 * (starts + ends)
        dm = D(mid)
        jump = np.abs(np.angle(dm / da)) + np.abs(np.angle(db / dm))
        bad = jump > 0.3
        if not np.any(bad):
            break
        if starts.size > max_segments:
            raise ContourTooCoarse("phase refinement exceeded the segment budget")
        starts = np.concatenate([starts[~bad], starts[bad], mid[bad]])
        ends = np.concatenate([ends[~bad], mid[bad], ends[bad]])
    half = 0.5 * (ends - starts)
    nodes = (0.5 * (starts + ends))[:, None] + half[:, None] * _GL8_X[None, :]
    d0 = D(nodes)
    d1 = dielectric(profile, nodes, k, 1, continuation)
    total = np.sum((d1 / d0) * _GL8_W[None, :] * half[:, None]) / (2j * np.pi)
    n = int(round(total.real))
    resid = abs(total - n)
    if resid > 0.1:
        raise ContourTooCoarse(f"winding integral {total:.4f} is not near an integer")
    return StabilityCertificate(float(k), (x0, x1, y0, y1), n, complex(total), float(resid))


def _axis_scale(profile, k):
    return max(1.0, math.sqrt(moment_tau(profile, 0)), 3 * k * profile.velocity_scale)


def penrose_margin(profile: EquilibriumProfile, k_min: float, k_max: float, nk: int = 41,
                   ntau: int = 1500) -> float:
    """Minimum of ``|D(i tau, k)|`` over a ``(k, tau)`` grid plus a far-field sweep.

    By the maximum principle applied to ``1/D`` (analytic in ``Re lam > 0`` and
    tending to 1), the infimum over the closed right half plane is attained on
    the imaginary axis or at infinity.
    """
    if not 0 < k_min <= k_max:
        raise ValidationError("need 0 < k_min <= k_max")
    best = math.inf
    for k in np.linspace(k_min, k_max, nk):
        span = 20 * _axis_scale(profile, k)
        tau = np.linspace(0.0, span, ntau)
        vals = np.abs(dielectric(profile, 1j * tau, k))
        i = int(np.argmin(vals))
        lo, hi = tau[max(i - 1, 0)], tau[min(i + 1, ntau - 1)]
        res = optimize.minimize_scalar(lambda s: abs(complex(dielectric(profile, 1j * s, k))),
                                       bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        far = np.abs(dielectric(profile, 1j * np.geomspace(span, 100 * span, 50), k))
        best = min(best, float(vals[i]), float(res.fun), float(far.min()))
    return best
