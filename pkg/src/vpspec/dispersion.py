"""Dielectric function of a radial equilibrium.

With the velocity weight ``w(u) = u mu(u^2/2)`` the reduced Cauchy transform
is ``H(z) = 2 pi int w(u) / (z - u) du`` and the dielectric function is
``D(lam, k) = 1 - H(i lam / k) / k^2``.  ``Re lam > 0`` corresponds to
``Im z > 0``.

Three evaluation regimes are distinguished and reported as a branch tag:

``upper``      ``Im z > 0``, the defining integral.
``boundary``   ``Im z = 0``, limit from above (principal value plus the local
               density term ``-2 i pi^2 w(x)``).
``continued``  ``Im z < 0``, analytic continuation from above, obtained by
               adding ``-4 i pi^2 w(z)`` with the closed-form extension of
               ``w``.  For compact support this is only meaningful for
               ``|Re z| < upsilon``.

The vectorized :func:`cauchy_transform` evaluates ``H`` and its derivatives
with composite Gauss-Legendre panels.  Close to the real axis the integrand is
regularized by subtracting ``w(z)``; the subtracted piece integrates to a
logarithm in closed form.  For the compact family the subtracted integrand is
a polynomial, so the rule is exact up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import integrate

from .equilibria import QUAD_EPSABS, QUAD_EPSREL, EquilibriumProfile, Family, moment_tau
from .errors import (
    ContinuationUnavailable,
    DivergentMoment,
    OutOfRange,
    PoleOutsideDomain,
    ValidationError,
)

GL_ORDER = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)
_CHUNK = 2_000_000


# --------------------------------------------------------------------------
# principal values

def pv_integral(f, pole: float, a: float, b: float, fprime=None) -> float:
    """Cauchy principal value of ``int_a^b f(u) / (u - pole) du``.

    Second-order singularity subtraction: the regular remainder
    ``(f(u) - f(p) - f'(p)(u - p)) / (u - p)`` is integrated adaptively and the
    subtracted terms are added back in closed form.
    """
    if not a < pole < b:
        raise PoleOutsideDomain(f"pole {pole} not inside ({a}, {b})")
    p = float(pole)
    fp = float(f(p))
    if fprime is not None:
        dp = float(fprime(p))
    else:
        h = 1e-3 * min(p - a, b - p)
        dp = (8 * (f(p + h) - f(p - h)) - (f(p + 2 * h) - f(p - 2 * h))) / (12 * h)

    def regular(u):
        d = u - p
        if d == 0.0:
            return 0.0
        return (f(u) - fp - dp * d) / d

    left, _ = integrate.quad(regular, a, p, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200)
    right, _ = integrate.quad(regular, p, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200)
    return left + right + fp * math.log((b - p) / (p - a)) + dp * (b - a)


# --------------------------------------------------------------------------
# velocity weight and its derivatives

@lru_cache(maxsize=None)
def _chain_polys(n: int):
    """Coefficients ``P_j`` with ``d^n/du^n mu(u^2/2) = sum_j P_j(u) mu^(j)(u^2/2)``."""
    polys = [np.array([1.0])]
    for _ in range(n):
        nxt = [np.zeros(1) for _ in range(len(polys) + 1)]
        for j, p in enumerate(polys):
            nxt[j] = npoly.polyadd(nxt[j], npoly.polyder(p))
            nxt[j + 1] = npoly.polyadd(nxt[j + 1], npoly.polymulx(p))
        polys = nxt
    return tuple(polys)


def _mu_chain(profile, u, n):
    e = 0.5 * u * u
    out = 0.0
    for j, p in enumerate(_chain_polys(n)):
        if np.any(p):
            out = out + npoly.polyval(u, p) * profile.mu_derivative(e, j)
    return out


def weight(profile: EquilibriumProfile, u, n: int = 0):
    """``d^n/du^n [u mu(u^2/2)]`` using the analytic extension of ``mu``."""
    u = np.asarray(u)
    out = u * _mu_chain(profile, u, n)
    if n:
        out = out + n * _mu_chain(profile, u, n - 1)
    return out


# --------------------------------------------------------------------------
# quadrature layout

def _switch_distance(profile) -> float:
    if profile.family is Family.COMPACT_POLYNOMIAL:
        return 0.25 * profile.upsilon
    return 0.5 * profile.velocity_scale


def _core_extent(profile) -> float:
    return profile.upsilon if profile.compact else profile.cutoff()


def _max_extent(profile) -> float:
    if profile.compact:
        return profile.upsilon
    if profile.family is Family.GAUSSIAN:
        return profile.cutoff(1e-300)
    return 4.0 * profile.cutoff()


def _local_width(profile, x):
    """Panel width used around abscissa ``x``."""
    base = 0.5 * _switch_distance(profile)
    if profile.family is Family.POWER_LAW:
        return np.maximum(base, 0.15 * np.abs(x))
    return np.full_like(np.asarray(x, dtype=float), base)


@lru_cache(maxsize=64)
def _panel_nodes(profile: EquilibriumProfile, extent: float):
    """Composite Gauss-Legendre nodes and weights on ``[-extent, extent]``."""
    if profile.family is Family.POWER_LAW:
        core = 8.0 * profile.velocity_scale
        base = 0.5 * _switch_distance(profile)
        right = list(np.linspace(0.0, min(core, extent), max(2, int(np.ceil(min(core, extent) / base)) + 1)))
        while right[-1] < extent:
            right.append(min(extent, right[-1] * 1.15))
        right = np.array(right)
        edges = np.concatenate([-right[:0:-1], right])
    else:
        n = max(8, int(np.ceil(2 * extent / (0.5 * _switch_distance(profile)))))
        edges = np.linspace(-extent, extent, n + 1)
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    x = (0.5 * (a + b))[:, None] + half[:, None] * _GL_X[None, :]
    w = half[:, None] * _GL_W[None, :]
    return x.ravel(), w.ravel()


def _extent_for(profile, z):
    if profile.compact:
        return profile.upsilon
    core = _core_extent(profile)
    near = np.abs(z.imag) < _switch_distance(profile)
    if not np.any(near):
        return core
    need = np.max(np.abs(z.real[near])) + 3.0 * profile.velocity_scale
    ext = min(max(core, need), _max_extent(profile))
    # quantize so the node cache is reused
    step = profile.velocity_scale
    return float(np.ceil(ext / step) * step) if ext > core else core


# --------------------------------------------------------------------------
# Cauchy transform

def cauchy_transform(profile: EquilibriumProfile, z, order: int = 0, continuation: str = "segment"):
    """``H^(order)(z)`` on the sheet reached from the upper half plane.

    ``continuation`` selects how points with ``Im z < 0`` are handled for
    compact support: ``"segment"`` allows only ``|Re z| < upsilon`` (crossing
    the support) and raises otherwise; ``"local"`` additionally continues
    through the gap ``|Re z| > upsilon``, where the integral itself is
    analytic.
    """
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    z = z.ravel()
    if profile.compact and order > profile.order:
        raise ValidationError("derivative order exceeds the vanishing order of the profile")
    below = z.imag < 0
    if profile.compact and np.any(below):
        gap = np.abs(z.real) >= profile.upsilon
        if continuation == "segment" and np.any(below & gap):
            raise ContinuationUnavailable("continuation below the axis requires |Re z| < upsilon")
        if continuation == "local" and np.any(below & (np.abs(np.abs(z.real) - profile.upsilon) == 0)):
            raise ContinuationUnavailable("branch point at |Re z| = upsilon")

    ext = _extent_for(profile, z)
    x, wq = _panel_nodes(profile, ext)
    g = weight(profile, x, order)
    wg = wq * g

    clip = np.clip(z.real, -ext, ext)
    dist = np.hypot(np.abs(z.real) - np.minimum(np.abs(z.real), ext), z.imag)
    direct = dist >= np.maximum(_switch_distance(profile), 2 * _local_width(profile, clip))

    out = np.empty(z.shape, dtype=complex)
    step = max(1, _CHUNK // x.size)

    idx = np.flatnonzero(direct)
    for s in range(0, idx.size, step):
        sl = idx[s:s + step]
        out[sl] = (wg[None, :] / (z[sl, None] - x[None, :])).sum(axis=1)

    idx = np.flatnonzero(~direct)
    for s in range(0, idx.size, step):
        sl = idx[s:s + step]
        zz = z[sl]
        gz = weight(profile, zz, order)
        diff = zz[:, None] - x[None, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            q = (g[None, :] - gz[:, None]) / diff
        close = np.abs(diff) < 1e-7 * profile.velocity_scale
        if np.any(close):
            r, c = np.nonzero(close)
            q[r, c] = -weight(profile, 0.5 * (zz[r] + x[c]), order + 1)
        val = (wq[None, :] * q).sum(axis=1)
        on_axis = zz.imag == 0
        logs = np.empty(zz.shape, dtype=complex)
        xr = zz.real[on_axis]
        edge = np.abs(xr) == ext
        with np.errstate(divide="ignore"):
            lr = np.log(np.abs((xr + ext) / np.where(edge, 1.0, xr - ext)))
        # w^(order) vanishes at a compact support edge, so the log term drops out
        lr[edge] = 0.0
        inside = np.abs(xr) < ext
        logs[on_axis] = lr - 1j * np.pi * inside
        off = ~on_axis
        logs[off] = np.log(zz[off] + ext) - np.log(zz[off] - ext)
        out[sl] = val + gz * logs

    if np.any(below):
        jump = below.copy()
        if profile.compact:
            jump &= np.abs(z.real) < profile.upsilon
        if np.any(jump):
            out[jump] += -2j * np.pi * weight(profile, z[jump], order)
    return (2 * np.pi * out).reshape(shape)


def branch_tag(profile, z) -> str:
    z = complex(z)
    if z.imag > 0:
        return "upper"
    if z.imag == 0:
        return "boundary"
    return "continued"


# --------------------------------------------------------------------------
# scalar reference evaluations

def _real_form(profile, x):
    """``2 pi int u^2 mu / (x^2 - u^2) du`` for ``|x| >= upsilon`` (compact support)."""
    ups, n = profile.upsilon, profile.order
    c = profile.amplitude * 0.5 ** n
    x2 = x * x

    def f(u):
        s = ups * ups - u * u
        return u * u * c * s ** n / (x2 - u * u)

    val, _ = integrate.quad(f, 0.0, ups, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200)
    return 4 * math.pi * val


def eval_H(profile: EquilibriumProfile, z, gap_continuation: bool = False):
    """Scalar ``H(z)`` with its branch tag.

    Boundary values inside the support use :func:`pv_integral` plus the
    density term; outside the support of a compact profile the real
    symmetric form is integrated directly.
    """
    z = complex(z)
    tag = branch_tag(profile, z)
    if tag == "boundary":
        x = z.real
        if profile.compact and abs(x) >= profile.upsilon:
            return complex(_real_form(profile, x)), tag
        ext = profile.upsilon if profile.compact else max(_core_extent(profile), abs(x) + 3 * profile.velocity_scale)
        w = lambda u: float(weight(profile, u))
        dw = lambda u: float(weight(profile, u, 1))
        pv = pv_integral(w, x, -ext, ext, dw)
        return complex(-2 * np.pi * pv, -2 * np.pi ** 2 * w(x)), tag
    mode = "local" if gap_continuation else "segment"
    return complex(cauchy_transform(profile, z, 0, mode)), tag


def interior_limit(profile: EquilibriumProfile, x: float, gamma0: float | None = None, levels: int = 6) -> complex:
    """``lim H(x + i gamma)`` as ``gamma -> 0+`` by Neville extrapolation.

    Independent of the boundary formula: only off-axis values are used.
    """
    g0 = 0.02 * profile.velocity_scale if gamma0 is None else gamma0
    gam = g0 * 0.5 ** np.arange(levels)
    table = list(cauchy_transform(profile, x + 1j * gam))
    for m in range(1, levels):
        for i in range(levels - m):
            table[i] = (gam[i + m] * table[i] - gam[i] * table[i + 1]) / (gam[i + m] - gam[i])
    return complex(table[0])


@dataclass(frozen=True)
class DispersionSample:
    k: float
    lam: complex
    value: complex
    branch_tag: str


def _check_k(k):
    if not k > 0:
        raise ValidationError("wave number must be positive")


def eval_D(profile: EquilibriumProfile, lam, k: float, gap_continuation: bool = False) -> DispersionSample:
    _check_k(k)
    lam = complex(lam)
    h, tag = eval_H(profile, 1j * lam / k, gap_continuation)
    return DispersionSample(float(k), lam, 1 - h / k ** 2, tag)


def dielectric(profile: EquilibriumProfile, lam, k: float, derivative: int = 0, continuation: str = "segment"):
    """Vectorized ``d^n D / d lam^n`` at ``(lam, k)``."""
    _check_k(k)
    lam = np.asarray(lam, dtype=complex)
    h = cauchy_transform(profile, 1j * lam / k, derivative, continuation)
    if derivative == 0:
        return 1 - h / k ** 2
    return -((1j / k) ** derivative) * h / k ** 2


# --------------------------------------------------------------------------
# time-domain kernel

def eval_N(profile: EquilibriumProfile, t: float) -> complex:
    """``N(t) = 2 pi int exp(-i u t) w(u) du = -4 pi i int_0^inf sin(u t) w(u) du``."""
    if t < 0:
        raise ValidationError("t must be nonnegative")
    if t == 0:
        return 0j
    top = profile.upsilon if profile.compact else profile.cutoff(1e-20)
    val, _ = integrate.quad(lambda u: float(weight(profile, u)), 0.0, top, weight="sin", wvar=t,
                            epsabs=1e-14, epsrel=1e-12, limit=400)
    return complex(0.0, -4 * np.pi * val)


def _half_nodes(top: float, width: float):
    n = max(4, int(np.ceil(top / width)))
    edges = np.linspace(0.0, top, n + 1)
    half = 0.5 * np.diff(edges)
    x = (0.5 * (edges[:-1] + edges[1:]))[:, None] + half[:, None] * _GL_X[None, :]
    return x.ravel(), (half[:, None] * _GL_W[None, :]).ravel()


def volterra_kernel(profile: EquilibriumProfile, k: float, s):
    """Real kernel ``K_k(s) = -(4 pi / k) int_0^inf sin(u k s) w(u) du``.

    Its Laplace transform in ``s`` equals ``1 - D(lam, k)``.
    """
    s = np.asarray(s, dtype=float)
    top = profile.upsilon if profile.compact else profile.cutoff(1e-20)
    rmax = k * float(np.max(np.abs(s))) if s.size else 0.0
    width = min(0.25 * profile.velocity_scale, 8.0 / max(rmax, 1e-12))
    u, wq = _half_nodes(top, width)
    wg = wq * weight(profile, u)
    flat = s.ravel()
    out = np.empty(flat.shape)
    step = max(1, _CHUNK // u.size)
    for i in range(0, flat.size, step):
        sl = slice(i, i + step)
        out[sl] = np.sin(np.outer(k * flat[sl], u)) @ wg
    return (-4 * np.pi / k * out).reshape(s.shape)


# --------------------------------------------------------------------------
# the auxiliary function omega

def eval_omega(profile: EquilibriumProfile, y: float, order: int = 0) -> float:
    """``omega(y) = 2 pi int u^2 mu / (1 - y u^2) du`` and its first two derivatives."""
    if order not in (0, 1, 2):
        raise ValidationError("order must be 0, 1 or 2")
    if not profile.compact:
        if y != 0:
            raise OutOfRange("omega is defined only at y = 0 for unbounded support")
        return moment_tau(profile, order) * (2.0 if order == 2 else 1.0)
    ups, n = profile.upsilon, profile.order
    ymax = ups ** -2
    if not 0 <= y <= ymax * (1 + 1e-15):
        raise OutOfRange(f"y must lie in [0, {ymax}]")
    y = min(y, ymax)
    m = order + 1
    if y == ymax and m > n:
        raise DivergentMoment("vanishing order cannot absorb the denominator")
    c = profile.amplitude * 0.5 ** n
    gap = 1.0 - y * ups * ups
    power = 2 + 2 * order

    def f(u):
        s = ups * ups - u * u
        return u ** power * c * s ** n / (gap + y * s) ** m

    val, _ = integrate.quad(f, 0.0, ups, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200)
    return (4 * math.pi if order < 2 else 8 * math.pi) * val
