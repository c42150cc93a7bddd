"""Free transport, per-mode field traces and the point synthesis.

Initial data are separable, ``f0(x, v) = a(x) b(|v|)``, so a Fourier mode of
the free density is ``S_k(t) = a_hat(k) B(k t)`` with the radial transform

    B(r) = 4 pi int_0^inf b(u) u^2 j0(r u) du.

The density follows from the resolvent, ``rho = S + G * S``, and the field is
``E = -i k rho / k^2`` along the wave vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy import optimize, special

from .equilibria import EquilibriumProfile, Family, compact_polynomial, survival_threshold
from .errors import QuadratureStall, ValidationError, WindowTooShort
from .green import (
    exponential_convolution,
    gregory_convolution,
    green_density,
    green_remainder,
    residue_weight,
    roots,
    volterra_density,
)
from .spectral import validity_width

_GL32_X, _GL32_W = np.polynomial.legendre.leggauss(32)
_GL16_X, _GL16_W = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class InitialData:
    """``a(x) b(|v|)``; ``b(u) = mu(u^2/2)`` of ``velocity``.

    ``spatial`` is ``"gaussian"`` (``exp(-|x|^2 / 2 width^2)``) or
    ``"compact"`` (``(1 - |x|^2/width^2)_+^smoothness``).  With ``zero_mean``
    the bump is replaced by ``-width^2 Laplacian`` of itself, which has zero
    integral.
    """

    velocity: EquilibriumProfile
    spatial: str = "compact"
    amplitude: float = 1.0
    width: float = 1.0
    smoothness: int = 6
    zero_mean: bool = False

    def scaled(self, factor: float) -> "InitialData":
        return InitialData(self.velocity, self.spatial, self.amplitude * factor, self.width,
                           self.smoothness, self.zero_mean)


def default_data(velocity: EquilibriumProfile | None = None) -> InitialData:
    return InitialData(velocity if velocity is not None else compact_polynomial())


def data_from_config(cfg: dict, velocity: EquilibriumProfile) -> InitialData:
    allowed = {"spatial", "amplitude", "width", "smoothness", "zero_mean"}
    extra = set(cfg) - allowed
    if extra:
        raise ValidationError(f"unknown data keys: {sorted(extra)}")
    data = InitialData(velocity, **cfg)
    if data.spatial not in ("gaussian", "compact"):
        raise ValidationError(f"unknown spatial profile {data.spatial!r}")
    if not data.width > 0:
        raise ValidationError("data width must be positive")
    if data.spatial == "compact" and data.smoothness < 1:
        raise ValidationError("compact bump needs smoothness >= 1")
    return data


# --------------------------------------------------------------------------
# transforms

def _bessel_ratio(n, q):
    """``j_n(q) / q^n``, with the series near 0."""
    q = np.asarray(q, dtype=float)
    out = np.empty_like(q)
    small = np.abs(q) < 0.1
    qs = q[small]
    acc = np.zeros_like(qs)
    for s in range(8):
        acc += (-0.5 * qs * qs) ** s / (math.factorial(s) * special.factorial2(2 * n + 2 * s + 1))
    out[small] = acc
    qb = q[~small]
    out[~small] = special.spherical_jn(n, qb) / qb ** n
    return out


def spatial_transform(data: InitialData, k):
    """``a_hat(k)`` for the radial spatial bump."""
    k = np.asarray(k, dtype=float)
    s = data.width
    if data.spatial == "gaussian":
        out = (2 * np.pi * s * s) ** 1.5 * np.exp(-0.5 * (s * k) ** 2)
    else:
        m = data.smoothness
        out = 4 * np.pi * s ** 3 * 2.0 ** m * math.factorial(m) * _bessel_ratio(m + 1, k * s)
    if data.zero_mean:
        out = out * (s * k) ** 2
    return data.amplitude * out


def _radial_nodes(profile: EquilibriumProfile, rmax: float):
    top = profile.upsilon if profile.compact else profile.cutoff(1e-18)
    width = min(top / 8, 2.0 / max(rmax, 1.0))
    n = int(math.ceil(top / width))
    if n > 20_000:
        raise QuadratureStall("radial transform needs too many panels")
    edges = np.linspace(0.0, top, n + 1)
    half = 0.5 * np.diff(edges)
    u = (0.5 * (edges[:-1] + edges[1:]))[:, None] + half[:, None] * _GL32_X[None, :]
    return u.ravel(), (half[:, None] * _GL32_W[None, :]).ravel()


def _j0_derivative(x, n):
    if n == 0:
        return special.spherical_jn(0, x)
    if n == 1:
        return -special.spherical_jn(1, x)
    return -special.spherical_jn(1, x, derivative=True)


def radial_transform(profile: EquilibriumProfile, r, derivative: int = 0, method: str = "auto"):
    """``d^n/dr^n B(r)``, ``n <= 2``; closed form for the Gaussian unless ``method="quadrature"``."""
    r = np.asarray(r, dtype=float)
    if derivative not in (0, 1, 2):
        raise ValidationError("only derivatives up to 2 are available")
    if method == "auto" and profile.family is Family.GAUSSIAN:
        amp, beta = profile.amplitude, profile.scale
        base = amp * (2 * np.pi / beta) ** 1.5 * np.exp(-0.5 * r * r / beta)
        if derivative == 0:
            return base
        if derivative == 1:
            return -r / beta * base
        return (r * r / beta ** 2 - 1 / beta) * base
    u, w = _radial_nodes(profile, float(np.max(np.abs(r), initial=0.0)))
    wb = 4 * np.pi * w * profile.mu(0.5 * u * u) * u ** (2 + derivative)
    flat = r.ravel()
    out = np.empty(flat.shape)
    step = max(1, 4_000_000 // u.size)
    for i in range(0, flat.size, step):
        sl = slice(i, i + step)
        out[sl] = _j0_derivative(np.outer(flat[sl], u), derivative) @ wb
    return out.reshape(r.shape)


def free_density(data: InitialData, k: float, t, derivative: int = 0):
    """``d^n/dt^n S_k(t) = a_hat(k) k^n B^(n)(k t)``."""
    t = np.asarray(t, dtype=float)
    return spatial_transform(data, k) * k ** derivative * radial_transform(data.velocity, k * t, derivative)


# --------------------------------------------------------------------------
# per-mode traces

@dataclass
class FieldTrace:
    k: float
    t: np.ndarray
    S_hat: np.ndarray
    rho_hat: np.ndarray
    phi_hat: np.ndarray
    E_hat: np.ndarray
    rho_volterra: np.ndarray | None = None
    E_osc_plus: np.ndarray | None = None
    E_osc_minus: np.ndarray | None = None
    E_r: np.ndarray | None = None
    identity_residual: float | None = None
    extras: dict = field(default_factory=dict)

    @property
    def E_osc(self):
        if self.E_osc_plus is None:
            return None
        return self.E_osc_plus + self.E_osc_minus


def _check_mode(k, t):
    if not k > 0:
        raise ValidationError("k must be positive")
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or t.size < 2 or t[0] != 0 or np.any(np.diff(t) <= 0):
        raise ValidationError("time grid must be increasing and start at 0")
    return t


def potential_trace(profile: EquilibriumProfile, data: InitialData, k: float, t,
                    cross_check: bool = True, decomposition=None) -> FieldTrace:
    t = _check_mode(k, t)
    S_func = lambda s: free_density(data, k, s)  # noqa: E731
    S = S_func(t)
    dec = decomposition if decomposition is not None else green_remainder(profile, k, t)
    rho = green_density(profile, k, t, S, S_func, dec)
    rv = volterra_density(profile, k, t, S, S_func, refine=1) if cross_check else None
    phi = rho / k ** 2
    trace = FieldTrace(float(k), t, S.astype(complex), rho.astype(complex), phi.astype(complex), -1j * k * phi, rv)
    trace.extras["decomposition"] = dec
    return trace


def field_decomposition(profile: EquilibriumProfile, data: InitialData, k: float, t,
                        cross_check: bool = False) -> FieldTrace:
    """Direct trace plus the split ``E = E_osc+ + E_osc- + E_r``.

    Per mode, integrating ``int_0^t exp(lam (t-s)) S(s) ds`` by parts twice gives

        a e^{lam t} (S(0)/lam + S'(0)/lam^2) + (a/lam^2) e^{lam .} * S''
        - (a/lam) S(t) - (a/lam^2) S'(t),

    the first two terms being the oscillatory piece and the last two moving
    into the remainder together with ``S + G_r * S``.
    """
    t = _check_mode(k, t)
    trace = potential_trace(profile, data, k, t, cross_check)
    dec = trace.extras["decomposition"]
    S = trace.S_hat.real
    d1 = free_density(data, k, t, 1)
    d2_func = lambda s: free_density(data, k, s, 2)  # noqa: E731
    h = t[1] - t[0]
    rho_r = S + gregory_convolution(dec.remainder, S, h)
    parts = []
    if dec.lambda_pm is not None:
        for lam, a in zip(dec.lambda_pm, dec.a_pm):
            conv = exponential_convolution(lam, t, None, d2_func)
            parts.append(a * np.exp(lam * t) * (S[0] / lam + d1[0] / lam ** 2) + a / lam ** 2 * conv)
            rho_r = rho_r - (a / lam) * S - (a / lam ** 2) * d1
    else:
        parts = [np.zeros_like(t, dtype=complex)] * 2
    factor = -1j / k
    trace.E_osc_plus = factor * parts[0]
    trace.E_osc_minus = factor * parts[1]
    trace.E_r = factor * rho_r
    total = trace.E_osc_plus + trace.E_osc_minus + trace.E_r
    scale = max(np.abs(trace.E_hat).max(), np.finfo(float).tiny)
    trace.identity_residual = float(np.abs(total - trace.E_hat).max() / scale)
    return trace


# --------------------------------------------------------------------------
# point synthesis

@dataclass
class BranchTable:
    pieces: list
    interpolation_error: float
    upper: float

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        lam = np.zeros(k.shape, dtype=complex)
        a = np.zeros(k.shape, dtype=complex)
        for lo, hi, cl, ca in self.pieces:
            m = (k >= lo) & (k <= hi)
            x = (2 * k[m] - lo - hi) / (hi - lo)
            lam[m] = C.chebval(x, cl)
            a[m] = C.chebval(x, ca)
        return lam, a


def _root_and_weight(profile, k):
    lam = roots(profile, k)[0]
    return lam, residue_weight(profile, k)[0]


@lru_cache(maxsize=8)
def branch_table(profile: EquilibriumProfile, degree: int = 64) -> BranchTable:
    """Chebyshev tables of ``lam_+(k)`` and the tapered ``a_+(k)``."""
    k0 = survival_threshold(profile)
    top = k0 + min(validity_width(profile), 1.0)
    # the taper is only C^2 at its inner edge and the roots lose smoothness at k0
    inner = k0 + 0.5 * validity_width(profile)
    breaks = sorted({0.0, 0.75 * k0, k0, inner, top}) if k0 > 0 else [0.0, inner, top]
    pieces, err = [], 0.0
    x = np.cos(np.pi * (np.arange(degree + 1) + 0.5) / (degree + 1))
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        ks = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x
        vals = [_root_and_weight(profile, float(kk)) for kk in ks]
        cl = C.chebfit(x, [v[0] for v in vals], degree)
        ca = C.chebfit(x, [v[1] for v in vals], degree)
        # midpoints between nodes as the check set
        xm = np.cos(np.pi * (np.arange(1, degree + 1)) / (degree + 1))[:: max(1, degree // 8)]
        for xx in xm:
            kk = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xx
            lam, a = _root_and_weight(profile, float(kk))
            err = max(err, abs(C.chebval(xx, cl) - lam), abs(C.chebval(xx, ca) - a))
        pieces.append((lo, hi, cl, ca))
    return BranchTable(pieces, err, top)


def synth_osc_point(profile: EquilibriumProfile, data: InitialData, t, table: BranchTable | None = None):
    """``|E_osc+(t, x=0)|`` for dipolar data ``d/dx1 a(x) b(|v|)``.

    The first component reduces to

        (1 / 6 pi^2) int k^2 a_hat(k) a_+(k) e^{lam_+ t} (B(0)/lam_+ + k B'(0)/lam_+^2) dk

    over the oscillatory support; the ``-`` branch is its complex conjugate.
    """
    table = table if table is not None else branch_table(profile)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    b0 = float(radial_transform(data.velocity, 0.0))
    b1 = float(radial_transform(data.velocity, 0.0, 1))
    xs = np.linspace(-1, 1, 201)
    speed = max(np.abs(C.chebval(xs, C.chebder(p[2]))).max() * 2 / (p[1] - p[0]) for p in table.pieces)
    out = np.empty(t.shape)
    for i, tt in enumerate(t):
        width = min(0.02, 4.0 / max(tt * max(speed, 1.0), 1e-12))
        nodes, weights = [], []
        for lo, hi, _, _ in table.pieces:
            n = int(math.ceil((hi - lo) / width))
            if n > 100_000:
                raise QuadratureStall("synthesis beyond the oscillation budget")
            edges = np.linspace(lo, hi, n + 1)
            half = 0.5 * np.diff(edges)
            nodes.append(((0.5 * (edges[:-1] + edges[1:]))[:, None] + half[:, None] * _GL16_X).ravel())
            weights.append((half[:, None] * _GL16_W).ravel())
        kk = np.concatenate(nodes)
        ww = np.concatenate(weights)
        lam, a = table(kk)
        f = kk ** 2 * spatial_transform(data, kk) * a * np.exp(lam * tt) * (b0 / lam + kk * b1 / lam ** 2)
        out[i] = abs(np.dot(ww, f)) / (6 * np.pi ** 2)
    return out


# --------------------------------------------------------------------------
# fits

@dataclass
class FitResult:
    slope: float
    intercept: float
    residual: float
    flagged: bool
    samples: int

    @property
    def alpha(self):
        return -self.slope


def decay_exponent_fit(t, values, window=None, flag_level: float = 1e-2) -> FitResult:
    """Least-squares slope of ``log|values|`` against ``log t`` on ``window``."""
    t = np.asarray(t, dtype=float)
    y = np.abs(np.asarray(values))
    m = np.ones(t.shape, dtype=bool) if window is None else (t >= window[0]) & (t <= window[1])
    t, y = t[m], y[m]
    if t.size < 8:
        raise WindowTooShort(f"{t.size} samples in the fit window (need 8)")
    if np.any(y <= 0) or np.any(t <= 0):
        raise ValidationError("magnitudes and times must be positive on the window")
    x, ly = np.log(t), np.log(y)
    slope, intercept = np.polyfit(x, ly, 1)
    res = float(np.sqrt(np.mean((ly - slope * x - intercept) ** 2)))
    return FitResult(float(slope), float(intercept), res, res > flag_level, int(t.size))


def peak_frequency(t, values):
    """Angular frequency of the dominant spectral peak, refined off the FFT grid."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(values) - np.mean(values)
    h = t[1] - t[0]
    win = np.hanning(t.size)
    yw = y * win
    n = 8 * t.size
    spec = np.abs(np.fft.fft(yw, n))
    freqs = 2 * np.pi * np.fft.fftfreq(n, h)
    pos = freqs > 0
    w0 = freqs[pos][np.argmax(spec[pos])]
    dw = 2 * np.pi / (n * h)

    def neg_power(w):
        return -abs(np.dot(yw, np.exp(-1j * w * t)))

    res = optimize.minimize_scalar(neg_power, bounds=(w0 - dw, w0 + dw), method="bounded",
                                   options={"xatol": 1e-10})
    return float(res.x), 2 * np.pi / (t[-1] - t[0])


def oscillatory_support(profile: EquilibriumProfile) -> float:
    return survival_threshold(profile) + min(validity_width(profile), 1.0)


__all__ = [
    "InitialData", "FieldTrace", "FitResult", "BranchTable", "default_data", "data_from_config",
    "spatial_transform", "radial_transform", "free_density", "potential_trace", "field_decomposition",
    "branch_table", "synth_osc_point", "decay_exponent_fit", "peak_frequency", "oscillatory_support",
]
