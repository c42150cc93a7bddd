"""Radial equilibrium profiles and their moment constants.

An equilibrium is a function ``mu(e)`` of the kinetic energy ``e = |v|^2/2``.
Three closed-form families are provided.  Each carries the metadata the
spectral theory relies on: the maximal speed ``upsilon`` (finite only for
compact support), a smoothness order ``N0`` and a decay/vanishing order
``N1``.

New families are added by extending :data:`_FAMILIES` with an object that
implements ``mu_derivative(profile, e, j)`` for complex ``e`` (the closed-form
continuation is what the dispersion module needs) together with ``upsilon``
and ``cutoff``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import DivergentMoment, InfiniteSupport, ValidationError

QUAD_EPSABS = 1e-13
QUAD_EPSREL = 1e-12
TAIL_LEVEL = 1e-16


class Family(str, enum.Enum):
    GAUSSIAN = "gaussian"
    COMPACT_POLYNOMIAL = "compact_polynomial"
    POWER_LAW = "power_law"


@dataclass(frozen=True)
class EquilibriumProfile:
    """Closed-form radial equilibrium.

    Parameters by family:

    * Gaussian: ``mu(e) = amplitude * exp(-scale * e)`` (``scale`` is beta).
    * CompactPolynomial: ``mu(e) = amplitude * (scale - e)**order`` for
      ``e <= scale`` and 0 beyond (``scale`` is the energy cutoff).
    * PowerLaw: ``mu(e) = amplitude * (1 + e)**(-order)``.
    """

    family: Family
    amplitude: float
    scale: float = 1.0
    order: int = 4
    smoothness_order: int = field(default=-1)
    decay_order: int = field(default=-1)

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.smoothness_order < 0:
            default = self.order if self.family is Family.COMPACT_POLYNOMIAL else 8
            object.__setattr__(self, "smoothness_order", int(default))
        if self.decay_order < 0:
            default = 8 if self.family is Family.GAUSSIAN else self.order
            object.__setattr__(self, "decay_order", int(default))

    @property
    def params(self) -> dict:
        if self.family is Family.GAUSSIAN:
            return {"A": self.amplitude, "beta": self.scale}
        if self.family is Family.COMPACT_POLYNOMIAL:
            return {"A": self.amplitude, "E_max": self.scale, "N1": self.order}
        return {"A": self.amplitude, "N1": self.order}

    @property
    def upsilon(self) -> float:
        """Maximal particle speed (``inf`` for unbounded support)."""
        if self.family is Family.COMPACT_POLYNOMIAL:
            return math.sqrt(2.0 * self.scale)
        return math.inf

    @property
    def compact(self) -> bool:
        return math.isfinite(self.upsilon)

    @property
    def velocity_scale(self) -> float:
        """Typical speed; sets quadrature panel widths."""
        if self.family is Family.GAUSSIAN:
            return 1.0 / math.sqrt(self.scale)
        if self.family is Family.COMPACT_POLYNOMIAL:
            return self.upsilon
        return 1.0

    def cutoff(self, level: float = TAIL_LEVEL) -> float:
        """Smallest speed with ``mu(u^2/2) < level * mu(0)``; ``upsilon`` if compact."""
        if self.compact:
            return self.upsilon
        if self.family is Family.GAUSSIAN:
            return math.sqrt(-2.0 * math.log(level) / self.scale)
        return math.sqrt(2.0 * (level ** (-1.0 / self.order) - 1.0))

    def mu(self, e):
        """Equilibrium value; zero outside the support."""
        e = np.asarray(e, dtype=float)
        out = self.mu_derivative(e, 0)
        if self.family is Family.COMPACT_POLYNOMIAL:
            out = np.where(e <= self.scale, out, 0.0)
        return out

    def mu_derivative(self, e, j: int = 0):
        """``j``-th derivative of the analytic extension of ``mu`` (complex ok)."""
        e = np.asarray(e)
        a = self.amplitude
        if self.family is Family.GAUSSIAN:
            b = self.scale
            return a * (-b) ** j * np.exp(-b * e)
        n = self.order
        if self.family is Family.COMPACT_POLYNOMIAL:
            if j > n:
                return np.zeros_like(e, dtype=np.result_type(e, float))
            c = math.perm(n, j) * (-1) ** j
            return a * c * (self.scale - e) ** (n - j)
        c = (-1) ** j * math.prod(range(n, n + j))
        return a * c * (1.0 + e) ** (-(n + j))


def gaussian(amplitude: float = (2 * math.pi) ** -1.5, beta: float = 1.0, **meta) -> EquilibriumProfile:
    return EquilibriumProfile(Family.GAUSSIAN, amplitude, beta, **meta)


def compact_polynomial(amplitude: float = 1.0, e_max: float = 1.0, n1: int = 4, **meta) -> EquilibriumProfile:
    return EquilibriumProfile(Family.COMPACT_POLYNOMIAL, amplitude, e_max, int(n1), **meta)


def power_law(amplitude: float = 1.0, n1: int = 4, **meta) -> EquilibriumProfile:
    return EquilibriumProfile(Family.POWER_LAW, amplitude, 1.0, int(n1), **meta)


BUILTIN_PROFILES = {
    "gaussian": gaussian,
    "compact": compact_polynomial,
    "power_law": power_law,
}


def profile_from_config(spec: dict) -> EquilibriumProfile:
    """Build a profile from ``{"family": ..., "params": {...}}``."""
    try:
        family = Family(spec["family"])
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"unknown or missing family in {spec!r}") from exc
    p = dict(spec.get("params", {}))
    meta = {}
    for key in ("N0", "smoothness_order"):
        if key in spec:
            meta["smoothness_order"] = int(spec[key])
    for key in ("N1_meta", "decay_order"):
        if key in spec:
            meta["decay_order"] = int(spec[key])
    try:
        if family is Family.GAUSSIAN:
            return gaussian(float(p.get("A", (2 * math.pi) ** -1.5)), float(p.get("beta", 1.0)), **meta)
        if family is Family.COMPACT_POLYNOMIAL:
            return compact_polynomial(float(p.get("A", 1.0)), float(p.get("E_max", 1.0)), int(p.get("N1", 4)), **meta)
        return power_law(float(p.get("A", 1.0)), int(p.get("N1", 4)), **meta)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"bad parameters in {spec!r}") from exc


def eval_mu(profile: EquilibriumProfile, e):
    if np.any(np.asarray(e) < 0):
        raise ValidationError("energy must be nonnegative")
    return profile.mu(e)


def _half_line(profile, f):
    """``2 * int_0^upsilon f(u) du`` for an even integrand ``f``."""
    top = profile.upsilon if profile.compact else np.inf
    val, _ = integrate.quad(f, 0.0, top, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200)
    return 2.0 * val


def _speed_density(profile, u):
    return float(profile.mu(0.5 * u * u))


@lru_cache(maxsize=256)
def moment_tau(profile: EquilibriumProfile, j: int) -> float:
    """``tau_j^2 = 2 pi int u^(2j+2) mu(u^2/2) du``."""
    if j < 0:
        raise ValidationError("moment index must be nonnegative")
    if profile.family is Family.POWER_LAW and 2 * j + 2 >= 2 * profile.order - 1:
        raise DivergentMoment(f"tau_{j} diverges for power-law order {profile.order}")
    return 2 * math.pi * _half_line(profile, lambda u: u ** (2 * j + 2) * _speed_density(profile, u))


def _compact_factors(profile):
    ups = profile.upsilon
    return ups, profile.order, profile.amplitude * 0.5 ** profile.order


@lru_cache(maxsize=256)
def moment_kappa(profile: EquilibriumProfile, j: int) -> float:
    """``kappa_j^2 = 2 pi int u mu(u^2/2) / (upsilon - u)^(j+1) du``.

    Uses the symmetrized form on ``[0, upsilon]`` with the vanishing factor
    ``(upsilon - u)^N1`` cancelled analytically.
    """
    if not profile.compact:
        raise InfiniteSupport("kappa moments need a finite maximal speed")
    ups, n, c = _compact_factors(profile)
    if j + 1 >= n:
        raise DivergentMoment(f"kappa_{j} needs vanishing order above {j + 1}")

    def f(u):
        # mu(u^2/2) = c (ups - u)^n (ups + u)^n
        return u * c * (ups + u) ** n * ((ups - u) ** (n - j - 1) - (ups - u) ** n * (ups + u) ** (-j - 1))

    val, _ = integrate.quad(f, 0.0, ups, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200)
    return 2 * math.pi * val


@lru_cache(maxsize=64)
def survival_threshold(profile: EquilibriumProfile) -> float:
    """``kappa_0``: zero for unbounded support, else ``sqrt(4 pi int_0^ups u^2 mu/(ups^2-u^2))``."""
    if not profile.compact:
        return 0.0
    ups, n, c = _compact_factors(profile)
    val, _ = integrate.quad(lambda u: u * u * c * (ups * ups - u * u) ** (n - 1), 0.0, ups,
                            epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL)
    return math.sqrt(4 * math.pi * val)


@dataclass(frozen=True)
class MomentTable:
    tau_sq: tuple
    kappa_sq: tuple
    kappa0: float
    identity_residual: float | None = None


def moment_table(profile: EquilibriumProfile, jmax: int = 2) -> MomentTable:
    taus = []
    for j in range(jmax + 1):
        try:
            taus.append(moment_tau(profile, j))
        except DivergentMoment:
            break
    kappas = []
    if profile.compact:
        for j in range(jmax + 1):
            try:
                kappas.append(moment_kappa(profile, j))
            except DivergentMoment:
                break
    resid = threshold_identity_residual(profile) if profile.compact else None
    return MomentTable(tuple(taus), tuple(kappas), survival_threshold(profile), resid)


def threshold_identity_residual(profile: EquilibriumProfile) -> float:
    """``kappa0^2 upsilon^2 - (tau0^2 + kappa1^2)``; reported, never assumed zero."""
    k0 = survival_threshold(profile)
    return k0 * k0 * profile.upsilon ** 2 - (moment_tau(profile, 0) + moment_kappa(profile, 1))


@dataclass
class ValidationReport:
    passed: bool
    failures: list

    def __bool__(self):
        return self.passed


def validate_profile(profile: EquilibriumProfile) -> ValidationReport:
    fails = []
    if not profile.amplitude > 0:
        fails.append("negativity: amplitude must be positive")
    if not profile.scale > 0:
        fails.append("scale parameter must be positive")
    if profile.smoothness_order < 4:
        fails.append("smoothness_order below 4")
    if profile.decay_order < 4:
        fails.append("decay_order below 4")
    if profile.family is not Family.GAUSSIAN and profile.order < 4:
        if "decay_order below 4" not in fails:
            fails.append("decay_order below 4")
    if fails:
        return ValidationReport(False, fails)

    top = profile.upsilon if profile.compact else profile.cutoff()
    u = np.linspace(0.0, top, 2001)[:-1]
    vals = profile.mu(0.5 * u * u)
    if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
        fails.append("positivity on the open support")
    if profile.compact:
        # mu(u^2/2) / (ups - u)^N1 must tend to a positive limit
        ups = profile.upsilon
        eps = ups * np.array([1e-3, 1e-4, 1e-5])
        ratio = profile.mu(0.5 * (ups - eps) ** 2) / eps ** profile.order
        if not (np.all(ratio > 0) and abs(ratio[-1] / ratio[-2] - 1) < 1e-3):
            fails.append("vanishing order at the maximal speed")
    else:
        e = np.logspace(0, 6, 25)
        bound = profile.mu(e) * (1 + e) ** profile.decay_order
        if not np.all(np.diff(bound) <= 1e-12 * bound[:-1] + 1e-300) and bound[-1] > 10 * bound[0]:
            fails.append("decay slower than declared order")
    return ValidationReport(not fails, fails)
