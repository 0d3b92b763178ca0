"""Continuum bath description and its spectral functionals.

The bath enters the oscillator dynamics only through the reduced coupling
density ``a_hat = kappa / sqrt(rho)``, declared for positive frequencies and
extended evenly.  Every integral over the real line is therefore evaluated
as twice an integral over ``(nu0, nu_max)`` plus an estimated tail.

Functionals provided here:

* ``compute_K``       K = int a^2(nu) / nu^2 dnu
* ``w_time``          w(tau) = int a^2(nu) sin(nu tau) / nu dnu
* ``w_diamond_gap``   int a^2(l) / (l^2 - nu^2) dl for |nu| <= nu0
* ``phi``             -nu^2 + v - w_diamond_gap(nu)
* ``find_lambda0``    root of ``phi`` inside the gap
"""

from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional

import numpy as np
from scipy import integrate, interpolate

from .errors import (
    ConditioningWarning,
    PreconditionError,
    QuadratureDivergenceError,
    SpectrumDomainError,
    SupportViolationError,
)
from .quadrature import composite_gauss_legendre, panel_edges

SQRT_PI = math.sqrt(math.pi)

# Geometric refinement levels next to the lower endpoint.  The finer
# estimate uses more levels so that a non-integrable endpoint shows up as
# a large change between the two estimates.
_GRADE_COARSE = 20
_GRADE_FINE = 26

# Relative width of the band next to the gap edge in which gap-kernel
# values are flagged as ill-conditioned.
EDGE_GUARD = 1e-3


class Family(str, enum.Enum):
    GAUSSIAN_GAPLESS = "gaussian_gapless"
    GAUSSIAN_GAP = "gaussian_gap"
    TABULATED = "tabulated"
    KLEIN_GORDON = "klein_gordon"


@dataclass(frozen=True)
class BathSpectrum:
    """Reduced coupling density of a continuum bath.

    Parameters
    ----------
    family : Family
        Analytic family, tabulated data or Klein-Gordon construction.
    nu0 : float
        Gap edge; ``a_hat`` vanishes identically on ``[-nu0, nu0]``.
    params : mapping
        Family parameters.  Both Gaussian families accept ``c`` (amplitude,
        default 1) and ``scale`` (default 1); the gapless family also takes
        the power ``p`` (default 2):

        * gapless: ``a^2 = c |nu|^p exp(-(nu/scale)^2) / sqrt(pi)``
        * gap:     ``a^2 = c (nu^2 - nu0^2) exp(-(nu/scale)^2) / sqrt(pi)``
    table : (nu, a_hat) arrays, optional
        Samples for the tabulated family, ``nu`` strictly increasing.
    interp : {"linear", "pchip"}
        Interpolation rule for tabulated data.
    evaluator : callable, optional
        ``a_hat`` on ``|nu| > nu0`` for the Klein-Gordon family.
    """

    family: Family
    nu0: float = 0.0
    params: Mapping[str, float] = field(default_factory=dict)
    table: Optional[tuple[np.ndarray, np.ndarray]] = field(default=None, compare=False)
    interp: str = "linear"
    evaluator: Optional[Callable[[np.ndarray], np.ndarray]] = field(
        default=None, compare=False, repr=False
    )

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.nu0 < 0:
            raise ValueError("nu0 must be non-negative")
        if self.family is Family.TABULATED:
            if self.table is None:
                raise ValueError("tabulated spectrum needs a table")
            nu, a = (np.asarray(c, dtype=float) for c in self.table)
            if nu.ndim != 1 or nu.shape != a.shape or nu.size < 2:
                raise ValueError("table must be two equal-length columns")
            if np.any(nu < 0) or np.any(np.diff(nu) <= 0):
                raise ValueError("table frequencies must be >= 0 and strictly increasing")
            if self.interp not in ("linear", "pchip"):
                raise ValueError(f"unknown interpolation rule {self.interp!r}")
            object.__setattr__(self, "table", (nu, a))
        if self.family is Family.KLEIN_GORDON and self.evaluator is None:
            raise ValueError("Klein-Gordon spectrum needs an evaluator")

    @property
    def support_end(self) -> float:
        """Largest frequency at which ``a_hat`` is defined."""
        if self.family is Family.TABULATED:
            return float(self.table[0][-1])
        return math.inf

    def a_hat_sq(self, nu) -> np.ndarray:
        nu = np.abs(np.asarray(nu, dtype=float))
        out = np.zeros_like(nu)
        outside = nu > self.nu0
        if not np.any(outside):
            return out
        x = nu[outside]
        fam = self.family
        c = float(self.params.get("c", 1.0))
        scale = float(self.params.get("scale", 1.0))
        if fam is Family.GAUSSIAN_GAPLESS:
            p = float(self.params.get("p", 2.0))
            out[outside] = c * x**p * np.exp(-((x / scale) ** 2)) / SQRT_PI
        elif fam is Family.GAUSSIAN_GAP:
            out[outside] = c * (x**2 - self.nu0**2) * np.exp(-((x / scale) ** 2)) / SQRT_PI
        else:
            out[outside] = self._a_hat_other(x) ** 2
        return out

    def a_hat(self, nu) -> np.ndarray:
        nu = np.abs(np.asarray(nu, dtype=float))
        if self.family in (Family.TABULATED, Family.KLEIN_GORDON):
            out = np.zeros_like(nu)
            outside = nu > self.nu0
            if np.any(outside):
                out[outside] = self._a_hat_other(nu[outside])
            return out
        return np.sqrt(self.a_hat_sq(nu))

    def _a_hat_other(self, x: np.ndarray) -> np.ndarray:
        if self.family is Family.KLEIN_GORDON:
            return np.asarray(self.evaluator(x), dtype=float)
        tnu, ta = self.table
        if np.any(x < tnu[0]) or np.any(x > tnu[-1]):
            raise SpectrumDomainError(
                f"tabulated spectrum queried outside [{tnu[0]}, {tnu[-1]}]"
            )
        if self.interp == "linear":
            return np.interp(x, tnu, ta)
        return interpolate.PchipInterpolator(tnu, ta)(x)


def a_hat_eval(spec: BathSpectrum, nu):
    """Coupling density at ``nu`` (scalar in, float out)."""
    out = spec.a_hat(nu)
    return float(out) if np.ndim(out) == 0 else out


def gaussian_gapless(c: float = 1.0, p: float = 2.0, scale: float = 1.0) -> BathSpectrum:
    return BathSpectrum(Family.GAUSSIAN_GAPLESS, 0.0, {"c": c, "p": p, "scale": scale})


def gaussian_gap(nu0: float = 1.0, c: float = 1.0, scale: float = 1.0) -> BathSpectrum:
    return BathSpectrum(Family.GAUSSIAN_GAP, nu0, {"c": c, "scale": scale})


def zero_spectrum(nu0: float = 0.0) -> BathSpectrum:
    """Decoupled bath (a_hat identically zero)."""
    return BathSpectrum(Family.GAUSSIAN_GAPLESS, nu0, {"c": 0.0})


def read_table(path, nu0: float = 0.0, interp: str = "linear") -> BathSpectrum:
    """Load a tabulated spectrum from a two-column CSV file (nu, a_hat).

    A header line is skipped if its first field is not numeric.
    """
    rows = []
    with open(Path(path), newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if i == 0:
                    continue
                raise
    arr = np.array(rows, dtype=float)
    return BathSpectrum(Family.TABULATED, nu0, {}, (arr[:, 0], arr[:, 1]), interp)


# --- quadrature ---------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureSpec:
    """How spectral integrals over (nu0, inf) are truncated and evaluated.

    ``rule`` is ``"gauss_legendre"`` (composite, with an error estimate from
    panel doubling) or ``"adaptive"`` (QUADPACK via scipy).
    """

    rule: str = "gauss_legendre"
    panels: int = 64
    order: int = 8
    max_subdivisions: int = 500
    nu_max: float = 8.0
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10

    def __post_init__(self):
        if self.rule not in ("gauss_legendre", "adaptive"):
            raise ValueError(f"unknown quadrature rule {self.rule!r}")
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.panels < 1 or self.order < 1:
            raise ValueError("panels and order must be positive")

    def check(self, spec: BathSpectrum) -> None:
        if not self.nu_max > spec.nu0:
            raise ValueError(f"nu_max={self.nu_max} must exceed nu0={spec.nu0}")


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error: float
    tail: float = 0.0
    warning: Optional[str] = None

    def __float__(self):
        return float(self.value)


def _upper(spec: BathSpectrum, quad: QuadratureSpec) -> float:
    quad.check(spec)
    return min(quad.nu_max, spec.support_end)


def _tail(spec: BathSpectrum, bound: Callable[[np.ndarray], np.ndarray], b: float,
          quad: QuadratureSpec) -> float:
    """Magnitude of the half-line integral beyond the cutoff ``b``."""
    if spec.family is Family.TABULATED:
        # data end at b; use the last panel as the size of what is missing
        a = max(spec.nu0, b - (b - spec.nu0) / quad.panels)
        nodes, weights = composite_gauss_legendre(np.array([a, b]), quad.order)
        return float(abs(weights @ bound(nodes)))
    if math.isinf(spec.support_end) and b < 60.0 * float(spec.params.get("scale", 1.0)) + 60.0:
        with warnings.catch_warnings():
            # a negligible tail can trip the round-off detector; its size is what matters
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(lambda x: float(bound(np.array([x]))[0]), b, np.inf, limit=200)
        return abs(val) + err
    return 0.0


def _check(res_value, err, quad: QuadratureSpec, what: str):
    tol = np.maximum(quad.abs_tol, quad.rel_tol * np.abs(res_value))
    if np.any(~np.isfinite(res_value)) or np.any(err > tol):
        worst = float(np.max(err - tol)) if np.all(np.isfinite(err)) else math.inf
        raise QuadratureDivergenceError(
            f"{what}: quadrature error estimate exceeds tolerance by {worst:.3g}"
        )


def _gl_pair(integrand, a: float, b: float, panels: int, order: int):
    """Half-line integral with a coarse and a refined composite rule."""
    out = []
    for p, grade in ((panels, _GRADE_COARSE), (2 * panels, _GRADE_FINE)):
        edges = panel_edges(a, b, p, grade)
        nodes, weights = composite_gauss_legendre(edges, order)
        out.append(weights @ integrand(nodes))
    return out


def spectral_integral(spec: BathSpectrum, kernel: Callable[[np.ndarray], np.ndarray],
                      quad: QuadratureSpec, *, bound=None, panels: Optional[int] = None,
                      what: str = "spectral integral") -> QuadratureResult:
    """Even-extension integral of ``a^2(nu) * kernel(nu)`` over the real line.

    ``bound`` majorizes |a^2 * kernel| beyond the cutoff and is used for
    the tail estimate; by default the integrand itself is used.
    """
    a = spec.nu0
    b = _upper(spec, quad)

    def integrand(nu):
        return spec.a_hat_sq(nu) * kernel(nu)

    if bound is None:
        bound = lambda nu: np.abs(integrand(nu))  # noqa: E731
    if quad.rule == "gauss_legendre":
        coarse, fine = _gl_pair(integrand, a, b, panels or quad.panels, quad.order)
        value, err = 2.0 * fine, 2.0 * abs(fine - coarse)
    else:
        val, err = integrate.quad(
            lambda x: float(integrand(np.array([x]))[0]), a, b,
            epsabs=quad.abs_tol / 10, epsrel=quad.rel_tol / 10, limit=quad.max_subdivisions,
        )
        value, err = 2.0 * val, 2.0 * err
    tail = 2.0 * _tail(spec, bound, b, quad)
    err = err + tail + 1e-15 * abs(value)
    _check(value, err, quad, what)
    return QuadratureResult(float(value), float(err), float(tail))


# --- functionals --------------------------------------------------------------


def integral_a_sq(spec: BathSpectrum, quad: QuadratureSpec = QuadratureSpec(),
                  full_output: bool = False):
    """int a^2 dnu, the first integral of the integrability hypothesis."""
    res = spectral_integral(spec, np.ones_like, quad, what="int a^2")
    return res if full_output else res.value


def compute_K(spec: BathSpectrum, quad: QuadratureSpec = QuadratureSpec(),
              full_output: bool = False):
    """Dissipation constant K = int a^2(nu) / nu^2 dnu.

    Raises QuadratureDivergenceError when the estimate does not settle,
    which is how a non-integrable density (e.g. a(0) != 0) is reported.
    """
    res = spectral_integral(spec, lambda nu: 1.0 / nu**2, quad, what="K")
    return res if full_output else res.value


def w_time(spec: BathSpectrum, tau, quad: QuadratureSpec = QuadratureSpec(),
           full_output: bool = False, chunk: int = 2048):
    """Memory kernel w(tau) = int a^2(nu) sin(nu tau) / nu dnu.

    Vectorized over ``tau``.  With the Gauss-Legendre rule the panel count
    is raised so that each panel spans at most two radians of the fastest
    oscillation.
    """
    tau_arr = np.atleast_1d(np.asarray(tau, dtype=float))
    sign = np.sign(tau_arr)
    t_abs = np.abs(tau_arr)
    b = _upper(spec, quad)
    a = spec.nu0
    values = np.zeros_like(t_abs)
    errors = np.zeros_like(t_abs)
    tail = 2.0 * _tail(spec, lambda nu: spec.a_hat_sq(nu) / nu, b, quad)
    nz = t_abs > 0
    if quad.rule == "gauss_legendre" and np.any(nz):
        panels = max(quad.panels, int(math.ceil((b - a) * t_abs.max() / 2.0)))
        rules = []
        for p, grade in ((panels, _GRADE_COARSE), (2 * panels, _GRADE_FINE)):
            nodes, weights = composite_gauss_legendre(panel_edges(a, b, p, grade), quad.order)
            rules.append((nodes, weights * spec.a_hat_sq(nodes) / nodes))
        idx = np.flatnonzero(nz)
        for start in range(0, idx.size, chunk):
            sl = idx[start:start + chunk]
            (n1, c1), (n2, c2) = rules
            q1 = c1 @ np.sin(np.outer(n1, t_abs[sl]))
            q2 = c2 @ np.sin(np.outer(n2, t_abs[sl]))
            values[sl] = 2.0 * q2
            errors[sl] = 2.0 * np.abs(q2 - q1)
    elif np.any(nz):
        for i in np.flatnonzero(nz):
            val, err = integrate.quad(
                lambda x: float(spec.a_hat_sq(np.array([x]))[0] / x), a, b,
                weight="sin", wvar=t_abs[i],
                epsabs=quad.abs_tol / 10, epsrel=quad.rel_tol / 10, limit=quad.max_subdivisions,
            )
            values[i], errors[i] = 2.0 * val, 2.0 * err
    errors[nz] += tail + 1e-15 * np.abs(values[nz])
    _check(values, errors, quad, "w(tau)")
    values = sign * values
    if np.ndim(tau) == 0:
        out = QuadratureResult(float(values[0]), float(errors[0]), tail)
        return out if full_output else out.value
    return (values, errors) if full_output else values


def w_diamond_gap(spec: BathSpectrum, nu: float, quad: QuadratureSpec = QuadratureSpec(),
                  full_output: bool = False, guard: float = EDGE_GUARD):
    """Gap kernel int a^2(l) / (l^2 - nu^2) dl for |nu| <= nu0.

    Equals K at nu = 0 and is even and nondecreasing in |nu| on the gap.
    Within ``guard * nu0`` of the edge a ConditioningWarning is issued and
    recorded on the result.
    """
    nu = float(nu)
    nu0 = spec.nu0
    if nu0 == 0.0:
        if nu != 0.0:
            raise SpectrumDomainError("gapless spectrum: gap kernel only defined at nu = 0")
    elif abs(nu) > nu0:
        raise SpectrumDomainError(f"|nu|={abs(nu)} outside the gap [0, {nu0}]")
    note = None
    if nu0 > 0 and nu0 - abs(nu) < guard * nu0:
        note = f"|nu| within {guard:g}*nu0 of the gap edge; quadrature poorly conditioned"
        warnings.warn(note, ConditioningWarning, stacklevel=2)
    nu2 = nu * nu
    res = spectral_integral(spec, lambda lam: 1.0 / (lam**2 - nu2), quad,
                            what="gap kernel")
    res = QuadratureResult(res.value, res.error, res.tail, note)
    return res if full_output else res.value


def phi(spec: BathSpectrum, v: float, nu: float, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Secular function -nu^2 + v - w_diamond_gap(nu) on the gap."""
    return -nu * nu + v - w_diamond_gap(spec, nu, quad)


def find_lambda0(spec: BathSpectrum, v: float, tol: float = 1e-12,
                 quad: QuadratureSpec = QuadratureSpec(), guard: float = EDGE_GUARD) -> Optional[float]:
    """Eigenfrequency inside the gap, or None when decay is predicted.

    ``phi`` is decreasing on the gap, so a root exists iff phi just below
    the edge is negative; it is found by bisection until the bracket is
    narrower than ``tol`` and |phi| <= tol * max(1, v).
    """
    K = compute_K(spec, quad)
    if not v - K > 0:
        raise PreconditionError(f"v - K = {v - K:.6g} <= 0: energy not positive definite")
    if spec.nu0 == 0.0:
        return None
    lo, hi = 0.0, spec.nu0 * (1.0 - guard)
    f_lo = phi(spec, v, lo, quad)
    f_hi = phi(spec, v, hi, quad)
    if f_hi >= 0.0:
        return None
    ftol = tol * max(1.0, v)
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = phi(spec, v, mid, quad)
        if (hi - lo) <= tol and abs(f_mid) <= ftol:
            break
        if f_mid == 0.0 or hi - lo <= 4 * np.finfo(float).eps * max(hi, 1.0):
            break
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return float(mid)


# --- Klein-Gordon thermostat --------------------------------------------------


def _s_of_nu(nu: np.ndarray, m0: float) -> np.ndarray:
    return np.sqrt(np.maximum(nu * nu - m0 * m0, 0.0))


@dataclass(frozen=True)
class AbsGaussDensity:
    """rho0(s) = amplitude * |s| * exp(-(s/scale)^2)."""

    amplitude: float = 1.0
    scale: float = 1.0

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return self.amplitude * np.abs(s) * np.exp(-((s / self.scale) ** 2))


@dataclass(frozen=True)
class GaussDensity:
    """rho0(s) = amplitude * exp(-(s/scale)^2)."""

    amplitude: float = 1.0
    scale: float = 1.0

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return self.amplitude * np.exp(-((s / self.scale) ** 2))


@dataclass(frozen=True)
class PowerGaussCoupling:
    """kappa(nu) = c * |s|^p * exp(-(s/scale)^2), s^2 = nu^2 - m0^2, zero in the gap."""

    m0: float
    c: float = 1.0
    p: float = 1.5
    scale: float = 1.0

    def __call__(self, nu):
        nu = np.abs(np.asarray(nu, dtype=float))
        s = _s_of_nu(nu, self.m0)
        out = self.c * s**self.p * np.exp(-((s / self.scale) ** 2))
        return np.where(nu > self.m0, out, 0.0)


@dataclass(frozen=True)
class KleinGordonThermostat:
    """Bath obtained from the 1-d Klein-Gordon field by nu^2 = m0^2 + s^2."""

    rho0: Callable
    m0: float
    kappa: Callable

    def rho(self, nu):
        nu = np.abs(np.asarray(nu, dtype=float))
        out = np.zeros_like(nu)
        ok = nu > self.m0
        if np.any(ok):
            x = nu[ok]
            root = np.sqrt(1.0 - (self.m0 / x) ** 2)
            out[ok] = self.rho0(x * root) / root
        return out

    def a_hat(self, nu):
        nu = np.abs(np.asarray(nu, dtype=float))
        out = np.zeros_like(nu)
        ok = nu > self.m0
        if np.any(ok):
            k = np.asarray(self.kappa(nu[ok]), dtype=float)
            r = self.rho(nu[ok])
            with np.errstate(divide="ignore", invalid="ignore"):
                # both factors underflow far out; kappa is the faster one by assumption
                out[ok] = np.where(r > 0, k / np.sqrt(np.where(r > 0, r, 1.0)), 0.0)
        return out

    def moment_nu(self, g: Callable, upper: float = np.inf) -> float:
        """int_{m0}^{upper} rho(nu) g(nu) dnu (half line)."""
        f = lambda x: float(self.rho(np.array([x]))[0] * g(x))  # noqa: E731
        val, _ = integrate.quad(f, self.m0, upper, epsabs=0.0, epsrel=1e-13, limit=400)
        return val

    def moment_s(self, g: Callable, upper: float = np.inf) -> float:
        """int_0^{upper} rho0(s) g(sqrt(s^2 + m0^2)) ds (half line)."""
        f = lambda s: float(np.asarray(self.rho0(np.array([s])))[0] * g(math.hypot(s, self.m0)))  # noqa: E731
        val, _ = integrate.quad(f, 0.0, upper, epsabs=0.0, epsrel=1e-13, limit=400)
        return val


def kg_spectrum(rho0: Callable, m0: float, kappa: Callable, nu_check: float = 10.0,
                samples: int = 2001) -> BathSpectrum:
    """Reduce a Klein-Gordon thermostat to its coupling density.

    Raises SupportViolationError if ``kappa`` is nonzero inside the gap,
    checked on a sample grid of ``[0, m0]``.
    """
    if m0 < 0:
        raise ValueError("m0 must be non-negative")
    if m0 > 0:
        grid = np.linspace(0.0, m0, samples)
        inside = np.asarray(kappa(grid), dtype=float)[grid < m0]
        if np.any(inside != 0.0):
            raise SupportViolationError("kappa must vanish on the gap |nu| < m0")
    thermo = KleinGordonThermostat(rho0, float(m0), kappa)
    s = np.linspace(1e-6, nu_check, 257)
    if np.any(np.asarray(rho0(s)) <= 0):
        raise ValueError("rho0 must be positive for s != 0")
    return BathSpectrum(Family.KLEIN_GORDON, float(m0), {"m0": float(m0)},
                        evaluator=thermo.a_hat)


# --- oscillator ---------------------------------------------------------------


@dataclass(frozen=True)
class OscillatorModel:
    """Polynomial potential V0 and coupling function f.

    Coefficients are in ascending order: ``V0 = sum_k V0_coeffs[k] x^k``.
    """

    V0_coeffs: tuple = (0.0, 0.0, 1.0)
    f_coeffs: tuple = (0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "V0_coeffs", tuple(float(c) for c in np.trim_zeros(
            np.asarray(self.V0_coeffs, dtype=float), "b")) or (0.0,))
        object.__setattr__(self, "f_coeffs", tuple(float(c) for c in np.trim_zeros(
            np.asarray(self.f_coeffs, dtype=float), "b")) or (0.0,))

    @classmethod
    def linear(cls, v: float) -> "OscillatorModel":
        return cls((0.0, 0.0, 0.5 * v))

    @property
    def V0(self) -> np.polynomial.Polynomial:
        return np.polynomial.Polynomial(self.V0_coeffs)

    @property
    def f(self) -> np.polynomial.Polynomial:
        return np.polynomial.Polynomial(self.f_coeffs)

    @property
    def v(self) -> float:
        """V0''(0)."""
        return 2.0 * self.V0_coeffs[2] if len(self.V0_coeffs) > 2 else 0.0

    @property
    def f_is_identity(self) -> bool:
        return self.f_coeffs == (0.0, 1.0)

    @property
    def is_linear(self) -> bool:
        """V0 = v x^2 / 2 (up to a constant) and f(x) = x."""
        c = self.V0_coeffs
        return self.f_is_identity and len(c) == 3 and c[1] == 0.0

    def effective_potential(self, K: float) -> np.polynomial.Polynomial:
        return self.V0 - 0.5 * K * self.f**2


def effective_critical_points(osc: OscillatorModel, K: float, tol: float = 1e-9) -> list[float]:
    """Real roots of V0'(x) - K x, sorted ascending (requires f(x) = x)."""
    if not osc.f_is_identity:
        raise PreconditionError("critical points of the effective potential need f(x) = x")
    g = osc.V0.deriv() - np.polynomial.Polynomial([0.0, K])
    g = np.polynomial.Polynomial(np.trim_zeros(g.coef, "b") if np.any(g.coef) else [0.0])
    if g.degree() < 1:
        return []
    dg = g.deriv()
    roots = []
    for r in g.roots():
        if abs(r.imag) > 1e-7 * max(1.0, abs(r)):
            continue
        x = float(r.real)
        for _ in range(4):
            d = dg(x)
            if d == 0:
                break
            x -= g(x) / d
        roots.append(float(x))
    roots.sort()
    out: list[float] = []
    for x in roots:
        if not out or abs(x - out[-1]) > tol * max(1.0, abs(x)):
            out.append(0.0 if abs(x) < 1e-14 else x)
    return out


# --- hypothesis checks --------------------------------------------------------


@dataclass
class HypothesisCheck:
    name: str
    passed: Optional[bool]
    detail: str

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass
class HypothesisReport:
    checks: list[HypothesisCheck]

    @property
    def all_passed(self) -> bool:
        return all(c.passed is not False for c in self.checks)

    def __getitem__(self, name: str) -> HypothesisCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {"all_passed": self.all_passed, "checks": [c.to_dict() for c in self.checks]}


def validate_hypotheses(spec: BathSpectrum, osc: OscillatorModel,
                        quad: QuadratureSpec = QuadratureSpec(), samples: int = 17) -> HypothesisReport:
    """Machine checks of the standing hypotheses; failures are reported, never raised.

    Checks
    ------
    integrability       int a^2 and K converge
    regular_at_zero     a(0) = 0 and a^2(nu)/nu -> 0, so w(0) = 0
    bounded_below       effective potential bounded below (leading coefficient)
    positive_stiffness  v - K > 0 for a linear oscillator (None otherwise)
    gap_structure       a > 0 outside the gap, gap kernel nondecreasing on it
    """
    checks = []
    K = None
    try:
        ia = integral_a_sq(spec, quad)
        K = compute_K(spec, quad)
        checks.append(HypothesisCheck("integrability", True, f"int a^2 = {ia:.12g}, K = {K:.12g}"))
    except Exception as exc:  # report carries the failure
        checks.append(HypothesisCheck("integrability", False, f"integral did not converge: {exc}"))

    eps = 1e-6
    a0 = float(spec.a_hat(0.0))
    w_small = float(spec.a_hat_sq(eps) / eps)
    ok5 = a0 == 0.0 and w_small < 1e-4
    checks.append(HypothesisCheck(
        "regular_at_zero", ok5, f"a(0) = {a0:.3g}, a^2(nu)/nu at nu={eps:g}: {w_small:.3g}"))

    if K is None:
        checks.append(HypothesisCheck("bounded_below", False, "K unavailable"))
    else:
        V = osc.effective_potential(K)
        coef = np.trim_zeros(V.coef, "b")
        deg = len(coef) - 1
        f_bounded = len(osc.f_coeffs) <= 1
        ok3 = f_bounded or (deg >= 2 and deg % 2 == 0 and coef[-1] > 0)
        if osc.is_linear:
            ok3 = osc.v - K > 0
        checks.append(HypothesisCheck(
            "bounded_below", bool(ok3), f"effective potential degree {deg}, leading coefficient "
            f"{coef[-1] if deg >= 0 else 0.0:.6g}"))

    if osc.is_linear:
        if K is None:
            checks.append(HypothesisCheck("positive_stiffness", False, "K unavailable"))
        else:
            checks.append(HypothesisCheck(
                "positive_stiffness", osc.v - K > 0, f"v - K = {osc.v - K:.12g}"))
    else:
        checks.append(HypothesisCheck("positive_stiffness", None, "oscillator is not linear"))

    # gap structure: vanishing on the gap, positivity outside, monotone gap kernel.
    nu0 = spec.nu0
    b = min(quad.nu_max, spec.support_end)
    outside = np.linspace(nu0, b, samples + 1)[1:-1]
    pos = bool(np.all(spec.a_hat(outside) > 0))
    detail = f"a > 0 at {samples - 1} samples of (nu0, nu_max): {pos}"
    ok_gap = pos
    if nu0 > 0 and K is not None:
        grid = np.linspace(0.0, nu0 * (1 - 2 * EDGE_GUARD), samples)
        try:
            wd = np.array([w_diamond_gap(spec, x, quad) for x in grid])
            mono = bool(np.all(np.diff(wd) >= -1e-12 * max(1.0, abs(wd).max())))
            detail += f"; gap kernel nondecreasing on [0, nu0): {mono}"
            ok_gap = ok_gap and mono
        except Exception as exc:
            detail += f"; gap kernel failed: {exc}"
            ok_gap = False
    checks.append(HypothesisCheck("gap_structure", ok_gap, detail))
    return HypothesisReport(checks)
