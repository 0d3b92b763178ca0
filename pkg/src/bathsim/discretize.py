"""Finite-mode stand-in for a continuum bath."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import PreconditionError
from .quadrature import composite_gauss_legendre, panel_edges
from .spectrum import EDGE_GUARD, BathSpectrum, QuadratureSpec


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DiscreteBath:
    """Harmonic modes with quadrature weights and couplings.

    ``weights`` already include the factor 2 of the even extension, so a
    spectral integral int a^2 g dnu is approximated by sum(w * a^2 * g(nu)).
    """

    nodes: np.ndarray
    weights: np.ndarray
    couplings: np.ndarray
    nu0: float = 0.0

    def __post_init__(self):
        nodes, weights, couplings = (_frozen(x) for x in (self.nodes, self.weights, self.couplings))
        if not (nodes.ndim == 1 and nodes.shape == weights.shape == couplings.shape):
            raise ValueError("nodes, weights and couplings must be 1-d of equal length")
        if nodes.size and (np.any(np.diff(nodes) <= 0) or nodes[0] <= self.nu0):
            raise ValueError("nodes must be strictly increasing and above nu0")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "couplings", couplings)

    def __len__(self):
        return self.nodes.size

    @property
    def N(self) -> int:
        return self.nodes.size

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["nu", "weight", "a_hat"])
            for row in zip(self.nodes, self.weights, self.couplings):
                w.writerow([f"{x:.17g}" for x in row])

    @classmethod
    def from_csv(cls, path, nu0: float = 0.0) -> "DiscreteBath":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], data[:, 2], nu0)


def sample_modes(spec: BathSpectrum, quad: QuadratureSpec, N: int,
                 order: Optional[int] = None) -> DiscreteBath:
    """Composite Gauss-Legendre modes on [nu0, nu_max].

    ``N`` must be a multiple of the per-panel order (``quad.order`` unless
    given); weights are doubled for the even extension.
    """
    if N < 2:
        raise ValueError("need at least two modes")
    quad.check(spec)
    order = min(order or quad.order, N)
    if N % order:
        raise ValueError(f"N={N} is not a multiple of the panel order {order}")
    b = min(quad.nu_max, spec.support_end)
    nodes, weights = composite_gauss_legendre(panel_edges(spec.nu0, b, N // order), order)
    return DiscreteBath(nodes, 2.0 * weights, spec.a_hat(nodes), spec.nu0)


def discrete_K(bath: DiscreteBath) -> float:
    """Discrete dissipation constant sum w a^2 / nu^2."""
    return float(np.sum(bath.weights * bath.couplings**2 / bath.nodes**2))


def discrete_kernel(bath: DiscreteBath, tau) -> np.ndarray:
    """Memory kernel of the finite bath, sum w a^2 sin(nu tau) / nu."""
    tau = np.asarray(tau, dtype=float)
    c = bath.weights * bath.couplings**2 / bath.nodes
    out = np.empty(tau.shape)
    flat = tau.ravel()
    res = out.reshape(-1)
    for start in range(0, flat.size, 4096):
        sl = slice(start, start + 4096)
        res[sl] = np.sin(np.outer(flat[sl], bath.nodes)) @ c
    return out


def recurrence_time(bath: DiscreteBath) -> float:
    """Horizon 2 pi / min spacing after which the finite bath re-feeds energy."""
    if bath.N < 2:
        raise ValueError("need at least two modes")
    return 2.0 * math.pi / float(np.min(np.diff(bath.nodes)))


def secular_function(bath: DiscreteBath, v: float, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    c = bath.weights * bath.couplings**2
    return v - lam**2 - np.sum(c / (bath.nodes**2 - lam[..., None] ** 2), axis=-1)


def secular_lambda0(bath: DiscreteBath, v: float, tol: float = 1e-12,
                    guard: float = EDGE_GUARD) -> Optional[float]:
    """Isolated eigenfrequency below the lowest mode, or None.

    The secular function is decreasing on [0, min nu), so the smallest
    root is bracketed by bisection on [0, (1 - guard) * min nu].
    """
    Kd = discrete_K(bath)
    if not v - Kd > 0:
        raise PreconditionError(f"v - K = {v - Kd:.6g} <= 0: energy not positive definite")
    lo, hi = 0.0, float(bath.nodes[0]) * (1.0 - guard)
    s_hi = float(secular_function(bath, v, hi))
    if s_hi > 0.0:
        return None
    ftol = tol * max(1.0, v)
    mid = lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        s = float(secular_function(bath, v, mid))
        if (hi - lo) <= tol and abs(s) <= ftol:
            break
        if s == 0.0 or hi - lo <= 4 * np.finfo(float).eps * max(hi, 1.0):
            break
        if s > 0:
            lo = mid
        else:
            hi = mid
    return float(mid)


def gaussian_envelope(scale: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    return lambda nu: np.exp(-((np.asarray(nu) / scale) ** 2))


@dataclass(frozen=True)
class BathInitialData:
    """Per-mode initial positions and velocities in eta = sqrt(rho) xi variables."""

    eta0: np.ndarray
    etadot0: np.ndarray
    kind: str = "zero"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "eta0", _frozen(self.eta0))
        object.__setattr__(self, "etadot0", _frozen(self.etadot0))
        if self.eta0.shape != self.etadot0.shape:
            raise ValueError("eta0 and etadot0 must have equal length")

    def eta_bullet(self, bath: DiscreteBath) -> np.ndarray:
        """i nu eta0 + etadot0, the complex amplitude of the free motion."""
        return 1j * bath.nodes * self.eta0 + self.etadot0

    def energy(self, bath: DiscreteBath) -> float:
        """Discrete bath energy sum w (etadot0^2 + nu^2 eta0^2)."""
        return float(np.sum(bath.weights * (self.etadot0**2 + bath.nodes**2 * self.eta0**2)))

    @property
    def is_zero(self) -> bool:
        return not (np.any(self.eta0) or np.any(self.etadot0))


def bath_initial(bath: DiscreteBath, kind: str = "zero", seed: Optional[int] = None,
                 temperature: float = 1.0,
                 envelope: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> BathInitialData:
    """Zero or thermal-like bath initial data.

    Thermal data draw each mode energy nu^2 eta0^2 + etadot0^2 from an
    exponential law with mean ``temperature * envelope(nu)`` and a uniform
    phase.  The envelope keeps the total energy finite.
    """
    n = bath.N
    if kind == "zero":
        return BathInitialData(np.zeros(n), np.zeros(n), "zero")
    if kind != "thermal":
        raise ValueError(f"unknown bath initial kind {kind!r}")
    if not temperature > 0:
        raise PreconditionError("thermal data need temperature > 0")
    env = envelope or gaussian_envelope()
    rng = np.random.default_rng(seed)
    mean = temperature * np.asarray(env(bath.nodes), dtype=float)
    energy = rng.exponential(1.0, n) * mean
    phase = rng.uniform(0.0, 2.0 * np.pi, n)
    amp = np.sqrt(energy)
    return BathInitialData(amp * np.cos(phase) / bath.nodes, amp * np.sin(phase), "thermal",
                           {"temperature": temperature, "seed": seed})
