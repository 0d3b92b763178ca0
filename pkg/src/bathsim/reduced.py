"""Reduced memory-kernel equation for the oscillator alone.

    x'' = -V0'(x) + f'(x) [ int_0^t w(t - s) f(x(s)) ds + F0(t) ]

where ``w`` is the bath memory kernel and ``F0`` the force produced by the
free motion of the bath initial data.  For a finite bath this is an exact
rewriting of the full system; for a continuum spectrum it is the limit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .discretize import BathInitialData, DiscreteBath, discrete_kernel
from .dynamics import TrajectoryRecord, _deriv, _horner
from .errors import IntegrationError
from .spectrum import BathSpectrum, QuadratureSpec, w_time
from .spectrum import OscillatorModel


@dataclass(frozen=True)
class MemoryKernel:
    """Kernel samples ``w(k dt)`` for k = 0 .. T/dt."""

    dt: float
    samples: np.ndarray
    source: str
    error: float = 0.0

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        s[0] = 0.0
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def T(self) -> float:
        return self.dt * (self.samples.size - 1)

    @property
    def tau(self) -> np.ndarray:
        return self.dt * np.arange(self.samples.size)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau", "w"])
            for t, v in zip(self.tau, self.samples):
                w.writerow([f"{t:.17g}", f"{v:.17g}"])


def build_kernel(source: Union[BathSpectrum, DiscreteBath], dt: float, T: float,
                 quad: Optional[QuadratureSpec] = None) -> MemoryKernel:
    """Tabulate w on the time grid, from a continuum spectrum or a finite bath."""
    if dt <= 0 or T <= 0:
        raise ValueError("dt and T must be positive")
    n = int(round(T / dt))
    tau = dt * np.arange(n + 1)
    if isinstance(source, DiscreteBath):
        return MemoryKernel(dt, discrete_kernel(source, tau), "discrete")
    values, errors = w_time(source, tau, quad or QuadratureSpec(), full_output=True)
    return MemoryKernel(dt, values, "continuum", float(np.max(errors)))


class FluctuatingForce:
    """Bath force generated by the free evolution of the initial data.

    F0(t) = sum w_j a_j (eta0_j cos nu_j t + etadot0_j sin(nu_j t) / nu_j)
    """

    def __init__(self, data: Optional[BathInitialData], bath: Optional[DiscreteBath]):
        self.data = data
        self.bath = bath
        self.is_zero = data is None or data.is_zero
        if not self.is_zero:
            wa = bath.weights * bath.couplings
            self._c = wa * data.eta0
            self._s = wa * data.etadot0 / bath.nodes
            self._nu = bath.nodes

    @classmethod
    def zero(cls) -> "FluctuatingForce":
        return cls(None, None)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.is_zero:
            return np.zeros(t.shape) if t.ndim else 0.0
        flat = np.atleast_1d(t).ravel()
        out = np.empty(flat.shape)
        for start in range(0, flat.size, 4096):
            sl = slice(start, start + 4096)
            ph = np.outer(flat[sl], self._nu)
            out[sl] = np.cos(ph) @ self._c + np.sin(ph) @ self._s
        return out.reshape(t.shape) if t.ndim else float(out[0])

    @property
    def bound(self) -> float:
        """sup_t |F0(t)| <= sum |w a| sqrt(eta0^2 + (etadot0/nu)^2)."""
        if self.is_zero:
            return 0.0
        return float(np.sum(np.hypot(self._c, self._s)))


def fluct_force(data: BathInitialData, bath: DiscreteBath, t):
    return FluctuatingForce(data, bath)(t)


def gle_run(osc: OscillatorModel, kernel: MemoryKernel, force: Optional[FluctuatingForce],
            x0: float, p0: float, dt: float, T: float, sample_stride: int = 1) -> TrajectoryRecord:
    """Integrate the memory-kernel equation.

    The memory integral uses the trapezoid rule on the step grid.  Since
    w(0) = 0 the newest position does not enter it, so each step is an
    explicit position predictor followed by a velocity corrector with the
    averaged old and new accelerations (second order overall).

    The record uses the trajectory column layout; ``E_total`` holds the
    oscillator energy p^2/2 + V0(x) and ``E_bath`` is NaN.
    """
    if abs(kernel.dt - dt) > 1e-12 * dt:
        raise ValueError(f"kernel dt {kernel.dt} does not match integration dt {dt}")
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * T:
        raise ValueError("T must be an integer multiple of dt")
    if kernel.samples.size < n + 1:
        raise ValueError(f"kernel covers [0, {kernel.T:g}], need [0, {T:g}]")
    force = force or FluctuatingForce.zero()
    f_c, dV_c, df_c, V_c = osc.f_coeffs, _deriv(osc.V0_coeffs), _deriv(osc.f_coeffs), osc.V0_coeffs

    L = kernel.samples.size
    wr = kernel.samples[::-1].copy()  # wr[L-1-j] = w[j]
    w = kernel.samples
    F0 = np.asarray(force(dt * np.arange(n + 1)), dtype=float)
    fh = np.empty(n + 1)
    x_arr = np.empty(n + 1)
    p_arr = np.empty(n + 1)
    phi_arr = np.empty(n + 1)

    def memory(m):
        # dt * (w_m f_0 / 2 + sum_{k=1}^{m-1} w_{m-k} f_k); the k = m term has w_0 = 0
        if m == 0:
            return 0.0
        acc = 0.5 * w[m] * fh[0]
        if m > 1:
            acc += float(np.dot(wr[L - m:L - 1], fh[1:m]))
        return dt * acc

    x, p = float(x0), float(p0)
    fh[0] = _horner(f_c, x)
    phi = F0[0]
    acc = -_horner(dV_c, x) + _horner(df_c, x) * phi
    x_arr[0], p_arr[0], phi_arr[0] = x, p, phi
    for m in range(1, n + 1):
        x = x + dt * p + 0.5 * dt * dt * acc
        fh[m] = _horner(f_c, x)
        phi = memory(m) + F0[m]
        acc_new = -_horner(dV_c, x) + _horner(df_c, x) * phi
        p = p + 0.5 * dt * (acc + acc_new)
        acc = acc_new
        x_arr[m], p_arr[m], phi_arr[m] = x, p, phi
        if not math.isfinite(x) or not math.isfinite(p):
            raise IntegrationError(f"non-finite state at t = {m * dt:g}")

    idx = np.arange(0, n + 1, sample_stride)
    xs, ps = x_arr[idx], p_arr[idx]
    V0 = np.polynomial.polynomial.polyval(xs, np.asarray(V_c))
    return TrajectoryRecord(
        idx * dt, xs, ps, fh[idx], phi_arr[idx], 0.5 * ps**2 + V0, np.full(idx.size, np.nan),
        dt=dt, psi_dense=fh,
        meta={"engine": "gle", "dt": dt, "T": T, "kernel_source": kernel.source,
              "kernel_error": kernel.error, "sample_stride": sample_stride})
