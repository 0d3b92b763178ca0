"""Full oscillator + finite bath integration.

State variables are ``(x, p, eta_j, pi_j)`` with ``p = dx/dt`` and
``pi_j = d eta_j/dt``.  Quadrature weights act as mode masses, so the
energy

    E = p^2/2 + V0(x) + 1/2 sum w_j (pi_j^2 + nu_j^2 eta_j^2) - f(x) sum w_j a_j eta_j

is a Riemann sum of the continuum energy, the force on ``x`` is
``f'(x) sum w_j a_j eta_j`` and each mode feels ``a_j f(x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .discretize import BathInitialData, DiscreteBath, bath_initial, discrete_K, recurrence_time
from .errors import IntegrationError, RecurrenceHorizonError
from .quadrature import running_fourier
from .spectrum import OscillatorModel

RECURRENCE_SAFETY = 0.5
MONITOR_FACTOR = 10.0


@dataclass(frozen=True)
class SystemState:
    t: float
    x: float
    p: float
    eta: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        eta = np.array(self.eta, dtype=float)
        pi = np.array(self.pi, dtype=float)
        if eta.shape != pi.shape:
            raise ValueError("eta and pi must have equal length")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "pi", pi)

    @classmethod
    def initial(cls, x0: float, p0: float, init: BathInitialData) -> "SystemState":
        return cls(0.0, float(x0), float(p0), init.eta0, init.etadot0)

    def reversed(self) -> "SystemState":
        """Same configuration with all velocities negated."""
        return replace(self, p=-self.p, pi=-self.pi)

    def distance(self, other: "SystemState") -> float:
        return float(max(abs(self.x - other.x), abs(self.p - other.p),
                         np.max(np.abs(self.eta - other.eta), initial=0.0),
                         np.max(np.abs(self.pi - other.pi), initial=0.0)))

    def scale(self) -> float:
        return float(max(abs(self.x), abs(self.p), np.max(np.abs(self.eta), initial=0.0),
                         np.max(np.abs(self.pi), initial=0.0), 1.0))


class Energy(NamedTuple):
    """Total energy with its decomposition into four non-negative-type terms.

    ``total = kinetic + bath_kinetic + effective_potential + coupled_square``
    where the effective potential is ``V0 - K_d f^2 / 2`` and the last term
    is ``1/2 sum w nu^2 (eta - a f / nu^2)^2``.
    """

    total: float
    kinetic: float
    bath_kinetic: float
    effective_potential: float
    coupled_square: float

    def __float__(self):
        return float(self.total)


def _horner(coeffs: tuple, x: float) -> float:
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _deriv(coeffs: tuple) -> tuple:
    return tuple(k * c for k, c in enumerate(coeffs))[1:] or (0.0,)


def total_energy(state: SystemState, bath: DiscreteBath, osc: OscillatorModel) -> Energy:
    w, a, nu = bath.weights, bath.couplings, bath.nodes
    fx = _horner(osc.f_coeffs, state.x)
    kinetic = 0.5 * state.p**2
    bath_kin = 0.5 * float(np.sum(w * state.pi**2))
    V = _horner(osc.V0_coeffs, state.x) - 0.5 * discrete_K(bath) * fx**2
    square = 0.5 * float(np.sum(w * nu**2 * (state.eta - a * fx / nu**2) ** 2))
    total = (kinetic + _horner(osc.V0_coeffs, state.x)
             + 0.5 * float(np.sum(w * (state.pi**2 + nu**2 * state.eta**2)))
             - fx * float(np.sum(w * a * state.eta)))
    return Energy(total, kinetic, bath_kin, V, square)


def bath_energy(state: SystemState, bath: DiscreteBath) -> float:
    return float(np.sum(bath.weights * (state.pi**2 + bath.nodes**2 * state.eta**2)))


def step_strang(state: SystemState, dt: float, bath: DiscreteBath, osc: OscillatorModel) -> SystemState:
    """One kick-drift-kick step.

    The drift is the exact flow of the quadratic part (free particle plus
    rotation of every mode through angle nu dt); the kicks apply the
    potential and coupling forces with x and eta frozen.  Also valid for
    dt < 0, which undoes a step with +|dt|.
    """
    h = 0.5 * dt
    w, a, nu = bath.weights, bath.couplings, bath.nodes
    dV = _deriv(osc.V0_coeffs)
    df = _deriv(osc.f_coeffs)

    def kick(x, p, eta, pi):
        phi = float(np.dot(w * a, eta))
        p = p + h * (-_horner(dV, x) + _horner(df, x) * phi)
        pi = pi + h * a * _horner(osc.f_coeffs, x)
        return p, pi

    x, eta = state.x, state.eta
    p, pi = kick(x, state.p, eta, state.pi)
    x = x + dt * p
    c, s = np.cos(nu * dt), np.sin(nu * dt)
    eta, pi = eta * c + pi * s / nu, -nu * eta * s + pi * c
    p, pi = kick(x, p, eta, pi)
    return SystemState(state.t + dt, x, p, eta, pi)


@dataclass
class TrajectoryRecord:
    """Sampled observables of a run.

    ``psi_dense`` holds f(x) at every integration step (spacing ``dt``);
    the other arrays are at the sample times ``t``.  ``eta`` and ``pi``
    are per-mode snapshots at the sample times when requested.
    """

    t: np.ndarray
    x: np.ndarray
    p: np.ndarray
    psi: np.ndarray
    phi: np.ndarray
    E_total: np.ndarray
    E_bath: np.ndarray
    dt: float
    psi_dense: Optional[np.ndarray] = None
    eta: Optional[np.ndarray] = None
    pi: Optional[np.ndarray] = None
    final_state: Optional[SystemState] = None
    meta: dict = field(default_factory=dict)
    monitors: dict = field(default_factory=dict)

    COLUMNS = ("t", "x", "p", "psi", "phi", "E_total", "E_bath")

    @property
    def T(self) -> float:
        return float(self.t[-1])

    @property
    def sample_interval(self) -> float:
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else self.dt

    def columns(self) -> np.ndarray:
        return np.column_stack([getattr(self, c) for c in self.COLUMNS])

    def energy_drift(self) -> float:
        """max |E(t) - E(0)| / max(|E(0)|, 1)."""
        E = self.E_total
        return float(np.max(np.abs(E - E[0])) / max(abs(E[0]), 1.0))

    def shifted(self, offset: float) -> "TrajectoryRecord":
        return replace(self, t=self.t + offset)

    def scaled(self, c: float) -> "TrajectoryRecord":
        """Record of a linear system with all initial data multiplied by c."""
        return replace(
            self, x=c * self.x, p=c * self.p, psi=c * self.psi, phi=c * self.phi,
            E_total=c * c * self.E_total, E_bath=c * c * self.E_bath,
            psi_dense=None if self.psi_dense is None else c * self.psi_dense,
            eta=None if self.eta is None else c * self.eta,
            pi=None if self.pi is None else c * self.pi)


def apriori_bounds(E: float, bath: DiscreteBath, osc: OscillatorModel) -> dict:
    """Energy-implied bounds on |psi|, |phi| and the bath energy.

    Constants follow from the boundedness of the effective potential: psi
    stays where V <= E, the coupling force is controlled by Cauchy-Schwarz
    and the bath energy by what is left.
    """
    K = discrete_K(bath)
    V = osc.effective_potential(K)
    crit = [r.real for r in V.deriv().roots() if abs(r.imag) < 1e-9] if V.degree() > 1 else [0.0]
    Vmin = min((V(r) for r in crit), default=0.0)
    E_star = max(E - Vmin, 0.0)
    roots = [r.real for r in (V - E).roots() if abs(r.imag) < 1e-9 * max(1.0, abs(r))]
    if len(roots) >= 2:
        grid = np.linspace(min(roots), max(roots), 2001)
        c1 = float(np.max(np.abs(osc.f(grid))))
    elif V.degree() == 0:
        c1 = math.inf
    else:
        c1 = abs(float(osc.f(0.0)))
    c2 = K * c1 + math.sqrt(2.0 * K * E_star + (K * c1) ** 2)
    c3 = 2.0 * (E_star + c1 * c2)
    return {"psi": c1, "phi": c2, "bath_energy": c3}


def _check_horizon(bath: DiscreteBath, T: float, override: bool, safety: float) -> float:
    t_rec = recurrence_time(bath) if bath.N >= 2 else math.inf
    if not override and T > safety * t_rec:
        raise RecurrenceHorizonError(
            f"T = {T:g} exceeds {safety:g} x recurrence time {t_rec:.6g}; "
            "use override_recurrence_guard for demonstration runs")
    return t_rec


def run(bath: DiscreteBath, osc: OscillatorModel, x0: float, p0: float,
        init: Optional[BathInitialData], dt: float, T: float, sample_stride: int = 1,
        store_modes: bool = False, override_recurrence_guard: bool = False,
        safety: float = RECURRENCE_SAFETY, check_monitors: bool = True,
        start: Optional[SystemState] = None) -> TrajectoryRecord:
    """Integrate the coupled system with the symmetric splitting.

    Raises RecurrenceHorizonError if ``T`` exceeds ``safety`` times the
    recurrence time, and IntegrationError on a non-finite state or when a
    monitored quantity exceeds ten times its a-priori bound.
    """
    if dt <= 0 or T <= 0:
        raise ValueError("dt and T must be positive")
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > 1e-9 * T:
        raise ValueError("T must be an integer multiple of dt")
    if sample_stride < 1:
        raise ValueError("sample_stride must be >= 1")
    t_rec = _check_horizon(bath, T, override_recurrence_guard, safety)
    if start is None:
        if init is None:
            init = bath_initial(bath, "zero")
        start = SystemState.initial(x0, p0, init)

    w, a, nu = bath.weights, bath.couplings, bath.nodes
    h = 0.5 * dt
    f_c, dV_c, df_c = osc.f_coeffs, _deriv(osc.V0_coeffs), _deriv(osc.f_coeffs)
    V_c = osc.V0_coeffs
    g = w * a / nu
    kick = 1j * h * a
    rot = np.exp(-1j * nu * dt)
    # z = nu eta + i pi rotates as z -> z exp(-i nu dt) under the free flow
    z = nu * start.eta + 1j * start.pi
    x, p = start.x, start.p
    t0 = start.t

    n_samples = n_steps // sample_stride + 1
    rec = np.empty((n_samples, 7))
    psi_dense = np.empty(n_steps + 1)
    modes_eta = np.empty((n_samples, bath.N)) if store_modes else None
    modes_pi = np.empty((n_samples, bath.N)) if store_modes else None

    def sample(i, step, x, p, z, phi):
        fx = _horner(f_c, x)
        e_bath = float(np.dot(w, (z * z.conjugate()).real))
        E = 0.5 * p * p + _horner(V_c, x) + 0.5 * e_bath - fx * phi
        rec[i] = (t0 + step * dt, x, p, fx, phi, E, e_bath)
        if store_modes:
            modes_eta[i] = z.real / nu
            modes_pi[i] = z.imag

    phi = float(np.dot(g, z.real))
    fx = _horner(f_c, x)
    psi_dense[0] = fx
    sample(0, 0, x, p, z, phi)
    si = 1
    for step in range(1, n_steps + 1):
        p += h * (-_horner(dV_c, x) + _horner(df_c, x) * phi)
        z += kick * fx
        x += dt * p
        z *= rot
        phi = float(np.dot(g, z.real))
        fx = _horner(f_c, x)
        p += h * (-_horner(dV_c, x) + _horner(df_c, x) * phi)
        z += kick * fx
        psi_dense[step] = fx
        if step % sample_stride == 0:
            if not (math.isfinite(x) and math.isfinite(p)):
                raise IntegrationError(f"non-finite oscillator state at t = {t0 + step * dt:g}")
            sample(si, step, x, p, z, phi)
            si += 1
    if not np.all(np.isfinite(z)):
        raise IntegrationError("non-finite bath state")

    final = SystemState(t0 + n_steps * dt, x, p, z.real / nu, z.imag.copy())
    record = TrajectoryRecord(
        *rec[:si].T, dt=dt, psi_dense=psi_dense,
        eta=None if modes_eta is None else modes_eta[:si],
        pi=None if modes_pi is None else modes_pi[:si],
        final_state=final,
        meta={"engine": "full", "dt": dt, "T": T, "N": bath.N, "sample_stride": sample_stride,
              "recurrence_time": t_rec, "recurrence_guard_overridden": bool(override_recurrence_guard),
              "seed": None if init is None else init.meta.get("seed")},
    )
    record.monitors = evaluate_monitors(record, bath, osc)
    if check_monitors:
        fired = [k for k, m in record.monitors.items() if m["fired"]]
        if fired:
            raise IntegrationError(f"a-priori bound monitors fired: {', '.join(fired)}")
    return record


def evaluate_monitors(record: TrajectoryRecord, bath: DiscreteBath, osc: OscillatorModel) -> dict:
    bounds = apriori_bounds(float(record.E_total[0]), bath, osc)
    observed = {"psi": float(np.max(np.abs(record.psi))),
                "phi": float(np.max(np.abs(record.phi))),
                "bath_energy": float(np.max(record.E_bath))}
    return {k: {"bound": bounds[k], "max": observed[k],
                "fired": bool(observed[k] > MONITOR_FACTOR * bounds[k] + 1e-12)}
            for k in bounds}


def time_reversal_error(bath: DiscreteBath, osc: OscillatorModel, x0: float, p0: float,
                        init: Optional[BathInitialData], dt: float, T: float,
                        override_recurrence_guard: bool = False) -> tuple[float, float]:
    """Forward run, velocity flip, forward run, flip; returns (error, scale)."""
    if init is None:
        init = bath_initial(bath, "zero")
    s0 = SystemState.initial(x0, p0, init)
    kw = dict(sample_stride=max(1, int(round(T / dt))), override_recurrence_guard=override_recurrence_guard,
              check_monitors=False)
    fwd = run(bath, osc, x0, p0, init, dt, T, **kw)
    back = run(bath, osc, 0.0, 0.0, None, dt, T, start=replace(fwd.final_state.reversed(), t=0.0), **kw)
    end = back.final_state.reversed()
    return end.distance(s0), s0.scale()


def duhamel_check(record: TrajectoryRecord, bath: DiscreteBath, init: BathInitialData,
                  method: str = "filon") -> dict:
    """Compare simulated modes with the driven-oscillator formula.

    eta_j(t) = free motion + (a_j / nu_j) int_0^t sin nu_j (t - s) psi(s) ds,
    with the integral evaluated independently of the splitting from the
    dense psi samples.
    """
    if record.eta is None or record.psi_dense is None:
        raise ValueError("record must store mode snapshots and dense psi")
    nu, a = bath.nodes, bath.couplings
    stride = int(round(record.sample_interval / record.dt)) if record.t.size > 1 else 1
    idx = np.arange(record.t.size) * stride
    t = idx * record.dt
    Psi = running_fourier(record.psi_dense, record.dt, nu, idx, method)
    phase = np.exp(1j * np.outer(t, nu))
    free = init.eta0 * np.cos(np.outer(t, nu)) + init.etadot0 * np.sin(np.outer(t, nu)) / nu
    eta_d = free + (a / nu) * np.imag(phase * Psi)
    diff = np.abs(record.eta - eta_d)
    per_mode = diff.max(axis=0) if diff.size else np.zeros(bath.N)
    max_eta = float(np.max(np.abs(record.eta))) if record.eta.size else 0.0
    worst = float(per_mode.max()) if per_mode.size else 0.0
    return {"per_mode": per_mode, "max_residual": worst, "max_eta": max_eta,
            "relative": worst / max_eta if max_eta > 0 else worst}


def _rhs(bath: DiscreteBath, osc: OscillatorModel):
    w, a, nu = bath.weights, bath.couplings, bath.nodes
    n = bath.N
    dV = osc.V0.deriv()
    f, df = osc.f, osc.f.deriv()
    wa = w * a

    def rhs(t, y):
        x, p = y[0], y[1]
        eta, pi = y[2:2 + n], y[2 + n:]
        out = np.empty_like(y)
        out[0] = p
        out[1] = -dV(x) + df(x) * np.dot(wa, eta)
        out[2:2 + n] = pi
        out[2 + n:] = -nu**2 * eta + a * f(x)
        return out

    return rhs


def oracle_run(bath: DiscreteBath, osc: OscillatorModel, x0: float, p0: float,
               init: Optional[BathInitialData], T: float, rtol: float = 1e-10,
               atol: float = 1e-10, sample_dt: Optional[float] = None,
               max_modes: int = 64) -> TrajectoryRecord:
    """Reference trajectory from an embedded 8(5,3) Runge-Kutta method."""
    if bath.N > max_modes:
        raise ValueError(f"oracle limited to {max_modes} modes (got {bath.N})")
    if init is None:
        init = bath_initial(bath, "zero")
    n = bath.N
    y0 = np.concatenate(([x0, p0], init.eta0, init.etadot0))
    sample_dt = sample_dt or T / 1000
    m = int(round(T / sample_dt))
    t_eval = np.linspace(0.0, T, m + 1)
    sol = solve_ivp(_rhs(bath, osc), (0.0, T), y0, method="DOP853", t_eval=t_eval,
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(f"oracle integration failed: {sol.message}")
    x, p = sol.y[0], sol.y[1]
    eta, pi = sol.y[2:2 + n].T, sol.y[2 + n:].T
    w, a, nu = bath.weights, bath.couplings, bath.nodes
    psi = osc.f(x)
    phi = eta @ (w * a)
    e_bath = (pi**2 + nu**2 * eta**2) @ w
    E = 0.5 * p**2 + osc.V0(x) + 0.5 * e_bath - psi * phi
    return TrajectoryRecord(sol.t, x, p, psi, phi, E, e_bath, dt=sample_dt, eta=eta, pi=pi,
                            final_state=SystemState(T, x[-1], p[-1], eta[-1], pi[-1]),
                            meta={"engine": "oracle", "rtol": rtol, "atol": atol, "T": T, "N": n})
