"""Final-regime extraction from trajectories.

Asymptotic notions (spectral singularities of psi, limits as t -> inf)
are replaced by finite-horizon diagnostics: peaks that persist across
sliding Hann windows, late-window least-squares fits and late-window
statistics.  All thresholds are relative, so the classification of a
linear system does not change when its initial data are rescaled.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .discretize import BathInitialData, DiscreteBath
from .dynamics import RECURRENCE_SAFETY, TrajectoryRecord
from .errors import PreconditionError, RecurrenceHorizonError
from .quadrature import running_fourier
from .spectrum import (
    BathSpectrum,
    OscillatorModel,
    QuadratureSpec,
    compute_K,
    effective_critical_points,
    find_lambda0,
)

DECAY = "Decay"
HARMONIC = "Harmonic"
CONVERGED = "Converged"
UNRESOLVED = "Unresolved"


@dataclass(frozen=True)
class SpectralPeak:
    frequency: float
    amplitude: float
    persistence: float
    window_start: float = 0.0


def _window_starts(n: int, size: int, hop: int) -> list[int]:
    """Window start indices aligned to the end of the series, oldest first."""
    starts = []
    s = n - size
    while s >= 0:
        starts.append(s)
        s -= hop
    return starts[::-1]


def _refine(mag: np.ndarray, k: int) -> tuple[float, float]:
    """Log-parabolic interpolation of a spectral peak at bin k."""
    lo = mag[k - 1] if k > 0 else mag[1]
    hi = mag[k + 1] if k + 1 < mag.size else mag[k - 1]
    if min(lo, mag[k], hi) <= 0.0:
        return 0.0, mag[k]
    a, b, c = np.log(lo), np.log(mag[k]), np.log(hi)
    den = a - 2 * b + c
    if den >= 0:
        return 0.0, mag[k]
    d = 0.5 * (a - c) / den
    return d, float(np.exp(b - 0.25 * (a - c) * d))


def windowed_peaks(series, dt: float, window: float, hop: Optional[float] = None,
                   rel_threshold: float = 0.05, late_fraction: float = 0.5) -> list[list[SpectralPeak]]:
    """Spectral peaks of ``series`` in sliding Hann windows.

    Windows of duration ``window`` are laid back from the end of the series
    every ``hop``.  A peak is a local maximum of the windowed magnitude whose
    amplitude exceeds ``rel_threshold`` times the largest amplitude seen in
    any window.  Frequencies are angular and refined by log-parabolic
    interpolation; amplitudes are calibrated so that A cos(w t) gives A.
    ``persistence`` is the fraction of late windows (the last
    ``late_fraction`` of them) containing a peak within one bin.
    """
    x = np.asarray(series, dtype=float)
    size = int(round(window / dt))
    hop_n = int(round((hop if hop is not None else window / 2) / dt))
    if size > x.size:
        raise ValueError("window longer than the series")
    if size < 4 or hop_n < 1:
        raise ValueError("window too short")
    win = np.hanning(size)
    norm = win.sum()
    bin_w = 2 * math.pi / (size * dt)
    starts = _window_starts(x.size, size, hop_n)
    mags = [np.abs(np.fft.rfft(x[s:s + size] * win)) for s in starts]
    amps = [np.where(np.arange(m.size) == 0, m, 2 * m) / norm for m in mags]
    top = max((float(a.max()) for a in amps), default=0.0)
    raw: list[list[tuple[float, float]]] = []
    for a in amps:
        found = []
        if top > 0:
            for k in range(a.size):
                left = a[k - 1] if k > 0 else a[1] if a.size > 1 else -1
                right = a[k + 1] if k + 1 < a.size else -1
                if a[k] >= rel_threshold * top and a[k] > left and a[k] >= right:
                    d, amp = _refine(a, k)
                    found.append((abs(k + d) * bin_w, amp))
        raw.append(found)
    n_late = max(1, int(math.ceil(late_fraction * len(raw))))
    late = raw[-n_late:]
    out = []
    for s, found in zip(starts, raw):
        peaks = []
        for f, amp in found:
            hits = sum(any(abs(f - g) <= bin_w for g, _ in w) for w in late)
            peaks.append(SpectralPeak(f, amp, hits / len(late), s * dt))
        out.append(peaks)
    return out


class HarmonicFit(NamedTuple):
    alpha: complex
    residual_fraction: float
    frequency: float


def _ls_tone(t, y, lam):
    A = np.column_stack([np.cos(lam * t), np.sin(lam * t)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    return coef, float(np.sqrt(np.mean(res**2)))


def fit_harmonic(t, series, window: tuple[float, float], lambda_guess: float,
                 search: Optional[float] = None) -> HarmonicFit:
    """Least-squares fit of alpha e^{i lam t} + conj(alpha) e^{-i lam t}.

    ``lam`` is refined within ``search`` (default one FFT bin of the
    window) of ``lambda_guess``.  ``residual_fraction`` is the RMS of the
    residual over the RMS of the data in the window.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(series, dtype=float)
    m = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
    tw, yw = t[m], y[m]
    if tw.size < 3:
        raise ValueError("window contains fewer than three samples")
    rms = float(np.sqrt(np.mean(yw**2)))
    if rms == 0.0:
        return HarmonicFit(0j, 0.0, float(lambda_guess))
    span = tw[-1] - tw[0]
    half = search if search is not None else 2 * math.pi / span
    lo, hi = max(lambda_guess - half, 0.0), lambda_guess + half
    opt = minimize_scalar(lambda lam: _ls_tone(tw, yw, lam)[1], bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-12 * max(1.0, hi)})
    lam = float(opt.x)
    (a, b), r = _ls_tone(tw, yw, lam)
    # Gauss-Newton polish of (a, b, lam) jointly; the bracketing search stops near sqrt(eps)
    for _ in range(4):
        c, s = np.cos(lam * tw), np.sin(lam * tw)
        J = np.column_stack([c, s, tw * (b * c - a * s)])
        step, *_ = np.linalg.lstsq(J, yw - a * c - b * s, rcond=None)
        cand = lam + step[2]
        if not lo <= cand <= hi:
            break
        coef, r_new = _ls_tone(tw, yw, cand)
        if r_new > r:
            break
        lam, (a, b), r = cand, coef, r_new
    return HarmonicFit(complex(0.5 * a, -0.5 * b), r / rms, lam)


# --- energy identity ----------------------------------------------------------


def _step_indices(record: TrajectoryRecord, times) -> tuple[np.ndarray, np.ndarray]:
    steps = np.rint(np.asarray(times, dtype=float) / record.dt).astype(int)
    rel = record.t - record.t[0]
    sample_idx = np.searchsorted(rel, steps * record.dt - 1e-9 * record.dt)
    ok = (sample_idx < rel.size)
    ok &= np.abs(rel[np.minimum(sample_idx, rel.size - 1)] - steps * record.dt) <= 1e-6 * record.dt
    if not np.all(ok):
        raise ValueError("checkpoints must coincide with sample times")
    return steps, sample_idx


def energy_identity_residual(record: TrajectoryRecord, bath: DiscreteBath,
                             init: BathInitialData, checkpoints=None,
                             method: str = "filon") -> dict:
    """Relative gap between the simulated bath energy and sum w |a Psi + eta_bullet|^2.

    ``Psi_j(t) = int_0^t exp(-i nu_j s) psi(s) ds`` is computed from the
    dense psi samples.  The default ``"filon"`` rule is independent of the
    splitting scheme; ``"trapezoid"`` reproduces the splitting's own
    quadrature and therefore agrees to round-off.
    """
    if record.psi_dense is None:
        raise ValueError("energy identity needs psi stored at every step")
    T = record.t[-1] - record.t[0]
    if checkpoints is None:
        checkpoints = (T / 4, T / 2, T)
    steps, sidx = _step_indices(record, checkpoints)
    Psi = running_fourier(record.psi_dense, record.dt, bath.nodes, steps, method)
    z = bath.couplings * Psi + init.eta_bullet(bath)
    rhs = (np.abs(z) ** 2) @ bath.weights
    lhs = record.E_bath[sidx]
    resid = np.abs(lhs - rhs) / np.maximum(lhs, np.finfo(float).tiny)
    return {"times": np.asarray(checkpoints, dtype=float), "simulated": lhs, "identity": rhs,
            "residual": resid}


# --- classification -----------------------------------------------------------


@dataclass(frozen=True)
class ClassifierSettings:
    window: float = 50.0
    hop: Optional[float] = None
    decay_ratio: float = 0.05
    amplitude_stability: float = 0.05
    fit_residual: float = 0.05
    converged_tol: float = 0.05
    rel_threshold: float = 0.05
    lambda_tol: float = 1e-12
    allow_beyond_guard: bool = False


@dataclass
class ClassificationReport:
    predicted: str
    measured: str
    lambda0_predicted: Optional[float] = None
    lambda_measured: Optional[float] = None
    alpha: Optional[complex] = None
    x_inf: Optional[float] = None
    matched_critical_point: Optional[float] = None
    critical_points: list = field(default_factory=list)
    tie: bool = False
    agrees: bool = False
    diagnostics: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.alpha is not None:
            d["alpha"] = {"re": self.alpha.real, "im": self.alpha.imag, "abs": abs(self.alpha)}
        return d


def predict(spec: BathSpectrum, osc: OscillatorModel, K: Optional[float] = None,
            quad: QuadratureSpec = QuadratureSpec(), tol: float = 1e-12) -> dict:
    """Regime predicted from spectral data alone."""
    K = compute_K(spec, quad) if K is None else K
    if osc.is_linear:
        try:
            lam = find_lambda0(spec, osc.v, tol, quad)
        except PreconditionError as exc:
            return {"regime": UNRESOLVED, "lambda0": None, "note": str(exc), "K": K}
        return {"regime": HARMONIC if lam is not None else DECAY, "lambda0": lam, "K": K}
    if spec.nu0 == 0.0 and osc.f_is_identity:
        return {"regime": CONVERGED, "lambda0": None, "K": K,
                "critical_points": effective_critical_points(osc, K)}
    return {"regime": UNRESOLVED, "lambda0": None, "K": K,
            "note": "no prediction for a nonlinear oscillator with a spectral gap"}


def _nearest(points: list[float], x: float) -> tuple[Optional[float], bool]:
    if not points:
        return None, False
    d = np.abs(np.asarray(points) - x)
    best = d.min()
    close = [p for p, di in zip(points, d) if di - best <= 1e-12 * max(1.0, abs(x))]
    close.sort(key=abs)
    return close[0], len(close) > 1


def measure(record: TrajectoryRecord, osc: OscillatorModel, K: float,
            settings: ClassifierSettings = ClassifierSettings()) -> dict:
    """Regime read off the trajectory by the threshold rules."""
    x = record.x
    t = record.t
    dt = record.sample_interval
    W = int(round(settings.window / dt))
    if W > x.size:
        raise ValueError("classification window longer than the record")
    early = float(np.max(np.abs(x[:W])))
    late_seg = x[-W:]
    late = float(np.max(np.abs(late_seg)))
    scale = early if early > 0 else 1.0
    diag = {"early_max": early, "late_max": late, "scale": scale}
    if late <= settings.decay_ratio * early or early == 0.0:
        diag["decay_ratio"] = late / early if early else 0.0
        return {"regime": DECAY, "diagnostics": diag}

    windows = windowed_peaks(x, dt, settings.window, settings.hop, settings.rel_threshold)
    bin_w = 2 * math.pi / (W * dt)
    diag["bin_width"] = bin_w
    diag["windows"] = [[{"frequency": p.frequency, "amplitude": p.amplitude,
                         "persistence": p.persistence, "window_start": p.window_start}
                        for p in w] for w in windows]
    last3 = windows[-3:]
    if len(last3) == 3 and last3[-1]:
        dom = max(last3[-1], key=lambda p: p.amplitude)
        track = []
        for w in last3:
            near = [p for p in w if abs(p.frequency - dom.frequency) <= bin_w]
            if near:
                track.append(max(near, key=lambda p: p.amplitude).amplitude)
        if len(track) == 3 and dom.frequency > bin_w:
            variation = (max(track) - min(track)) / float(np.mean(track))
            fit = fit_harmonic(t, x, (t[-W], t[-1]), dom.frequency)
            diag.update(amplitude_track=track, amplitude_variation=variation,
                        fit_residual=fit.residual_fraction, fit_frequency=fit.frequency)
            if variation <= settings.amplitude_stability and fit.residual_fraction <= settings.fit_residual:
                return {"regime": HARMONIC, "lambda": dom.frequency, "alpha": fit.alpha,
                        "diagnostics": diag}

    xbar = float(np.mean(late_seg))
    spread = float(np.std(late_seg))
    force = float(osc.V0.deriv()(xbar) - K * xbar)
    diag.update(late_mean=xbar, late_std=spread, effective_force=force)
    if spread <= settings.converged_tol * scale and abs(force) <= settings.converged_tol * scale:
        return {"regime": CONVERGED, "x_inf": xbar, "diagnostics": diag}
    return {"regime": UNRESOLVED, "diagnostics": diag}


def classify(record: TrajectoryRecord, spec: BathSpectrum, osc: OscillatorModel,
             K: Optional[float] = None, quad: QuadratureSpec = QuadratureSpec(),
             settings: ClassifierSettings = ClassifierSettings()) -> ClassificationReport:
    """Compare the predicted final regime with the measured one."""
    t_rec = record.meta.get("recurrence_time", math.inf)
    overridden = record.meta.get("recurrence_guard_overridden", False)
    if record.T - record.t[0] > RECURRENCE_SAFETY * t_rec and not (settings.allow_beyond_guard or overridden):
        raise RecurrenceHorizonError("record extends beyond the recurrence guard")
    pred = predict(spec, osc, K, quad, settings.lambda_tol)
    K = pred["K"]
    meas = measure(record, osc, K, settings)
    rep = ClassificationReport(pred["regime"], meas["regime"], pred.get("lambda0"),
                               meas.get("lambda"), meas.get("alpha"),
                               diagnostics=meas["diagnostics"],
                               settings=asdict(settings))
    rep.diagnostics["K"] = K
    if "note" in pred:
        rep.diagnostics["prediction_note"] = pred["note"]
    crit = pred.get("critical_points")
    if crit is None and osc.f_is_identity:
        crit = effective_critical_points(osc, K)
    rep.critical_points = list(crit or [])
    if meas["regime"] == CONVERGED:
        rep.x_inf = meas["x_inf"]
        rep.matched_critical_point, rep.tie = _nearest(rep.critical_points, rep.x_inf)
    rep.agrees = rep.predicted == rep.measured or (
        rep.predicted == CONVERGED and rep.measured == DECAY and 0.0 in rep.critical_points)
    return rep
