"""Command-line pipeline: spectrum -> discretize -> dynamics/reduced -> analysis.

Every command reads one JSON experiment config (a path or a shipped
preset name) and writes its artifacts into the output directory.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np

from . import io, plotting
from .analysis import classify, energy_identity_residual
from .config import ConfigError, ExperimentConfig, resolve_config
from .discretize import (
    BathInitialData,
    DiscreteBath,
    bath_initial,
    discrete_K,
    recurrence_time,
    secular_lambda0,
)
from .dynamics import TrajectoryRecord, duhamel_check, run, time_reversal_error
from .errors import BathsimError
from .reduced import FluctuatingForce, build_kernel, gle_run
from .spectrum import (
    EDGE_GUARD,
    BathSpectrum,
    compute_K,
    find_lambda0,
    validate_hypotheses,
    w_diamond_gap,
    w_time,
)

log = logging.getLogger("bathsim")

THRESHOLDS = {
    "energy_drift": 1e-6,
    "time_reversal": 1e-9,
    "duhamel": 1e-4,
    "energy_identity": 1e-3,
    "full_vs_gle": 1e-3,
}
KERNEL_TABLE_SPAN = 50.0
KERNEL_TABLE_STEP = 0.01
DUHAMEL_SAMPLES = 400


@dataclass
class Experiment:
    """Model objects derived from a config, built on first use."""

    config: ExperimentConfig
    override_guard: bool = False

    @cached_property
    def spectrum(self) -> BathSpectrum:
        return self.config.bath_spectrum()

    @cached_property
    def osc(self):
        return self.config.oscillator_model()

    @cached_property
    def quad(self):
        return self.config.quadrature()

    @cached_property
    def bath(self) -> DiscreteBath:
        return self.config.discrete_bath(self.spectrum)

    @cached_property
    def init(self) -> BathInitialData:
        i = self.config.initial
        return bath_initial(self.bath, i.bath, i.seed, i.temperature)

    @property
    def hash(self) -> str:
        return self.config.hash

    def simulate(self, sample_stride: Optional[int] = None, store_modes: bool = False,
                 check_monitors: bool = True) -> TrajectoryRecord:
        it, i0 = self.config.integration, self.config.initial
        return run(self.bath, self.osc, i0.x0, i0.p0, self.init, it.dt, it.T,
                   sample_stride=sample_stride or it.sample_stride, store_modes=store_modes,
                   override_recurrence_guard=self.override_guard, check_monitors=check_monitors)

    def reduced(self, sample_stride: Optional[int] = None) -> TrajectoryRecord:
        it, i0 = self.config.integration, self.config.initial
        kdt = it.kernel_dt if it.kernel_dt is not None else it.dt
        source = self.bath if it.kernel == "discrete" else self.spectrum
        kernel = build_kernel(source, kdt, it.T, self.quad)
        force = FluctuatingForce(self.init, self.bath)
        rec = gle_run(self.osc, kernel, force, i0.x0, i0.p0, it.dt, it.T,
                      sample_stride or it.sample_stride)
        rec.meta["kernel"] = it.kernel
        return rec

    def trajectory(self) -> TrajectoryRecord:
        return self.reduced() if self.config.integration.engine == "gle" else self.simulate()


def _outdir(cfg: ExperimentConfig, out: Optional[str]) -> Path:
    p = Path(out) if out else Path(cfg.output.directory)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _wants(cfg: ExperimentConfig, fmt: str) -> bool:
    return fmt in cfg.output.formats


def _attempt(fn, *args, **kw):
    """(value, error message) so quadrature failures end up in reports."""
    try:
        return fn(*args, **kw), None
    except (BathsimError, ValueError, ArithmeticError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _write_trajectory(rec: TrajectoryRecord, path: Path, h: str) -> Path:
    return io.write_csv(path, "trajectory", rec.columns(), h)


# --- commands -----------------------------------------------------------------


def cmd_spectrum(exp: Experiment, out: Path) -> dict:
    cfg, spec, quad, osc = exp.config, exp.spectrum, exp.quad, exp.osc
    report: dict = {"name": cfg.name, "family": spec.family.value, "nu0": spec.nu0}
    res, err = _attempt(compute_K, spec, quad, full_output=True)
    report["K"] = None if res is None else {"value": res.value, "error": res.error, "tail": res.tail}
    if err:
        report["K_error"] = err
    K = None if res is None else res.value
    report["hypotheses"] = validate_hypotheses(spec, osc, quad).to_dict()

    if osc.is_linear:
        lam, err = _attempt(find_lambda0, spec, osc.v, 1e-12, quad)
        report["lambda0"] = lam
        report["prediction"] = None if err else ("Harmonic" if lam is not None else "Decay")
        if err:
            report["lambda0_error"] = err

    if spec.nu0 > 0:
        grid = np.linspace(0.0, spec.nu0 * (1 - 2 * EDGE_GUARD), 41)
        rows, failures = [], []
        for nu in grid:
            wd, err = _attempt(w_diamond_gap, spec, float(nu), quad)
            if err:
                failures.append({"nu": float(nu), "error": err})
                continue
            rows.append((nu, wd, osc.v - nu * nu - wd if osc.is_linear else math.nan))
        report["gap_table_failures"] = failures
        if rows:
            io.write_csv(out / "gap_table.csv", "gap_table", rows, exp.hash)
            if _wants(cfg, "png"):
                r = np.array(rows)
                plotting.plot_gap_table(r[:, 0], r[:, 1], r[:, 2], out / "gap_table.png",
                                        report.get("lambda0"), config_hash=exp.hash)
        if K is not None:
            report["w_diamond_0_minus_K"] = rows[0][1] - K if rows else None

    span = min(cfg.integration.T, KERNEL_TABLE_SPAN)
    tau = KERNEL_TABLE_STEP * np.arange(int(round(span / KERNEL_TABLE_STEP)) + 1)
    w, err = _attempt(w_time, spec, tau, quad)
    if err:
        report["kernel_error"] = err
    else:
        io.write_csv(out / "kernel.csv", "kernel", np.column_stack([tau, w]), exp.hash)
        if _wants(cfg, "png"):
            plotting.plot_kernel(tau, w, out / "kernel.png", exp.hash)

    bath, err = _attempt(lambda: exp.bath)
    if err:
        report["discretization_error"] = err
    else:
        io.write_csv(out / "modes.csv", "modes",
                     np.column_stack([bath.nodes, bath.weights, bath.couplings]), exp.hash)
        disc = {"N": bath.N, "K": discrete_K(bath), "recurrence_time": recurrence_time(bath)}
        if osc.is_linear:
            disc["lambda0"], e = _attempt(secular_lambda0, bath, osc.v)
            if e:
                disc["lambda0_error"] = e
        report["discrete"] = disc
    io.write_json(out / "spectrum.json", report, exp.hash, "spectrum")
    return report


def cmd_simulate(exp: Experiment, out: Path) -> dict:
    engine = exp.config.integration.engine
    if engine == "gle":
        return cmd_gle(exp, out)
    rec = exp.simulate()
    _write_trajectory(rec, out / "trajectory.csv", exp.hash)
    report = {"name": exp.config.name, "meta": rec.meta, "monitors": rec.monitors,
              "energy_drift": rec.energy_drift(), "x_final": float(rec.x[-1])}
    other = None
    if engine == "both":
        other = exp.reduced()
        _write_trajectory(other, out / "gle_trajectory.csv", exp.hash)
        report["full_vs_gle"] = float(np.max(np.abs(rec.x - other.x)))
    if _wants(exp.config, "png"):
        plotting.plot_trajectory(rec, out / "trajectory.png", exp.config.name, other,
                                 config_hash=exp.hash)
    io.write_json(out / "simulate.json", report, exp.hash, "simulate")
    return report


def cmd_gle(exp: Experiment, out: Path) -> dict:
    rec = exp.reduced()
    _write_trajectory(rec, out / "gle_trajectory.csv", exp.hash)
    report = {"name": exp.config.name, "meta": rec.meta, "x_final": float(rec.x[-1])}
    if _wants(exp.config, "png"):
        plotting.plot_trajectory(rec, out / "gle_trajectory.png", exp.config.name + " (GLE)",
                                 config_hash=exp.hash)
    io.write_json(out / "gle.json", report, exp.hash, "gle")
    return report


def _check(name, fn):
    limit = THRESHOLDS[name]
    try:
        value, detail = fn()
    except Exception as exc:  # any failure is a breach
        return {"name": name, "passed": False, "value": None, "threshold": limit,
                "detail": f"{type(exc).__name__}: {exc}"}
    ok = bool(value is not None and np.isfinite(value) and value <= limit)
    return {"name": name, "passed": ok, "value": value, "threshold": limit, "detail": detail}


def cmd_verify(exp: Experiment, out: Path) -> dict:
    cfg = exp.config
    it, i0 = cfg.integration, cfg.initial
    state: dict = {}

    def full():
        n_steps = int(round(it.T / it.dt))
        stride = max(1, n_steps // DUHAMEL_SAMPLES)
        while n_steps % (4 * stride) and stride > 1:
            stride -= 1
        rec = exp.simulate(sample_stride=stride, store_modes=True, check_monitors=False)
        state["rec"] = rec
        fired = [k for k, m in rec.monitors.items() if m["fired"]]
        return rec.energy_drift(), {"monitors_fired": fired, "sample_stride": stride}

    def reversal():
        err, scale = time_reversal_error(exp.bath, exp.osc, i0.x0, i0.p0, exp.init, it.dt, it.T,
                                         exp.override_guard)
        return err / max(scale, 1e-300), {"absolute": err, "scale": scale}

    def duhamel():
        d = duhamel_check(state["rec"], exp.bath, exp.init)
        return d["relative"], {"max_residual": d["max_residual"], "max_eta": d["max_eta"]}

    def identity():
        rec = state["rec"]
        idx = [int(np.argmin(np.abs(rec.t - q * it.T))) for q in (0.25, 0.5, 1.0)]
        r = energy_identity_residual(rec, exp.bath, exp.init, rec.t[idx])
        return float(np.max(r["residual"])), {"times": r["times"], "residual": r["residual"]}

    def gle_gap():
        rec = state["rec"]
        stride = int(round(rec.sample_interval / it.dt))
        gle = exp.reduced(sample_stride=stride)
        return float(np.max(np.abs(rec.x - gle.x))), {"kernel": it.kernel}

    checks = [_check("energy_drift", full)]
    if "rec" in state:
        monitors_ok = not checks[0]["detail"]["monitors_fired"]
        checks[0]["passed"] = checks[0]["passed"] and monitors_ok
    checks.append(_check("time_reversal", reversal))
    for name, fn in (("duhamel", duhamel), ("energy_identity", identity), ("full_vs_gle", gle_gap)):
        if "rec" in state:
            checks.append(_check(name, fn))
        else:
            checks.append({"name": name, "passed": False, "value": None,
                           "threshold": THRESHOLDS[name], "detail": "full run failed"})
    report = {"name": cfg.name, "passed": all(c["passed"] for c in checks), "checks": checks}
    io.write_json(out / "verify.json", report, exp.hash, "verify")
    return report


def cmd_classify(exp: Experiment, out: Optional[Path]) -> dict:
    rec = exp.trajectory()
    rep = classify(rec, exp.spectrum, exp.osc, quad=exp.quad, settings=exp.config.classifier())
    payload = rep.to_dict()
    if out is not None:
        windows = payload["diagnostics"].pop("windows", [])
        rows = [(p["window_start"], p["frequency"], p["amplitude"], p["persistence"])
                for w in windows for p in w]
        io.write_csv(out / "windows.csv", "windows", rows, exp.hash)
        io.write_json(out / "classification.json", payload, exp.hash, "classification")
        if _wants(exp.config, "png"):
            plotting.plot_trajectory(rec, out / "classify_trajectory.png",
                                     f"{exp.config.name}: {rep.predicted} / {rep.measured}",
                                     config_hash=exp.hash)
    else:
        payload["diagnostics"].pop("windows", None)
    return payload


def _sweep_entry(cfg_dict: dict, base_dir, override: bool) -> dict:
    cfg = ExperimentConfig.from_dict(cfg_dict, base_dir)
    return cmd_classify(Experiment(cfg, override), None)


def sweep_configs(cfg: ExperimentConfig) -> list[tuple[float, ExperimentConfig]]:
    out = []
    for value in cfg.sweep.values:
        value = float(value)
        if cfg.sweep.parameter == "v":
            coeffs = list(cfg.oscillator.V0) + [0.0] * max(0, 3 - len(cfg.oscillator.V0))
            coeffs[2] = 0.5 * value
            c = cfg.replace(**{"oscillator.V0": coeffs})
        else:
            params = dict(cfg.spectrum.params, c=value)
            c = cfg.replace(**{"spectrum.params": params})
        out.append((value, c))
    return out


def cmd_sweep(exp: Experiment, out: Path, workers: int = 1) -> dict:
    cfg = exp.config
    entries = sweep_configs(cfg)
    jobs = [(c.to_dict(), c.base_dir, exp.override_guard) for _, c in entries]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_entry, *zip(*jobs)))
    else:
        results = [_sweep_entry(*j) for j in jobs]
    rows = []
    for (value, _), r in zip(entries, results):
        alpha = r.get("alpha")
        rows.append((cfg.sweep.parameter, value, r["predicted"], r["measured"], r["agrees"],
                     r["lambda0_predicted"], r["lambda_measured"],
                     None if alpha is None else alpha["abs"], r["x_inf"]))
    io.write_csv(out / "sweep.csv", "sweep", rows, exp.hash)
    report = {"name": cfg.name, "parameter": cfg.sweep.parameter,
              "rows": [dict(zip(io.SCHEMAS["sweep"], row)) for row in rows]}
    io.write_json(out / "sweep.json", report, exp.hash, "sweep")
    if rows and _wants(cfg, "png"):
        plotting.plot_sweep([r[1] for r in rows], [r[5] for r in rows], [r[3] for r in rows],
                            out / "sweep.png", cfg.sweep.parameter, exp.hash)
    return report


# --- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bathsim", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=["spectrum", "simulate", "gle", "verify", "classify", "sweep"])
    ap.add_argument("--config", required=True, help="JSON config path or preset name")
    ap.add_argument("--out", help="output directory (default: config output.directory)")
    ap.add_argument("--workers", type=int, default=1, help="parallel sweep entries")
    ap.add_argument("--override-recurrence-guard", action="store_true",
                    help="allow horizons beyond half the finite-bath recurrence time")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = resolve_config(args.config).with_env_seed()
    except (ConfigError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    exp = Experiment(cfg, args.override_recurrence_guard)
    out = _outdir(cfg, args.out)
    try:
        if args.command == "spectrum":
            rep = cmd_spectrum(exp, out)
            print(f"K = {rep['K']['value'] if rep['K'] else 'n/a'}  lambda0 = {rep.get('lambda0')}")
        elif args.command == "simulate":
            rep = cmd_simulate(exp, out)
            print(f"x(T) = {rep['x_final']:.10g}")
        elif args.command == "gle":
            rep = cmd_gle(exp, out)
            print(f"x(T) = {rep['x_final']:.10g}")
        elif args.command == "verify":
            rep = cmd_verify(exp, out)
            for c in rep["checks"]:
                v = "n/a" if c["value"] is None else f"{c['value']:.3e}"
                print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {v} (limit {c['threshold']:g})")
            return 0 if rep["passed"] else 1
        elif args.command == "classify":
            rep = cmd_classify(exp, out)
            print(f"predicted {rep['predicted']}, measured {rep['measured']}")
            return 0
        else:
            rep = cmd_sweep(exp, out, args.workers)
            for r in rep["rows"]:
                print(f"{r['parameter']} = {r['value']:g}: {r['predicted']} / {r['measured']}")
    except (BathsimError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
