"""Experiment configuration: one JSON document per experiment."""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from .analysis import ClassifierSettings
from .discretize import DiscreteBath, sample_modes
from .spectrum import (
    AbsGaussDensity,
    BathSpectrum,
    GaussDensity,
    OscillatorModel,
    PowerGaussCoupling,
    QuadratureSpec,
    gaussian_gap,
    gaussian_gapless,
    kg_spectrum,
    read_table,
    zero_spectrum,
)

ENGINES = ("full", "gle", "both")
PRESETS = ("case-a-decay", "case-a-sync", "case-a-gapless", "case-b-doublewell", "kg-demo")
SEED_ENV = "BATHSIM_SEED"


class ConfigError(ValueError):
    pass


def _build(cls, data: Optional[dict], where: str):
    data = dict(data or {})
    known = {f.name for f in fields(cls)}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")
    return cls(**data)


@dataclass
class SpectrumConfig:
    family: str = "gaussian_gapless"
    nu0: float = 0.0
    params: dict = field(default_factory=dict)
    table: Optional[str] = None
    interp: str = "linear"


@dataclass
class OscillatorConfig:
    V0: list = field(default_factory=lambda: [0.0, 0.0, 1.0])
    f: list = field(default_factory=lambda: [0.0, 1.0])


@dataclass
class DiscretizationConfig:
    N: int = 512
    nu_max: float = 8.0
    rule: str = "gauss_legendre"
    order: int = 8
    panels: int = 64
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10


@dataclass
class IntegrationConfig:
    dt: float = 1e-3
    T: float = 200.0
    sample_stride: int = 10
    engine: str = "full"
    kernel: str = "discrete"
    kernel_dt: Optional[float] = None


@dataclass
class InitialConfig:
    x0: float = 1.0
    p0: float = 0.0
    bath: str = "zero"
    seed: Optional[int] = None
    temperature: float = 1.0


@dataclass
class OutputConfig:
    directory: str = "out"
    formats: list = field(default_factory=lambda: ["csv", "json", "png"])


@dataclass
class SweepConfig:
    parameter: str = "v"
    values: list = field(default_factory=list)


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    spectrum: SpectrumConfig = field(default_factory=SpectrumConfig)
    oscillator: OscillatorConfig = field(default_factory=OscillatorConfig)
    discretization: DiscretizationConfig = field(default_factory=DiscretizationConfig)
    integration: IntegrationConfig = field(default_factory=IntegrationConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    analysis: dict = field(default_factory=dict)
    output: OutputConfig = field(default_factory=OutputConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    base_dir: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        it = self.integration
        if not (isinstance(it.dt, (int, float)) and it.dt > 0 and math.isfinite(it.dt)):
            raise ConfigError(f"dt must be positive, got {it.dt!r}")
        if not (it.T > 0 and math.isfinite(it.T)):
            raise ConfigError(f"T must be positive, got {it.T!r}")
        if it.engine not in ENGINES:
            raise ConfigError(f"engine must be one of {ENGINES}, got {it.engine!r}")
        if it.kernel not in ("discrete", "continuum"):
            raise ConfigError(f"kernel must be 'discrete' or 'continuum', got {it.kernel!r}")
        if it.sample_stride < 1:
            raise ConfigError("sample_stride must be >= 1")
        if self.spectrum.family == "tabulated":
            if not self.spectrum.table:
                raise ConfigError("tabulated spectrum needs a table path")
            if not self.table_path().exists():
                raise ConfigError(f"spectrum table not found: {self.table_path()}")
        if self.initial.bath not in ("zero", "thermal"):
            raise ConfigError(f"initial.bath must be 'zero' or 'thermal', got {self.initial.bath!r}")
        ClassifierSettings(**self.analysis)
        if self.sweep.parameter not in ("v", "c"):
            raise ConfigError("sweep parameter must be 'v' or 'c'")

    # --- construction -----------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict, base_dir=None) -> "ExperimentConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)} - {"base_dir"}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown top-level keys: {sorted(extra)}")
        try:
            return cls(
                name=data.get("name", "experiment"),
                spectrum=_build(SpectrumConfig, data.get("spectrum"), "spectrum"),
                oscillator=_build(OscillatorConfig, data.get("oscillator"), "oscillator"),
                discretization=_build(DiscretizationConfig, data.get("discretization"), "discretization"),
                integration=_build(IntegrationConfig, data.get("integration"), "integration"),
                initial=_build(InitialConfig, data.get("initial"), "initial"),
                analysis=dict(data.get("analysis") or {}),
                output=_build(OutputConfig, data.get("output"), "output"),
                sweep=_build(SweepConfig, data.get("sweep"), "sweep"),
                base_dir=str(base_dir) if base_dir is not None else None,
            )
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        with open(path) as fh:
            data = json.load(fh)
        return cls.from_dict(data, base_dir=path.parent)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def replace(self, **changes) -> "ExperimentConfig":
        """Copy with dotted-path overrides, e.g. ``replace(**{"oscillator.V0": [0, 0, 1]})``."""
        d = copy.deepcopy(self.to_dict())
        for key, value in changes.items():
            node = d
            *head, last = key.split(".")
            for h in head:
                node = node[h]
            node[last] = value
        return type(self).from_dict(d, self.base_dir)

    @property
    def hash(self) -> str:
        """SHA-256 of the canonical JSON form (first 16 hex digits)."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_env_seed(self, environ=None) -> "ExperimentConfig":
        env = os.environ if environ is None else environ
        raw = env.get(SEED_ENV)
        if raw is None or raw == "":
            return self
        try:
            seed = int(raw)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from exc
        return self.replace(**{"initial.seed": seed})

    def table_path(self) -> Path:
        p = Path(self.spectrum.table)
        if not p.is_absolute() and self.base_dir:
            p = Path(self.base_dir) / p
        return p

    # --- model objects ----------------------------------------------------

    def quadrature(self) -> QuadratureSpec:
        d = self.discretization
        return QuadratureSpec(rule=d.rule, panels=d.panels, order=d.order, nu_max=d.nu_max,
                              abs_tol=d.abs_tol, rel_tol=d.rel_tol)

    def bath_spectrum(self) -> BathSpectrum:
        s = self.spectrum
        p = dict(s.params)
        if s.family == "gaussian_gapless":
            return gaussian_gapless(**p)
        if s.family == "gaussian_gap":
            return gaussian_gap(nu0=s.nu0, **p)
        if s.family == "zero":
            return zero_spectrum(s.nu0)
        if s.family == "tabulated":
            return read_table(self.table_path(), s.nu0, s.interp)
        if s.family == "klein_gordon":
            rho = dict(p.get("rho0", {"kind": "abs_gauss"}))
            kind = rho.pop("kind", "abs_gauss")
            rho0 = {"abs_gauss": AbsGaussDensity, "gauss": GaussDensity}[kind](**rho)
            kap = dict(p.get("kappa", {}))
            kap.pop("kind", None)
            kappa = PowerGaussCoupling(m0=s.nu0, **kap)
            return kg_spectrum(rho0, s.nu0, kappa)
        raise ConfigError(f"unknown spectrum family {s.family!r}")

    def oscillator_model(self) -> OscillatorModel:
        return OscillatorModel(tuple(self.oscillator.V0), tuple(self.oscillator.f))

    def discrete_bath(self, spec: Optional[BathSpectrum] = None) -> DiscreteBath:
        spec = spec or self.bath_spectrum()
        return sample_modes(spec, self.quadrature(), self.discretization.N)

    def classifier(self) -> ClassifierSettings:
        return ClassifierSettings(**self.analysis)


def preset_names() -> tuple[str, ...]:
    return PRESETS


def load_preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    text = resources.files("bathsim.presets").joinpath(f"{name}.json").read_text()
    return ExperimentConfig.from_dict(json.loads(text))


def resolve_config(ref: str) -> ExperimentConfig:
    """A path to a JSON file, or the name of a shipped preset."""
    p = Path(ref)
    if p.exists():
        return ExperimentConfig.load(p)
    if ref in PRESETS:
        return load_preset(ref)
    raise ConfigError(f"config {ref!r} is neither a file nor a preset")


def as_jsonable(obj: Any) -> Any:
    """Recursively convert numpy scalars, arrays and complex numbers for JSON."""
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): as_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [as_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return as_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj
