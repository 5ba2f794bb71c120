"""Scenario configuration: strict JSON to dataclasses.

Every mapping is checked against its dataclass: unknown keys and missing
required keys raise :class:`ConfigError` naming the offending path.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .current import NParticleWaveFunction
from .geometry import FoliationField
from .interference import BeamProfile, TwoFrequencyScenario
from .trajectories import IntegratorConfig
from .wavefunction import KINDS, PlaneWaveMode, WaveFunction

SCENARIO_KINDS = ("single-trajectory", "congruence-analysis", "interference", "n-particle")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModeSpec:
    k: list
    m: float = 0.0
    re_c: float = 1.0
    im_c: float = 0.0


@dataclass(frozen=True)
class WaveFunctionSpec:
    modes: list
    V: Optional[float] = None
    box: Optional[list] = None
    normalization_kind: str = "klein-gordon"

    def build(self) -> WaveFunction:
        if not self.modes:
            raise ConfigError("wavefunction.modes: at least one mode is required")
        if self.normalization_kind not in KINDS:
            raise ConfigError(f"wavefunction.normalization_kind must be one of {KINDS}")
        modes = [PlaneWaveMode(tuple(float(v) for v in m.k), m.m, complex(m.re_c, m.im_c)) for m in self.modes]
        if any(len(m.k) > 3 for m in modes):
            raise ConfigError("wavefunction.modes: k has at most three components")
        if self.box is not None:
            box = tuple(float(b) for b in self.box)
            if self.V is not None and not np.isclose(np.prod(box), self.V, rtol=1e-12):
                raise ConfigError("wavefunction: box lengths must multiply to V")
        elif self.V is not None:
            kk = np.array([np.pad(np.asarray(m.k, float), (0, 3 - len(m.k))) for m in modes])
            nz = np.flatnonzero(np.any(kk != 0, axis=0))
            dim = int(nz.max()) + 1 if len(nz) else 1
            box = (float(self.V) ** (1.0 / dim),) * dim
        else:
            raise ConfigError("wavefunction: give V or box")
        try:
            return WaveFunction.from_modes(modes, box, self.normalization_kind)
        except ValueError as exc:
            raise ConfigError(f"wavefunction: {exc}") from exc


@dataclass(frozen=True)
class IntegratorSpec:
    rtol: float = 1e-10
    atol: float = 1e-10
    max_step: Optional[float] = None
    max_s: float = 100.0
    stagnation: Optional[float] = None
    stagnation_rel: float = 1e-12
    t_min: Optional[float] = None
    t_max: Optional[float] = None
    spatial_bounds: Optional[list] = None

    def build(self, scale: float = 1.0) -> IntegratorConfig:
        try:
            return IntegratorConfig(
                rtol=self.rtol * scale,
                atol=self.atol * scale,
                max_step=np.inf if self.max_step is None else self.max_step,
                max_s=self.max_s,
                stagnation=self.stagnation,
                stagnation_rel=self.stagnation_rel,
                t_min=-np.inf if self.t_min is None else self.t_min,
                t_max=np.inf if self.t_max is None else self.t_max,
                spatial_bounds=None if self.spatial_bounds is None else tuple(map(tuple, self.spatial_bounds)),
            )
        except ValueError as exc:
            raise ConfigError(f"integrator: {exc}") from exc


@dataclass(frozen=True)
class LaunchSpec:
    """Launch points: explicit ``points`` or ``n_points`` evenly spaced along the first box axis."""

    t0: float = 0.0
    n_points: int = 100
    points: Optional[list] = None
    select: str = "all"  # or "negative-j0": keep only points where j^0 < 0


@dataclass(frozen=True)
class CongruenceSpec:
    n_samples: int = 10000
    sampler: str = "rejection-monte-carlo"
    launch_t: float = 0.0
    query_t: list = field(default_factory=lambda: [0.5])
    strategies: list = field(default_factory=lambda: ["first-crossing-selection", "connected-constant-sign-patches"])
    resolution: Optional[int] = None
    chunk: int = 4096


@dataclass(frozen=True)
class BeamSpec:
    direction: float = 0.0
    center: list = field(default_factory=lambda: [0.0, 0.0])
    width: float = 1.0
    envelope: str = "gaussian"

    def build(self) -> BeamProfile:
        try:
            return BeamProfile(self.direction, tuple(self.center), self.width, self.envelope)
        except ValueError as exc:
            raise ConfigError(f"interference.beams: {exc}") from exc


@dataclass(frozen=True)
class InterferenceSpec:
    omega1: float
    omega2: float
    beams: list
    box: list = field(default_factory=lambda: [10.0, 10.0])
    mass: float = 0.0
    grid: int = 64
    t: float = 0.0
    T: Optional[float] = None  # averaging window; default 2.25 beat periods
    deviation: bool = True

    def build(self) -> TwoFrequencyScenario:
        if len(self.beams) != 2:
            raise ConfigError("interference.beams: exactly two beams are required")
        try:
            return TwoFrequencyScenario(self.omega1, self.omega2, self.beams[0].build(), self.beams[1].build(),
                                        tuple(self.box), self.mass)
        except ValueError as exc:
            raise ConfigError(f"interference: {exc}") from exc


@dataclass(frozen=True)
class NParticleSpec:
    factors: list  # WaveFunctionSpec per particle
    points: list  # one launch four-vector per particle
    symmetrize: bool = False
    mode: str = "foliated"
    foliation_rapidity: float = 0.0

    def build(self):
        fs = [f.build() for f in self.factors]
        wf = NParticleWaveFunction.symmetrized(fs) if self.symmetrize else NParticleWaveFunction.product(fs)
        if len(self.points) != len(fs):
            raise ConfigError("nparticle.points: one point per particle is required")
        if self.mode not in ("foliated", "covariant"):
            raise ConfigError("nparticle.mode must be 'foliated' or 'covariant'")
        return wf, FoliationField.boosted(self.foliation_rapidity)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    kind: str
    claim: str = ""
    seed: int = 0
    workers: int = 1
    wavefunction: Optional[WaveFunctionSpec] = None
    integrator: IntegratorSpec = field(default_factory=IntegratorSpec)
    launch: LaunchSpec = field(default_factory=LaunchSpec)
    congruence: Optional[CongruenceSpec] = None
    interference: Optional[InterferenceSpec] = None
    nparticle: Optional[NParticleSpec] = None

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ConfigError(f"kind must be one of {SCENARIO_KINDS}")
        needs = {
            "single-trajectory": "wavefunction",
            "congruence-analysis": "wavefunction",
            "interference": "interference",
            "n-particle": "nparticle",
        }[self.kind]
        if getattr(self, needs) is None:
            raise ConfigError(f"a {self.kind} scenario needs a '{needs}' section")
        if self.kind == "congruence-analysis" and self.congruence is None:
            object.__setattr__(self, "congruence", CongruenceSpec())


# nested dataclass fields, and list fields whose items are dataclasses
_NESTED = {
    (ScenarioConfig, "wavefunction"): WaveFunctionSpec,
    (ScenarioConfig, "integrator"): IntegratorSpec,
    (ScenarioConfig, "launch"): LaunchSpec,
    (ScenarioConfig, "congruence"): CongruenceSpec,
    (ScenarioConfig, "interference"): InterferenceSpec,
    (ScenarioConfig, "nparticle"): NParticleSpec,
}
_LISTS = {
    (WaveFunctionSpec, "modes"): ModeSpec,
    (InterferenceSpec, "beams"): BeamSpec,
    (NParticleSpec, "factors"): WaveFunctionSpec,
}


def _build(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {', '.join(unknown)}")
    missing = [f.name for f in dataclasses.fields(cls)
               if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING and f.name not in data]
    if missing:
        raise ConfigError(f"{path}: missing required key(s) {', '.join(missing)}")
    kwargs = {}
    for key, value in data.items():
        sub = f"{path}.{key}"
        if (cls, key) in _NESTED and value is not None:
            value = _build(_NESTED[cls, key], value, sub)
        elif (cls, key) in _LISTS:
            if not isinstance(value, list):
                raise ConfigError(f"{sub}: expected a list")
            value = [_build(_LISTS[cls, key], v, f"{sub}[{i}]") for i, v in enumerate(value)]
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_config(data: dict) -> ScenarioConfig:
    return _build(ScenarioConfig, data, "config")


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(data)


def bundled_scenarios() -> dict:
    """name -> path of every bundled scenario config."""
    root = resources.files("kgbohm") / "scenarios"
    return {p.name[:-5]: Path(str(p)) for p in sorted(root.iterdir(), key=lambda q: q.name) if p.name.endswith(".json")}
