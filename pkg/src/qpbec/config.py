"""Run configuration: one JSON document, validated strictly.

Defaults reproduce the reference setup: ninth golden-ratio approximant with
V1=1.5, V2=2, theta=0.13, mode pair (32, 37).  Unknown keys anywhere in the
document are rejected so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass
class PotentialConfig:
    V1: float = 1.5
    V2: float = 2.0
    theta: float = 0.13
    n: int = 9


@dataclass
class SpectralConfig:
    cutoff: float = 18.0
    grid_points: int = 4096
    count: int = 100
    ipr_threshold: float = 0.05


@dataclass
class DimerConfig:
    N_values: list[float] = field(default_factory=lambda: [0.3, 2.0])
    z_resolution: int = 4001
    portrait_points: int = 400
    sparsify_cutoff: float = 0.01


@dataclass
class GPERunConfig:
    g: float = -1.0
    N: float = 0.3
    z0: float = 0.0
    phi0: float = 3.141592653589793
    T_end: float = 500.0
    tag: str = ""

    def label(self) -> str:
        if self.tag:
            return self.tag
        sgn = "m" if self.g < 0 else "p"
        return f"g{sgn}1-N{self.N:g}-z{self.z0:g}-phi{self.phi0:.4g}"


@dataclass
class GPEConfig:
    dt: float = 1e-3
    noise_fraction: float = 0.03
    seed: int = 12345
    scalar_stride: float = 0.1
    snapshot_stride: float = 5.0
    window_factor: float = 4.0
    runs: list[GPERunConfig] = field(
        default_factory=lambda: [
            GPERunConfig(g=-1.0, N=0.3, z0=0.0, phi0=3.141592653589793, T_end=500.0),
            GPERunConfig(g=-1.0, N=2.0, z0=0.451, phi0=0.0, T_end=500.0),
            GPERunConfig(g=+1.0, N=2.0, z0=0.7886, phi0=3.141592653589793, T_end=500.0),
            GPERunConfig(g=+1.0, N=8.0, z0=0.7886, phi0=3.141592653589793, T_end=100.0),
        ]
    )


@dataclass
class RunConfig:
    potential: PotentialConfig = field(default_factory=PotentialConfig)
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    pair: tuple[int, int] = (32, 37)
    g: float = -1.0
    dimer: DimerConfig = field(default_factory=DimerConfig)
    gpe: GPEConfig = field(default_factory=GPEConfig)
    output: str = "out"

    def validate(self) -> None:
        p = self.potential
        if p.n < 1:
            raise ConfigError(f"potential.n must be >= 1, got {p.n}")
        s = self.spectral
        if s.count < 2:
            raise ConfigError("spectral.count must be >= 2")
        if not 0 < s.ipr_threshold < 1:
            raise ConfigError("spectral.ipr_threshold must be in (0, 1)")
        if len(self.pair) != 2 or self.pair[0] == self.pair[1]:
            raise ConfigError(f"pair must be two distinct mode labels, got {self.pair}")
        if any(j < 1 for j in self.pair):
            raise ConfigError("pair labels are 1-based positive integers")
        if self.g not in (-1.0, 1.0):
            raise ConfigError(f"g must be +-1, got {self.g}")
        if self.gpe.dt <= 0:
            raise ConfigError("gpe.dt must be positive")
        if self.gpe.noise_fraction < 0:
            raise ConfigError("gpe.noise_fraction must be >= 0")
        for run in self.gpe.runs:
            if run.g not in (-1.0, 1.0):
                raise ConfigError(f"gpe run g must be +-1, got {run.g}")
            if run.T_end <= 0:
                raise ConfigError("gpe run T_end must be positive")
            if abs(run.z0) > 1:
                raise ConfigError(f"gpe run |z0| must be <= 1, got {run.z0}")

    # hashes for cache keying: only the parts that influence each stage
    def spectrum_payload(self) -> dict:
        return {"potential": asdict(self.potential), "spectral": asdict(self.spectral)}

    def hopping_payload(self) -> dict:
        return {**self.spectrum_payload(), "g": self.g}


def _build(cls, data: dict, where: str):
    fields = {f.name: f for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    return data


def load_config(path: str | Path | None) -> RunConfig:
    """Parse and validate a config file; None loads the built-in defaults."""
    cfg = RunConfig()
    if path is None:
        cfg.validate()
        return cfg
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from err
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")

    top = _build(RunConfig, data, "config")
    if "potential" in top:
        cfg.potential = PotentialConfig(**_build(PotentialConfig, top["potential"], "potential"))
    if "spectral" in top:
        cfg.spectral = SpectralConfig(**_build(SpectralConfig, top["spectral"], "spectral"))
    if "pair" in top:
        cfg.pair = tuple(top["pair"])
    if "g" in top:
        cfg.g = float(top["g"])
    if "dimer" in top:
        cfg.dimer = DimerConfig(**_build(DimerConfig, top["dimer"], "dimer"))
    if "gpe" in top:
        gpe_data = _build(GPEConfig, top["gpe"], "gpe")
        runs = [
            GPERunConfig(**_build(GPERunConfig, r, "gpe.runs[]"))
            for r in gpe_data.get("runs", [])
        ]
        rest = {k: v for k, v in gpe_data.items() if k != "runs"}
        cfg.gpe = GPEConfig(**rest)
        if runs:
            cfg.gpe.runs = runs
    if "output" in top:
        cfg.output = str(top["output"])
    cfg.validate()
    return cfg
