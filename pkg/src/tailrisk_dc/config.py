"""Run configuration, shipped presets and JSON (de)serialization."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, asdict
from typing import Optional

from .kou import DensityConfig, ModelParams, PAPER_PARAMS
from .lattice import GridSpec
from .dp_core import Scenario
from .risk import RiskSpec

SCHEMA_VERSION = 1

# y grids are centred on log(1e5) dollars
Y_CENTER = math.log(1.0e5)


def paper_scenario() -> Scenario:
    """30 years, yearly rebalancing, 20k real dollars contributed each year."""
    return Scenario(T=30.0, M=30, q=20000.0, W0=0.0)


def _grid(n_y_dag: int, n_b: int, n_policy_wealth: int = 2000) -> GridSpec:
    return GridSpec.centered(
        Y_CENTER, inner=8.0, outer=16.0, b_max=5.0e8, w_threshold_max=5.0e8,
        n_y=n_y_dag // 2, n_y_dag=n_y_dag, n_b=n_b, n_w=n_b, n_u=n_b,
        n_policy_wealth=n_policy_wealth, spacing="sinh",
    )


GRID_PRESETS = {
    "paper-full": lambda: _grid(1024, 333),
    "desk": lambda: _grid(512, 128),
}

MODEL_PRESETS = {"paper": lambda: PAPER_PARAMS}


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 1_000_000
    seed: int = 20240601
    antithetic: bool = False
    block_size: int = 65536

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if self.antithetic and self.block_size % 2:
            raise ValueError("antithetic sampling needs an even block size")


@dataclass
class RunConfig:
    model: ModelParams = field(default_factory=lambda: PAPER_PARAMS)
    scenario: Scenario = field(default_factory=paper_scenario)
    grid: GridSpec = field(default_factory=GRID_PRESETS["desk"])
    density: Optional[DensityConfig] = None
    risk: Optional[RiskSpec] = None
    sim: SimConfig = field(default_factory=SimConfig)
    output_dir: str = "out"
    comoving_bond: bool = True

    def __post_init__(self):
        if self.density is None:
            self.density = DensityConfig(n_terms=12, dt=self.scenario.dt)
        if not math.isclose(self.density.dt, self.scenario.dt):
            raise ValueError("density dt must equal the rebalancing interval T/M")
        if self.risk is not None and self.risk.kind == "bpoe":
            lo = self.grid.w_threshold_min
            if lo is not None and lo <= self.risk.D:
                raise ValueError("threshold grid lower bound must exceed D")
            if self.risk.D >= self.grid.w_threshold_max:
                raise ValueError("D must lie below the threshold grid upper bound")

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "model": asdict(self.model),
            "scenario": self.scenario.to_dict(),
            "grid": self.grid.to_dict(),
            "density": asdict(self.density),
            "risk": self.risk.to_dict() if self.risk else None,
            "sim": asdict(self.sim),
            "output_dir": self.output_dir,
            "comoving_bond": self.comoving_bond,
        }

    def hash(self) -> str:
        """Digest of everything that affects results (the output location does not)."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


_TOP_KEYS = {"schema_version", "model", "scenario", "grid", "density", "risk", "sim",
             "output_dir", "comoving_bond"}


def _check_keys(section: str, data: dict, allowed) -> None:
    unknown = set(data) - set(allowed)
    if unknown:
        raise ValueError(f"unknown keys in {section}: {sorted(unknown)}")


def _section(cls, section: str, data, preset_table=None):
    """A section is a preset name, {"preset": name, ...overrides} or explicit fields."""
    if isinstance(data, str):
        if preset_table is None or data not in preset_table:
            raise ValueError(f"unknown {section} preset {data!r}")
        return preset_table[data]()
    data = dict(data)
    base = None
    if "preset" in data:
        name = data.pop("preset")
        if preset_table is None or name not in preset_table:
            raise ValueError(f"unknown {section} preset {name!r}")
        base = asdict(preset_table[name]())
    _check_keys(section, data, cls.__dataclass_fields__)
    if base is not None:
        base.update(data)
        data = base
    return cls(**data)


def config_from_dict(data: dict) -> RunConfig:
    _check_keys("config", data, _TOP_KEYS)
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {version}")
    kw = {}
    if "model" in data:
        kw["model"] = _section(ModelParams, "model", data["model"], MODEL_PRESETS)
    if "scenario" in data:
        kw["scenario"] = _section(Scenario, "scenario", data["scenario"],
                                  {"paper": paper_scenario})
    if "grid" in data:
        grid = data["grid"]
        if isinstance(grid, dict) and "anchors" in grid:
            grid = dict(grid, anchors=tuple(grid["anchors"]))
        kw["grid"] = _section(GridSpec, "grid", grid, GRID_PRESETS)
    if data.get("density") is not None:
        kw["density"] = _section(DensityConfig, "density", data["density"])
    if data.get("risk") is not None:
        risk = dict(data["risk"])
        _check_keys("risk", risk, RiskSpec.__dataclass_fields__)
        kw["risk"] = RiskSpec(**risk)
    if "sim" in data:
        kw["sim"] = _section(SimConfig, "sim", data["sim"])
    for key in ("output_dir", "comoving_bond"):
        if key in data:
            kw[key] = data[key]
    return RunConfig(**kw)


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))
