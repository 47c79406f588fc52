"""Dataclass configs and the shipped presets."""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import List, Optional

from .normalform import NetworkSystem
from .polyalg import DEFAULT_EPS_RES

PRESETS = ("ring-sn5", "chain-sn6", "sixring-sn7", "tongue-sn3", "meanfield-sn10", "if-sn9")
STAGES = ("derive", "simulate", "recover", "predict", "report")


class MissingInputError(FileNotFoundError):
    pass


@dataclass
class SimConfig:
    T: float = 10000.0
    dt: float = 0.01
    transient: float = 5000.0
    sample_every: int = 10
    seed: int = 0


@dataclass
class RecoveryConfig:
    method: str = "stlsq"  # stlsq | lasso | slow_fit | stlsq_nodes
    threshold: float = 1e-4
    penalty: Optional[float] = None
    rule: float = 1.2
    sg_seconds: Optional[float] = None
    drift_degree: int = 0
    slow_combos: List[List[int]] = field(default_factory=list)


@dataclass
class PipelineConfig:
    name: str
    kind: str
    raw: dict
    stages: List[str] = field(default_factory=lambda: ["derive", "simulate", "recover", "predict"])
    eps_res: float = DEFAULT_EPS_RES
    sim: SimConfig = field(default_factory=SimConfig)
    recovery: RecoveryConfig = field(default_factory=RecoveryConfig)
    seed: int = 0
    full_scale: bool = False

    def __post_init__(self):
        bad = [s for s in self.stages if s not in STAGES]
        if bad:
            raise ValueError(f"unknown stages {bad}; valid: {STAGES}")
        idx = [STAGES.index(s) for s in self.stages]
        if idx != list(range(len(idx))):
            raise ValueError("stages must be a prefix of derive, simulate, recover, predict, report")

    def system(self) -> NetworkSystem:
        return NetworkSystem.from_dict(self.raw["system"])

    def section(self, key: str) -> dict:
        return dict(self.raw.get(key, {}))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "stages": self.stages,
            "eps_res": self.eps_res,
            "sim": asdict(self.sim),
            "recovery": asdict(self.recovery),
            "seed": self.seed,
            "full_scale": self.full_scale,
            "raw": self.raw,
        }


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else copy.deepcopy(v)
    return out


def preset_dict(name: str) -> dict:
    if name not in PRESETS:
        raise MissingInputError(f"unknown preset {name!r}; have {', '.join(PRESETS)}")
    return json.loads(resources.files("hnf.presets").joinpath(f"{name}.json").read_text())


def load_config(path: str | Path | None = None, preset: str | None = None, seed: int | None = None, full_scale: bool = False, eps_res: float | None = None, stages: List[str] | None = None) -> PipelineConfig:
    if path is None and preset is None:
        raise MissingInputError("need --config or --preset")
    if path is not None and preset is not None:
        raise ValueError("give exactly one of a config path or a preset name")
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise MissingInputError(f"config file {p} does not exist")
        raw = json.loads(p.read_text())
        if "system" in raw and isinstance(raw["system"], str):
            sp = (p.parent / raw["system"]).resolve()
            if not sp.exists():
                raise MissingInputError(f"system file {sp} does not exist")
            raw["system"] = json.loads(sp.read_text())
    else:
        raw = preset_dict(preset)
    if full_scale and "full_scale" in raw:
        raw = _merge(raw, raw["full_scale"])
    sim = SimConfig(**{k: v for k, v in raw.get("simulate", {}).items() if k in SimConfig.__dataclass_fields__})
    rec = RecoveryConfig(**{k: v for k, v in raw.get("recover", {}).items() if k in RecoveryConfig.__dataclass_fields__})
    s = raw.get("seed", 0) if seed is None else seed
    sim.seed = s
    return PipelineConfig(
        name=raw.get("name", Path(path).stem if path else preset),
        kind=raw.get("kind", "network"),
        raw=raw,
        stages=stages or ["derive", "simulate", "recover", "predict"],
        eps_res=raw.get("eps_res", DEFAULT_EPS_RES) if eps_res is None else eps_res,
        sim=sim,
        recovery=rec,
        seed=s,
        full_scale=full_scale,
    )
