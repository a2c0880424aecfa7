"""JSON run configuration: scenario, weight bank, engine settings and sweep grid.

Every section is optional; missing keys fall back to the library defaults.

    {
      "label": "M1",
      "sources": [{"seed": 1, "n_bits": 1137, "baud_hz": 2e8, "carrier_hz": 1.000176e9, "phase_rad": 0}],
      "mixing": [[0.6, 0.4], [0.4, 0.6]],
      "rings": [{"a": 0.5, "b_per_mA2": 0.125, "R": 1, "i_min_mA": 0, "i_max_mA": 5}],
      "weight_model": "lorentzian", "noise_std": 0.03, "noise_seed": 0,
      "pbss": {"linear_radius_mA": 0.6, "f_s_hz": 1.2288e8, "n_s": 16384, "iterations": 40,
               "refine_edge_fraction": 0.1, "repeats_success": 32, "subtract_noise_floor": false},
      "sweep": {"grid": "desk", "f_s_hz": [...], "n_s": [...], "trials": 32, "repeats": 32,
                "mixings": {"M1": [[...]], "M2": [[...]]}, "fixed_n_s": 2048, "fixed_f_s_hz": 7.68e6}
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .engine import PbssConfig
from .experiments import DESK_FS, DESK_NS, FULL_FS, FULL_NS, SweepConfig
from .optimize import NelderMeadConfig
from .signal_model import (M1, M2, InvalidParameter, MixingScenario, default_scenario,
                           scenario_from_dict)
from .stats import SamplingPlan
from .weightbank import WeightBank, bank_from_dict

_TOP_KEYS = {"label", "sources", "mixing", "rings", "weight_model", "noise_std", "noise_seed",
             "pbss", "sweep"}
_PBSS_KEYS = {"linear_radius_mA", "f_s_hz", "n_s", "iterations", "refine_edge_fraction",
              "repeats_success", "subtract_noise_floor", "initial_step", "sphere_step"}
_SWEEP_KEYS = {"grid", "f_s_hz", "n_s", "trials", "repeats", "mixings", "fixed_n_s", "fixed_f_s_hz"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    scenario: MixingScenario
    bank: WeightBank
    pbss: PbssConfig
    sweep: SweepConfig


def _unknown(doc: dict, allowed: set, where: str) -> None:
    extra = sorted(set(doc) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _pbss_from_dict(doc: dict, n_sources: int) -> PbssConfig:
    _unknown(doc, _PBSS_KEYS, "pbss")
    base = PbssConfig(n_sources=n_sources)
    nm = NelderMeadConfig(
        iterations=int(doc.get("iterations", base.nm.iterations)),
        initial_step=float(doc.get("initial_step", base.nm.initial_step)),
        sphere_step=float(doc.get("sphere_step", base.nm.sphere_step)),
    )
    plan = SamplingPlan(float(doc.get("f_s_hz", base.plan.f_s)), int(doc.get("n_s", base.plan.n_s)))
    return replace(
        base,
        linear_radius=float(doc.get("linear_radius_mA", base.linear_radius)),
        plan=plan,
        nm=nm,
        refine_edge_fraction=float(doc.get("refine_edge_fraction", base.refine_edge_fraction)),
        repeats_success=int(doc.get("repeats_success", base.repeats_success)),
        subtract_noise_floor=bool(doc.get("subtract_noise_floor", base.subtract_noise_floor)),
    )


def _sweep_from_dict(doc: dict, seed: int) -> SweepConfig:
    _unknown(doc, _SWEEP_KEYS, "sweep")
    grid = doc.get("grid", "desk")
    if grid not in ("desk", "full"):
        raise ConfigError(f"sweep.grid must be 'desk' or 'full', got {grid!r}")
    f_s = FULL_FS if grid == "full" else DESK_FS
    n_s = FULL_NS if grid == "full" else DESK_NS
    mixings = doc.get("mixings")
    if mixings is None:
        mixings = (("M1", M1), ("M2", M2))
    else:
        mixings = tuple((str(k), tuple(map(tuple, v))) for k, v in mixings.items())
    base = SweepConfig()
    return SweepConfig(
        f_s=tuple(float(x) for x in doc.get("f_s_hz", f_s)),
        n_s=tuple(int(x) for x in doc.get("n_s", n_s)),
        trials=int(doc.get("trials", base.trials)),
        repeats=int(doc.get("repeats", base.repeats)),
        mixings=mixings,
        seed=seed,
        fixed_n_s=int(doc.get("fixed_n_s", base.fixed_n_s)),
        fixed_f_s=float(doc.get("fixed_f_s_hz", base.fixed_f_s)),
    )


def config_from_dict(doc: dict, seed: int | None = None) -> RunConfig:
    """Build a :class:`RunConfig`; ``seed`` overrides the bank noise seed and seeds sweeps."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    try:
        _unknown(doc, _TOP_KEYS, "config")
        if "sources" in doc:
            if "mixing" not in doc:
                raise ConfigError("'sources' given without 'mixing'")
            scenario = scenario_from_dict(doc)
        else:
            scenario = default_scenario(doc.get("mixing", M1), label=str(doc.get("label", "")))
        n = scenario.n_sources
        bank = bank_from_dict(doc, n)
        if seed is not None:
            bank = bank.with_noise(noise_seed=seed)
        pbss = _pbss_from_dict(doc.get("pbss", {}), n)
        sweep = _sweep_from_dict(doc.get("sweep", {}), 0 if seed is None else seed)
        for f in sweep.f_s + (sweep.fixed_f_s,):
            for ns in sweep.n_s + (sweep.fixed_n_s,):
                SamplingPlan(f, ns)
    except ConfigError:
        raise
    except (InvalidParameter, ValueError, TypeError, KeyError, AttributeError) as exc:
        raise ConfigError(str(exc)) from exc
    if np.asarray(scenario.mixing).shape[0] != len(bank.rings):
        raise ConfigError(f"{len(bank.rings)} rings for {scenario.n_received} received signals")
    return RunConfig(scenario, bank, pbss, sweep)


def load_config(path: str | Path | None, seed: int | None = None) -> RunConfig:
    """Read a config file; ``None`` gives the all-defaults configuration."""
    if path is None:
        return config_from_dict({}, seed)
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON: {exc}") from exc
    return config_from_dict(doc, seed)
