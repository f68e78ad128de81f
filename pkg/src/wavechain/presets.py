"""Built-in scenarios on the two-model chain."""
from __future__ import annotations

import copy

import yaml

_PAIR = [{"count": 4, "model": "m1"}, {"count": 4, "model": "m2", "kp": 1.0}]

PRESETS = {
    "fig5": {
        "description": "8 agents (4 x m1, 4 x m2), absorbers on both ends, unit step",
        "schema": 1,
        "name": "fig5",
        "chain": {"segments": _PAIR},
        "absorbers": ["leader", "rear"],
        "reference": {"kind": "step", "amplitude": 1.0},
        "simulation": {"t_final_s": 60.0, "dt_s": 0.01},
    },
    "fig6": {
        "description": "six strategies: {none, leader, both ends} x {soft pair off, on}",
        "schema": 1,
        "name": "fig6",
        "chain": {"segments": _PAIR},
        "reference": {"kind": "step", "amplitude": 1.0},
        "simulation": {"t_final_s": 120.0, "dt_s": 0.01},
        "matrix": [
            {"label": "none", "absorbers": []},
            {"label": "leader", "absorbers": ["leader"]},
            {"label": "both", "absorbers": ["leader", "rear"]},
            {"label": "none+soft", "absorbers": ["soft@4"]},
            {"label": "leader+soft", "absorbers": ["leader", "soft@4"]},
            {"label": "both+soft", "absorbers": ["leader", "rear", "soft@4"]},
        ],
    },
    "fig7": {
        "description": "control input of agent 4 for three chains with end absorbers",
        "schema": 1,
        "name": "fig7",
        "reference": {"kind": "step", "amplitude": 1.0},
        "simulation": {"t_final_s": 40.0, "dt_s": 0.01},
        "analysis": {"trace_agents": [4]},
        "chain": {"segments": _PAIR},
        "matrix": [
            {"label": "homogeneous", "chain": {"segments": [{"count": 8, "model": "m1"}]},
             "absorbers": ["leader", "rear"]},
            {"label": "heterogeneous", "absorbers": ["leader", "rear"]},
            {"label": "heterogeneous+soft", "absorbers": ["leader", "rear", "soft@4"]},
        ],
    },
    "fig8": {
        "description": "30 x m1 + 30 x m2, kp in {0.5, 1, 2, 4}, plateau of agent 31",
        "schema": 1,
        "name": "fig8",
        "reference": {"kind": "step", "amplitude": 1.0},
        "simulation": {"t_final_s": 100.0, "dt_s": 0.01},
        "absorbers": [],
        "analysis": {"plateau_agent": 31, "plateau_window_s": [50.0, 70.0]},
        "chain": {"segments": [{"count": 30, "model": "m1"},
                               {"count": 30, "model": "m2", "kp": 1.0}]},
        "matrix": [
            {"label": f"kp={kp:g}",
             "chain": {"segments": [{"count": 30, "model": "m1"},
                                    {"count": 30, "model": "m2", "kp": kp}]}}
            for kp in (0.5, 1.0, 2.0, 4.0)
        ],
    },
}


def preset_names() -> list:
    return sorted(PRESETS)


def preset_dict(name: str) -> dict:
    """Configuration tree of a preset (without its description)."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r} (known: {', '.join(preset_names())})")
    d = copy.deepcopy(PRESETS[name])
    d.pop("description")
    return d


def preset_yaml(name: str) -> str:
    return yaml.safe_dump(preset_dict(name), sort_keys=False)


def describe(name: str) -> str:
    return PRESETS[name]["description"]
