"""Scenario execution: build, check, simulate, decompose, analyze, write."""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .boundaries import soft_dc_gains
from .chain import (chain_frequency_solve, local_plateau_estimate, plateau_value,
                    relative_l2, settling_time, simulate)
from .config import ScenarioConfig
from .lti import FreqGrid
from .waves import check_wtf_stability, dc_limit

__all__ = ["RunReport", "run_scenario", "emit_traces", "trace_columns", "write_report"]


@dataclass(frozen=True, eq=False)
class RunReport:
    tree: dict
    traces: dict  # label -> (main path, agent-0 path)

    @property
    def runs(self) -> dict:
        return self.tree["runs"]

    def stability_ok(self) -> bool:
        return all(v["verdict"] for r in self.runs.values() for v in r["stability"].values())


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.=+-]+", "_", text)


def trace_columns(chain) -> list:
    """Column names of the main trace table, in file order."""
    N = chain.N
    cols = ["t"]
    for p in ("x", "a", "b", "u"):
        cols += [f"{p}_{i}" for i in range(1, N + 1)]
    for eta in sorted(chain.hard_sites()):
        cols += [f"a_L_{eta}", f"b_L_{eta}", f"a_R_{eta}", f"b_R_{eta}"]
    return cols


def emit_traces(result, chain, path) -> tuple:
    """Write ``<path>.csv`` (per-agent traces) and ``<path>.agent0.csv``.

    Values use ``%.10g``; the same result always produces the same bytes.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    t = result.t
    blocks = [t[:, None], result.x.samples, result.a.samples, result.b.samples,
              result.u.samples]
    for eta in sorted(chain.hard_sites()):
        if eta in result.hard:
            blocks.append(np.stack(result.hard[eta], axis=1))
        else:
            blocks.append(np.full((t.size, 4), np.nan))
    data = np.hstack(blocks)
    main = path.with_suffix(".csv")
    np.savetxt(main, data, fmt="%.10g", delimiter=",",
               header=",".join(trace_columns(chain)), comments="")
    zero = path.with_suffix(".agent0.csv")
    np.savetxt(zero, np.stack([t, result.x0, result.a0, result.b0], axis=1), fmt="%.10g",
               delimiter=",", header="t,x_0,a_0,b_0", comments="")
    return str(main), str(zero)


def _stability(chain) -> dict:
    out = {}
    for ag in chain.agents:
        for m in (ag.mf, ag.mr):
            key = repr(m)
            if any(m.equals(o) for o in out.get("_seen", [])):
                continue
            out.setdefault("_seen", []).append(m)
            r = check_wtf_stability(m)
            out[key] = {"verdict": r.verdict, "proper": r.proper, "crhp_zeros": r.crhp_zeros,
                        "crhp_poles_nonorigin": r.crhp_poles_nonorigin,
                        "nyquist_clear": r.nyquist_clear, "crossings_rad_s": list(r.crossings)}
    out.pop("_seen", None)
    return out


def _dc_gains(chain) -> dict:
    out = {}
    for b in chain.boundaries:
        ags = chain.agents
        try:
            if b.kind == "soft":
                rec = soft_dc_gains(ags[b.index - 1].mr, ags[b.index].mf)
            else:
                rec = soft_dc_gains(ags[b.index - 1].mf, ags[b.index - 1].mr)
        except ValueError as e:
            out[str(b)] = {"error": str(e)}
            continue
        out[str(b)] = rec.as_dict()
    return out


def _norms(chain, grid: FreqGrid, sub: int = 256) -> dict:
    """Peak of ``|X_i/X_ref|`` per agent: grid maximum refined on a fine local grid."""
    w = grid.omegas
    X = np.abs(chain_frequency_solve(chain, 1j * w))
    k = np.argmax(X, axis=0)
    out = {i + 1: float(X[k[i], i]) for i in range(chain.N)}
    brackets = sorted({(max(j - 1, 0), min(j + 1, w.size - 1)) for j in k})
    fine = np.concatenate([np.geomspace(w[a], w[b], sub) for a, b in brackets])
    Xf = np.abs(chain_frequency_solve(chain, 1j * fine)).max(axis=0)
    for i in range(chain.N):
        out[i + 1] = max(out[i + 1], float(Xf[i]))
    return out


def _dc_levels(chain) -> np.ndarray:
    """Closed-loop DC gain of every agent (limit along the real axis)."""
    return np.real(dc_limit(lambda s: chain_frequency_solve(chain, s)))


def _run_one(run, cfg: ScenarioConfig, grid: FreqGrid, simulate_run: bool, out_dir):
    chain = run.chain
    N = chain.N
    rec = {
        "n_agents": N,
        "agents": run.agents_desc,
        "absorbers": run.absorbers,
        "boundaries": [str(b) for b in chain.boundaries],
        "dc_gains": _dc_gains(chain),
        "stability": _stability(chain),
    }
    dc = _dc_levels(chain)
    rec["steady_state"] = {i + 1: float(v) for i, v in enumerate(dc)}
    if run.analysis.get("norms", True):
        rec["hinf_norms"] = _norms(chain, grid)
    if "plateau_agent" in run.analysis:
        rec["plateau_prediction"] = local_plateau_estimate(chain, run.analysis["plateau_agent"])
    paths = None
    if simulate_run:
        res = simulate(chain, cfg.t_final, cfg.dt, horizon=cfg.fir_horizon)
        t, x = res.t, res.x.samples
        trusted = res.meta["trusted_until"]
        m = t <= trusted
        rec["final_values"] = {i + 1: float(x[-1, i]) for i in range(N)}
        rec["settling_time_s"] = {
            "agent": N, "tolerance": 0.02, "level": float(dc[-1]),
            "value": settling_time(t, x[:, -1], final=dc[-1]),
        }
        rec["decomposition"] = {
            "trusted_until_s": trusted,
            "residual": res.meta["decomposition_residual"],
            "consistency": res.meta["consistency"],
        }
        refl = {}
        for sigma in chain.soft_sites():
            a, b = res.a.samples[m, sigma - 1], res.b.samples[m, sigma - 1]
            refl[f"soft@{sigma}"] = relative_l2(b, a)
        for eta, (aL, bL, aR, bR) in res.hard.items():
            refl[f"hard@{eta}"] = {"a_L_vs_a_R": relative_l2((aL - aR)[m], aL[m]),
                                   "b_L_vs_b_R": relative_l2((bL - bR)[m], aL[m])}
        rec["reflection_ratio"] = refl
        if "plateau_agent" in run.analysis:
            p = run.analysis["plateau_agent"]
            win = run.analysis.get("plateau_window_s", [0.5 * cfg.t_final, 0.7 * cfg.t_final])
            mean, dev = plateau_value(t, x[:, p - 1], tuple(win))
            rec["plateau"] = {"agent": p, "window_s": list(win), "mean": mean,
                              "max_deviation": dev, "predicted": rec["plateau_prediction"]}
        for p in run.analysis.get("trace_agents", []):
            u = res.u.samples[:, p - 1]
            rec.setdefault("inputs", {})[p] = {"peak": float(np.max(np.abs(u))),
                                               "l2": float(np.sqrt(cfg.dt) * np.linalg.norm(u))}
        rec["fir_tail_energy"] = res.meta["fir_tail"]
        if out_dir is not None:
            paths = emit_traces(res, chain, Path(out_dir) / _slug(f"{cfg.name}__{run.label}"))
            rec["traces"] = [Path(p).name for p in paths]
    return rec, paths


def run_scenario(cfg: ScenarioConfig, out_dir=None, *, simulate_runs: bool = True) -> RunReport:
    """Run every entry of ``cfg``; write traces and the report when ``out_dir`` is given."""
    out_dir = out_dir if out_dir is not None else cfg.output_dir
    grid = FreqGrid.logspace(cfg.grid["w_min"], cfg.grid["w_max"], cfg.grid["points"])
    runs, traces = {}, {}
    for run in cfg.runs:
        rec, paths = _run_one(run, cfg, grid, simulate_runs, out_dir)
        runs[run.label] = rec
        if paths:
            traces[run.label] = paths
    tree = {
        "scenario": cfg.name,
        "config_sha256": cfg.digest,
        "tool": {"name": "wavechain", "version": __version__},
        "parameters": {"t_final_s": cfg.t_final, "dt_s": cfg.dt,
                       "fir_horizon_s": cfg.fir_horizon if cfg.fir_horizon else cfg.t_final,
                       "grid": cfg.grid, "mode": "run" if simulate_runs else "analyze"},
        "runs": runs,
    }
    if "plateau_agent" in cfg.runs[0].analysis and len(runs) > 1 and simulate_runs:
        tree["plateau_table"] = {k: {"measured": v["plateau"]["mean"],
                                     "predicted": v["plateau"]["predicted"]}
                                 for k, v in runs.items()}
    tree = _clean(tree)
    report = RunReport(tree, traces)
    if out_dir is not None:
        write_report(report, Path(out_dir) / f"{_slug(cfg.name)}.report.json")
    return report


def write_report(report: RunReport, path) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.tree, indent=2, sort_keys=True) + "\n")
    return str(path)
