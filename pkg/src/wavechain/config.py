"""Scenario configuration: YAML text to a validated :class:`ScenarioConfig`.

Example::

    schema: 1
    name: demo
    chain:
      segments:
        - 4 x m1
        - {count: 4, model: m2, kp: 1.0}
    absorbers: [leader, rear, soft@4]
    reference: {kind: step, amplitude: 1.0}
    simulation: {t_final_s: 60, dt_s: 0.01}

Polynomial coefficients are given in descending powers of ``s``.  A
``matrix`` list turns one file into several runs; each entry carries a
``label`` and may override ``chain``, ``absorbers``, ``reference``,
``options`` and ``analysis``.
"""
from __future__ import annotations

import copy
import hashlib
import re
from dataclasses import dataclass, field

import yaml

from .chain import AgentSpec, ChainError, Reference, build_chain
from .lti import RationalTF
from .models import agent_m1, agent_m2, site

__all__ = ["ConfigError", "RunSpec", "ScenarioConfig", "parse_config", "config_from_dict"]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Validation failure, addressed by field path and (when known) line."""

    def __init__(self, message: str, path=(), line: int | None = None):
        self.reason = message
        self.path = tuple(path)
        self.line = line
        where = ".".join(str(p) for p in self.path) or "<root>"
        loc = f"line {line}: " if line else ""
        super().__init__(f"{loc}{where}: {message}")


_TOP = {"schema", "name", "preset", "chain", "absorbers", "reference", "simulation",
        "grid", "options", "analysis", "output", "matrix"}
_SECTIONS = {
    "chain": {"segments", "agents"},
    "reference": {"kind", "amplitude", "samples", "dt_s"},
    "simulation": {"t_final_s", "dt_s", "fir_horizon_s"},
    "grid": {"w_min_rad_s", "w_max_rad_s", "points"},
    "options": {"soft_right_form", "hard_printed_sign", "mismatch"},
    "analysis": {"plateau_agent", "plateau_window_s", "trace_agents", "norms"},
    "output": {"dir"},
}
_MATRIX_KEYS = {"label", "chain", "absorbers", "reference", "options", "analysis"}
_SEGMENT_KEYS = {"count", "model", "kp", "plant", "cf", "cr", "mf", "mr"}
_SEG_RE = re.compile(r"^\s*(\d+)\s*[x×*]\s*(m1|m2)\s*(?:\(\s*kp\s*=\s*([-+0-9.eE]+)\s*\))?\s*$")


@dataclass(frozen=True, eq=False)
class RunSpec:
    label: str
    chain: object
    agents_desc: list
    absorbers: list
    analysis: dict


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    name: str
    runs: tuple
    t_final: float
    dt: float
    fir_horizon: float | None
    grid: dict
    output_dir: str | None
    raw: dict = field(default_factory=dict)
    digest: str = ""


def _line_index(node, path=(), out=None):
    out = {} if out is None else out
    if node is None:
        return out
    out.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            out[path + (key,)] = k.start_mark.line + 1
            _line_index(v, path + (key,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_index(v, path + (i,), out)
    return out


class _Ctx:
    def __init__(self, lines):
        self.lines = lines

    def fail(self, msg, path):
        p = tuple(path)
        line = None
        while p and line is None:
            line = self.lines.get(p)
            p = p[:-1]
        raise ConfigError(msg, path, line or self.lines.get(()))


def _mapping(ctx, v, path, allowed):
    if not isinstance(v, dict):
        ctx.fail("expected a mapping", path)
    extra = set(v) - allowed
    if extra:
        ctx.fail(f"unknown key(s) {sorted(map(str, extra))}", path + (sorted(map(str, extra))[0],))
    return v


def _number(ctx, v, path, positive=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        ctx.fail(f"expected a number, got {v!r}", path)
    if positive and not v > 0:
        ctx.fail("must be positive", path)
    return float(v)


def _tf(ctx, v, path):
    v = _mapping(ctx, v, path, {"num", "den"})
    for k in ("num", "den"):
        if k not in v:
            ctx.fail(f"missing '{k}'", path)
        c = v[k]
        if not isinstance(c, list) or not c:
            ctx.fail("coefficient list must be a non-empty list", path + (k,))
        for j, x in enumerate(c):
            _number(ctx, x, path + (k, j))
    try:
        return RationalTF.from_descending(v["num"], v["den"])
    except (ValueError, ZeroDivisionError) as e:
        ctx.fail(str(e), path)


def _segment(ctx, seg, path):
    if isinstance(seg, str):
        m = _SEG_RE.match(seg)
        if not m:
            ctx.fail(f"cannot read segment {seg!r}; use e.g. '4 x m1' or '4 x m2(kp=0.5)'", path)
        count, model, kp = int(m.group(1)), m.group(2), m.group(3)
        seg = {"count": count, "model": model}
        if kp is not None:
            seg["kp"] = float(kp)
    seg = _mapping(ctx, seg, path, _SEGMENT_KEYS)
    count = seg.get("count", 1)
    if isinstance(count, bool) or not isinstance(count, int) or count < 1:
        ctx.fail("count must be a positive integer", path + ("count",))
    if "model" in seg:
        model = seg["model"]
        if model == "m1":
            agent = agent_m1()
        elif model == "m2":
            agent = agent_m2(_number(ctx, seg.get("kp", 1.0), path + ("kp",)))
        else:
            ctx.fail(f"unknown model {model!r} (known: m1, m2)", path + ("model",))
    elif "plant" in seg:
        for k in ("cf", "cr"):
            if k not in seg:
                ctx.fail(f"missing '{k}'", path)
        agent = AgentSpec(*(_tf(ctx, seg[k], path + (k,)) for k in ("plant", "cf", "cr")))
    elif "mf" in seg:
        mf = _tf(ctx, seg["mf"], path + ("mf",))
        mr = _tf(ctx, seg["mr"], path + ("mr",)) if "mr" in seg else mf
        agent = AgentSpec.from_open_loops(mf, mr)
    else:
        ctx.fail("segment needs 'model', 'plant'/'cf'/'cr' or 'mf'/'mr'", path)
    desc = {k: seg[k] for k in sorted(seg) if k != "count"}
    return [agent] * count, [desc] * count


def _agents(ctx, chain, path):
    chain = _mapping(ctx, chain, path, _SECTIONS["chain"])
    if ("segments" in chain) == ("agents" in chain):
        ctx.fail("give exactly one of 'segments' or 'agents'", path)
    key = "segments" if "segments" in chain else "agents"
    items = chain[key]
    if not isinstance(items, list) or not items:
        ctx.fail("expected a non-empty list", path + (key,))
    agents, desc = [], []
    for i, seg in enumerate(items):
        if key == "agents" and isinstance(seg, dict) and "count" in seg:
            ctx.fail("per-agent entries take no 'count'", path + (key, i))
        try:
            a, d = _segment(ctx, seg, path + (key, i))
        except ConfigError as e:
            raise ConfigError(f"agent {len(agents) + 1}: {e.reason}", e.path, e.line) from None
        agents += a
        desc += d
    return agents, desc


def _reference(ctx, v, path):
    v = _mapping(ctx, v, path, _SECTIONS["reference"])
    kind = v.get("kind", "step")
    if kind not in ("step", "ramp", "custom"):
        ctx.fail(f"unknown reference kind {kind!r}", path + ("kind",))
    amp = _number(ctx, v.get("amplitude", 1.0), path + ("amplitude",))
    samples = ()
    dt = None
    if kind == "custom":
        if "samples" not in v or not isinstance(v["samples"], list) or not v["samples"]:
            ctx.fail("custom reference needs a non-empty 'samples' list", path)
        samples = tuple(_number(ctx, x, path + ("samples", j)) for j, x in enumerate(v["samples"]))
        if "dt_s" in v:
            dt = _number(ctx, v["dt_s"], path + ("dt_s",), positive=True)
    return Reference(kind, amp, samples, dt)


def _absorbers(ctx, v, path):
    if v is None:
        return []
    if not isinstance(v, list):
        ctx.fail("expected a list such as [leader, rear, soft@4]", path)
    out = []
    for i, a in enumerate(v):
        if not isinstance(a, str):
            ctx.fail("absorber entries are strings", path + (i,))
        try:
            out.append(site(a))
        except (ValueError, ChainError) as e:
            ctx.fail(str(e), path + (i,))
    return out


def _options(ctx, v, path):
    v = _mapping(ctx, v or {}, path, _SECTIONS["options"])
    out = {}
    if "soft_right_form" in v:
        if v["soft_right_form"] not in ("mirror", "printed"):
            ctx.fail("must be 'mirror' or 'printed'", path + ("soft_right_form",))
        out["soft_right_form"] = v["soft_right_form"]
    if "hard_printed_sign" in v:
        if not isinstance(v["hard_printed_sign"], bool):
            ctx.fail("must be true or false", path + ("hard_printed_sign",))
        out["hard_printed_sign"] = v["hard_printed_sign"]
    if "mismatch" in v:
        out["mismatch"] = _number(ctx, v["mismatch"], path + ("mismatch",))
    return out


def _analysis(ctx, v, path):
    v = _mapping(ctx, v or {}, path, _SECTIONS["analysis"])
    out = dict(v)
    if "plateau_agent" in v:
        p = v["plateau_agent"]
        if isinstance(p, bool) or not isinstance(p, int) or p < 1:
            ctx.fail("must be a positive agent index", path + ("plateau_agent",))
    if "plateau_window_s" in v:
        w = v["plateau_window_s"]
        if not (isinstance(w, list) and len(w) == 2):
            ctx.fail("expected [start, end] in seconds", path + ("plateau_window_s",))
        a, b = (_number(ctx, x, path + ("plateau_window_s", j)) for j, x in enumerate(w))
        if not b > a:
            ctx.fail("window end must exceed its start", path + ("plateau_window_s",))
        out["plateau_window_s"] = [a, b]
    if "norms" in v and not isinstance(v["norms"], bool):
        ctx.fail("must be true or false", path + ("norms",))
    return out


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def config_from_dict(data: dict, lines: dict | None = None, digest: str = "") -> ScenarioConfig:
    from .presets import preset_dict

    ctx = _Ctx(lines or {})
    data = _mapping(ctx, data, (), _TOP)
    if data.get("schema") != SCHEMA_VERSION:
        ctx.fail(f"'schema: {SCHEMA_VERSION}' is required", ("schema",))
    if "preset" in data:
        try:
            base = preset_dict(data["preset"])
        except KeyError as e:
            ctx.fail(str(e.args[0]), ("preset",))
        over = {k: v for k, v in data.items() if k != "preset"}
        if "matrix" in over and "matrix" in base:
            base = {k: v for k, v in base.items() if k != "matrix"}
        data = _merge(base, over)
    for sec in ("simulation", "grid", "output"):
        _mapping(ctx, data.get(sec) or {}, (sec,), _SECTIONS[sec])
    sim = data.get("simulation") or {}
    t_final = _number(ctx, sim.get("t_final_s", 60.0), ("simulation", "t_final_s"), True)
    dt = _number(ctx, sim.get("dt_s", 0.01), ("simulation", "dt_s"), True)
    if dt >= t_final:
        ctx.fail("dt_s must be smaller than t_final_s", ("simulation", "dt_s"))
    hz = sim.get("fir_horizon_s")
    hz = None if hz is None else _number(ctx, hz, ("simulation", "fir_horizon_s"), True)
    g = data.get("grid") or {}
    grid = {"w_min": _number(ctx, g.get("w_min_rad_s", 1e-3), ("grid", "w_min_rad_s"), True),
            "w_max": _number(ctx, g.get("w_max_rad_s", 1e3), ("grid", "w_max_rad_s"), True),
            "points": g.get("points", 1024)}
    if isinstance(grid["points"], bool) or not isinstance(grid["points"], int) or grid["points"] < 8:
        ctx.fail("points must be an integer >= 8", ("grid", "points"))
    if grid["w_max"] <= grid["w_min"]:
        ctx.fail("w_max_rad_s must exceed w_min_rad_s", ("grid", "w_max_rad_s"))

    variants = data.get("matrix")
    if variants is None:
        variants = [{"label": data.get("name", "run")}]
    if not isinstance(variants, list) or not variants:
        ctx.fail("matrix must be a non-empty list", ("matrix",))
    runs, labels = [], set()
    for j, var in enumerate(variants):
        vpath = ("matrix", j) if "matrix" in data else ()
        _mapping(ctx, var, vpath, _MATRIX_KEYS)
        label = str(var.get("label", f"run{j}"))
        if label in labels:
            ctx.fail(f"duplicate label {label!r}", vpath + ("label",))
        labels.add(label)

        def pick(key):
            return (var[key], vpath + (key,)) if key in var else (data.get(key), (key,))

        chain_d, cpath = pick("chain")
        if chain_d is None:
            ctx.fail("missing 'chain'", ("chain",))
        agents, desc = _agents(ctx, chain_d, cpath)
        ab_d, apath = pick("absorbers")
        absorbers = _absorbers(ctx, ab_d, apath)
        ref_d, rpath = pick("reference")
        ref = _reference(ctx, ref_d or {}, rpath)
        opt_d, opath = pick("options")
        opts = _options(ctx, opt_d, opath)
        an_d, anpath = pick("analysis")
        analysis = _analysis(ctx, an_d, anpath)
        try:
            chain = build_chain(agents, absorbers, ref, **opts)
        except ChainError as e:
            ctx.fail(str(e), apath if "absorber" in str(e) else cpath)
        if analysis.get("plateau_agent", 1) > chain.N:
            ctx.fail("plateau_agent beyond the chain", anpath + ("plateau_agent",))
        runs.append(RunSpec(label, chain, desc, [str(a) for a in absorbers], analysis))
    out = data.get("output") or {}
    return ScenarioConfig(str(data.get("name", "scenario")), tuple(runs), t_final, dt, hz,
                          grid, out.get("dir"), data, digest)


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate YAML scenario text."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {getattr(e, 'problem', e)}",
                          line=mark.line + 1 if mark else None) from None
    if data is None:
        raise ConfigError("empty configuration")
    digest = hashlib.sha256(text.encode()).hexdigest()
    return config_from_dict(data, _line_index(node), digest)
