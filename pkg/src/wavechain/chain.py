"""Chain description, closed-loop simulation and travelling-wave decomposition.

Agents are numbered from 1.  Agent ``i`` obeys

    X_i = M_f,i (X_{i-1} - X_i + W_f,i) + M_r,i (X_{i+1} - X_i + W_r,i)

with ``X_0 = x_ref`` and no rear term for the last agent.  Absorber laws
(see :mod:`wavechain.absorbers`) enter through the ``W`` inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from .boundaries import BoundaryLocation, detect_boundaries, soft_dc_gains
from .lti import (DimensionError, FreqGrid, FreqResponse, RationalTF, StateSpace,
                  TimeSignal, assemble_chain_ss, ss_freq_eval, zoh_discretize,
                  DivergenceError)
from .waves import WaveTF, check_wtf_stability

__all__ = [
    "ChainError", "AgentSpec", "AbsorberSite", "Reference", "ChainSpec",
    "SimulationResult", "build_chain", "simulate", "wave_decompose",
    "chain_frequency_solve", "closed_loop_tf", "local_plateau_estimate",
    "plateau_value", "settling_time", "relative_l2",
]


class ChainError(ValueError):
    """Invalid chain description."""


@dataclass(frozen=True, eq=False)
class AgentSpec:
    """Plant ``P`` with front/rear controllers; open loops ``mf = P C_f``, ``mr = P C_r``."""

    plant: RationalTF
    cf: RationalTF
    cr: RationalTF

    @classmethod
    def from_open_loops(cls, mf: RationalTF, mr: RationalTF | None = None) -> "AgentSpec":
        return cls(RationalTF.constant(1.0), mf, mf if mr is None else mr)

    @cached_property
    def mf(self) -> RationalTF:
        return self.plant * self.cf

    @cached_property
    def mr(self) -> RationalTF:
        return self.plant * self.cr


_SITE_KINDS = ("leader", "rear", "soft", "hard")


@dataclass(frozen=True)
class AbsorberSite:
    """Where an absorber sits.

    ``kind`` is one of ``leader``, ``rear``, ``soft`` (index ``sigma``, the
    boundary between ``sigma`` and ``sigma+1``) or ``hard`` (index ``eta``).
    ``side`` selects ``left``, ``right`` or ``both`` laws of a boundary pair.
    """

    kind: str
    index: int = 0
    side: str = "both"

    def __post_init__(self):
        if self.kind not in _SITE_KINDS:
            raise ChainError(f"unknown absorber kind {self.kind!r}")
        if self.side not in ("left", "right", "both"):
            raise ChainError(f"unknown absorber side {self.side!r}")

    def __str__(self):
        if self.kind in ("leader", "rear"):
            return self.kind
        side = "" if self.side == "both" else f"_{self.side}"
        return f"{self.kind}{side}@{self.index}"


@dataclass(frozen=True, eq=False)
class Reference:
    """Reference signal: ``step`` or ``ramp`` with ``amplitude``, or ``custom`` samples."""

    kind: str = "step"
    amplitude: float = 1.0
    samples: tuple = ()
    dt: float | None = None

    def sample(self, t: np.ndarray) -> np.ndarray:
        if self.kind == "step":
            return np.full(t.shape, float(self.amplitude))
        if self.kind == "ramp":
            return self.amplitude * t
        if self.kind == "custom":
            v = np.asarray(self.samples, dtype=float)
            dt = self.dt or (t[1] - t[0] if t.size > 1 else 1.0)
            k = np.minimum((t / dt + 1e-9).astype(int), v.size - 1)
            return v[k]
        raise ChainError(f"unknown reference kind {self.kind!r}")


@dataclass(frozen=True, eq=False)
class ChainSpec:
    """Validated chain.

    ``soft_right_form`` picks the input pair of the right soft-boundary law:
    ``"mirror"`` reads ``(X_{s+2}, X_{s+1})``, ``"printed"`` reads
    ``(X_{s+1}, X_s)``.  ``hard_printed_sign`` switches hard-boundary agents
    carrying an absorber to the front error ``X_{eta-1} + X_eta``.
    ``mismatch`` scales the neighbour open loop used in boundary-law
    synthesis by ``1 + mismatch``.
    """

    agents: tuple
    absorbers: tuple = ()
    reference: Reference = field(default_factory=Reference)
    boundaries: tuple = ()
    soft_right_form: str = "mirror"
    hard_printed_sign: bool = False
    mismatch: float = 0.0

    @property
    def N(self) -> int:
        return len(self.agents)

    @property
    def printed_sign_agents(self) -> tuple:
        if not self.hard_printed_sign:
            return ()
        return tuple(a.index for a in self.absorbers if a.kind == "hard")

    def has(self, kind: str) -> bool:
        return any(a.kind == kind for a in self.absorbers)

    def soft_sites(self) -> list:
        return [b.index for b in self.boundaries if b.kind == "soft"]

    def hard_sites(self) -> list:
        return [b.index for b in self.boundaries if b.kind == "hard"]

    def with_absorbers(self, absorbers: Sequence[AbsorberSite]) -> "ChainSpec":
        out = replace(self, absorbers=tuple(absorbers))
        _validate_absorbers(out)
        return out


def _validate_absorbers(chain: ChainSpec):
    soft, hard = set(chain.soft_sites()), set(chain.hard_sites())
    seen = set()
    for a in chain.absorbers:
        key = (a.kind, a.index, a.side)
        if key in seen:
            raise ChainError(f"duplicate absorber {a}")
        seen.add(key)
        if a.kind == "soft":
            if a.index not in soft:
                raise ChainError(f"absorber {a}: no soft boundary between agents "
                                 f"{a.index} and {a.index + 1}")
            if a.side in ("right", "both") and chain.soft_right_form == "mirror" \
                    and a.index + 2 > chain.N:
                raise ChainError(f"absorber {a}: right law needs agent {a.index + 2}")
        elif a.kind == "hard":
            if a.index not in hard:
                raise ChainError(f"absorber {a}: no hard boundary at agent {a.index}")


def build_chain(agents: Sequence[AgentSpec], absorbers: Sequence[AbsorberSite] = (),
                reference: Reference | None = None, **options) -> ChainSpec:
    """Validate agents and absorber sites and attach the detected boundaries."""
    agents = tuple(agents)
    if len(agents) < 2:
        raise ChainError("a chain needs at least two agents")
    for i, ag in enumerate(agents, start=1):
        for name in ("mf", "mr"):
            m = getattr(ag, name)
            if name == "mr" and i == len(agents):
                continue
            if not m.is_proper():
                raise ChainError(f"agent {i}: open loop {name} = {m!r} is improper")
    if options.get("soft_right_form", "mirror") not in ("mirror", "printed"):
        raise ChainError("soft_right_form must be 'mirror' or 'printed'")
    chain = ChainSpec(agents, (), reference or Reference(), **options)
    chain = replace(chain, boundaries=tuple(detect_boundaries(chain)))
    return chain.with_absorbers(absorbers)


# ---------------------------------------------------------------------------
# frequency domain


def chain_frequency_solve(chain: ChainSpec, s, laws=None, use_fir: bool = False) -> np.ndarray:
    """Closed-loop ``X_i/X_ref`` at every ``s``; shape ``(len(s), N)``.

    The interconnection is solved as an ``N x N`` linear system per
    frequency.  ``laws`` are absorber laws (synthesized from the chain when
    omitted); with ``use_fir`` their realized kernels replace the exact
    irrational blocks.
    """
    from .absorbers import synthesize_laws

    s = np.atleast_1d(np.asarray(s, dtype=complex))
    N = chain.N
    if laws is None:
        laws = synthesize_laws(chain)
    cache = {}

    def ev(m):
        if id(m) not in cache:
            cache[id(m)] = m(s)
        return cache[id(m)]

    mf = np.stack([ev(ag.mf) for ag in chain.agents], axis=1)
    mr = np.stack([ev(ag.mr) for ag in chain.agents], axis=1)
    mr[:, N - 1] = 0
    flipped = set(chain.printed_sign_agents)
    A = np.zeros((s.size, N, N), dtype=complex)
    rhs = np.zeros((s.size, N), dtype=complex)
    ii = np.arange(N)
    sign = np.array([-1.0 if i + 1 in flipped else 1.0 for i in ii])
    A[:, ii, ii] = 1 + sign * mf + mr
    A[:, ii[1:], ii[:-1]] = -mf[:, 1:]
    A[:, ii[:-1], ii[1:]] = -mr[:, :-1]
    rhs[:, 0] = mf[:, 0]
    for law in laws:
        gain = mf[:, law.agent - 1] if law.channel == "f" else mr[:, law.agent - 1]
        vals = law.kernel_responses(s) if use_fir else law.block_values(s)
        for src, v in zip(law.sources, vals):
            if src == 0:
                rhs[:, law.agent - 1] += gain * v
            else:
                A[:, law.agent - 1, src - 1] -= gain * v
    return np.linalg.solve(A, rhs[..., None])[..., 0]


def closed_loop_tf(chain: ChainSpec, i: int, grid: FreqGrid | None = None,
                   use_fir: bool = False, laws=None) -> FreqResponse:
    """Frequency response of ``X_i/X_ref``.

    Without absorbers the rational state-space interconnection is used;
    with absorbers the exact irrational closed loop (or its FIR
    realization with ``use_fir``).
    """
    if not 1 <= i <= chain.N:
        raise DimensionError(f"agent index {i} outside 1..{chain.N}")
    grid = grid or FreqGrid.logspace()
    if not chain.absorbers and laws is None:
        ss = assemble_chain_ss(chain)

        def func(w):
            return ss_freq_eval(ss, 1j * np.asarray(w, dtype=float))[:, i - 1, 0]
    else:
        if laws is None:
            from .absorbers import synthesize_laws
            laws = synthesize_laws(chain)

        def func(w):
            return chain_frequency_solve(chain, 1j * np.asarray(w, dtype=float),
                                         laws, use_fir)[:, i - 1]
    return FreqResponse(grid.omegas, func(grid.omegas), func)


# ---------------------------------------------------------------------------
# time domain


@dataclass(frozen=True, eq=False)
class SimulationResult:
    """Sampled traces of one run.

    ``a``/``b`` hold the wave components per agent (the left pair for
    hard-boundary agents); ``hard`` maps ``eta`` to ``(a_L, b_L, a_R, b_R)``
    sample arrays.  ``x0``/``a0``/``b0`` are the virtual agent-0 channels
    ``W_f,1``, ``x_ref`` and ``G B_1``.
    """

    x: TimeSignal
    u: TimeSignal
    wf: TimeSignal
    wr: TimeSignal
    a: TimeSignal | None = None
    b: TimeSignal | None = None
    hard: dict = field(default_factory=dict)
    x0: np.ndarray | None = None
    a0: np.ndarray | None = None
    b0: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def t(self) -> np.ndarray:
        return self.x.t


def _history_dot(taps: np.ndarray, hist: np.ndarray, k: int) -> float:
    L = min(taps.size, k + 1)
    return float(np.dot(taps[:L], hist[k::-1][:L]))


def simulate(chain: ChainSpec, t_final: float, dt: float = 0.01, *,
             horizon: float | None = None, decompose: bool = True,
             check_stability: bool = True) -> SimulationResult:
    """Zero-initial-condition response of the chain to its reference.

    The rational part is discretized exactly (zero-order hold); absorber
    blocks run as FIR kernels inside the loop, one sample of input lag
    being avoided because agent outputs have no direct feedthrough.
    """
    import warnings
    from .absorbers import synthesize_laws

    N = chain.N
    if check_stability:
        seen = []
        for ag in chain.agents:
            for m in (ag.mf, ag.mr):
                if any(m.equals(o) for o in seen):
                    continue
                seen.append(m)
                if m.integrators and not check_wtf_stability(m).verdict:
                    warnings.warn(f"WTF of {m!r} fails the stability test", RuntimeWarning,
                                  stacklevel=2)
    ss = assemble_chain_ss(chain)
    n = int(round(t_final / dt)) + 1
    t = dt * np.arange(n)
    xref = chain.reference.sample(t)
    laws = synthesize_laws(chain)
    if laws:
        horizon = t_final if horizon is None else horizon
        # taps beyond the simulated window never act, so no tail bound then
        kw = {"tail_bound": math.inf} if horizon >= t_final else {}
        laws = [law.realize(dt, horizon, **kw) for law in laws]
    Ad, Bd = zoh_discretize(ss, dt)
    C, D = ss.C, ss.D
    if laws and np.any(np.abs(D[:N]) > 0):
        raise ChainError("absorbers need agent outputs without direct feedthrough")
    # offline part: reference terms.  The reference is held between samples,
    # so a midpoint-sampled kernel sees the average of adjacent samples.
    xref_mid = 0.5 * (xref + np.concatenate(([0.0], xref[:-1])))
    inj = np.zeros((n, 2 * N))
    loop_terms = []
    for law in laws:
        col = (law.agent - 1) + (0 if law.channel == "f" else N)
        for src, k in zip(law.sources, law.fir):
            if src == 0:
                inj[:, col] += np.convolve(xref_mid, k.taps)[:n] + k.feedthrough * xref
            else:
                loop_terms.append((col, src - 1, k))
    z = np.zeros(ss.n_states)
    X = np.zeros((n, N))
    Y = np.empty((n, 2 * N))
    U = np.empty((n, 1 + 2 * N))
    Cx = C[:N]
    for k in range(n):
        X[k] = Cx @ z
        w = inj[k].copy()
        for col, src, ker in loop_terms:
            w[col] += _history_dot(ker.taps, X[:, src], k) + ker.feedthrough * X[k, src]
        U[k, 0] = xref[k]
        U[k, 1:] = w
        Y[k] = C @ z + D @ U[k]
        z = Ad @ z + Bd @ U[k]
        if not np.all(np.isfinite(z)) or np.max(np.abs(z)) > 1e12:
            raise DivergenceError(f"simulation diverged at t = {t[k]:.3f} s")
    meta = {"t_final": t_final, "dt": dt, "trusted_until": 0.8 * t_final,
            "fir_tail": max((kk.tail for law in laws for kk in law.fir), default=0.0)}
    res = SimulationResult(
        x=TimeSignal(0.0, dt, Y[:, :N]), u=TimeSignal(0.0, dt, Y[:, N:]),
        wf=TimeSignal(0.0, dt, U[:, 1:N + 1]), wr=TimeSignal(0.0, dt, U[:, N + 1:]),
        meta=meta)
    if not decompose:
        return res
    x0 = xref + U[:, 1]
    dec = wave_decompose(res.x, chain, x0=x0, wf_last=U[:, N])
    meta.update(dec.pop("meta"))
    return replace(res, **dec)


# ---------------------------------------------------------------------------
# wave decomposition


def _link_wtfs(chain: ChainSpec) -> list:
    """WTF of each link ``k`` joining agents ``k`` and ``k+1`` (``0..N``), ``None`` if soft."""
    ags = chain.agents
    N = chain.N
    links = [WaveTF(ags[0].mf)]
    for k in range(1, N):
        mr, mf = ags[k - 1].mr, ags[k].mf
        links.append(WaveTF(mr) if mr.equals(mf) else None)
    links.append(WaveTF(ags[N - 1].mf))
    return links


class _Spectral:
    """Damped-FFT filtering of sampled signals on ``[0, t_final]``."""

    def __init__(self, n: int, dt: float, period_factor: float = 8.0):
        self.m, self.dt = n, dt
        t_final = (n - 1) * dt
        self.c = 2.0 / t_final
        nfft = 1 << (int(math.ceil(period_factor * n)) - 1).bit_length()
        self.nfft = nfft
        w = 2 * np.pi * np.fft.rfftfreq(nfft, d=dt)
        self.s = self.c + 1j * w
        t = dt * np.arange(n)
        self.damp = np.exp(-self.c * t)
        self.grow = np.exp(self.c * t)
        self.zoh = (1 - np.exp(-self.s * dt)) / self.s

    def forward(self, x, stair: bool = False):
        X = np.fft.rfft(x * self.damp, self.nfft)
        return X * self.zoh if stair else X * self.dt

    def inverse(self, F):
        return np.fft.irfft(F, self.nfft)[: self.m] / self.dt * self.grow


def _wave_part(G, gm, X_far, X_here):
    # G/(1-G^2) X_far - G^2/(1-G^2) X_here: A_i from the left link, B_i from the right
    return (G * X_far - G * G * X_here) / (gm * (1 + G))


def relative_l2(err: np.ndarray, ref: np.ndarray) -> float:
    den = float(np.linalg.norm(ref))
    return float(np.linalg.norm(err)) / den if den > 0 else float(np.linalg.norm(err))


def wave_decompose(x: TimeSignal, chain: ChainSpec, *, x0=None, wf_last=None) -> dict:
    """Split agent outputs into forward (``a``) and backward (``b``) waves.

    Each agent uses the WTF of the link on its left, ``A_i = G/(1-G^2) X_{i-1}
    - G^2/(1-G^2) X_i``, and ``B_i = X_i - A_i``.  An agent directly behind a
    soft boundary uses its right link instead, ``B_i = G/(1-G^2)(X_{i+1} -
    G X_i)``.  Agent 1 reads ``x0`` (the total front input ``W_f,1``, held
    between samples) in place of ``X_0``; the last agent's right link reads
    the virtual output ``X_N + W_f,N``.  Hard-boundary agents get both pairs.

    Returns a dict with ``a``, ``b``, ``hard``, ``x0``, ``a0``, ``b0`` and
    ``meta``; ``meta["consistency"]`` is the relative L2 mismatch between
    the two one-sided estimates of ``X_i`` on interior agents without
    injections, over the trusted window.
    """
    N = chain.N
    n = len(x)
    dt = x.dt
    xs = x.samples
    if x0 is None:
        x0 = chain.reference.sample(x.t)
    if wf_last is None:
        wf_last = np.zeros(n)
    sp = _Spectral(n, dt)
    S = sp.s
    links = _link_wtfs(chain)
    pairs = [None if g is None else g.pair(S) for g in links]
    Xf = [sp.forward(x0, stair=True)] + [sp.forward(xs[:, i]) for i in range(N)]
    Xf.append(Xf[N] + sp.forward(wf_last, stair=True))
    from .absorbers import synthesize_laws
    # injections at the chain ends through W_f are already folded into x0 / X_{N+1}
    injected = {law.agent for law in synthesize_laws(chain)
                if not (law.channel == "f" and law.agent in (1, N))}
    hard = set(chain.hard_sites())

    a = np.empty((n, N))
    b = np.empty((n, N))
    hard_out = {}
    consistency = {}
    trusted = int(0.8 * (n - 1)) + 1
    for i in range(1, N + 1):
        left, right = pairs[i - 1], pairs[i]
        Ai = Bi = None
        if left is not None:
            Ai = sp.inverse(_wave_part(*left, Xf[i - 1], Xf[i]))
        if right is not None:
            Bi = sp.inverse(_wave_part(*right, Xf[i + 1], Xf[i]))
        xi = xs[:, i - 1]
        if Ai is not None:
            a[:, i - 1], b[:, i - 1] = Ai, xi - Ai
        elif Bi is not None:
            a[:, i - 1], b[:, i - 1] = xi - Bi, Bi
        else:
            a[:, i - 1], b[:, i - 1] = np.nan, np.nan
        if i in hard and Ai is not None and Bi is not None:
            hard_out[i] = (Ai, xi - Ai, xi - Bi, Bi)
        elif Ai is not None and Bi is not None and i not in injected:
            consistency[i] = relative_l2((Ai + Bi - xi)[:trusted], xi[:trusted])
    G1, gm1 = pairs[0]
    b0 = sp.inverse(G1 * sp.forward(b[:, 0]))
    return {
        "a": TimeSignal(0.0, dt, a), "b": TimeSignal(0.0, dt, b), "hard": hard_out,
        "x0": np.asarray(x0, float), "a0": chain.reference.sample(x.t), "b0": b0,
        "meta": {"consistency": consistency,
                 "decomposition_residual": {i + 1: relative_l2(
                     (xs[:, i] - a[:, i] - b[:, i])[:trusted], xs[:trusted, i])
                     for i in range(N) if np.all(np.isfinite(a[:, i]))}},
    }


# ---------------------------------------------------------------------------
# scalar summaries


def local_plateau_estimate(chain: ChainSpec, i: int) -> float:
    """Predicted level of ``x_i`` after the wavefront passes, before reflections return.

    It is the product of ``kappa_aa`` over the soft boundaries left of agent
    ``i``; 1 for a homogeneous chain.
    """
    k = 1.0
    for sigma in chain.soft_sites():
        if sigma < i:
            k *= soft_dc_gains(chain.agents[sigma - 1].mr, chain.agents[sigma].mf).kaa
    return k


def plateau_value(t: np.ndarray, y: np.ndarray, window: tuple) -> tuple:
    """Mean and max deviation of ``y`` over the time window ``(t0, t1)``."""
    sel = (t >= window[0]) & (t <= window[1])
    if not np.any(sel):
        raise ValueError("empty plateau window")
    v = y[sel]
    m = float(np.mean(v))
    return m, float(np.max(np.abs(v - m)))


def settling_time(t: np.ndarray, y: np.ndarray, final: float = 1.0, tol: float = 0.02) -> float:
    """First time after which ``|y - final| <= tol |final|`` for the rest of the record.

    Returns ``inf`` if the last sample is still outside the band.
    """
    band = tol * (abs(final) if final else 1.0)
    out = np.flatnonzero(np.abs(y - final) > band)
    if out.size == 0:
        return float(t[0])
    if out[-1] == y.size - 1:
        return math.inf
    return float(t[out[-1] + 1])
