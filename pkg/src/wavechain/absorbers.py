"""Wave-absorbing control laws, closed-form chain responses and string stability.

Every law adds an injection to one agent input,

    W = sum_k block_k(s) X_{src_k}(s)

where ``src = 0`` denotes the reference.  Blocks are irrational functions of
``s`` built from WTFs; for simulation they are realized as FIR kernels.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .boundaries import SingularDenominator
from .lti import FreqGrid, FreqResponse, RationalTF, hinf_norm
from .waves import WaveTF, dc_limit, wave_fir

__all__ = [
    "UnsupportedTopology", "AbsorberLaw", "StringStabilityVerdict",
    "leader_absorber", "rear_absorber", "soft_absorber_pair", "hard_absorber_pair",
    "soft_synthesis_residual", "synthesize_laws", "closed_form_values",
    "closed_form_chain", "fir_closed_loop_response", "string_stability_check",
]


class UnsupportedTopology(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AbsorberLaw:
    """Injection into input ``channel`` (``"f"`` or ``"r"``) of agent ``agent``.

    ``sources[k]`` is the agent output read by ``blocks[k]`` (0 for the
    reference).  ``prefilter`` is the irrational gain in front of the
    wave-difference signal, kept for inspection.  ``fir`` holds one kernel
    per block after :meth:`realize`.
    """

    site: str
    side: str
    index: int
    agent: int
    channel: str
    sources: tuple
    blocks: tuple
    prefilter: Callable
    fir: tuple = ()

    def block_values(self, s) -> list:
        s = np.atleast_1d(np.asarray(s, dtype=complex))
        return [np.asarray(b(s), dtype=complex) for b in self.blocks]

    def kernel_responses(self, s) -> list:
        if not self.fir:
            raise RuntimeError("law has not been realized; call realize(dt, horizon)")
        return [k.response(s) for k in self.fir]

    def dc_gains(self) -> list:
        return [dc_limit(b).real for b in self.blocks]

    def realize(self, dt: float, horizon: float, **kw) -> "AbsorberLaw":
        """Midpoint-sampled FIR kernels with exact DC gains."""
        kw.setdefault("tail_bound", 1e-5)
        fir = tuple(wave_fir(b, dt, horizon, offset=0.5, dc=dc, **kw)
                    for b, dc in zip(self.blocks, self.dc_gains()))
        return replace(self, fir=fir)

    def __str__(self):
        return f"{self.site}/{self.side} -> W_{self.channel},{self.agent}"


def _g(w: WaveTF):
    return lambda s: w.pair(s)[0]


# ---------------------------------------------------------------------------
# chain ends


def leader_absorber(g: WaveTF) -> AbsorberLaw:
    """First-agent law ``W_f,1 = G X_1 + (1 - G^2) x_ref``.

    Realized as the injection ``G X_1 - G^2 x_ref`` on top of the reference.
    """
    def b_x1(s):
        return g.pair(s)[0]

    def b_ref(s):
        G = g.pair(s)[0]
        return -G * G

    return AbsorberLaw("leader", "leader", 1, 1, "f", (1, 0), (b_x1, b_ref), b_x1)


def rear_absorber(g: WaveTF, n: int) -> AbsorberLaw:
    """Last-agent law ``W_f,N = -G/(1+G) (X_{N-1} - G X_N)``."""
    def pre(s):
        G = g.pair(s)[0]
        return -G / (1 + G)

    def b_prev(s):
        return pre(s)

    def b_self(s):
        G = g.pair(s)[0]
        return G * G / (1 + G)

    return AbsorberLaw("rear", "rear", n, n, "f", (n - 1, n), (b_prev, b_self), pre)


# ---------------------------------------------------------------------------
# boundaries


def _soft_gain(a: WaveTF, b: WaveTF):
    """``A (A - B)/(1 - A^2)`` with the differences taken as ``(1-B) - (1-A)``."""
    def f(s):
        A, am = a.pair(s)
        _, bm = b.pair(s)
        d = am * (1 + A)
        if np.any(d == 0):
            raise SingularDenominator("1 - G^2 vanishes")
        return A * (bm - am) / d
    return f


def soft_absorber_pair(g: WaveTF, h: WaveTF, sigma: int, *, right_form: str = "mirror",
                       g_synth: WaveTF | None = None, h_synth: WaveTF | None = None):
    """Left and right laws of a soft boundary between agents ``sigma`` and ``sigma+1``.

    Left: ``W_r,sigma = G(G-H)/(1-G^2) (X_{sigma-1} - G X_sigma)``.
    Right: ``W_f,sigma+1 = H(H-G)/(1-H^2) (X_{sigma+2} - H X_{sigma+1})``;
    ``right_form="printed"`` reads ``(X_{sigma+1} - H X_sigma)`` instead.
    ``g_synth``/``h_synth`` replace the neighbour WTF used by each law
    (model mismatch experiments).
    """
    hs = h_synth or h
    gs = g_synth or g
    fl = _soft_gain(g, hs)
    fr = _soft_gain(h, gs)

    def l_self(s):
        return -fl(s) * g.pair(s)[0]

    def r_self(s):
        return -fr(s) * h.pair(s)[0]

    left = AbsorberLaw("soft", "left", sigma, sigma, "r", (sigma - 1, sigma), (fl, l_self), fl)
    if right_form == "mirror":
        src = (sigma + 2, sigma + 1)
    elif right_form == "printed":
        src = (sigma + 1, sigma)
    else:
        raise ValueError(f"unknown right_form {right_form!r}")
    right = AbsorberLaw("soft", "right", sigma, sigma + 1, "f", src, (fr, r_self), fr)
    return left, right


def _hard_gain(a: WaveTF, b: WaveTF):
    """``(B - A)/((1 + A)(1 - B))``."""
    def f(s):
        A, am = a.pair(s)
        _, bm = b.pair(s)
        d = (1 + A) * bm
        if np.any(d == 0):
            raise SingularDenominator("(1 + G)(1 - H) vanishes")
        return (am - bm) / d
    return f


def hard_absorber_pair(g: WaveTF, h: WaveTF, eta: int, *,
                       g_synth: WaveTF | None = None, h_synth: WaveTF | None = None):
    """Left and right laws of a hard boundary at agent ``eta``.

    Left, through the front loop: ``(H-G)/((1+G)(1-H)) (X_{eta-1} - G X_eta)``.
    Right, through the rear loop: ``(G-H)/((1+H)(1-G)) (X_{eta+1} - H X_eta)``.
    With ``H = 0`` the left law is the rear-end law.
    """
    kl = _hard_gain(g, h_synth or h)
    kr = _hard_gain(h, g_synth or g)

    def l_self(s):
        return -kl(s) * g.pair(s)[0]

    def r_self(s):
        return -kr(s) * h.pair(s)[0]

    left = AbsorberLaw("hard", "left", eta, eta, "f", (eta - 1, eta), (kl, l_self), kl)
    right = AbsorberLaw("hard", "right", eta, eta, "r", (eta + 1, eta), (kr, r_self), kr)
    return left, right


def soft_synthesis_residual(mr_sigma: RationalTF, mf_sigmaplus1: RationalTF, s):
    """``-T_ab/(T_r (1 + T_ab)) - (G - H)`` at ``s``.

    ``T_r = M/(1 + 2(1 - G) M)`` is the gain from a rear injection to the
    wave it launches; the expression is the feedback gain that cancels the
    reflected wave.
    """
    from .boundaries import soft_btf_values

    s = np.asarray(s, dtype=complex)
    g, h = WaveTF(mr_sigma), WaveTF(mf_sigmaplus1)
    G, gm = g.pair(s)
    H, hm = h.pair(s)
    T, _ = soft_btf_values(G, gm, H, hm)
    M = mr_sigma(s)
    tr = M / (1 + 2 * gm * M)
    tab = T["tab"]
    return -tab / (tr * (1 + tab)) - (hm - gm)


def _perturbed(m: RationalTF, mismatch: float) -> WaveTF | None:
    return None if not mismatch else WaveTF(m * (1.0 + mismatch))


def synthesize_laws(chain) -> list:
    """All absorber laws requested by ``chain.absorbers``."""
    ags = chain.agents
    N = chain.N
    out = []
    for site in chain.absorbers:
        if site.kind == "leader":
            out.append(leader_absorber(WaveTF(ags[0].mf)))
        elif site.kind == "rear":
            out.append(rear_absorber(WaveTF(ags[N - 1].mf), N))
        elif site.kind == "soft":
            s = site.index
            ml, mr = ags[s - 1].mr, ags[s].mf
            pair = soft_absorber_pair(
                WaveTF(ml), WaveTF(mr), s, right_form=chain.soft_right_form,
                g_synth=_perturbed(ml, chain.mismatch), h_synth=_perturbed(mr, chain.mismatch))
            out.extend(p for p in pair if site.side in ("both", p.side))
        elif site.kind == "hard":
            e = site.index
            mf, mr = ags[e - 1].mf, ags[e - 1].mr
            pair = hard_absorber_pair(
                WaveTF(mf), WaveTF(mr), e,
                g_synth=_perturbed(mf, chain.mismatch), h_synth=_perturbed(mr, chain.mismatch))
            out.extend(p for p in pair if site.side in ("both", p.side))
    return out


# ---------------------------------------------------------------------------
# closed forms


def _topology(chain):
    if chain.hard_sites():
        raise UnsupportedTopology("closed forms cover soft boundaries only")
    soft = chain.soft_sites()
    if len(soft) > 1:
        raise UnsupportedTopology("closed forms cover at most one soft boundary")
    N = chain.N
    if soft:
        sigma = soft[0]
        pair = [a for a in chain.absorbers if a.kind == "soft" and a.index == sigma]
        if not pair or pair[0].side != "both" or chain.soft_right_form != "mirror":
            raise UnsupportedTopology("closed forms need the full soft absorber pair")
        g = WaveTF(chain.agents[sigma - 1].mr)
        h = WaveTF(chain.agents[sigma].mf)
    else:
        sigma = N
        g = h = WaveTF(chain.agents[0].mf)
    if chain.has("rear"):
        kind = "ends"
    elif chain.has("leader"):
        kind = "leader"
    else:
        kind = "none"
    return kind, sigma, g, h


def closed_form_values(chain, s, p: int) -> np.ndarray:
    """``X_p/X_ref`` from the closed forms for the three absorber topologies.

    ``leader``: ``G^p + G^(2s+1-p) H^(2(N-s))`` for ``p <= s`` and
    ``G^s H^(p-s) + G^s H^(2N+1-s-p)`` beyond; ``ends`` (rear absorber,
    with or without the leader one): ``G^p`` / ``G^s H^(p-s)``; ``none``: the
    ``leader`` numerators over ``1 + G^(2s+1) H^(2(N-s))``.  ``s`` is the
    soft boundary (``N`` for a homogeneous chain).
    """
    kind, sigma, g, h = _topology(chain)
    N = chain.N
    if not 1 <= p <= N:
        raise ValueError(f"agent index {p} outside 1..{N}")
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    G, H = g(s), h(s)
    if p <= sigma:
        direct = G ** p
        back = G ** (2 * sigma + 1 - p) * H ** (2 * (N - sigma))
    else:
        direct = G ** sigma * H ** (p - sigma)
        back = G ** sigma * H ** (2 * N + 1 - sigma - p)
    if kind == "ends":
        return direct
    if kind == "leader":
        return direct + back
    return (direct + back) / (1 + G ** (2 * sigma + 1) * H ** (2 * (N - sigma)))


def closed_form_chain(chain, grid: FreqGrid, p: int) -> FreqResponse:
    def func(w):
        return closed_form_values(chain, 1j * np.asarray(w, dtype=float), p)
    return FreqResponse(grid.omegas, func(grid.omegas), func)


def fir_closed_loop_response(chain, s, dt: float, horizon: float, laws=None) -> np.ndarray:
    """``X_i/X_ref`` of the state-space model closed through FIR-realized laws.

    The rational interconnection comes from :func:`assemble_chain_ss` (inputs
    ``x_ref, W_f, W_r``); each absorber kernel is evaluated as the
    continuous-time response of its taps.  Returns shape ``(len(s), N)``.
    """
    from .lti import assemble_chain_ss, ss_freq_eval

    s = np.atleast_1d(np.asarray(s, dtype=complex))
    N = chain.N
    if laws is None:
        laws = [law.realize(dt, horizon) for law in synthesize_laws(chain)]
    P = ss_freq_eval(assemble_chain_ss(chain), s)[:, :N, :]  # (ns, N, 1+2N)
    K = np.zeros((s.size, 2 * N, N), dtype=complex)
    k0 = np.zeros((s.size, 2 * N), dtype=complex)
    for law in laws:
        row = (law.agent - 1) + (0 if law.channel == "f" else N)
        for src, v in zip(law.sources, law.kernel_responses(s)):
            if src == 0:
                k0[:, row] += v
            else:
                K[:, row, src - 1] += v
    Pr, Pw = P[:, :, 0], P[:, :, 1:]
    A = np.eye(N)[None] - Pw @ K
    rhs = Pr + (Pw @ k0[..., None])[..., 0]
    return np.linalg.solve(A, rhs[..., None])[..., 0]


# ---------------------------------------------------------------------------
# string stability


@dataclass(frozen=True)
class StringStabilityVerdict:
    norms: dict
    bound: float
    verdict: bool

    @property
    def max_norm(self) -> float:
        return max(self.norms.values())


def string_stability_check(family: Callable[[int], object], n_list: Sequence[int],
                           grid: FreqGrid | None = None, bound: float = 1 + 1e-6,
                           method: str = "closed_form") -> StringStabilityVerdict:
    """H-infinity norm of ``X_i/X_ref`` for every agent of ``family(N)``.

    ``method`` is ``"closed_form"`` or ``"exact"`` (linear solve with the
    irrational absorber blocks).
    """
    from .chain import closed_loop_tf

    grid = grid or FreqGrid.logspace()
    norms = {}
    for n in n_list:
        chain = family(n)
        for i in range(1, chain.N + 1):
            if method == "closed_form":
                fr = closed_form_chain(chain, grid, i)
            else:
                fr = closed_loop_tf(chain, i, grid)
            norms[(n, i)] = hinf_norm(fr)
    return StringStabilityVerdict(norms, bound, max(norms.values()) <= bound)
