"""Soft and hard boundary transfer functions and their DC gains."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .lti import FreqGrid, RationalTF, count_integrators
from .waves import WaveTF

__all__ = [
    "SingularDenominator", "NoIntegrator", "CombinationBoundaryWarning",
    "BoundaryTFSet", "DCGainRecord", "BoundaryLocation",
    "soft_btf_values", "hard_btf_values", "soft_btfs", "hard_btfs",
    "tl_tr_of", "hard_proof_residual", "soft_dc_gains", "detect_boundaries",
]


class SingularDenominator(ZeroDivisionError):
    pass


class NoIntegrator(ValueError):
    pass


class CombinationBoundaryWarning(UserWarning):
    """Soft and hard boundaries share an agent; no BTF set is defined there."""


def _as_s(grid) -> np.ndarray:
    if isinstance(grid, FreqGrid):
        return 1j * grid.omegas
    return np.atleast_1d(np.asarray(grid, dtype=complex))


def soft_btf_values(G, gm, H, hm):
    """Soft-boundary responses from ``G``, ``1-G``, ``H``, ``1-H`` samples.

    The common denominator ``1 - HG`` is formed as ``(1-H) + H(1-G)`` so the
    values stay accurate close to ``s = 0``.
    """
    den = hm + H * gm
    with np.errstate(divide="ignore", invalid="ignore"):
        return {
            "taa": H * gm * (1 + G) / den,
            "tab": G * (gm - hm) / den,
            "tba": H * (hm - gm) / den,
            "tbb": G * hm * (1 + H) / den,
        }, den


def hard_btf_values(G, gm, H, hm):
    den = hm + H * gm
    with np.errstate(divide="ignore", invalid="ignore"):
        return {
            "tAA": (1 + G) * hm / den,
            "tAB": (hm - gm) / den,
            "tBA": (gm - hm) / den,
            "tBB": (1 + H) * gm / den,
        }, den


@dataclass(frozen=True, eq=False)
class BoundaryTFSet:
    """Four boundary responses sampled at ``s`` (``1j*omega`` for a grid).

    Points where ``1 - HG`` vanishes are set to ``nan`` and listed in
    ``masked``.
    """

    kind: str
    s: np.ndarray
    values: dict
    g: WaveTF
    h: WaveTF
    masked: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __getitem__(self, key):
        return self.values[key]

    @property
    def omegas(self) -> np.ndarray:
        return self.s.imag


def _btf_set(kind, fn, g: WaveTF, h: WaveTF, grid, tol):
    s = _as_s(grid)
    G, gm = g.pair(s)
    H, hm = h.pair(s)
    vals, den = fn(G, gm, H, hm)
    bad = np.abs(den) <= tol
    if np.any(bad):
        for v in vals.values():
            v[bad] = np.nan
    return BoundaryTFSet(kind, s, vals, g, h, s[bad])


def soft_btfs(g: WaveTF, h: WaveTF, grid, tol: float = 1e-13) -> BoundaryTFSet:
    """``T_aa, T_ab, T_ba, T_bb`` of a soft boundary between WTFs ``g`` and ``h``."""
    return _btf_set("soft", soft_btf_values, g, h, grid, tol)


def hard_btfs(g: WaveTF, h: WaveTF, grid, tol: float = 1e-13) -> BoundaryTFSet:
    """``T_AA, T_AB, T_BA, T_BB`` of a hard boundary between WTFs ``g`` and ``h``."""
    return _btf_set("hard", hard_btf_values, g, h, grid, tol)


def tl_tr_of(mf: RationalTF, mr: RationalTF, s):
    """Gains from the two neighbours to the output of a hard-boundary agent."""
    s = np.asarray(s, dtype=complex)
    a, b = mf(s), mr(s)
    den = 1 + a + b
    if np.any(np.abs(den) == 0):
        raise SingularDenominator("1 + M_f + M_r vanishes")
    return a / den, b / den


def hard_proof_residual(mf: RationalTF, mr: RationalTF, s):
    """Residual of the hard-boundary agent balance for both incident waves.

    For a unit wave incident from the left (``A_L = 1, B_R = 0``) and from
    the right (``A_L = 0, B_R = 1``) the outgoing components are taken from
    the hard BTFs and substituted into

        A_L (1 - T_L/G) + B_L (1 - T_L G) - B_R T_R/H - A_R T_R H.

    Returns the two residual arrays.
    """
    s = np.asarray(s, dtype=complex)
    g, h = WaveTF(mf), WaveTF(mr)
    G, gm = g.pair(s)
    H, hm = h.pair(s)
    T, _ = hard_btf_values(G, gm, H, hm)
    tl, tr = tl_tr_of(mf, mr, s)

    def balance(al, bl, ar, br):
        return al * (1 - tl / G) + bl * (1 - tl * G) - br * tr / H - ar * tr * H

    left = balance(1.0, T["tAB"], T["tAA"], 0.0)
    right = balance(0.0, T["tBB"], T["tBA"], 1.0)
    return left, right


@dataclass(frozen=True)
class DCGainRecord:
    kaa: float
    kab: float
    kba: float
    kbb: float
    kAA: float
    kAB: float
    kBA: float
    kBB: float
    nu_f: int
    nu_r: int
    n10_d10: float
    n20_d20: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def soft_dc_gains(mr_sigma: RationalTF, mf_sigmaplus1: RationalTF) -> DCGainRecord:
    """Closed-form DC gains of the soft boundary between two open loops.

    ``mr_sigma`` is the rear open loop left of the boundary and
    ``mf_sigmaplus1`` the front open loop right of it.  Both need at least
    one integrator.
    """
    nu_r = count_integrators(mr_sigma)
    nu_f = count_integrators(mf_sigmaplus1)
    if nu_r < 1 or nu_f < 1:
        raise NoIntegrator("soft-boundary DC gains need an integrator on both sides")
    r1 = mr_sigma.low_frequency_gain()
    r2 = mf_sigmaplus1.low_frequency_gain()
    if nu_f == nu_r:
        kaa = 2.0 / (math.sqrt(r1 / r2) + 1.0)
        kbb = 2.0 / (math.sqrt(r2 / r1) + 1.0)
    elif nu_f < nu_r:
        kaa, kbb = 0.0, 2.0
    else:
        kaa, kbb = 2.0, 0.0
    kab = kaa - 1.0
    kba = kbb - 1.0
    return DCGainRecord(kaa=kaa, kab=kab, kba=kba, kbb=kbb,
                        kAA=kbb, kAB=kba, kBA=kab, kBB=kaa,
                        nu_f=nu_f, nu_r=nu_r, n10_d10=r1, n20_d20=r2)


@dataclass(frozen=True)
class BoundaryLocation:
    """``kind`` is ``"soft"`` (between ``index`` and ``index+1``) or ``"hard"``."""

    kind: str
    index: int

    def __str__(self):
        return f"{self.kind}@{self.index}"


def detect_boundaries(chain) -> list:
    """Soft and hard boundaries of a chain, 1-based agent indices.

    The last agent has no rear coupling, so its rear open loop is ignored.
    A soft and a hard boundary touching the same agent trigger a
    :class:`CombinationBoundaryWarning`.
    """
    agents = list(chain.agents)
    N = len(agents)
    out = []
    for i in range(1, N):
        if not agents[i - 1].mr.equals(agents[i].mf):
            out.append(BoundaryLocation("soft", i))
    for i in range(1, N):
        if not agents[i - 1].mf.equals(agents[i - 1].mr):
            out.append(BoundaryLocation("hard", i))
    soft = {b.index for b in out if b.kind == "soft"}
    for b in out:
        if b.kind == "hard" and (b.index in soft or b.index - 1 in soft):
            warnings.warn(f"combined soft/hard boundary at agent {b.index}",
                          CombinationBoundaryWarning, stacklevel=2)
    return sorted(out, key=lambda b: (b.index, b.kind))
