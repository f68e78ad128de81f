"""Irrational wave transfer functions and their time-domain realization.

A wave transfer function ``G`` is the root of ``G**2 - alpha*G + 1 = 0`` with
``alpha = 2 + 1/M`` that satisfies ``|G| <= 1``.  Everything here evaluates on
arrays of complex ``s``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .lti import FreqGrid, Polynomial, RationalTF, TimeSignal, poly_eval

__all__ = [
    "ZeroOfM", "BranchPointWarning", "NonDecayingIntegrand",
    "TruncationTooCoarse", "WaveTF", "StabilityReport", "FIRKernel",
    "alpha_of", "wtf_eval", "wtf_dc_gain", "check_wtf_stability",
    "ilt_response", "wave_fir", "apply_fir", "dc_limit",
]


class ZeroOfM(ZeroDivisionError):
    """``alpha`` is infinite because ``M(s) = 0``."""


class BranchPointWarning(RuntimeWarning):
    pass


class NonDecayingIntegrand(ValueError):
    """Spectrum does not decay at the edge of the inversion band."""


class TruncationTooCoarse(ValueError):
    """FIR horizon leaves too much impulse-response energy in the tail."""


def _inv_m(m: RationalTF, s):
    """``1/M(s)`` evaluated as ``den/num``; ``inf`` at zeros of ``M``."""
    num = poly_eval(m.num, s)
    den = poly_eval(m.den, s)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(num == 0, np.inf, den / np.where(num == 0, 1, num))


def alpha_of(m: RationalTF, s):
    """``2 + 1/M(s)``."""
    num = poly_eval(m.num, s)
    if np.any(num == 0):
        raise ZeroOfM("M(s) = 0, alpha is unbounded")
    return 2 + poly_eval(m.den, s) / num


def _roots(m_inv):
    """Return ``(G, 1 - G)`` choosing the root of modulus <= 1.

    ``alpha**2 - 4`` is formed as ``(1/M)(1/M + 4)`` so the result stays
    accurate next to the branch point ``alpha = 2``.
    """
    q = np.sqrt(m_inv * (m_inv + 4))
    up_p = (m_inv + q) / 2
    up_m = (m_inv - q) / 2
    big_p, big_m = 1 + up_p, 1 + up_m
    pick_p = np.abs(big_p) >= np.abs(big_m)
    big = np.where(pick_p, big_p, big_m)
    up = np.where(pick_p, up_p, up_m)
    return big, up, pick_p, big_p, big_m


@dataclass(frozen=True, eq=False)
class WaveTF:
    """Wave transfer function generated by the open loop ``m``.

    ``WaveTF(m)(s)`` returns ``G(s)``; :meth:`one_minus` returns ``1 - G(s)``
    computed without cancellation.  The zero open loop gives ``G = 0``.
    """

    m: RationalTF

    def _eval(self, s, ordered: bool = False):
        s = np.asarray(s, dtype=complex)
        if self.m.is_zero():
            z = np.zeros_like(s)
            return z, np.ones_like(s)
        m_inv = _inv_m(self.m, s)
        finite = np.isfinite(m_inv)
        mi = np.where(finite, m_inv, 0)
        big, up, pick_p, big_p, big_m = _roots(mi)
        if ordered and big.ndim == 1 and big.size > 1:
            tie = np.abs(np.abs(big_p) - np.abs(big_m)) <= 1e-9 * np.abs(big)
            if np.any(tie[1:]):
                big, up = big.copy(), up.copy()
                for k in np.flatnonzero(tie):
                    if k == 0:
                        continue
                    prev = 1 / big[k - 1]
                    cand = [(big_p[k], big_p[k] - 1), (big_m[k], big_m[k] - 1)]
                    big[k], up[k] = min(cand, key=lambda c: abs(1 / c[0] - prev))
        exact_bp = finite & ((mi == 0) | (mi == -4))
        if np.any(exact_bp & (s != 0)):
            warnings.warn("alpha = +-2 hit exactly; returning the limiting root",
                          BranchPointWarning, stacklevel=3)
        g = np.where(finite, 1 / big, 0)
        gm = np.where(finite, up / big, 1)
        return g, gm

    def __call__(self, s, ordered: bool = False):
        g, _ = self._eval(s, ordered)
        return g[()] if g.ndim == 0 else g

    def one_minus(self, s):
        _, gm = self._eval(s)
        return gm[()] if gm.ndim == 0 else gm

    def pair(self, s):
        """``(G(s), 1 - G(s))``."""
        return self._eval(s)

    def inverse(self, s):
        return 1 / self(s)

    def alpha(self, s):
        return alpha_of(self.m, s)


def wtf_eval(w: WaveTF, s, ordered: bool = False):
    return w(s, ordered=ordered)


def dc_limit(f, points=(1e-6, 1e-7, 1e-8)) -> complex:
    """Limit of ``f(s)`` as ``s -> 0+`` along the real axis.

    Fits ``k + c1 sqrt(s) + c2 s`` through the samples and returns ``k``.  The
    square-root term appears for open loops with a single integrator, where
    ``1 - G`` vanishes like ``sqrt(s)``.
    """
    s = np.asarray(points, dtype=float)
    y = np.asarray(f(s.astype(complex)), dtype=complex).reshape(s.size, -1)
    V = np.stack([np.ones_like(s), np.sqrt(s), s], axis=1)[:, : s.size]
    k = np.linalg.solve(V, y)[0]
    return complex(k[0]) if k.size == 1 else k


def wtf_dc_gain(w: WaveTF) -> float:
    """DC gain of a WTF; exactly 1 when the open loop has an integrator."""
    if w.m.is_zero():
        return 0.0
    if w.m.integrators >= 1:
        return 1.0
    return float(np.real(w(1e-8 + 0j)))


@dataclass(frozen=True)
class StabilityReport:
    proper: bool
    crhp_zeros: int
    crhp_poles_nonorigin: int
    nyquist_clear: bool
    crossings: tuple = ()  # first few offending frequencies, rad/s

    @property
    def verdict(self) -> bool:
        return (self.proper and self.crhp_zeros == 0
                and self.crhp_poles_nonorigin == 0 and self.nyquist_clear)


def check_wtf_stability(m: RationalTF, grid: FreqGrid | None = None,
                        root_tol: float = 1e-8, axis_tol: float = 1e-9) -> StabilityReport:
    """Sufficient conditions for an asymptotically stable WTF.

    Checks properness, absence of closed-RHP zeros, absence of closed-RHP
    poles other than the origin, and that ``1 + 4 M(jw)`` never touches the
    non-positive real axis on ``grid``.  Sign changes of the imaginary part
    between neighbouring grid points are bracketed and solved so crossings
    between samples are caught.
    """
    grid = grid or FreqGrid.logspace()
    proper = m.is_proper()
    zeros = m.num.roots() if not m.is_zero() else np.zeros(0)
    poles = m.den.roots()
    crhp_z = int(np.sum(zeros.real >= -root_tol))
    crhp_p = int(np.sum((poles.real >= -root_tol) & (np.abs(poles) > root_tol)))

    def curve(w):
        return 1 + 4 * m(1j * np.asarray(w, dtype=float))

    w = grid.omegas
    z = curve(w)
    scale = np.maximum(1.0, np.abs(z))
    hits = [float(wk) for wk, zk, sc in zip(w, z, scale)
            if zk.real <= 0 and abs(zk.imag) <= axis_tol * sc]
    im = z.imag
    for k in np.flatnonzero(np.sign(im[:-1]) * np.sign(im[1:]) < 0):
        a, b = w[k], w[k + 1]
        wc = brentq(lambda x: curve(x).imag, a, b, xtol=1e-14 * b, rtol=1e-12)
        if curve(wc).real <= 0:
            hits.append(float(wc))
    return StabilityReport(proper, crhp_z, crhp_p, not hits, tuple(sorted(hits)[:16]))


def _asymptotic_terms(f_edge, s_edge, a):
    """Fit ``f ~ j1/(s+a) + j2/(s+a)**2`` on the top of the band; real coefficients."""
    A = np.stack([1 / (s_edge + a), 1 / (s_edge + a) ** 2], axis=1)
    coef, *_ = np.linalg.lstsq(A, f_edge, rcond=None)
    return coef.real


def ilt_response(f, t_final: float, dt: float = 0.01, *, shift: float | None = None,
                 n_min: int = 2 ** 16, period_factor: float = 5.0,
                 edge_tol: float = 1e-3, asymptotic: bool = True) -> TimeSignal:
    """Inverse Laplace transform by damped FFT on the line ``Re(s) = shift``.

    ``f`` maps an array of complex ``s`` to values.  Samples are returned at
    ``0, dt, ..., t_final``.  The FFT period is at least ``period_factor``
    times ``t_final`` so wrap-around is damped by ``exp(-shift * period)``;
    the default ``shift = 2/t_final`` gives ``exp(-10)``.  The leading
    ``j1/(s+a) + j2/(s+a)**2`` behaviour (``a = 1/(32 dt)``) is removed
    before the FFT and added back in closed form, which removes Gibbs
    ringing at ``t = 0``; the decaying basis keeps the removed part from
    aliasing across the FFT period.
    Accuracy target is 1e-3 absolute on ``[0, 0.8 t_final]``.
    """
    c = 2.0 / t_final if shift is None else shift
    n_need = int(math.ceil(period_factor * t_final / dt))
    n = max(n_min, 1 << (n_need - 1).bit_length())
    w = 2 * np.pi * np.fft.rfftfreq(n, d=dt)
    s = c + 1j * w
    F = np.asarray(f(s), dtype=complex)
    if F.shape != s.shape or not np.all(np.isfinite(F)):
        raise ValueError("f must return finite values of the same shape as s")
    j1 = j2 = 0.0
    a = 1.0 / (32 * dt)
    peak = np.max(np.abs(F)) or 1.0
    if asymptotic:
        top = slice(-max(8, n // 256), None)
        j1, j2 = _asymptotic_terms(F[top], s[top], a)
        F = F - j1 / (s + a) - j2 / (s + a) ** 2
    if np.max(np.abs(F[-max(4, n // 1024):])) > edge_tol * peak:
        raise NonDecayingIntegrand("spectrum has not decayed at the Nyquist edge")
    g = np.fft.irfft(F, n=n) / dt
    m = int(round(t_final / dt)) + 1
    t = dt * np.arange(m)
    y = np.exp(c * t) * g[:m] + (j1 + j2 * t) * np.exp(-a * t)
    return TimeSignal(0.0, dt, y, {"trusted_until": 0.8 * t_final, "shift": c,
                                   "n_fft": n})


@dataclass(frozen=True, eq=False)
class FIRKernel:
    """Causal kernel ``y[k] = sum_j taps[j] * x[k - j]``.

    ``offset`` is the sampling phase of the taps in units of ``dt``: tap ``j``
    represents the impulse response at ``(j + offset) * dt``.  ``tail`` is the
    fraction of impulse-response energy cut off by the horizon.
    """

    dt: float
    taps: np.ndarray
    offset: float = 0.0
    feedthrough: float = 0.0
    tail: float = 0.0

    def response(self, s):
        """Continuous-time equivalent ``d + sum taps[j] exp(-s (j+offset) dt)``."""
        s = np.atleast_1d(np.asarray(s, dtype=complex))
        k = np.arange(self.taps.size) + self.offset
        out = np.empty(s.size, dtype=complex)
        for i in range(0, s.size, 64):
            blk = s[i:i + 64, None]
            out[i:i + 64] = np.exp(-blk * k[None, :] * self.dt) @ self.taps
        return out + self.feedthrough

    @property
    def dc_gain(self) -> float:
        return float(np.sum(self.taps)) + self.feedthrough


def wave_fir(block, dt: float, horizon: float, *, offset: float = 0.0,
             dc: float | None = None, tail_bound: float = 1e-6,
             trim_tol: float = 1e-14, feedthrough_s: float = 1e7) -> FIRKernel:
    """FIR realization of a stable irrational block with finite DC gain.

    The direct feedthrough ``block(inf)`` (estimated at ``feedthrough_s``)
    becomes tap 0 and the remainder is sampled from its impulse response
    obtained with :func:`ilt_response`.  With ``dc`` given, the sampled part
    is rescaled so the taps sum to exactly ``dc``.  The kernel is trimmed to
    the shortest length whose discarded energy is below ``trim_tol``, never
    longer than ``horizon``.
    """
    d = complex(np.asarray(block(np.array([feedthrough_s + 0j])))[0]).real
    if abs(d) < 1e-9:
        d = 0.0
    span = 2.0 * horizon
    if offset:
        sub = 2
        h = ilt_response(lambda s: block(s) - d, span, dt / sub).samples[:, 0]
        h = h[int(round(offset * sub))::sub]
    else:
        h = ilt_response(lambda s: block(s) - d, span, dt).samples[:, 0]
    taps = dt * h
    n_h = int(round(horizon / dt))
    energy = np.cumsum(taps[::-1] ** 2)[::-1]
    total = energy[0] or 1.0
    tail = float(energy[n_h] / total) if n_h < taps.size else 0.0
    if tail > tail_bound:
        raise TruncationTooCoarse(f"tail energy {tail:.2e} exceeds {tail_bound:.1e}")
    keep = np.flatnonzero(energy / total > trim_tol)
    n_keep = min(n_h, (keep[-1] + 1) if keep.size else 1)
    taps = taps[:max(n_keep, 1)].copy()
    if dc is not None and abs(np.sum(taps)) > 0:
        target = dc - d
        if abs(target) > 0:
            taps *= target / np.sum(taps)
    if offset == 0:
        taps[0] += d
        return FIRKernel(dt, taps, 0.0, 0.0, tail)
    # feedthrough acts at lag zero whatever the sampling phase of the taps
    return FIRKernel(dt, taps, offset, d, tail)


def apply_fir(k: FIRKernel, u: TimeSignal) -> TimeSignal:
    """Causal convolution of every channel of ``u`` with the kernel."""
    if not math.isclose(k.dt, u.dt, rel_tol=1e-12):
        raise ValueError("kernel and signal sample times differ")
    x = u.samples
    y = np.empty_like(x)
    for ch in range(x.shape[1]):
        y[:, ch] = np.convolve(x[:, ch], k.taps)[: x.shape[0]] + k.feedthrough * x[:, ch]
    return TimeSignal(u.t0, u.dt, y)
