"""Acceptance criteria 1-8.

Each test carries ``@pytest.mark.acceptance(k, title)``; the conftest prints
one PASS/FAIL line per criterion at the end of the session.
"""
import math
import time

import numpy as np
import pytest

from helpers import preset_runs, random_pairs
from wavechain.absorbers import (closed_form_values, fir_closed_loop_response,
                                 string_stability_check)
from wavechain.boundaries import hard_btfs, soft_btfs, soft_dc_gains
from wavechain.chain import (chain_frequency_solve, plateau_value, relative_l2,
                             settling_time, simulate)
from wavechain.lti import FreqGrid, RationalTF
from wavechain.models import absorbed_family, m1, m2, site, two_segment_chain
from wavechain.waves import WaveTF, check_wtf_stability, dc_limit

KAPPA = 2.0 / (math.sqrt(3.0) + 1.0)  # independent hand value for kp = 1
GRID512 = FreqGrid.logspace(1e-3, 1e3, 512)


def _dc(chain):
    """Steady-state level of every agent, Richardson limit of the exact solve."""
    return np.real(dc_limit(lambda s: chain_frequency_solve(chain, s)))


# --------------------------------------------------------------------------- 1

@pytest.mark.acceptance(1, "BTF identities and degenerate cases, 25 random pairs")
def test_c1_btf_identities():
    t0 = time.perf_counter()
    worst = 0.0
    for mr, mf in random_pairs(25):
        g, h = WaveTF(mr), WaveTF(mf)
        S = soft_btfs(g, h, GRID512)
        Hd = hard_btfs(g, h, GRID512)
        G, H = g(1j * GRID512.omegas), h(1j * GRID512.omegas)
        res = [
            S["taa"] - (Hd["tBB"] + G - 1),
            S["tba"] - H * Hd["tAB"],
            S["tbb"] - (Hd["tAA"] + H - 1),
            S["tab"] - G * Hd["tBA"],
            Hd["tAA"] - (1 + Hd["tAB"]),
            Hd["tBB"] - (1 + Hd["tBA"]),
        ]
        worst = max(worst, max(np.nanmax(np.abs(r)) for r in res))
        # G = H: no reflection
        same = soft_btfs(g, g, GRID512)
        same_h = hard_btfs(g, g, GRID512)
        worst = max(worst, np.max(np.abs(same["tab"])), np.max(np.abs(same["tba"])),
                    np.max(np.abs(same["taa"] - G)), np.max(np.abs(same["tbb"] - G)),
                    np.max(np.abs(same_h["tAB"])), np.max(np.abs(same_h["tBA"])),
                    np.max(np.abs(same_h["tAA"] - 1)), np.max(np.abs(same_h["tBB"] - 1)))
        # G = 0 on the left: full transmission of the H side
        zero = WaveTF(RationalTF.constant(0.0))
        z = soft_btfs(zero, h, GRID512)
        worst = max(worst, np.max(np.abs(z["taa"] - H)), np.max(np.abs(z["tba"] + H * H)),
                    np.max(np.abs(z["tbb"])), np.max(np.abs(z["tab"])))
        # H = 0: free end; the hard-boundary expressions reduce to the free-end reflection
        f = hard_btfs(g, zero, GRID512)
        worst = max(worst, np.max(np.abs(f["tAB"] - G)), np.max(np.abs(f["tAA"] - (1 + G))),
                    np.max(np.abs(f["tBA"] + G)), np.max(np.abs(f["tBB"] - (1 - G))))
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-9, worst
    assert elapsed < 10.0, elapsed


@pytest.mark.acceptance(1, "BTF identities and degenerate cases, 25 random pairs")
def test_c1_free_end_oracle():
    """H = 0 reflection ``T_AB = G`` against the exact solve of a free-end chain."""
    c = two_segment_chain(6, 0)
    s = 1j * np.logspace(-2, 1.5, 64)
    X = chain_frequency_solve(c, s)
    G = WaveTF(m1())(s)
    # With B_N = G A_N: X_N = (1 + G) A_N and X_{N-1} = A_N/G + G B_N.
    a_n = X[:, 5] / (1 + G)
    assert np.max(np.abs(X[:, 4] - (a_n / G + G * G * a_n))) < 1e-9


# --------------------------------------------------------------------------- 2

@pytest.mark.acceptance(2, "kappa_aa three ways (formula, limit, 30+30 plateau)")
def test_c2_kappa_three_ways():
    t0 = time.perf_counter()
    rec = soft_dc_gains(m1(), m2(1.0))
    assert abs(rec.kaa - KAPPA) < 1e-12
    taa = soft_btfs(WaveTF(m1()), WaveTF(m2(1.0)), np.array([1e-8]))["taa"][0]
    assert abs(taa.real - rec.kaa) < 1e-4
    c = two_segment_chain(30, 30, 1.0)
    res = simulate(c, 100.0, 0.01, decompose=False)
    mean, _ = plateau_value(res.t, res.x.samples[:, 30], (50.0, 70.0))
    assert abs(mean - KAPPA) <= 0.05, mean
    assert time.perf_counter() - t0 < 60.0


# --------------------------------------------------------------------------- 3

@pytest.mark.acceptance(3, "wave reconstruction residual on fig5 / fig6")
@pytest.mark.parametrize("preset", ["fig5", "fig6"])
def test_c3_reconstruction(preset):
    for label, chain, res in preset_runs(preset):
        resid = res.meta["decomposition_residual"]
        assert len(resid) == chain.N, label
        assert max(resid.values()) <= 1e-2, (label, resid)
        # independent: left- and right-link estimates of the same output agree
        cons = res.meta["consistency"]
        assert cons and max(cons.values()) <= 1e-2, (label, cons)


# --------------------------------------------------------------------------- 4

@pytest.mark.acceptance(4, "no reflection with end absorbers and the soft pair")
def test_c4_frequency_domain():
    c = two_segment_chain(4, 4, 1.0, [site("leader"), site("rear"), site("soft@4")])
    s = 1j * GRID512.omegas
    X = chain_frequency_solve(c, s)
    G, H = WaveTF(m1())(s), WaveTF(m2())(s)
    for p in range(1, 9):
        target = G ** p if p <= 4 else G ** 4 * H ** (p - 4)
        assert np.max(np.abs(X[:, p - 1] - target)) <= 1e-6, p
        assert np.max(np.abs(closed_form_values(c, s, p) - target)) <= 1e-12


@pytest.mark.acceptance(4, "no reflection with end absorbers and the soft pair")
def test_c4_time_domain():
    c = two_segment_chain(4, 4, 1.0, [site("leader"), site("rear"), site("soft@4")])
    res = simulate(c, 60.0, 0.01)
    m = res.t <= res.meta["trusted_until"]
    a, b = res.a.samples[m, 3], res.b.samples[m, 3]
    assert relative_l2(b, a) <= 0.05
    # the same measure without the soft pair shows the reflection
    c0 = two_segment_chain(4, 4, 1.0, [site("leader"), site("rear")])
    r0 = simulate(c0, 60.0, 0.01)
    assert relative_l2(r0.b.samples[m, 3], r0.a.samples[m, 3]) > 0.1


# --------------------------------------------------------------------------- 5

@pytest.mark.acceptance(5, "worked example sigma=3, N=5 (no end absorbers)")
def test_c5_worked_example():
    c = two_segment_chain(3, 2, 1.0, [site("soft@3")])
    s = 1j * np.logspace(-2, 1, 50)
    G, H = WaveTF(m1())(s), WaveTF(m2())(s)
    printed = (G + G ** 6 * H ** 4) / (1 + G ** 7 * H ** 4)
    assert np.max(np.abs(closed_form_values(c, s, 1) - printed)) <= 1e-12
    ss = fir_closed_loop_response(c, s, 0.01, 60.0)[:, 0]
    assert np.max(np.abs(ss - printed)) <= 1e-3


# --------------------------------------------------------------------------- 6

@pytest.mark.acceptance(6, "string stability of the absorbed family, N in {4,8,16,32}")
def test_c6_string_stability():
    t0 = time.perf_counter()
    v = string_stability_check(absorbed_family, [4, 8, 16, 32])
    assert v.verdict
    assert v.max_norm <= 1 + 1e-6
    assert sorted({n for n, _ in v.norms}) == [4, 8, 16, 32]
    assert time.perf_counter() - t0 < 60.0


# --------------------------------------------------------------------------- 7

@pytest.mark.acceptance(7, "strategy ordering and offset correction (fig6)")
def test_c7_strategy_ordering():
    runs = {label: (chain, res) for label, chain, res in preset_runs("fig6")}

    def settle(label):
        chain, res = runs[label]
        return settling_time(res.t, res.x.samples[:, -1], final=_dc(chain)[-1])

    ts = {k: settle(k) for k in ("both+soft", "leader+soft", "leader")}
    assert ts["both+soft"] < ts["leader+soft"] < ts["leader"], ts
    assert math.isfinite(ts["leader"])

    chain, res = runs["both"]
    post = res.x.samples[-1, 4:]
    assert np.all(np.abs(post - KAPPA) < 0.02) and np.all(np.abs(post - 1) > 0.2), post
    chain, res = runs["both+soft"]
    assert np.all(np.abs(res.x.samples[-1, :] - 1) < 0.01)


# --------------------------------------------------------------------------- 8

COUNTER = RationalTF.from_descending([2], [1, 2, 1, 0])  # 1 + 4M(j) = -3


@pytest.mark.acceptance(8, "WTF stability harness")
def test_c8_stability_harness():
    base = FreqGrid.logspace()
    for grid in (base, base.densified(2)):
        assert check_wtf_stability(m1(), grid).verdict
        assert check_wtf_stability(m2(1.0), grid).verdict
        r = check_wtf_stability(COUNTER, grid)
        assert not r.verdict
        assert any(abs(w - 1.0) < 1e-9 for w in r.crossings)
