import math

import numpy as np
import pytest

from helpers import preset_runs
from wavechain.absorbers import (UnsupportedTopology, closed_form_values,
                                 fir_closed_loop_response, hard_absorber_pair,
                                 leader_absorber, rear_absorber, soft_absorber_pair,
                                 soft_synthesis_residual, string_stability_check,
                                 synthesize_laws)
from wavechain.chain import (AgentSpec, build_chain, chain_frequency_solve, relative_l2,
                             settling_time, simulate)
from wavechain.lti import FreqGrid, RationalTF
from wavechain.models import absorbed_family, agent_m1, agent_m2, m1, m2, site, two_segment_chain
from wavechain.waves import WaveTF, dc_limit

S = 1j * np.logspace(-2, 2, 100)
G = WaveTF(m1())(S)
H = WaveTF(m2(1.0))(S)


def _hard_chain(**options):
    hard = AgentSpec.from_open_loops(m1(), m2())
    agents = [agent_m1()] * 3 + [hard] + [agent_m2()] * 4
    return build_chain(agents, [site("leader"), site("rear"), site("hard@4")], **options)


def _dc(chain):
    return np.real(dc_limit(lambda s: chain_frequency_solve(chain, s)))


def test_leader_only_homogeneous():
    N = 6
    X = chain_frequency_solve(two_segment_chain(N, 0, absorbers=[site("leader")]), S)
    for p in range(1, N + 1):
        assert np.max(np.abs(X[:, p - 1] - (G ** p + G ** (2 * N + 1 - p)))) < 1e-9


def test_rear_only_homogeneous():
    X = chain_frequency_solve(two_segment_chain(6, 0, absorbers=[site("rear")]), S)
    for p in range(1, 7):
        assert np.max(np.abs(X[:, p - 1] - G ** p)) < 1e-9


def test_rear_absorber_removes_end_reflection():
    c = two_segment_chain(6, 0, absorbers=[site("leader"), site("rear")])
    r = simulate(c, 40.0, 0.01)
    m = r.t <= r.meta["trusted_until"]
    assert relative_l2(r.b.samples[m, 5], r.a.samples[m, 5]) < 0.01


def test_leader_absorber_removes_staircase():
    def variation(absorbers):
        r = simulate(two_segment_chain(6, 0, absorbers=absorbers), 60.0, 0.01, decompose=False)
        return np.sum(np.abs(np.diff(r.x.samples[:, 0])))
    assert variation([site("leader"), site("rear")]) < 0.8 * variation([])


def test_degenerate_laws_vanish():
    g = WaveTF(m1())
    zero = WaveTF(RationalTF.constant(0.0))
    for law in (rear_absorber(zero, 5), *soft_absorber_pair(g, g, 3), *hard_absorber_pair(g, g, 3)):
        assert all(np.max(np.abs(v)) < 1e-14 for v in law.block_values(S))


def test_hard_law_with_free_end_is_rear_law():
    g = WaveTF(m1())
    left, _ = hard_absorber_pair(g, WaveTF(RationalTF.constant(0.0)), 5)
    rear = rear_absorber(g, 5)
    assert (left.agent, left.channel, left.sources) == (rear.agent, rear.channel, rear.sources)
    for a, b in zip(left.block_values(S), rear.block_values(S)):
        assert np.max(np.abs(a - b)) < 1e-12


def test_leader_law_dc():
    law = leader_absorber(WaveTF(m1()))
    assert law.dc_gains() == pytest.approx([1.0, -1.0], abs=1e-6)


def test_soft_synthesis_residual():
    assert np.max(np.abs(soft_synthesis_residual(m1(), m2(1.0), S))) < 1e-9


@pytest.mark.parametrize("sites,kind", [
    (["leader", "soft@4"], "leader"), (["rear", "soft@4"], "ends"),
    (["leader", "rear", "soft@4"], "ends"), (["soft@4"], "none"),
])
def test_closed_forms_match_exact_solve(sites, kind):
    c = two_segment_chain(4, 4, absorbers=[site(x) for x in sites])
    X = chain_frequency_solve(c, S)
    for p in range(1, 9):
        assert np.max(np.abs(X[:, p - 1] - closed_form_values(c, S, p))) < 1e-9


def test_worked_example_exact_solve():
    c = two_segment_chain(3, 2, absorbers=[site("soft@3")])
    X = chain_frequency_solve(c, S)
    assert np.max(np.abs(X[:, 0] - (G + G ** 6 * H ** 4) / (1 + G ** 7 * H ** 4))) < 1e-9


def test_transmission_formula_continuous_at_boundary():
    c = two_segment_chain(4, 4, absorbers=[site("leader"), site("rear"), site("soft@4")])
    assert np.allclose(closed_form_values(c, S, 4), G ** 4 * H ** 0)


def test_fir_closed_loop_matches_closed_form():
    c = two_segment_chain(4, 4, absorbers=[site("leader"), site("rear"), site("soft@4")])
    s = 1j * np.logspace(-2, 1, 50)
    X = fir_closed_loop_response(c, s, 0.01, 60.0)
    for p in range(1, 9):
        assert np.max(np.abs(X[:, p - 1] - closed_form_values(c, s, p))) < 1e-3


def test_printed_variants_reflect():
    # the right soft law only acts on waves arriving from the right, so the
    # free end must stay untreated for the printed input pair to matter
    sites = [site("leader"), site("soft@4")]
    cm = two_segment_chain(4, 4, absorbers=sites)
    cp = two_segment_chain(4, 4, absorbers=sites, soft_right_form="printed")
    Xm, Xp = chain_frequency_solve(cm, S), chain_frequency_solve(cp, S)
    assert max(np.max(np.abs(Xm[:, p] - closed_form_values(cm, S, p + 1))) for p in range(8)) < 1e-9
    assert np.max(np.abs(Xp - Xm)) > 1e-2
    target = np.stack([G ** p if p <= 4 else G ** 4 * H ** (p - 4) for p in range(1, 9)], 1)
    assert np.max(np.abs(chain_frequency_solve(_hard_chain(), S) - target)) < 1e-9
    assert np.max(np.abs(chain_frequency_solve(_hard_chain(hard_printed_sign=True), S)
                         - target)) > 0.1


def test_hard_laws_time_domain():
    c = _hard_chain()
    r = simulate(c, 40.0, 0.01)
    m = r.t <= r.meta["trusted_until"]
    aL, bL, aR, bR = (v[m] for v in r.hard[4])
    assert relative_l2(aL - aR, aL) < 0.05
    assert relative_l2(bL - bR, aL) < 0.05


def test_closed_forms_reject_hard_topology():
    with pytest.raises(UnsupportedTopology):
        closed_form_values(_hard_chain(), S, 1)


def test_laws_need_realization():
    law = synthesize_laws(two_segment_chain(4, 4, absorbers=[site("leader")]))[0]
    with pytest.raises(RuntimeError):
        law.kernel_responses(S)
    k = law.realize(0.01, 30.0)
    assert len(k.fir) == 2 and abs(k.fir[0].dc_gain - 1) < 1e-9


def test_one_sided_soft_site():
    c = two_segment_chain(4, 4, absorbers=[site("soft_left@4")])
    laws = synthesize_laws(c)
    assert [(law.side, law.agent, law.channel) for law in laws] == [("left", 4, "r")]


def test_steady_states():
    ones = {("leader", "rear", "soft@4"), ("rear", "soft@4"), ("soft@4",), ()}
    for sites in ones:
        dc = _dc(two_segment_chain(4, 4, absorbers=[site(x) for x in sites]))
        assert np.allclose(dc, 1.0, atol=1e-6), sites
    assert np.allclose(_dc(_hard_chain()), 1.0, atol=1e-6)
    # leader law alone: the wave returning from the free end adds a second unit
    assert np.allclose(_dc(two_segment_chain(4, 4, absorbers=[site("leader"), site("soft@4")])),
                       2.0, atol=1e-6)
    kaa = 2 / (math.sqrt(3) + 1)
    dc = _dc(two_segment_chain(4, 4, absorbers=[site("leader"), site("rear")]))
    assert np.allclose(dc, kaa, atol=1e-6)


def test_no_absorbers_slowest():
    runs = {label: (c, r) for label, c, r in preset_runs("fig6")}
    t = {k: settling_time(r.t, r.x.samples[:, -1], final=_dc(c)[-1]) for k, (c, r) in runs.items()}
    assert math.isinf(t["none"])
    assert all(t["none"] >= v for v in t.values())


def test_mismatch_knob_partially_reflects():
    sites = [site("leader"), site("rear"), site("soft@4")]
    exact = two_segment_chain(4, 4, absorbers=sites)
    off = two_segment_chain(4, 4, absorbers=sites, mismatch=0.1)
    d = np.max(np.abs(chain_frequency_solve(off, S) - chain_frequency_solve(exact, S)))
    assert 1e-4 < d < 0.2


def test_string_stability_family():
    v = string_stability_check(absorbed_family, [4, 8], method="exact")
    assert v.verdict and v.max_norm <= 1 + 1e-6


def test_worked_example_family_bounded():
    def family(n):
        return two_segment_chain(n // 2, n - n // 2, absorbers=[site(f"soft@{n // 2}")])
    v = string_stability_check(family, [4, 8], grid=FreqGrid.logspace(1e-2, 1e2, 256),
                               method="exact", bound=math.inf)
    assert v.verdict and math.isfinite(v.max_norm)


def test_single_agent_dc():
    M = m1()(np.array([1e-6 + 0j]))
    assert abs(M / (1 + M) - 1)[0] < 1e-9
