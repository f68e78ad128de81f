"""Shared fixtures data: random open-loop pairs and cached preset simulations."""
from functools import lru_cache

import numpy as np

from wavechain.chain import simulate
from wavechain.config import config_from_dict
from wavechain.lti import RationalTF
from wavechain.presets import preset_dict
from wavechain.waves import check_wtf_stability


def random_open_loop(rng, nu: int) -> RationalTF:
    """Lead/lag open loop with ``nu`` integrators and a modest gain."""
    k = rng.uniform(0.2, 5.0)
    p = rng.uniform(0.5, 6.0)
    if nu == 1:
        if rng.random() < 0.5:
            return RationalTF.from_descending([k], [1, p, 0])
        z = rng.uniform(0.1, 4.0)
        return RationalTF.from_descending([k, k * z], [1, p, 0])
    z = rng.uniform(0.05, 0.5) * p  # zero well below the pole: phase lead
    return RationalTF.from_descending([k, k * z], np.polymul([1, p], [1, 0, 0]))


def random_pairs(n: int, seed: int = 7):
    """``n`` (M_r, M_f) pairs with one or two integrators that pass the WTF test."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        mr = random_open_loop(rng, int(rng.integers(1, 3)))
        mf = random_open_loop(rng, int(rng.integers(1, 3)))
        if check_wtf_stability(mr).verdict and check_wtf_stability(mf).verdict:
            out.append((mr, mf))
    return out


@lru_cache(maxsize=None)
def preset_runs(name: str):
    """``[(label, chain, result)]`` for every run of a preset."""
    cfg = config_from_dict(preset_dict(name), digest=name)
    return [(r.label, r.chain, simulate(r.chain, cfg.t_final, cfg.dt)) for r in cfg.runs]
