"""An agent whose front and rear controllers differ.

Agent 4 uses the first model towards its predecessor and the second towards
its follower, so waves meet a hard boundary at the agent itself.  With the
two hard-boundary laws the forward wave passes with no reflection:
``X_p = G^p`` on the left and ``G^4 H^(p-4)`` on the right.  Flipping the
sign of the front error of agent 4 breaks this.

    python demos/04_hard_boundary.py
"""
import numpy as np

from wavechain import AgentSpec, WaveTF, build_chain, chain_frequency_solve, relative_l2, simulate
from wavechain.models import agent_m1, agent_m2, m1, m2, site

hard = AgentSpec.from_open_loops(m1(), m2())
agents = [agent_m1()] * 3 + [hard] + [agent_m2()] * 4
s = 1j * np.logspace(-2, 2, 200)
G, H = WaveTF(m1())(s), WaveTF(m2())(s)
target = np.stack([G ** p if p <= 4 else G ** 4 * H ** (p - 4) for p in range(1, 9)], axis=1)

for flipped in (False, True):
    chain = build_chain(agents, [site("leader"), site("rear"), site("hard@4")],
                        hard_printed_sign=flipped)
    dev = np.max(np.abs(chain_frequency_solve(chain, s) - target))
    print(f"front error {'X3 + X4' if flipped else 'X3 - X4'}: max |X_p - target| = {dev:.2e}")

chain = build_chain(agents, [site("leader"), site("rear"), site("hard@4")])
res = simulate(chain, 40.0, dt=0.01)
aL, bL, aR, bR = res.hard[4]
print(f"left/right pairs at agent 4: |A_L-A_R|/|A_L| = {relative_l2(aL - aR, aL):.2e}, "
      f"|B_L-B_R|/|A_L| = {relative_l2(bL - bR, aL):.2e}")
