"""Travelling waves in a homogeneous chain.

The wave transfer function ``G`` maps the output of one agent to the next in
an infinitely long chain.  Here we compare the step response of ``G**i``
(obtained by numerical inverse Laplace transform) with agent ``i`` of a long
simulated chain, before anything comes back from the far end.

    python demos/01_wave_transfer_function.py
"""
import numpy as np

from wavechain import WaveTF, check_wtf_stability, ilt_response, simulate
from wavechain.models import m1, m2, two_segment_chain

for name, m in (("m1", m1()), ("m2(kp=1)", m2(1.0))):
    rep = check_wtf_stability(m)
    w = WaveTF(m)
    mag = np.abs(w(1j * np.logspace(-3, 3, 2000)))
    print(f"{name:9s} stable={rep.verdict}  max|G(jw)|={mag.max():.6f}  G(0+)={w(1e-9).real:.6f}")

# 40 agents of m1, no absorbers; the far end is reached long after t = 20 s
chain = two_segment_chain(40, 0)
res = simulate(chain, 20.0, dt=0.01, decompose=False)
G = WaveTF(m1())
print("\nagent   max |x_i - step(G^i)|   x_i(20)")
for i in (1, 2, 5, 10):
    ref = ilt_response(lambda s, i=i: G(s) ** i / s, 25.0, 0.01).samples[: res.t.size, 0]
    err = np.max(np.abs(res.x.samples[:, i - 1] - ref))
    print(f"{i:5d}   {err:.2e}               {res.x.samples[-1, i - 1]:.4f}")
