"""Plateaus behind a soft boundary.

Thirty agents of one model followed by thirty of another.  When the step
front crosses the junction, only the fraction ``kappa_aa`` goes through,
and the agents right of it sit at that level until reflections return.
The prediction only uses the low-frequency gains of the two open loops.

    python demos/02_boundary_dc_gains.py        # about 10 s
"""
from wavechain import plateau_value, simulate, soft_dc_gains
from wavechain.models import m1, m2, two_segment_chain

print(" kp    kappa_aa  kappa_ab   x_31 plateau (50-70 s)")
for kp in (0.5, 1.0, 2.0, 4.0):
    rec = soft_dc_gains(m1(), m2(kp))
    res = simulate(two_segment_chain(30, 30, kp), 100.0, dt=0.01, decompose=False)
    mean, dev = plateau_value(res.t, res.x.samples[:, 30], (50.0, 70.0))
    print(f"{kp:4.1f}   {rec.kaa:.5f}   {rec.kab:+.5f}   {mean:.5f} (+-{dev:.1e})")
