"""
Noising a floorplan
===================

Corner coordinates live on a 256 grid and are mapped to [-1, 1] before
diffusion.  This walks one synthetic plan through the forward process.
"""

import numpy as np

from floordiff.dataset import synthesize_plan
from floordiff.diffusion import cosine_schedule, forward_sample
from floordiff.floorplan import dequantize, quantize

rng = np.random.default_rng(0)
plan, diagram = synthesize_plan(4, rng)
corners = np.array([c for lp in plan.loops for c in lp.corners])
print("rooms:", [r.value for r in diagram.rooms])
print("corner count:", len(corners))

x0 = dequantize(corners)
sched = cosine_schedule(100)
print("gamma at t = 0, 25, 50, 75, 100:", np.round(sched.gamma[[0, 25, 50, 75, 100]], 4))

# how far the noisy corners drift from the truth, in grid pixels
eps = rng.standard_normal(x0.shape)
for t in (1, 10, 30, 60, 100):
    xt = forward_sample(x0, t, eps, sched)
    drift = np.abs(quantize(np.clip(xt, -1, 1)) - corners).mean()
    print(f"t={t:3d}  signal={np.sqrt(sched.gamma[t]):.3f}  mean drift={drift:6.1f} px")
