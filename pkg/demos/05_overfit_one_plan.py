"""
Memorizing one plan
===================

With a single training plan the sampler should return its exact integer
corners.  The discrete head is what makes this exact: for the last 31
reverse steps its thresholded bits replace the continuous estimate.
"""

import os
import time

import numpy as np

from floordiff.dataset import synthesize_plan
from floordiff.diffusion import sample_batch
from floordiff.floorplan import quantize
from floordiff.training import TrainConfig, overfit_single

plan, diagram = synthesize_plan(5, np.random.default_rng(123))
print(f"{len(plan.loops)} loops, {plan.num_corners} corners")

start = time.time()
result = overfit_single(plan, diagram, TrainConfig(total_steps=int(os.environ.get("STEPS", 5000))), check_every=250)
print(f"reproduced={result.reproduced} after {result.steps} steps ({time.time() - start:.0f}s)")

# watch the estimate snap onto the grid once the discrete head takes over
truth = np.array([c for lp in plan.loops for c in lp.corners])
overrides = {i: len(lp.corners) for i, lp in enumerate(plan.loops)}


def hook(t, active, x0_hat):
    if t in (100, 60, 32, 31, 10, 1):
        err = np.abs(quantize(x0_hat[0, : len(truth)]) - truth).max()
        print(f"t={t:3d} discrete={'on ' if active else 'off'} max corner error {err} px")


sample_batch(result.trainer.model, [diagram], [np.random.default_rng(0)], overrides=overrides, hook=hook)
