"""
Training on a small corpus and sampling
=======================================

A short run on a single core.  Set STEPS higher (20000 reproduces the
acceptance run) for plans that respect their diagrams.
"""

import os
import time

import numpy as np

from floordiff.dataset import synthesize
from floordiff.diffusion import sample_batch
from floordiff.evaluate import compatibility, reconstruct_bubble_diagram
from floordiff.render import render_svg
from floordiff.training import TrainConfig, Trainer

STEPS = int(os.environ.get("STEPS", 300))

corpus = synthesize(60, (4, 6), np.random.default_rng(10))
held_out = [d for _, d in synthesize(8, (4, 6), np.random.default_rng(11))]

config = TrainConfig(total_steps=STEPS, seed=1)
trainer = Trainer.create(corpus, config)


def score(model):
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(5).spawn(len(held_out))]
    plans = sample_batch(model, held_out, rngs)
    return plans, np.mean([compatibility(d, reconstruct_bubble_diagram(p)).value
                           for p, d in zip(plans, held_out)])


_, before = score(trainer.model)
start = time.time()
trainer.run(corpus, callback=lambda tr, res: tr.step % 100 or print(f"step {tr.step}  loss {res.loss:.4f}"))
print(f"{STEPS} steps in {time.time() - start:.0f}s")
plans, after = score(trainer.model)
print(f"mean compatibility on held-out diagrams: {before:.2f} before, {after:.2f} after")

# sampled plans can be invalid early in training; render only the valid ones
os.makedirs("demo_out", exist_ok=True)
for k, p in enumerate(plans):
    try:
        open(f"demo_out/sample-{k}.svg", "w").write(render_svg(p))
    except ValueError as exc:
        print(f"sample {k} not rendered: {str(exc)[:70]}")
