"""
A synthetic corpus, bent walls, and SVG output
==============================================

Plans come from a guillotine splitter with doors cut into shared walls.
The augmentation bends one outer wall per room, adding two corners.
"""

from pathlib import Path

import numpy as np

from floordiff.dataset import augment_corpus, build_histogram, synthesize
from floordiff.evaluate import compatibility, reconstruct_bubble_diagram, validity_report
from floordiff.render import render_svg

out = Path("demo_out")
out.mkdir(exist_ok=True)

corpus = synthesize(12, (4, 7), np.random.default_rng(3))
print(validity_report([p for p, _ in corpus]))

hist = build_histogram(corpus)
print({k.value: v for k, v in hist.items()})

bent = augment_corpus(corpus, keep_prob=0.7, rng=np.random.default_rng(4))
for k, ((plan, diagram), (aug, _)) in enumerate(zip(corpus, bent)):
    grown = sum(len(b.corners) - len(a.corners) for a, b in zip(plan.loops, aug.loops))
    score = compatibility(diagram, reconstruct_bubble_diagram(aug)).value
    print(f"plan {k:2d}: +{grown:2d} corners, compatibility after bending = {score}")
    (out / f"plan-{k:02d}.svg").write_text(render_svg(plan))
    (out / f"plan-{k:02d}-bent.svg").write_text(render_svg(aug))

print("SVGs in", out.resolve())
