"""
Three attention masks
=====================

Every corner is a token.  Component-wise attention (CSA) links corners of the
same loop, global attention (GSA) links all corners, and relational cross
attention (RCA) links rooms with the doors that connect them.
"""

import numpy as np

from floordiff.denoiser import DenoiserConfig, prepare_batch
from floordiff.floorplan import BubbleDiagram, ComponentType as CT, Door

diagram = BubbleDiagram(
    (CT.LIVING_ROOM, CT.KITCHEN, CT.BEDROOM),
    (Door(CT.INTERIOR_DOOR, (0, 1)), Door(CT.INTERIOR_DOOR, (0, 2)), Door(CT.FRONT_DOOR, (0,))),
)
counts = [6, 4, 4, 4, 4, 4]            # corners per loop: rooms first, then doors
batch = prepare_batch([diagram], [counts], DenoiserConfig())

labels = "".join(str(i) for i, c in enumerate(counts) for _ in range(c))
for kind in ("csa", "gsa", "rca"):
    m = batch.masks[kind][0]
    print(f"\n{kind.upper()}  ({int(m.sum())} of {m.size} pairs attend)")
    print("   " + labels)
    for a, row in enumerate(m):
        print(f"{labels[a]}  " + "".join("#" if v else "." for v in row))

# the kitchen (loop 1) only meets its door (loop 3) in RCA, never the bedroom
owner = np.repeat(np.arange(len(counts)), counts)
rca = batch.masks["rca"][0]
print("\nkitchen -> loops reached by RCA:", sorted({int(v) for v in owner[rca[owner == 1].any(axis=0)]}))
