"""Floorplan corpora: ingestion, procedural synthesis, splits and augmentation."""
from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import Polygon

from . import records
from .evaluate import door_incidences, reconstruct_bubble_diagram
from .floorplan import (GRID, ROOM_TYPES, BubbleDiagram, ComponentType, Door, Floorplan,
                        Loop, validate_floorplan)

log = logging.getLogger(__name__)

MIN_ROOM = 24
DOOR_WIDTHS = (8, 10, 12)
DOOR_HALF_THICKNESS = 2
DOOR_MARGIN = 6


@dataclass
class Corpus:
    plans: list  # of (Floorplan, BubbleDiagram)
    provenance: str = "synthetic"
    diagnostics: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.plans)

    def __iter__(self):
        return iter(self.plans)

    def __eq__(self, other) -> bool:
        return isinstance(other, Corpus) and self.plans == other.plans

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for plan, diagram in self.plans:
                fh.write(records.to_record(plan, diagram) + "\n")


def check_record(plan: Floorplan, diagram: BubbleDiagram) -> list[str]:
    """Problems with a (plan, diagram) pair; empty when consistent."""
    problems = [f"{v.code}: {v.message}" + (f" (loop {v.loop})" if v.loop is not None else "")
                for v in validate_floorplan(plan)]
    try:
        diagram.check()
    except ValueError as exc:
        problems.append(f"diagram: {exc}")
        return problems
    kinds = tuple(lp.kind for lp in plan.loops)
    if kinds != diagram.kinds:
        problems.append("loop kinds do not follow the diagram (rooms, then doors, in order)")
    return problems


def ingest(path) -> Corpus:
    """Parse a canonical JSON-lines file; bad records become diagnostics."""
    plans, diagnostics = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                plan, diagram = records.from_record(line)
                if diagram is None:
                    diagram = reconstruct_bubble_diagram(plan)
            except (ValueError, KeyError, TypeError) as exc:
                diagnostics.append(f"line {lineno}: parse error: {exc}")
                continue
            problems = check_record(plan, diagram)
            if problems:
                diagnostics.extend(f"line {lineno}: {p}" for p in problems)
                continue
            plans.append((plan, diagram))
    if not plans:
        raise ValueError(f"{path}: no valid records\n" + "\n".join(diagnostics))
    return Corpus(plans, "ingested", diagnostics)


# ------------------------------------------------------------ synthesis

def _split_rooms(footprint, k, rng):
    rects = [footprint]
    while len(rects) < k:
        order = sorted(range(len(rects)), key=lambda i: -(rects[i][2] - rects[i][0]) * (rects[i][3] - rects[i][1]))
        for i in order:
            x0, y0, x1, y1 = rects[i]
            w, h = x1 - x0, y1 - y0
            vertical = w >= h
            span = w if vertical else h
            if span < 2 * MIN_ROOM:
                continue
            lo, hi = max(MIN_ROOM, int(0.35 * span)), min(span - MIN_ROOM, int(0.65 * span))
            cut = int(rng.integers(lo, hi + 1))
            if vertical:
                a, b = (x0, y0, x0 + cut, y1), (x0 + cut, y0, x1, y1)
            else:
                a, b = (x0, y0, x1, y0 + cut), (x0, y0 + cut, x1, y1)
            rects[i:i + 1] = [a, b]
            break
        else:
            raise ValueError(f"cannot partition footprint into {k} rooms")
    return rects


def _shared_walls(rects):
    """(i, j) -> (axis, position, lo, hi) for rooms sharing a wall segment."""
    walls = {}
    for i, a in enumerate(rects):
        for j, b in enumerate(rects):
            if j <= i:
                continue
            if a[2] == b[0] or b[2] == a[0]:
                x = a[2] if a[2] == b[0] else a[0]
                lo, hi = max(a[1], b[1]), min(a[3], b[3])
                if hi - lo >= max(DOOR_WIDTHS) + 2 * DOOR_MARGIN:
                    walls[(i, j)] = ("x", x, lo, hi)
            elif a[3] == b[1] or b[3] == a[1]:
                y = a[3] if a[3] == b[1] else a[1]
                lo, hi = max(a[0], b[0]), min(a[2], b[2])
                if hi - lo >= max(DOOR_WIDTHS) + 2 * DOOR_MARGIN:
                    walls[(i, j)] = ("y", y, lo, hi)
    return walls


def _door_on(wall, rng):
    axis, pos, lo, hi = wall
    w = int(DOOR_WIDTHS[rng.integers(len(DOOR_WIDTHS))])
    c0 = lo + DOOR_MARGIN
    c1 = hi - DOOR_MARGIN - w
    start = int(rng.integers(c0, c1 + 1))
    t = DOOR_HALF_THICKNESS
    if axis == "x":
        return ((pos - t, start), (pos + t, start), (pos + t, start + w), (pos - t, start + w))
    return ((start, pos - t), (start + w, pos - t), (start + w, pos + t), (start, pos + t))


def _exterior_walls(rect, footprint):
    x0, y0, x1, y1 = rect
    fx0, fy0, fx1, fy1 = footprint
    out = []
    if x0 == fx0:
        out.append(("x", x0, y0, y1))
    if x1 == fx1:
        out.append(("x", x1, y0, y1))
    if y0 == fy0:
        out.append(("y", y0, x0, x1))
    if y1 == fy1:
        out.append(("y", y1, x0, x1))
    return [w for w in out if w[3] - w[2] >= max(DOOR_WIDTHS) + 2 * DOOR_MARGIN]


def _rect_loop(kind, r):
    x0, y0, x1, y1 = r
    return Loop(kind, ((x0, y0), (x1, y0), (x1, y1), (x0, y1)))


def _spanning_edges(n, candidates, rng, extra_prob):
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    order = [candidates[k] for k in rng.permutation(len(candidates))]
    tree, rest = [], []
    for e in order:
        ra, rb = find(e[0]), find(e[1])
        if ra != rb:
            parent[ra] = rb
            tree.append(e)
        else:
            rest.append(e)
    if len(tree) != n - 1:
        return None
    extra = [e for e in rest if rng.random() < extra_prob]
    return sorted(tree + extra)


def synthesize_plan(rooms: int, rng: np.random.Generator, extra_door_prob: float = 0.2,
                    max_tries: int = 100) -> tuple[Floorplan, BubbleDiagram]:
    """One axis-aligned guillotine layout with doors on shared walls."""
    if not 2 <= rooms <= 10:
        raise ValueError(f"rooms_per_plan must be in [2, 10], got {rooms}")
    others = [t for t in ROOM_TYPES if t is not ComponentType.LIVING_ROOM]
    for _ in range(max_tries):
        fx0, fy0 = (int(v) for v in rng.integers(16, 49, size=2))
        fx1, fy1 = (int(v) for v in rng.integers(208, 241, size=2))
        footprint = (fx0, fy0, fx1, fy1)
        rects = _split_rooms(footprint, rooms, rng)
        walls = _shared_walls(rects)
        edges = _spanning_edges(rooms, sorted(walls), rng, extra_door_prob)
        if edges is None:
            continue
        areas = [(r[2] - r[0]) * (r[3] - r[1]) for r in rects]
        living = int(np.argmax(areas))
        kinds = [others[int(rng.integers(len(others)))] for _ in rects]
        kinds[living] = ComponentType.LIVING_ROOM
        ext = _exterior_walls(rects[living], footprint)
        front_room = living
        if not ext:
            cands = [i for i in range(rooms) if _exterior_walls(rects[i], footprint)]
            if not cands:
                continue
            front_room = cands[int(rng.integers(len(cands)))]
            ext = _exterior_walls(rects[front_room], footprint)
        front_wall = ext[int(rng.integers(len(ext)))]

        loops = [_rect_loop(k, r) for k, r in zip(kinds, rects)]
        doors = []
        for i, j in edges:
            loops.append(Loop(ComponentType.INTERIOR_DOOR, _door_on(walls[(i, j)], rng)))
            doors.append(Door(ComponentType.INTERIOR_DOOR, (i, j)))
        loops.append(Loop(ComponentType.FRONT_DOOR, _door_on(front_wall, rng)))
        doors.append(Door(ComponentType.FRONT_DOOR, (front_room,)))
        plan = Floorplan(tuple(loops))
        diagram = BubbleDiagram(tuple(kinds), tuple(doors))
        if validate_floorplan(plan):
            continue
        if [tuple(sorted(h)) for h in door_incidences(plan)] != [tuple(sorted(d.endpoints)) for d in doors]:
            continue
        return plan, diagram
    raise ValueError(f"failed to synthesize a {rooms}-room plan in {max_tries} attempts")


def synthesize(n_plans: int, rooms_per_plan, rng: np.random.Generator) -> Corpus:
    """``rooms_per_plan`` is an int or an inclusive (low, high) range."""
    if isinstance(rooms_per_plan, (tuple, list)):
        lo, hi = rooms_per_plan
    else:
        lo = hi = int(rooms_per_plan)
    if not (2 <= lo <= hi <= 10):
        raise ValueError(f"rooms_per_plan must be in [2, 10], got {rooms_per_plan}")
    plans = []
    for _ in range(n_plans):
        k = int(rng.integers(lo, hi + 1))
        plans.append(synthesize_plan(k, rng))
    return Corpus(plans, "synthetic")


# ------------------------------------------------------------ statistics

def build_histogram(corpus) -> dict:
    plans = corpus.plans if isinstance(corpus, Corpus) else list(corpus)
    if not plans:
        raise ValueError("cannot build a histogram from an empty corpus")
    hist: dict = defaultdict(Counter)
    for plan, _ in plans:
        for lp in plan.loops:
            hist[lp.kind][len(lp.corners)] += 1
    return {k: dict(sorted(v.items())) for k, v in hist.items()}


def split_by_room_count(corpus: Corpus, k: int) -> tuple[Corpus, Corpus]:
    """(plans whose room count differs from k, plans with exactly k rooms)."""
    if not corpus.plans:
        raise ValueError("cannot split an empty corpus")
    train = [p for p in corpus.plans if len(p[1].rooms) != k]
    held = [p for p in corpus.plans if len(p[1].rooms) == k]
    if not train or not held:
        log.warning("split_by_room_count(k=%d): %d train / %d eval plans", k, len(train), len(held))
    return Corpus(train, corpus.provenance), Corpus(held, corpus.provenance)


def histogram_to_json(hist: dict) -> dict:
    return {k.value: {str(n): c for n, c in v.items()} for k, v in hist.items()}


def histogram_from_json(obj: dict) -> dict:
    return {ComponentType.parse(k): {int(n): int(c) for n, c in v.items()} for k, v in obj.items()}


# ---------------------------------------------------------- augmentation

def _polygon(corners) -> Polygon:
    return Polygon([(float(x), float(y)) for x, y in corners])


def _bent_wall(corners, house_center, rng):
    """Two extra corners pushed outward from the wall farthest from the house center."""
    pts = np.asarray(corners, dtype=np.float64)
    n = len(pts)
    mids = (pts + np.roll(pts, -1, axis=0)) / 2.0
    k = int(np.argmax(np.hypot(*(mids - house_center).T)))
    p, q = pts[k], pts[(k + 1) % n]
    wall = q - p
    length = float(np.hypot(*wall))
    if length == 0:
        return None
    u = wall / length
    normal = np.array([-u[1], u[0]])
    center = pts.mean(axis=0)
    if np.dot(mids[k] - center, normal) < 0:
        normal = -normal
    extent = pts @ u
    half_along = (extent.max() - extent.min()) / 2.0
    depth = pts @ normal
    half_across = (depth.max() - depth.min()) / 2.0
    a1, a2, b = rng.uniform(0.25, 0.75, size=3)
    proj = np.dot(center - p, u)
    s1 = proj - a1 * half_along
    s2 = proj + a2 * half_along
    if not (0 < s1 < s2 < length):
        return None
    offset = b * half_across * normal
    c1 = np.rint(p + s1 * u + offset).astype(int)
    c2 = np.rint(p + s2 * u + offset).astype(int)
    new = [tuple(map(int, c)) for c in pts[: k + 1].astype(int)]
    new += [tuple(c1), tuple(c2)]
    new += [tuple(map(int, c)) for c in pts[k + 1:].astype(int)]
    return tuple(new)


def non_manhattan_augment(plan: Floorplan, keep_prob: float = 0.5,
                          rng: np.random.Generator | None = None, tol: float = 2.0) -> Floorplan:
    """Bend the outermost wall of each room with probability ``keep_prob``.

    A candidate is dropped if it leaves the canvas, breaks loop validity,
    overlaps another room, or changes any door incidence.
    """
    rng = np.random.default_rng() if rng is None else rng
    if keep_prob <= 0:
        return plan
    loops = list(plan.loops)
    room_idx = [i for i, lp in enumerate(loops) if not lp.kind.is_door]
    all_pts = np.array([c for i in room_idx for c in loops[i].corners], dtype=np.float64)
    house_center = (all_pts.min(axis=0) + all_pts.max(axis=0)) / 2.0
    baseline = door_incidences(plan, tol)
    for i in room_idx:
        keep = rng.random() < keep_prob
        corners = _bent_wall(loops[i].corners, house_center, rng)
        if not keep or corners is None:
            continue
        candidate = Loop(loops[i].kind, corners)
        if any(not (0 <= x < GRID and 0 <= y < GRID) for x, y in corners):
            continue
        trial = Floorplan(tuple(loops[:i] + [candidate] + loops[i + 1:]))
        if validate_floorplan(Floorplan((candidate,))):
            continue
        poly = _polygon(corners)
        if not poly.is_valid:
            continue
        if any(poly.intersection(_polygon(loops[j].corners)).area > 0
               for j in room_idx if j != i):
            continue
        if door_incidences(trial, tol) != baseline:
            continue
        loops[i] = candidate
    return Floorplan(tuple(loops))


def augment_corpus(corpus: Corpus, keep_prob: float, rng: np.random.Generator) -> Corpus:
    return Corpus([(non_manhattan_augment(p, keep_prob, rng), d) for p, d in corpus.plans],
                  "augmented")
