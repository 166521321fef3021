"""Bubble-diagram reconstruction and plan-level metrics."""
from __future__ import annotations

import itertools
import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from . import geometry
from .floorplan import BubbleDiagram, ComponentType, Door, Floorplan, validate_floorplan

REPORT_VERSION = 1


def door_incidences(plan: Floorplan, tol: float = 2.0) -> list[tuple[int, ...]]:
    """For each door loop, the indices of rooms within ``tol`` pixels of it."""
    rooms = plan.rooms
    out = []
    for door in plan.doors:
        hit = tuple(r for r, room in enumerate(rooms)
                    if geometry.polygon_distance(door.corners, room.corners) <= tol)
        out.append(hit)
    return out


def reconstruct_bubble_diagram(plan: Floorplan, tol: float = 2.0) -> BubbleDiagram:
    """Read the door graph off the geometry.

    A door touching two rooms becomes an interior door between them, one room
    a front door.  Doors touching zero or more than two rooms are kept with
    whatever incidences they have; they never match a well-formed edge.
    """
    doors = []
    for loop, hit in zip(plan.doors, door_incidences(plan, tol)):
        if len(hit) == 1:
            kind = ComponentType.FRONT_DOOR
        elif len(hit) == 2:
            kind = ComponentType.INTERIOR_DOOR
        else:
            kind = loop.kind
        doors.append(Door(kind, hit))
    return BubbleDiagram(tuple(lp.kind for lp in plan.rooms), tuple(doors))


@dataclass(frozen=True, order=True)
class CompatibilityScore:
    value: int

    def __int__(self) -> int:
        return self.value


def _edge_cost(a_doors, b_doors, label_a, label_b) -> int:
    """missing + extraneous + kind mismatches after relabelling room endpoints."""
    groups_a: dict = defaultdict(Counter)
    groups_b: dict = defaultdict(Counter)
    for d in a_doors:
        groups_a[frozenset(label_a[e] for e in d.endpoints)][d.kind] += 1
    for d in b_doors:
        groups_b[frozenset(label_b[e] for e in d.endpoints)][d.kind] += 1
    cost = 0
    for key in groups_a.keys() | groups_b.keys():
        ka, kb = groups_a.get(key, Counter()), groups_b.get(key, Counter())
        na, nb = sum(ka.values()), sum(kb.values())
        matched = min(na, nb)
        same_kind = sum(min(ka[k], kb[k]) for k in ka.keys() & kb.keys())
        cost += (na - matched) + (nb - matched) + (matched - same_kind)
    return cost


def compatibility(reference: BubbleDiagram, other: BubbleDiagram) -> CompatibilityScore:
    """Edge-edit distance under the best type-preserving room matching.

    Cost = missing door connections + extraneous connections + doors whose
    endpoints match but whose type differs, plus one per room left
    unmatched when the room-type multisets differ.  The search enumerates
    every injective matching inside each room-type group, so it is exact;
    it stays cheap up to about eight rooms of a single type.
    """
    by_type_a: dict = defaultdict(list)
    by_type_b: dict = defaultdict(list)
    for i, r in enumerate(reference.rooms):
        by_type_a[r].append(i)
    for j, r in enumerate(other.rooms):
        by_type_b[r].append(j)

    unmatched = 0
    group_options = []
    for kind in sorted(by_type_a.keys() | by_type_b.keys(), key=lambda k: k.index):
        ia, ib = by_type_a.get(kind, []), by_type_b.get(kind, [])
        unmatched += abs(len(ia) - len(ib))
        if len(ia) <= len(ib):
            opts = [list(zip(ia, perm)) for perm in itertools.permutations(ib, len(ia))]
        else:
            opts = [list(zip(perm, ib)) for perm in itertools.permutations(ia, len(ib))]
        group_options.append(opts)

    label_b = {j: ("b", j) for j in range(len(other.rooms))}
    best = None
    for combo in itertools.product(*group_options):
        label_a = {i: ("a", i) for i in range(len(reference.rooms))}
        for pairs in combo:
            for i, j in pairs:
                label_a[i] = ("b", j)
        c = _edge_cost(reference.doors, other.doors, label_a, label_b)
        if best is None or c < best:
            best = c
            if best == 0:
                break
    return CompatibilityScore(unmatched + (best or 0))


# ---------------------------------------------------------------- validity

def validity_report(plans: Sequence[Floorplan]) -> dict:
    if not plans:
        raise ValueError("validity_report needs at least one plan")
    counts: Counter = Counter()
    passed = 0
    for p in plans:
        v = validate_floorplan(p)
        if not v:
            passed += 1
        counts.update(x.code for x in v)
    return {"plans": len(plans), "valid": passed, "pass_fraction": passed / len(plans),
            "violations": dict(sorted(counts.items()))}


# --------------------------------------------------------------- diversity

def plan_features(plan: Floorplan) -> np.ndarray:
    """Handcrafted geometry summary: area stats, aspect ratio, corners, spread."""
    areas, aspects, corners, centroids = [], [], [], []
    for room in plan.rooms:
        pts = np.asarray(room.corners, dtype=np.float64)
        areas.append(abs(geometry.signed_area(room.corners)))
        w, h = np.ptp(pts[:, 0]), np.ptp(pts[:, 1])
        aspects.append(max(w, h) / max(min(w, h), 1.0))
        corners.append(len(pts))
        centroids.append(pts.mean(axis=0))
    centroids = np.asarray(centroids)
    spread = float(np.sqrt(((centroids - centroids.mean(axis=0)) ** 2).sum(axis=1).mean()))
    return np.array([np.mean(areas) / 1000.0, np.std(areas) / 1000.0, np.mean(aspects),
                     np.mean(corners), spread / 10.0])


def frechet_distance(mu1, cov1, mu2, cov2) -> float:
    diff = np.asarray(mu1) - np.asarray(mu2)
    covmean, _ = linalg.sqrtm(cov1 @ cov2, disp=False)
    if np.iscomplexobj(covmean):
        covmean = covmean.real
    value = diff @ diff + np.trace(cov1) + np.trace(cov2) - 2.0 * np.trace(covmean)
    return float(max(value, 0.0))


def diversity_proxy(set_a: Sequence[Floorplan], set_b: Sequence[Floorplan]) -> float:
    """Frechet distance between Gaussian fits of :func:`plan_features`."""
    if len(set_a) < 2 or len(set_b) < 2:
        raise ValueError("diversity_proxy needs at least two plans per set")
    fa = np.stack([plan_features(p) for p in set_a])
    fb = np.stack([plan_features(p) for p in set_b])
    return feature_frechet(fa, fb)


def feature_frechet(fa: np.ndarray, fb: np.ndarray) -> float:
    if len(fa) < 2 or len(fb) < 2:
        raise ValueError("need at least two samples per set for a covariance")
    if fa.shape == fb.shape and np.array_equal(fa, fb):
        return 0.0
    return frechet_distance(fa.mean(0), np.cov(fa, rowvar=False),
                            fb.mean(0), np.cov(fb, rowvar=False))


# ------------------------------------------------------------------ report

def evaluation_report(plans: Sequence[Floorplan], diagrams: Sequence[BubbleDiagram],
                      tol: float = 2.0) -> dict:
    if len(plans) != len(diagrams):
        raise ValueError(f"{len(plans)} plans but {len(diagrams)} diagrams")
    rows = []
    for k, (plan, diagram) in enumerate(zip(plans, diagrams)):
        recon = reconstruct_bubble_diagram(plan, tol)
        rows.append({
            "index": k,
            "compatibility": compatibility(diagram, recon).value,
            "valid": not validate_floorplan(plan),
            "room_multiset_match": Counter(lp.kind for lp in plan.loops) == Counter(diagram.kinds),
        })
    scores = [r["compatibility"] for r in rows]
    return {
        "version": REPORT_VERSION,
        "tolerance": tol,
        "plans": rows,
        "aggregate": {
            "count": len(rows),
            "mean_compatibility": float(np.mean(scores)) if scores else None,
            "validity": validity_report(plans) if plans else None,
        },
    }


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)
