"""Floorplan domain model: component types, loops, bubble diagrams, quantization."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import geometry

GRID = 256
MAX_COMPONENTS = 32
MAX_CORNERS = 32
ROOM_TYPE_DIM = 25


class ComponentType(enum.Enum):
    """Room and door categories with their fixed one-hot index.

    Indices 12..24 of the 25-wide type vector are reserved and never emitted.
    """

    KITCHEN = "Kitchen"
    LIVING_ROOM = "Living-room"
    BEDROOM = "Bedroom"
    DINING_ROOM = "Dining-room"
    BATHROOM = "Bathroom"
    STUDY_ROOM = "Study-room"
    BALCONY = "Balcony"
    ENTRANCE = "Entrance"
    STORAGE = "Storage"
    UNKNOWN = "Unknown"
    INTERIOR_DOOR = "Interior door"
    FRONT_DOOR = "Front door"

    @property
    def index(self) -> int:
        return _INDEX[self]

    @property
    def is_door(self) -> bool:
        return self in (ComponentType.INTERIOR_DOOR, ComponentType.FRONT_DOOR)

    @classmethod
    def parse(cls, name: str) -> "ComponentType":
        try:
            return cls(name)
        except ValueError:
            raise ValueError(f"unknown component type {name!r}") from None

    @classmethod
    def from_index(cls, idx: int) -> "ComponentType":
        return _BY_INDEX[idx]


_INDEX = {t: k for k, t in enumerate(ComponentType)}
_BY_INDEX = {k: t for t, k in _INDEX.items()}
ROOM_TYPES = tuple(t for t in ComponentType if not t.is_door)
DOOR_TYPES = (ComponentType.INTERIOR_DOOR, ComponentType.FRONT_DOOR)


def is_door(kind: ComponentType) -> bool:
    return kind.is_door


def min_corners(kind: ComponentType) -> int:
    return 4 if kind.is_door else 3


@dataclass(frozen=True)
class Loop:
    kind: ComponentType
    corners: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "corners", tuple((int(x), int(y)) for x, y in self.corners))

    def __len__(self) -> int:
        return len(self.corners)


@dataclass(frozen=True)
class Floorplan:
    """Closed polygon loops; rooms come first, then doors (canonical order)."""

    loops: tuple[Loop, ...]

    def __post_init__(self):
        object.__setattr__(self, "loops", tuple(self.loops))

    @property
    def rooms(self) -> tuple[Loop, ...]:
        return tuple(lp for lp in self.loops if not lp.kind.is_door)

    @property
    def doors(self) -> tuple[Loop, ...]:
        return tuple(lp for lp in self.loops if lp.kind.is_door)

    @property
    def num_corners(self) -> int:
        return sum(len(lp) for lp in self.loops)


@dataclass(frozen=True)
class Door:
    kind: ComponentType
    endpoints: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "endpoints", tuple(int(e) for e in self.endpoints))


@dataclass(frozen=True)
class BubbleDiagram:
    rooms: tuple[ComponentType, ...]
    doors: tuple[Door, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "rooms", tuple(self.rooms))
        object.__setattr__(self, "doors", tuple(self.doors))

    @property
    def num_components(self) -> int:
        return len(self.rooms) + len(self.doors)

    @property
    def kinds(self) -> tuple[ComponentType, ...]:
        """Component kinds in loop order (rooms, then doors)."""
        return self.rooms + tuple(d.kind for d in self.doors)

    def check(self) -> None:
        """Raise ``ValueError`` if the diagram is not a well-formed constraint."""
        if not self.rooms:
            raise ValueError("diagram has no rooms")
        for r in self.rooms:
            if r.is_door:
                raise ValueError(f"door type {r.value!r} listed as a room")
        for k, d in enumerate(self.doors):
            if not d.kind.is_door:
                raise ValueError(f"door {k}: {d.kind.value!r} is not a door type")
            want = 1 if d.kind is ComponentType.FRONT_DOOR else 2
            if len(d.endpoints) != want:
                raise ValueError(f"door {k}: {d.kind.value} needs {want} endpoint(s), got {d.endpoints}")
            for e in d.endpoints:
                if not 0 <= e < len(self.rooms):
                    raise ValueError(f"door {k}: endpoint {e} out of range")
            if len(set(d.endpoints)) != len(d.endpoints):
                raise ValueError(f"door {k}: interior door endpoints must be distinct")
        if self.num_components > MAX_COMPONENTS:
            raise ValueError(f"{self.num_components} components exceed capacity {MAX_COMPONENTS}")


@dataclass(frozen=True)
class ComponentGraph:
    """Symmetric room<->door adjacency over component indices."""

    adjacency: np.ndarray
    kinds: tuple[ComponentType, ...] = field(default=())

    def connected(self, i: int, j: int) -> bool:
        return bool(self.adjacency[i, j])


# ------------------------------------------------------------- quantization

def dequantize(v):
    """Integer pixel(s) in [0, 255] -> continuous value(s) in [-1, 1]."""
    return 2.0 * np.asarray(v, dtype=np.float64) / 255.0 - 1.0


def quantize(c):
    """Continuous value(s) -> integer pixel(s), clamped, rounded half away from zero."""
    c = np.clip(np.asarray(c, dtype=np.float64), -1.0, 1.0)
    scaled = 255.0 * (c + 1.0) / 2.0
    return np.floor(scaled + 0.5).astype(np.int64)


# ------------------------------------------------------------ corner counts

CornerHistogram = dict  # ComponentType -> {corner count: occurrences}


def sample_corner_counts(hist: Mapping[ComponentType, Mapping[int, int]],
                         diagram: BubbleDiagram,
                         overrides: Mapping | None = None,
                         rng: np.random.Generator | None = None) -> list[int]:
    """Draw a corner count for every component of ``diagram`` (loop order).

    ``overrides`` maps either a component index or a :class:`ComponentType`
    to a fixed count; index keys win over type keys.
    """
    rng = np.random.default_rng() if rng is None else rng
    overrides = dict(overrides or {})
    counts = []
    for i, kind in enumerate(diagram.kinds):
        fixed = overrides.get(i, overrides.get(kind))
        if fixed is not None:
            fixed = int(fixed)
            if not min_corners(kind) <= fixed <= MAX_CORNERS:
                raise ValueError(f"override {fixed} for {kind.value} outside [{min_corners(kind)}, {MAX_CORNERS}]")
            counts.append(fixed)
            continue
        table = hist.get(kind)
        if not table:
            raise KeyError(f"corner histogram has no entry for {kind.value!r}")
        support = sorted(table)
        weights = np.array([table[n] for n in support], dtype=np.float64)
        counts.append(int(support[rng.choice(len(support), p=weights / weights.sum())]))
    return counts


# --------------------------------------------------------------- adjacency

def build_component_graph(diagram: BubbleDiagram,
                          loop_order: Sequence[int] | None = None) -> ComponentGraph:
    """Room<->door adjacency; ``loop_order[k]`` is the component index of the
    k-th diagram element (rooms first, then doors)."""
    n = diagram.num_components
    order = list(range(n)) if loop_order is None else [int(k) for k in loop_order]
    if sorted(order) != list(range(n)):
        raise ValueError(f"loop_order must be a permutation of 0..{n - 1}, got {order}")
    adj = np.zeros((n, n), dtype=bool)
    nr = len(diagram.rooms)
    for k, door in enumerate(diagram.doors):
        d = order[nr + k]
        for e in door.endpoints:
            r = order[e]
            adj[r, d] = adj[d, r] = True
    kinds = [None] * n
    for k, kind in enumerate(diagram.kinds):
        kinds[order[k]] = kind
    return ComponentGraph(adj, tuple(kinds))


# ------------------------------------------------------------- augmentation

def augment_corner(c, c_next, L: int = 8) -> np.ndarray:
    """``[C, s_1..s_L]`` flattened, with ``s_k = C + (k/L)(C_next - C)``."""
    if L < 1:
        raise ValueError("L must be >= 1")
    c = np.asarray(c, dtype=np.float64)
    c_next = np.asarray(c_next, dtype=np.float64)
    k = np.arange(L + 1, dtype=np.float64)[:, None] / L
    return (c + k * (c_next - c)).reshape(-1)


def augment_corners(coords: np.ndarray, next_index: np.ndarray, L: int = 8) -> np.ndarray:
    """Vectorised :func:`augment_corner` over (..., n, 2) coordinates."""
    nxt = np.take_along_axis(coords, next_index[..., None].repeat(2, axis=-1), axis=-2)
    k = np.arange(L + 1, dtype=np.float64)[:, None] / L
    pts = coords[..., None, :] + k * (nxt - coords)[..., None, :]
    return pts.reshape(coords.shape[:-1] + (2 * (L + 1),))


# --------------------------------------------------------------- validation

@dataclass(frozen=True)
class Violation:
    code: str
    loop: int | None
    message: str


def validate_floorplan(plan: Floorplan) -> list[Violation]:
    out: list[Violation] = []
    if len(plan.loops) > MAX_COMPONENTS:
        out.append(Violation("too_many_components", None,
                             f"{len(plan.loops)} loops exceed {MAX_COMPONENTS}"))
    if not plan.rooms:
        out.append(Violation("no_rooms", None, "plan has no room loops"))
    for i, lp in enumerate(plan.loops):
        n = len(lp.corners)
        if n < min_corners(lp.kind):
            out.append(Violation("too_few_corners", i,
                                 f"{lp.kind.value} has {n} corners, needs {min_corners(lp.kind)}"))
        if n > MAX_CORNERS:
            out.append(Violation("too_many_corners", i, f"{n} corners exceed {MAX_CORNERS}"))
        bad = [c for c in lp.corners if not (0 <= c[0] < GRID and 0 <= c[1] < GRID)]
        if bad:
            out.append(Violation("out_of_range", i, f"coordinates outside [0,255]: {bad[:3]}"))
        dup = any(lp.corners[k] == lp.corners[(k + 1) % n] for k in range(n)) if n > 1 else False
        if dup:
            out.append(Violation("duplicate_corner", i, "consecutive identical corners"))
        elif n >= 3 and geometry.is_self_intersecting(lp.corners):
            out.append(Violation("self_intersection", i, "loop boundary intersects itself"))
    return out
