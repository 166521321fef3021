"""Canonical JSON-lines corpus format.

One floorplan per line::

    {"loops": [{"kind": "Bedroom", "corners": [[x, y], ...]}, ...],
     "diagram": {"rooms": ["Bedroom", ...],
                 "doors": [{"kind": "Interior door", "endpoints": [0, 1]}, ...]}}

Coordinates are integers in 0..255.  Loops are listed rooms first, then
doors; loop ``k`` realizes the ``k``-th room and loop ``len(rooms) + k``
realizes the ``k``-th door of the diagram.
"""
from __future__ import annotations

import json

from .floorplan import BubbleDiagram, ComponentType, Door, Floorplan, Loop


def diagram_to_dict(diagram: BubbleDiagram) -> dict:
    return {
        "rooms": [r.value for r in diagram.rooms],
        "doors": [{"kind": d.kind.value, "endpoints": list(d.endpoints)} for d in diagram.doors],
    }


def diagram_from_dict(obj: dict) -> BubbleDiagram:
    rooms = tuple(ComponentType.parse(r) for r in obj["rooms"])
    doors = tuple(Door(ComponentType.parse(d["kind"]), tuple(d["endpoints"]))
                  for d in obj.get("doors", []))
    return BubbleDiagram(rooms, doors)


def plan_to_dict(plan: Floorplan) -> list:
    return [{"kind": lp.kind.value, "corners": [list(c) for c in lp.corners]} for lp in plan.loops]


def plan_from_dict(loops: list) -> Floorplan:
    out = []
    for lp in loops:
        corners = []
        for c in lp["corners"]:
            if len(c) != 2 or any(isinstance(v, bool) or v != int(v) for v in c):
                raise ValueError(f"corner {c!r} is not an integer pair")
            corners.append((int(c[0]), int(c[1])))
        out.append(Loop(ComponentType.parse(lp["kind"]), tuple(corners)))
    return Floorplan(tuple(out))


def to_record(plan: Floorplan, diagram: BubbleDiagram | None = None) -> str:
    obj = {"loops": plan_to_dict(plan)}
    if diagram is not None:
        obj["diagram"] = diagram_to_dict(diagram)
    return json.dumps(obj, separators=(",", ":"))


def from_record(line: str) -> tuple[Floorplan, BubbleDiagram | None]:
    obj = json.loads(line)
    if not isinstance(obj, dict) or "loops" not in obj:
        raise ValueError("record must be an object with a 'loops' field")
    plan = plan_from_dict(obj["loops"])
    diagram = diagram_from_dict(obj["diagram"]) if "diagram" in obj else None
    return plan, diagram


def read_diagrams(path) -> list[BubbleDiagram]:
    """Diagrams from a JSON file (single object) or JSON-lines file.

    Each item is either a bare diagram ``{"rooms", "doors"}`` or a canonical
    record carrying a ``diagram`` field.
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        objs = [json.loads(text)]
    except json.JSONDecodeError:
        objs = [json.loads(ln) for ln in text.splitlines() if ln.strip()]
    if len(objs) == 1 and isinstance(objs[0], list):
        objs = objs[0]
    out = []
    for obj in objs:
        d = diagram_from_dict(obj["diagram"] if "diagram" in obj else obj)
        d.check()
        out.append(d)
    return out


def write_diagrams(path, diagrams) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in diagrams:
            fh.write(json.dumps(diagram_to_dict(d), separators=(",", ":")) + "\n")
