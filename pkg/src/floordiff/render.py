"""SVG rendering of floorplans on the 256x256 grid."""
from __future__ import annotations

from xml.sax.saxutils import quoteattr

from .floorplan import GRID, ComponentType, Floorplan, validate_floorplan

# room-type -> fill; doors are drawn last so they sit on top of the walls
PALETTE = {
    ComponentType.KITCHEN: "#f4a261",
    ComponentType.LIVING_ROOM: "#e9c46a",
    ComponentType.BEDROOM: "#8ecae6",
    ComponentType.BATHROOM: "#90be6d",
    ComponentType.BALCONY: "#b5838d",
    ComponentType.ENTRANCE: "#cdb4db",
    ComponentType.DINING_ROOM: "#f28482",
    ComponentType.STUDY_ROOM: "#84a59d",
    ComponentType.STORAGE: "#adb5bd",
    ComponentType.UNKNOWN: "#dee2e6",
    ComponentType.INTERIOR_DOOR: "#ffffff",
    ComponentType.FRONT_DOOR: "#e63946",
}

STYLES = {
    "default": {"stroke": "#222222", "stroke_width": 1.5, "background": "#ffffff"},
    "outline": {"stroke": "#000000", "stroke_width": 1.0, "background": "none"},
}


def _path_data(corners) -> str:
    head, *rest = corners
    return f"M {head[0]} {head[1]} " + " ".join(f"L {x} {y}" for x, y in rest) + " Z"


def render_svg(plan: Floorplan, style: str = "default") -> str:
    """One closed ``<path>`` per loop, rooms first, then doors."""
    problems = validate_floorplan(plan)
    if problems:
        listing = "; ".join(f"{v.code} (loop {v.loop}): {v.message}" for v in problems)
        raise ValueError(f"cannot render an invalid floorplan: {listing}")
    if style not in STYLES:
        raise ValueError(f"unknown style {style!r}; choose from {sorted(STYLES)}")
    st = STYLES[style]
    order = [i for i, lp in enumerate(plan.loops) if not lp.kind.is_door]
    order += [i for i, lp in enumerate(plan.loops) if lp.kind.is_door]
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{GRID}" height="{GRID}" '
        f'viewBox="0 0 {GRID} {GRID}">',
    ]
    if st["background"] != "none":
        lines.append(f'  <rect x="0" y="0" width="{GRID}" height="{GRID}" fill="{st["background"]}"/>')
    for i in order:
        lp = plan.loops[i]
        fill = PALETTE[lp.kind] if style == "default" else "none"
        lines.append(
            f'  <path id="loop-{i}" data-kind={quoteattr(lp.kind.value)} d="{_path_data(lp.corners)}" '
            f'fill="{fill}" stroke="{st["stroke"]}" stroke-width="{st["stroke_width"]}"/>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
