import numpy as np
import pytest

from floordiff.floorplan import BubbleDiagram, ComponentType as CT, Door


def random_diagram(rng, n_rooms, extra_prob=0.3, front=True, n_types=10):
    """Connected random bubble diagram (random tree plus extra edges)."""
    rooms = tuple(CT.from_index(int(rng.integers(0, n_types))) for _ in range(n_rooms))
    doors = []
    for k in range(1, n_rooms):
        doors.append(Door(CT.INTERIOR_DOOR, (int(rng.integers(0, k)), k)))
    for a in range(n_rooms):
        for b in range(a + 1, n_rooms):
            if rng.random() < extra_prob:
                doors.append(Door(CT.INTERIOR_DOOR, (a, b)))
    if front:
        doors.append(Door(CT.FRONT_DOOR, (int(rng.integers(0, n_rooms)),)))
    return BubbleDiagram(rooms, tuple(doors))


def diagram_pair(rng, max_rooms=6):
    """A diagram and either an edited copy (relabelled, doors added, dropped or
    retyped, rooms added or removed) or an unrelated diagram."""
    g1 = random_diagram(rng, int(rng.integers(1, max_rooms + 1)), front=rng.random() < 0.7,
                        n_types=3)
    if rng.random() < 0.25:
        return g1, random_diagram(rng, int(rng.integers(1, max_rooms + 1)),
                                  front=rng.random() < 0.7, n_types=3)
    rooms = list(g1.rooms)
    doors = [(d.kind, tuple(d.endpoints)) for d in g1.doors]
    if rng.random() < 0.3 and len(rooms) < max_rooms:
        rooms.append(CT.from_index(int(rng.integers(0, 3))))
    if rng.random() < 0.3 and len(rooms) > 1:
        gone = len(rooms) - 1
        rooms.pop()
        doors = [(k, e) for k, e in doors if gone not in e]
    for _ in range(int(rng.integers(0, 3))):
        if doors and rng.random() < 0.5:
            doors.pop(int(rng.integers(len(doors))))
        elif len(rooms) > 1:
            a, b = (int(v) for v in rng.choice(len(rooms), 2, replace=False))
            doors.append((CT.INTERIOR_DOOR, (a, b)))
    if doors and rng.random() < 0.3:
        # same endpoints, other door kind
        k = int(rng.integers(len(doors)))
        kind, ends = doors[k]
        doors[k] = (CT.FRONT_DOOR if kind is CT.INTERIOR_DOOR else CT.INTERIOR_DOOR, ends)
    perm = rng.permutation(len(rooms))
    g2 = BubbleDiagram(tuple(rooms[i] for i in np.argsort(perm)),
                       tuple(Door(k, tuple(int(perm[e]) for e in ends)) for k, ends in doors))
    return g1, g2


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_corpus():
    from floordiff.dataset import synthesize
    return synthesize(12, (3, 6), np.random.default_rng(7))


# ------------------------------------------------------------- acceptance

_CRITERIA: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (rep.when != "call" and rep.passed):
        return
    number, title = marker.args
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    _CRITERIA[number] = (title, rep.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[number]
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
