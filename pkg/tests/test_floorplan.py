import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from floordiff import geometry
from floordiff.floorplan import (BubbleDiagram, ComponentType as CT, Door, Floorplan, Loop,
                                 augment_corner, augment_corners, build_component_graph,
                                 dequantize, quantize, sample_corner_counts, validate_floorplan)

from conftest import random_diagram


def test_type_table_is_stable_bijection():
    idx = [t.index for t in CT]
    assert sorted(idx) == list(range(12))
    assert CT.KITCHEN.index == 0 and CT.FRONT_DOOR.index == 11
    assert {t for t in CT if t.is_door} == {CT.INTERIOR_DOOR, CT.FRONT_DOOR}
    for t in CT:
        assert CT.from_index(t.index) is t
        assert CT.parse(t.value) is t


def test_parse_rejects_unknown_type():
    with pytest.raises(ValueError, match="Garage"):
        CT.parse("Garage")


def test_dequantize_endpoints():
    assert dequantize(0) == -1.0
    assert dequantize(255) == 1.0
    assert dequantize(128) == pytest.approx(1 / 255)


def test_quantize_roundtrip_all_values():
    v = np.arange(256)
    assert np.array_equal(quantize(dequantize(v)), v)
    for k in range(256):
        assert int(quantize(dequantize(k))) == k


def test_quantize_clamps_and_rounds_half_away():
    assert int(quantize(-5.0)) == 0
    assert int(quantize(7.0)) == 255
    # 255 * (c + 1) / 2 == 127.5 exactly at c = 0
    assert int(quantize(0.0)) == 128


def test_corner_counts_single_support(rng):
    d = BubbleDiagram((CT.BEDROOM, CT.BEDROOM), (Door(CT.INTERIOR_DOOR, (0, 1)),))
    hist = {CT.BEDROOM: {4: 17}, CT.INTERIOR_DOOR: {4: 3}}
    for _ in range(20):
        assert sample_corner_counts(hist, d, rng=rng) == [4, 4, 4]


def test_corner_counts_override(rng):
    d = BubbleDiagram((CT.DINING_ROOM, CT.KITCHEN), (Door(CT.INTERIOR_DOOR, (0, 1)),))
    hist = {CT.DINING_ROOM: {4: 10}, CT.KITCHEN: {4: 1, 6: 1}, CT.INTERIOR_DOOR: {4: 1}}
    counts = sample_corner_counts(hist, d, {CT.DINING_ROOM: 10}, rng)
    assert counts[0] == 10
    assert sample_corner_counts(hist, d, {1: 7}, rng)[1] == 7


def test_corner_counts_override_out_of_bounds(rng):
    d = BubbleDiagram((CT.BEDROOM,))
    with pytest.raises(ValueError):
        sample_corner_counts({CT.BEDROOM: {4: 1}}, d, {CT.BEDROOM: 2}, rng)


def test_corner_counts_missing_type_names_it(rng):
    d = BubbleDiagram((CT.BALCONY,))
    with pytest.raises(KeyError, match="Balcony"):
        sample_corner_counts({CT.BEDROOM: {4: 1}}, d, rng=rng)


def test_corner_counts_monte_carlo():
    d = BubbleDiagram((CT.STORAGE,))
    hist = {CT.STORAGE: {4: 75, 6: 25}}
    rng = np.random.default_rng(0)
    draws = np.array([sample_corner_counts(hist, d, rng=rng)[0] for _ in range(100_000)])
    assert abs(np.mean(draws == 4) - 0.75) < 0.01


def test_corner_counts_reproducible():
    d = random_diagram(np.random.default_rng(1), 6)
    hist = {t: {4: 3, 5: 1, 8: 2} for t in CT}
    a = sample_corner_counts(hist, d, rng=np.random.default_rng(42))
    b = sample_corner_counts(hist, d, rng=np.random.default_rng(42))
    assert a == b


def test_component_graph_interior_door():
    d = BubbleDiagram((CT.KITCHEN, CT.BEDROOM), (Door(CT.INTERIOR_DOOR, (0, 1)),))
    g = build_component_graph(d)
    assert g.adjacency.sum() == 4  # symmetric pairs room0<->door, room1<->door
    assert g.adjacency[0, 2] and g.adjacency[2, 0] and g.adjacency[1, 2] and g.adjacency[2, 1]


def test_component_graph_front_door():
    d = BubbleDiagram((CT.LIVING_ROOM, CT.BEDROOM),
                      (Door(CT.INTERIOR_DOOR, (0, 1)), Door(CT.FRONT_DOOR, (0,))))
    g = build_component_graph(d)
    assert np.flatnonzero(g.adjacency[3]).tolist() == [0]


def test_component_graph_rejects_bad_order():
    d = BubbleDiagram((CT.KITCHEN, CT.BEDROOM), (Door(CT.INTERIOR_DOOR, (0, 1)),))
    with pytest.raises(ValueError):
        build_component_graph(d, [0, 0, 1])
    with pytest.raises(ValueError):
        build_component_graph(d, [0, 1])


def test_component_graph_matches_edge_list_bruteforce():
    rng = np.random.default_rng(3)
    for _ in range(50):
        d = random_diagram(rng, 8)
        order = rng.permutation(d.num_components)
        g = build_component_graph(d, order)
        n = d.num_components
        expect = np.zeros((n, n), dtype=bool)
        nr = len(d.rooms)
        for k, door in enumerate(d.doors):
            for e in door.endpoints:
                expect[order[e], order[nr + k]] = True
                expect[order[nr + k], order[e]] = True
        assert np.array_equal(g.adjacency, expect)
        # bipartite and symmetric
        assert np.array_equal(g.adjacency, g.adjacency.T)
        is_door = np.array([k.is_door for k in g.kinds])
        assert not np.any(g.adjacency[np.ix_(is_door, is_door)])
        assert not np.any(g.adjacency[np.ix_(~is_door, ~is_door)])


def test_augment_corner_examples():
    out = augment_corner((0.3, -0.2), (0.3, -0.2), 8)
    assert out.shape == (18,)
    assert np.allclose(out.reshape(9, 2), (0.3, -0.2))
    pts = augment_corner((0, 0), (1, 0), 8).reshape(9, 2)
    assert np.allclose(pts[4], (0.5, 0.0))
    assert np.allclose(pts[8], (1.0, 0.0))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4), st.integers(1, 16))
def test_augment_corner_collinear_equal_spacing(vals, L):
    c, n = np.array(vals[:2]), np.array(vals[2:])
    pts = augment_corner(c, n, L).reshape(L + 1, 2)
    assert len(augment_corner(c, n, L)) == 2 * (L + 1)
    d = n - c
    cross = d[0] * (pts[:, 1] - c[1]) - d[1] * (pts[:, 0] - c[0])
    assert np.allclose(cross, 0, atol=1e-12)
    steps = np.diff(pts, axis=0)
    assert np.allclose(steps, d / L, atol=1e-12)


def test_augment_corners_vectorised_matches_scalar(rng):
    coords = rng.uniform(-1, 1, size=(5, 2))
    nxt = np.array([1, 2, 0, 4, 3])
    out = augment_corners(coords, nxt, 8)
    for a in range(5):
        assert np.allclose(out[a], augment_corner(coords[a], coords[nxt[a]], 8))


def _rect(kind, x0, y0, x1, y1):
    return Loop(kind, ((x0, y0), (x1, y0), (x1, y1), (x0, y1)))


def test_validate_well_formed(small_corpus):
    for plan, _ in small_corpus:
        assert validate_floorplan(plan) == []


def test_validate_bowtie():
    plan = Floorplan((Loop(CT.BEDROOM, ((0, 0), (10, 0), (0, 10), (10, 10))),))
    codes = [v.code for v in validate_floorplan(plan)]
    assert "self_intersection" in codes


def test_validate_two_corner_room():
    plan = Floorplan((Loop(CT.BEDROOM, ((0, 0), (10, 0))),))
    assert "too_few_corners" in [v.code for v in validate_floorplan(plan)]


def test_validate_range_duplicates_and_overflow():
    plan = Floorplan((Loop(CT.BEDROOM, ((0, 0), (300, 0), (300, 10))),))
    assert "out_of_range" in [v.code for v in validate_floorplan(plan)]
    plan = Floorplan((Loop(CT.BEDROOM, ((0, 0), (0, 0), (10, 0), (10, 10))),))
    assert "duplicate_corner" in [v.code for v in validate_floorplan(plan)]
    loops = tuple(_rect(CT.BEDROOM, 0, 0, 5, 5) for _ in range(33))
    assert "too_many_components" in [v.code for v in validate_floorplan(Floorplan(loops))]


def test_validate_door_needs_four_corners():
    plan = Floorplan((_rect(CT.BEDROOM, 0, 0, 20, 20),
                      Loop(CT.INTERIOR_DOOR, ((0, 0), (4, 0), (4, 4)))))
    assert [v.code for v in validate_floorplan(plan)] == ["too_few_corners"]


def test_segment_intersection_cases():
    assert geometry.segments_intersect((0, 0), (10, 10), (0, 10), (10, 0))
    assert geometry.segments_intersect((0, 0), (10, 0), (10, 0), (10, 5))
    assert not geometry.segments_intersect((0, 0), (10, 0), (0, 1), (10, 1))
    assert geometry.segments_intersect((0, 0), (10, 0), (5, 0), (15, 0))


def test_point_in_polygon_and_distance():
    sq = [(0, 0), (10, 0), (10, 10), (0, 10)]
    assert geometry.point_in_polygon((5, 5), sq)
    assert not geometry.point_in_polygon((15, 5), sq)
    other = [(12, 0), (20, 0), (20, 10), (12, 10)]
    assert geometry.polygon_distance(sq, other) == pytest.approx(2.0)
    inner = [(2, 2), (3, 2), (3, 3), (2, 3)]
    assert geometry.polygon_distance(sq, inner) == 0.0


def test_l_shape_is_not_self_intersecting():
    l_shape = [(0, 0), (20, 0), (20, 10), (10, 10), (10, 20), (0, 20)]
    assert not geometry.is_self_intersecting(l_shape)
    assert geometry.signed_area(l_shape) == pytest.approx(300.0)


def test_diagram_check():
    with pytest.raises(ValueError):
        BubbleDiagram((CT.KITCHEN,), (Door(CT.INTERIOR_DOOR, (0, 0)),)).check()
    with pytest.raises(ValueError):
        BubbleDiagram((CT.KITCHEN,), (Door(CT.FRONT_DOOR, (3,)),)).check()
    with pytest.raises(ValueError):
        BubbleDiagram((CT.FRONT_DOOR,)).check()
    parallel = BubbleDiagram((CT.KITCHEN, CT.BEDROOM),
                             (Door(CT.INTERIOR_DOOR, (0, 1)), Door(CT.INTERIOR_DOOR, (1, 0))))
    parallel.check()
    assert build_component_graph(parallel).adjacency.sum() == 8
