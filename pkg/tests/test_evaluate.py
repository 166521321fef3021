import json

import numpy as np
import pytest

from floordiff.dataset import synthesize
from floordiff.evaluate import (compatibility, diversity_proxy, door_incidences, dump_report,
                                evaluation_report, feature_frechet, frechet_distance,
                                reconstruct_bubble_diagram, validity_report)
from floordiff.floorplan import BubbleDiagram, ComponentType as CT, Door, Floorplan, Loop

from conftest import diagram_pair, random_diagram
from oracles import ged_oracle


def rect(kind, x0, y0, x1, y1):
    return Loop(kind, ((x0, y0), (x1, y0), (x1, y1), (x0, y1)))


def two_room_plan(door_loop):
    return Floorplan((rect(CT.KITCHEN, 10, 10, 50, 50), rect(CT.BEDROOM, 50, 10, 90, 50), door_loop))


def test_door_straddling_shared_wall_is_interior_edge():
    plan = two_room_plan(rect(CT.INTERIOR_DOOR, 48, 20, 52, 30))
    d = reconstruct_bubble_diagram(plan)
    assert d.doors == (Door(CT.INTERIOR_DOOR, (0, 1)),)


def test_door_touching_one_room_is_front_door():
    plan = two_room_plan(rect(CT.INTERIOR_DOOR, 20, 20, 24, 30))
    assert reconstruct_bubble_diagram(plan).doors == (Door(CT.FRONT_DOOR, (0,)),)


def test_detached_door_is_dangling():
    plan = two_room_plan(rect(CT.INTERIOR_DOOR, 200, 200, 204, 210))
    recon = reconstruct_bubble_diagram(plan)
    assert recon.doors == (Door(CT.INTERIOR_DOOR, ()),)
    truth = BubbleDiagram((CT.KITCHEN, CT.BEDROOM), (Door(CT.INTERIOR_DOOR, (0, 1)),))
    assert compatibility(truth, recon).value == 2   # one missing, one extraneous


def test_tolerance_is_monotone():
    plan = two_room_plan(rect(CT.INTERIOR_DOOR, 53, 20, 57, 30))    # 3 px from the kitchen
    previous = None
    for tol in (0, 1, 2, 3, 4, 8, 50):
        hits = [set(h) for h in door_incidences(plan, tol)]
        if previous is not None:
            assert all(p <= h for p, h in zip(previous, hits))
        previous = hits
    assert door_incidences(plan, 2) == [(1,)]
    assert door_incidences(plan, 3) == [(0, 1)]


def test_compatibility_examples():
    g = BubbleDiagram((CT.KITCHEN, CT.BEDROOM, CT.BATHROOM),
                      (Door(CT.INTERIOR_DOOR, (0, 1)), Door(CT.INTERIOR_DOOR, (1, 2)),
                       Door(CT.FRONT_DOOR, (0,))))
    assert compatibility(g, g).value == 0
    dropped = BubbleDiagram(g.rooms, g.doors[1:])
    assert compatibility(g, dropped).value == 1
    extra = BubbleDiagram(g.rooms, g.doors + (Door(CT.INTERIOR_DOOR, (0, 2)),))
    assert compatibility(g, extra).value == 1
    retyped = BubbleDiagram(g.rooms, g.doors[:2] + (Door(CT.INTERIOR_DOOR, (0,)),))
    assert compatibility(g, retyped).value == 1


def test_same_type_swap_is_free():
    g = BubbleDiagram((CT.BEDROOM, CT.BEDROOM, CT.KITCHEN),
                      (Door(CT.INTERIOR_DOOR, (0, 2)), Door(CT.FRONT_DOOR, (1,))))
    swapped = BubbleDiagram((CT.BEDROOM, CT.BEDROOM, CT.KITCHEN),
                            (Door(CT.INTERIOR_DOOR, (1, 2)), Door(CT.FRONT_DOOR, (0,))))
    assert compatibility(g, swapped).value == 0
    assert ged_oracle(g, swapped) == 0


def test_unmatched_rooms_cost_one_each():
    g = BubbleDiagram((CT.KITCHEN, CT.BEDROOM))
    h = BubbleDiagram((CT.KITCHEN, CT.BATHROOM, CT.BATHROOM))
    assert compatibility(g, h).value == 3


def test_compatibility_matches_oracle_and_is_symmetric():
    rng = np.random.default_rng(17)
    for _ in range(150):
        g1, g2 = diagram_pair(rng)
        got = compatibility(g1, g2).value
        assert got == ged_oracle(g1, g2), (g1, g2)
        assert got == compatibility(g2, g1).value
        assert compatibility(g1, g1).value == 0


def test_compatibility_zero_under_relabelling():
    rng = np.random.default_rng(2)
    for _ in range(20):
        g = random_diagram(rng, 7, n_types=3)
        perm = rng.permutation(7)
        inv = np.argsort(perm)
        h = BubbleDiagram(tuple(g.rooms[i] for i in inv),
                          tuple(Door(d.kind, tuple(int(perm[e]) for e in d.endpoints))
                                for d in g.doors))
        assert compatibility(g, h).value == 0


def test_validity_report_on_synthetic():
    corpus = synthesize(6, (3, 5), np.random.default_rng(4))
    rep = validity_report([p for p, _ in corpus])
    assert rep["pass_fraction"] == 1.0 and rep["violations"] == {}
    bad = Floorplan((Loop(CT.BEDROOM, ((0, 0), (10, 0), (0, 10), (10, 10))),))
    rep = validity_report([bad, corpus.plans[0][0]])
    assert rep["pass_fraction"] == 0.5 and rep["violations"] == {"self_intersection": 1}
    with pytest.raises(ValueError):
        validity_report([])


def test_diversity_proxy_identical_sets_is_zero(small_corpus):
    plans = [p for p, _ in small_corpus]
    assert diversity_proxy(plans, plans) == 0.0
    assert diversity_proxy(plans[:6], plans[6:]) == pytest.approx(diversity_proxy(plans[6:], plans[:6]),
                                                                  rel=1e-6)
    with pytest.raises(ValueError):
        diversity_proxy(plans[:1], plans)


def test_frechet_closed_form_gaussians():
    # equal covariances: the trace terms cancel and only |mu1 - mu2|^2 remains
    cov = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert frechet_distance(np.zeros(2), cov, np.array([1.0, 0.0]), cov) == pytest.approx(1.0)
    # 1-D: (m1-m2)^2 + (s1-s2)^2
    assert frechet_distance(np.zeros(1), np.eye(1) * 4, np.ones(1) * 3, np.eye(1)) == pytest.approx(10.0)


def test_feature_clouds_with_unit_mean_gap():
    rng = np.random.default_rng(6)
    a = rng.standard_normal((4000, 5))
    b = rng.standard_normal((4000, 5)) + np.array([1.0, 0, 0, 0, 0])
    gap = np.sum((a.mean(0) - b.mean(0)) ** 2)
    value = feature_frechet(a, b)
    assert value >= gap - 1e-12
    assert value == pytest.approx(1.0, abs=0.05)


def test_evaluation_report_structure(small_corpus):
    plans = [p for p, _ in small_corpus][:4]
    diagrams = [d for _, d in small_corpus][:4]
    rep = evaluation_report(plans, diagrams)
    assert rep["version"] == 1 and rep["aggregate"]["mean_compatibility"] == 0.0
    assert all(r["valid"] and r["room_multiset_match"] for r in rep["plans"])
    assert json.loads(dump_report(rep)) == rep
    with pytest.raises(ValueError):
        evaluation_report(plans, diagrams[:2])
