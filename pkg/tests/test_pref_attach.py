from fractions import Fraction

import numpy as np
import pytest

from polya_immigration import pref_attach
from polya_immigration.errors import TooLargeError
from polya_immigration.interarrival import Deterministic, FiniteSupport, GeometricShifted
from polya_immigration.pref_attach import (
    SeedGraph,
    correspondence_check,
    cumulative_degree,
    pa_exact_weights,
    simulate_pa,
)

PAIR = SeedGraph((1, 1))


def test_seed_graph():
    g = SeedGraph((2, 1, 3))
    assert g.s == 3 and g.cumulative == (2, 3, 6) and g.c(0) == 0 and g.c(2) == 3
    with pytest.raises(ValueError):
        SeedGraph((1, 0))


def test_exact_two_vertices_two_edges():
    dist = pa_exact_weights(PAIR, [2])
    assert dist == {(3, 1, 1): Fraction(1, 3), (2, 2, 1): Fraction(1, 3), (1, 3, 1): Fraction(1, 3)}


@pytest.mark.parametrize("k,n", [(k, n) for n in range(1, 5) for k in range(1, 4) if k < PAIR.s + n])
def test_exact_correspondence_delta1(k, n):
    rep = correspondence_check(PAIR, Deterministic(1), k, n)
    assert rep.passed and rep.max_abs_diff <= 1e-10


def test_exact_correspondence_with_zero_gaps():
    pi = FiniteSupport(((0, 0.3), (1, 0.4), (2, 0.3)))
    for k in (1, 2, 3):
        assert correspondence_check(SeedGraph((2, 1)), pi, k, 4).max_abs_diff == 0


def test_exact_mode_limits():
    with pytest.raises(TooLargeError):
        correspondence_check(PAIR, Deterministic(1), 1, 7)
    with pytest.raises(TooLargeError):
        correspondence_check(PAIR, GeometricShifted(0.5), 1, 2)
    with pytest.raises(IndexError):
        correspondence_check(PAIR, Deterministic(1), 5, 3)


def test_weight_conservation():
    g = SeedGraph((2, 1, 1))
    state = simulate_pa(g, GeometricShifted(0.4), 500, seed=3)
    assert state.total_weight == sum(g.degrees) + int(state.taus.sum()) + state.n
    assert np.all(state.weights >= 1)


def test_zero_gaps_leave_isolated_vertices():
    state = simulate_pa(PAIR, None, 5, seed=1, taus=[0] * 5)
    np.testing.assert_array_equal(state.weights, [1, 1, 1, 1, 1, 1, 1])


def test_single_seed_vertex():
    state = simulate_pa(SeedGraph((1,)), Deterministic(1), 1, seed=0)
    np.testing.assert_array_equal(state.weights, [2, 1])


def test_cumulative_degree():
    state = simulate_pa(PAIR, Deterministic(1), 10, seed=2)
    assert cumulative_degree(state, state.graph.s + state.n) == state.total_weight
    assert cumulative_degree(state, 1) == state.weights[0]
    with pytest.raises(IndexError):
        cumulative_degree(state, 13)


def test_snapshots_and_csv(tmp_path):
    state = simulate_pa(PAIR, Deterministic(2), 20, seed=4, checkpoints=[5, 20])
    np.testing.assert_array_equal(state.snapshots[20], state.weights)
    assert state.snapshots[5].sum() == 2 + 5 * 2 + 5
    path = tmp_path / "deg.csv"
    state.to_csv(path, step=5)
    lines = path.read_text().splitlines()
    assert lines[0] == "vertex,weight" and len(lines) == 1 + 2 + 5
    with pytest.raises(ValueError):
        simulate_pa(PAIR, Deterministic(1), 5, seed=0, checkpoints=[6])


def test_reproducible_streams():
    a = simulate_pa(PAIR, GeometricShifted(0.5), 300, seed=9, stream=2)
    b = simulate_pa(PAIR, GeometricShifted(0.5), 300, seed=9, stream=2)
    c = simulate_pa(PAIR, GeometricShifted(0.5), 300, seed=9, stream=3)
    np.testing.assert_array_equal(a.weights, b.weights)
    assert not np.array_equal(a.weights, c.weights)


def test_tree_and_flat_paths_agree(monkeypatch):
    flat = simulate_pa(PAIR, GeometricShifted(0.5), 2000, seed=6)
    monkeypatch.setattr(pref_attach, "TREE_THRESHOLD", 0)
    tree = simulate_pa(PAIR, GeometricShifted(0.5), 2000, seed=6)
    np.testing.assert_array_equal(flat.weights, tree.weights)


@pytest.mark.parametrize("k", [1, 3])
def test_monte_carlo_correspondence(k):
    rep = correspondence_check(PAIR, GeometricShifted(0.5), k, 500, paths=4000, seed=10, mode="mc")
    assert rep.passed and rep.ks.statistic < rep.critical
