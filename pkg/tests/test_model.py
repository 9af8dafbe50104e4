"""Tests for the model module: construction, energy, enumeration, reparametrized state."""

import numpy as np
import pytest

from conftest import counterexample_model, zero_model
from generate import gen_random
from model import (GraphicalModel, Labeling, ModelError, StateSpaceTooLarge,
                   brute_force_map, check_energy_preserved, energy, init_reparam)
from updates import MPLPPP, apply_update


class TestConstruction:

    def test_rejects_reversed_edge(self):
        with pytest.raises(ModelError):
            GraphicalModel([2, 2], [(1, 0)], [[0, 0], [0, 0]], [[[0, 0], [0, 0]]])

    def test_rejects_duplicate_edge(self):
        with pytest.raises(ModelError):
            GraphicalModel([2, 2], [(0, 1), (0, 1)], [[0, 0], [0, 0]],
                           [np.zeros((2, 2)), np.zeros((2, 2))])

    def test_rejects_out_of_range_node(self):
        with pytest.raises(ModelError):
            GraphicalModel([2, 2], [(0, 2)], [[0, 0], [0, 0]], [np.zeros((2, 2))])

    def test_rejects_table_size_mismatch(self):
        with pytest.raises(ModelError):
            GraphicalModel([2, 3], [(0, 1)], [[0, 0], [0, 0, 0]], [np.zeros((2, 2))])

    @pytest.mark.parametrize("bad", [np.inf, -np.inf, np.nan])
    def test_rejects_non_finite_costs(self, bad):
        with pytest.raises(ModelError):
            GraphicalModel([2], [], [[0.0, bad]], [])

    def test_accepts_flat_pairwise_tables(self):
        model = GraphicalModel([2, 3], [(0, 1)], [[0, 0], [0, 0, 0]], [[0, 1, 2, 3, 4, 5]])
        assert model.pairwise[0].shape == (2, 3)
        assert model.pairwise[0][1, 0] == 3

    def test_tables_are_read_only(self, two_node_model):
        with pytest.raises(ValueError):
            two_node_model.unary[0][0] = 1.0

    def test_adjacency_helpers(self, two_node_model):
        assert two_node_model.edge_index(1, 0) == 0
        assert two_node_model.edge_index(0, 0) is None
        assert two_node_model.neighbors(0) == [(1, 0)]


class TestEnergy:

    def test_counterexample_labelings(self, two_node_model):
        assert energy(two_node_model, (0, 0)) == 6.0
        assert energy(two_node_model, (1, 1)) == 5.0
        assert energy(two_node_model, Labeling([0, 1])) == 5.0
        assert energy(two_node_model, (1, 0)) == 9.0

    def test_zero_costs(self):
        assert energy(zero_model(4, 3), (2, 0, 1, 2)) == 0.0

    def test_label_out_of_range(self, two_node_model):
        with pytest.raises(ModelError):
            energy(two_node_model, (0, 2))
        with pytest.raises(ModelError):
            energy(two_node_model, (0,))

    def test_disjoint_union_is_additive(self):
        a = gen_random(3, 3, 1.0, seed=1)
        b = gen_random(2, 3, 1.0, seed=2)
        offset = a.num_nodes
        union = GraphicalModel(
            a.label_counts + b.label_counts,
            list(a.edges) + [(u + offset, v + offset) for u, v in b.edges],
            a.unary + b.unary,
            a.pairwise + b.pairwise,
        )
        rng = np.random.default_rng(0)
        for _ in range(50):
            ya = [int(rng.integers(c)) for c in a.label_counts]
            yb = [int(rng.integers(c)) for c in b.label_counts]
            np.testing.assert_allclose(energy(union, ya + yb), energy(a, ya) + energy(b, yb), atol=1e-12)


class TestBruteForce:

    def test_counterexample_tie_break(self, two_node_model):
        y, value = brute_force_map(two_node_model)
        assert y == (0, 1)
        assert value == 5.0

    def test_single_node(self):
        model = GraphicalModel([3], [], [[3.0, 1.0, 2.0]], [])
        y, value = brute_force_map(model)
        assert y == (1,)
        assert value == 1.0

    def test_zero_chain(self):
        y, value = brute_force_map(zero_model(3, 2))
        assert y == (0, 0, 0)
        assert value == 0.0

    def test_refuses_large_state_space(self):
        model = GraphicalModel([10] * 8, [], [np.zeros(10)] * 8, [])
        with pytest.raises(StateSpaceTooLarge):
            brute_force_map(model)

    @pytest.mark.parametrize("seed", range(5))
    def test_optimum_beats_random_labelings(self, seed):
        model = gen_random(5, 3, 0.7, seed)
        _, best = brute_force_map(model)
        rng = np.random.default_rng(seed)
        for _ in range(1000):
            y = [int(rng.integers(c)) for c in model.label_counts]
            assert best <= energy(model, y) + 1e-12


class TestReparamState:

    def test_init_copies_tables(self, two_node_model):
        state = init_reparam(two_node_model)
        np.testing.assert_array_equal(state.unary_hat[0], [4.0, 0.0])
        state.unary_hat[0][0] = 100.0
        assert two_node_model.unary[0][0] == 4.0
        assert state.constant_offset == 0.0

    def test_zero_model_state(self):
        state = init_reparam(zero_model(3, 2))
        assert all(not arr.any() for arr in state.unary_hat + state.pairwise_hat)

    @pytest.mark.parametrize("seed", range(5))
    def test_init_preserves_energy_by_enumeration(self, seed):
        model = gen_random(3, 3, 1.0, seed)
        state = init_reparam(model)
        for y in np.ndindex(*model.label_counts):
            assert state.energy(y) == energy(model, y)

    def test_messages_to(self, two_node_model):
        state = init_reparam(two_node_model)
        apply_update(state, 0, MPLPPP)
        np.testing.assert_allclose(state.messages_to(0), [-1.5, 2.5])

    def test_copy_is_independent(self, two_node_model):
        state = init_reparam(two_node_model)
        clone = state.copy()
        clone.pairwise_hat[0][0, 0] = 9.0
        assert state.pairwise_hat[0][0, 0] == 0.0
        assert not state.identical_to(clone)


class TestEnergyPreservation:

    def test_fresh_state(self, two_node_model):
        assert check_energy_preserved(two_node_model, init_reparam(two_node_model), samples=10, seed=0)

    def test_after_many_handshakes(self):
        model = gen_random(5, 3, 1.0, seed=11)
        state = init_reparam(model)
        for k in range(100):
            apply_update(state, k % model.num_edges, MPLPPP)
        assert check_energy_preserved(model, state, samples=100, seed=1)

    def test_detects_corruption(self, two_node_model):
        state = init_reparam(two_node_model)
        state.unary_hat[1][0] += 1.0
        assert not check_energy_preserved(two_node_model, state, samples=10, seed=0)
