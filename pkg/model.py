#!/usr/bin/env python3
"""
Pairwise Graphical Model
Graph, label spaces and cost tables, energy evaluation and the
reparametrized state that the BCA updates mutate in place.
"""

import itertools
import math
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# Largest state space brute_force_map will enumerate
MAX_BRUTE_FORCE_STATES = 10 ** 7

# Full enumeration is used by check_energy_preserved below this size
MAX_ENUMERATION_STATES = 10 ** 5


class ModelError(ValueError):
    """Raised when a model, labeling or state violates its invariants"""


class StateSpaceTooLarge(ModelError):
    """Raised when exhaustive enumeration is refused"""


class Labeling:
    """One label index per node"""

    def __init__(self, labels: Sequence[int]):
        self.labels = tuple(int(s) for s in labels)

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, u: int) -> int:
        return self.labels[u]

    def __iter__(self):
        return iter(self.labels)

    def __eq__(self, other) -> bool:
        if isinstance(other, Labeling):
            return self.labels == other.labels
        return self.labels == tuple(other)

    def __hash__(self) -> int:
        return hash(self.labels)

    def __repr__(self) -> str:
        return f"Labeling({list(self.labels)})"

    def validate(self, label_counts: Sequence[int]) -> None:
        """
        Check length and label ranges against a model

        Args:
            label_counts: Per-node label counts of the model

        Raises:
            ModelError: If the labeling does not fit the model
        """
        if len(self.labels) != len(label_counts):
            raise ModelError(
                f"Labeling has {len(self.labels)} entries, model has {len(label_counts)} nodes"
            )
        for u, (s, count) in enumerate(zip(self.labels, label_counts)):
            if not 0 <= s < count:
                raise ModelError(f"Label {s} of node {u} is outside [0, {count})")


class GraphicalModel:
    """
    Immutable pairwise model: undirected graph, per-node label spaces,
    unary cost vectors and row-major pairwise cost tables.

    Edges are stored canonically as (u, v) with u < v. The pairwise table of
    an edge has |Y_u| rows and |Y_v| columns.
    """

    def __init__(self,
                 label_counts: Sequence[int],
                 edges: Sequence[Tuple[int, int]],
                 unary: Sequence[Sequence[float]],
                 pairwise: Sequence):
        """
        Build and validate a model

        Args:
            label_counts: |Y_u| for every node, each >= 1
            edges: (u, v) node pairs with u < v, no duplicates
            unary: Per-node cost vectors of length |Y_u|
            pairwise: Per-edge tables, either |Y_u| x |Y_v| or flat row-major

        Raises:
            ModelError: If any invariant is violated
        """
        self.label_counts = tuple(int(c) for c in label_counts)
        self.num_nodes = len(self.label_counts)
        self.edges = tuple((int(u), int(v)) for u, v in edges)

        for u, count in enumerate(self.label_counts):
            if count < 1:
                raise ModelError(f"Node {u} has {count} labels, at least 1 required")

        seen = set()
        for u, v in self.edges:
            if not (0 <= u < self.num_nodes and 0 <= v < self.num_nodes):
                raise ModelError(f"Edge ({u}, {v}) references a node outside [0, {self.num_nodes})")
            if u >= v:
                raise ModelError(f"Edge ({u}, {v}) is not stored with u < v")
            if (u, v) in seen:
                raise ModelError(f"Duplicate edge ({u}, {v})")
            seen.add((u, v))
        self._edge_index = {edge: e for e, edge in enumerate(self.edges)}

        if len(unary) != self.num_nodes:
            raise ModelError(f"Expected {self.num_nodes} unary tables, got {len(unary)}")
        if len(pairwise) != len(self.edges):
            raise ModelError(f"Expected {len(self.edges)} pairwise tables, got {len(pairwise)}")

        self.unary = []
        for u, table in enumerate(unary):
            arr = np.array(table, dtype=np.float64).reshape(-1)
            if arr.size != self.label_counts[u]:
                raise ModelError(
                    f"Unary table of node {u} has {arr.size} entries, expected {self.label_counts[u]}"
                )
            self.unary.append(arr)

        self.pairwise = []
        for e, table in enumerate(pairwise):
            u, v = self.edges[e]
            shape = (self.label_counts[u], self.label_counts[v])
            arr = np.array(table, dtype=np.float64)
            if arr.size != shape[0] * shape[1]:
                raise ModelError(
                    f"Pairwise table of edge ({u}, {v}) has {arr.size} entries, expected {shape[0] * shape[1]}"
                )
            self.pairwise.append(arr.reshape(shape))

        for arr in itertools.chain(self.unary, self.pairwise):
            if not np.all(np.isfinite(arr)):
                raise ModelError("Cost tables must be finite (no inf or NaN)")
            arr.setflags(write=False)

        self._neighbors = [[] for _ in range(self.num_nodes)]
        for e, (u, v) in enumerate(self.edges):
            self._neighbors[u].append((v, e))
            self._neighbors[v].append((u, e))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def edge_index(self, u: int, v: int) -> Optional[int]:
        """Index of edge {u, v}, or None when absent"""
        if u > v:
            u, v = v, u
        return self._edge_index.get((u, v))

    def neighbors(self, u: int) -> List[Tuple[int, int]]:
        """(neighbor, edge index) pairs incident to node u"""
        return list(self._neighbors[u])

    def num_labelings(self) -> int:
        return math.prod(self.label_counts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GraphicalModel):
            return NotImplemented
        return (
            self.label_counts == other.label_counts
            and self.edges == other.edges
            and all(np.array_equal(a, b) for a, b in zip(self.unary, other.unary))
            and all(np.array_equal(a, b) for a, b in zip(self.pairwise, other.pairwise))
        )

    def __repr__(self) -> str:
        return f"GraphicalModel(nodes={self.num_nodes}, edges={self.num_edges})"


def _table_energy(edges, unary, pairwise, labels) -> float:
    total = 0.0
    for u, s in enumerate(labels):
        total += unary[u][s]
    for e, (u, v) in enumerate(edges):
        total += pairwise[e][labels[u], labels[v]]
    return float(total)


def energy(model: GraphicalModel, y) -> float:
    """
    Energy of a labeling under the original costs

    Args:
        model: Graphical model
        y: Labeling (or any sequence of label indices)

    Returns:
        Sum of unary costs plus sum of pairwise costs

    Raises:
        ModelError: If a label is out of range
    """
    labeling = y if isinstance(y, Labeling) else Labeling(y)
    labeling.validate(model.label_counts)
    return _table_energy(model.edges, model.unary, model.pairwise, labeling.labels)


def _energy_tensor(label_counts, edges, unary, pairwise) -> np.ndarray:
    """Energy of every labeling as an n-dimensional array (C order = lexicographic)"""
    n = len(label_counts)
    total = np.zeros(label_counts, dtype=np.float64)
    for u in range(n):
        shape = [1] * n
        shape[u] = label_counts[u]
        total = total + unary[u].reshape(shape)
    for e, (u, v) in enumerate(edges):
        shape = [1] * n
        shape[u] = label_counts[u]
        shape[v] = label_counts[v]
        total = total + pairwise[e].reshape(shape)
    return total


def brute_force_map(model: GraphicalModel) -> Tuple[Labeling, float]:
    """
    Exact MAP labeling by full enumeration

    Ties are broken towards the lexicographically smallest labeling.

    Args:
        model: Graphical model with at most 10^7 labelings

    Returns:
        (minimizing labeling, its energy)

    Raises:
        StateSpaceTooLarge: If the product of label counts exceeds the guard
    """
    states = 1
    for count in model.label_counts:
        states *= count
        if states > MAX_BRUTE_FORCE_STATES:
            raise StateSpaceTooLarge(
                f"Refusing to enumerate more than {MAX_BRUTE_FORCE_STATES} labelings"
            )
    if model.num_nodes == 0:
        return Labeling([]), 0.0

    table = _energy_tensor(model.label_counts, model.edges, model.unary, model.pairwise)
    # np.argmin returns the first minimum in C order
    flat = int(np.argmin(table))
    best = Labeling(np.unravel_index(flat, table.shape))
    return best, energy(model, best)


def random_labeling(model: GraphicalModel, rng: np.random.Generator) -> Labeling:
    """Uniformly random valid labeling"""
    return Labeling([int(rng.integers(0, count)) for count in model.label_counts])


class ReparamState:
    """
    Reparametrized costs: current unary vectors and residual pairwise tables.

    The tables are plain float64 arrays mutated in place by the updates.
    Edges of one matching touch disjoint arrays, which is what the parallel
    engine relies on; there is no internal locking.
    """

    def __init__(self, model: GraphicalModel, unary_hat: List[np.ndarray], pairwise_hat: List[np.ndarray]):
        self.model = model
        self.unary_hat = unary_hat
        self.pairwise_hat = pairwise_hat
        # Pinned at 0, every update leaves min pairwise at zero
        self.constant_offset = 0.0

    @property
    def edges(self):
        return self.model.edges

    def energy(self, y) -> float:
        """Energy of a labeling under the reparametrized tables"""
        labeling = y if isinstance(y, Labeling) else Labeling(y)
        labeling.validate(self.model.label_counts)
        return self.constant_offset + _table_energy(
            self.model.edges, self.unary_hat, self.pairwise_hat, labeling.labels
        )

    def messages_to(self, u: int) -> np.ndarray:
        """Accumulated reparametrization of node u (unary_hat - unary)"""
        return self.unary_hat[u] - self.model.unary[u]

    def copy(self) -> "ReparamState":
        clone = ReparamState(
            self.model,
            [arr.copy() for arr in self.unary_hat],
            [arr.copy() for arr in self.pairwise_hat],
        )
        clone.constant_offset = self.constant_offset
        return clone

    def identical_to(self, other: "ReparamState") -> bool:
        """Bit-for-bit equality of all tables"""
        return (
            all(np.array_equal(a, b) for a, b in zip(self.unary_hat, other.unary_hat))
            and all(np.array_equal(a, b) for a, b in zip(self.pairwise_hat, other.pairwise_hat))
            and self.constant_offset == other.constant_offset
        )


def init_reparam(model: GraphicalModel) -> ReparamState:
    """
    Start state with zero reparametrization

    Args:
        model: Graphical model

    Returns:
        ReparamState whose tables are writable copies of the original costs
    """
    return ReparamState(
        model,
        [arr.copy() for arr in model.unary],
        [arr.copy() for arr in model.pairwise],
    )


def check_energy_preserved(model: GraphicalModel,
                           state: ReparamState,
                           samples: int = 1000,
                           seed: int = 0,
                           tol: float = 1e-6) -> bool:
    """
    Check that the reparametrized tables assign every labeling its original energy

    Evaluates `samples` random labelings, plus every labeling when the
    state space is small enough to enumerate.

    Args:
        model: Original model
        state: Reparametrized state of the same model
        samples: Number of random labelings
        seed: Seed for the sampler
        tol: Maximum allowed absolute difference

    Returns:
        True iff the largest absolute difference is within tol
    """
    worst = 0.0

    if model.num_nodes and model.num_labelings() <= MAX_ENUMERATION_STATES:
        original = _energy_tensor(model.label_counts, model.edges, model.unary, model.pairwise)
        reparam = _energy_tensor(model.label_counts, model.edges, state.unary_hat, state.pairwise_hat)
        worst = float(np.max(np.abs(original - (reparam + state.constant_offset))))

    rng = np.random.default_rng(seed)
    for _ in range(samples):
        y = random_labeling(model, rng)
        worst = max(worst, abs(energy(model, y) - state.energy(y)))

    if worst > tol:
        logger.debug(f"Energy preservation violated: max difference {worst:.3e}")
    return worst <= tol
