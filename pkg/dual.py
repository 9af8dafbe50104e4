#!/usr/bin/env python3
"""
Dual Objective and Optimality Diagnostics
Lower bound, restricted edge dual, block optimality, and the
arc-consistency based node-edge agreement test with its tolerance factor.
"""

import logging
from typing import List

import numpy as np

from model import ReparamState

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9


class SupportSets:
    """
    Near-minimal labels per node and label pairs per edge

    Each mask marks the entries within eps of the local minimum, so at least
    one entry per node and per edge is always set.
    """

    def __init__(self, node_masks: List[np.ndarray], edge_masks: List[np.ndarray], edges):
        self.node_masks = node_masks
        self.edge_masks = edge_masks
        self.edges = tuple(edges)

    def copy(self) -> "SupportSets":
        return SupportSets(
            [m.copy() for m in self.node_masks],
            [m.copy() for m in self.edge_masks],
            self.edges,
        )


def dual_value(state: ReparamState) -> float:
    """
    Lower bound: sum of unary minima plus sum of pairwise minima

    Args:
        state: Reparametrized state

    Returns:
        Dual objective value
    """
    total = state.constant_offset
    for arr in state.unary_hat:
        total += float(np.min(arr))
    for arr in state.pairwise_hat:
        total += float(np.min(arr))
    return total


def restricted_dual(state: ReparamState, edge: int) -> float:
    """Dual terms touched by one edge block: its pairwise and both endpoint unaries"""
    u, v = state.edges[edge]
    return (float(np.min(state.pairwise_hat[edge]))
            + float(np.min(state.unary_hat[u]))
            + float(np.min(state.unary_hat[v])))


def _slack(arr: np.ndarray) -> np.ndarray:
    return arr - np.min(arr)


def is_block_optimal(state: ReparamState, edge: int, tol: float = DEFAULT_TOL) -> bool:
    """
    Whether the edge block is at a maximum of its restricted dual

    True iff some pair (s, t) is simultaneously a minimizer, within tol, of
    the u unary, the v unary and the pairwise table.

    Args:
        state: Reparametrized state
        edge: Edge index
        tol: Absolute tolerance for minimizer membership

    Returns:
        Block optimality flag
    """
    if tol < 0:
        raise ValueError("tol must be non-negative")
    u, v = state.edges[edge]
    near_u = _slack(state.unary_hat[u]) <= tol
    near_v = _slack(state.unary_hat[v]) <= tol
    near_uv = _slack(state.pairwise_hat[edge]) <= tol
    return bool(np.any(near_uv & near_u[:, np.newaxis] & near_v[np.newaxis, :]))


def support_sets(state: ReparamState, eps: float) -> SupportSets:
    """
    Labels and label pairs within eps of their local minimum

    Args:
        state: Reparametrized state
        eps: Non-negative slack

    Returns:
        SupportSets masks
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return SupportSets(
        [_slack(arr) <= eps for arr in state.unary_hat],
        [_slack(arr) <= eps for arr in state.pairwise_hat],
        state.edges,
    )


def arc_consistency_closure(sets: SupportSets) -> SupportSets:
    """
    Delete unsupported labels and pairs until nothing changes

    A label of u stays only while every edge at u has a marked pair using it;
    a pair stays only while both of its labels stay. Nodes are revisited in
    ascending index order; the fixpoint does not depend on that order.

    Args:
        sets: Starting masks (left untouched)

    Returns:
        Closed masks
    """
    closed = sets.copy()
    num_nodes = len(closed.node_masks)
    incident = [[] for _ in range(num_nodes)]
    for e, (u, v) in enumerate(closed.edges):
        incident[u].append(e)
        incident[v].append(e)

    changed = True
    while changed:
        changed = False
        for node in range(num_nodes):
            for e in incident[node]:
                u, v = closed.edges[e]
                pair = closed.edge_masks[e]
                pruned = pair & closed.node_masks[u][:, np.newaxis] & closed.node_masks[v][np.newaxis, :]
                if not np.array_equal(pruned, pair):
                    closed.edge_masks[e] = pruned
                    pair = pruned
                    changed = True
                supported = pair.any(axis=1) if node == u else pair.any(axis=0)
                kept = closed.node_masks[node] & supported
                if not np.array_equal(kept, closed.node_masks[node]):
                    closed.node_masks[node] = kept
                    changed = True
    return closed


def has_node_edge_agreement(sets: SupportSets) -> bool:
    """
    Node-edge agreement test

    Returns:
        True iff the arc-consistency closure leaves at least one marked
        entry in every node and every edge
    """
    closed = arc_consistency_closure(sets)
    return (all(mask.any() for mask in closed.node_masks)
            and all(mask.any() for mask in closed.edge_masks))


def tolerance_factor(state: ReparamState) -> float:
    """
    Smallest slack at which the near-minimal sets admit node-edge agreement

    Agreement only changes at slack values actually present in the tables,
    and grows monotonically with eps, so a binary search over those values
    is exact.

    Args:
        state: Reparametrized state (small models; closure is not cheap)

    Returns:
        Tolerance factor, 0 at node-edge agreement
    """
    slacks = [_slack(arr).ravel() for arr in state.unary_hat]
    slacks += [_slack(arr).ravel() for arr in state.pairwise_hat]
    if not slacks:
        return 0.0
    candidates = np.unique(np.concatenate(slacks))

    lo, hi = 0, len(candidates) - 1
    # The largest slack marks every entry, which always agrees
    while lo < hi:
        mid = (lo + hi) // 2
        if has_node_edge_agreement(support_sets(state, float(candidates[mid]))):
            hi = mid
        else:
            lo = mid + 1
    eps = float(candidates[lo])
    logger.debug(f"Tolerance factor {eps:.3e} from {len(candidates)} candidate slacks")
    return eps
