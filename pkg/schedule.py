#!/usr/bin/env python3
"""
Edge Schedule
Partitions the edge set into an ordered queue of matchings so that the
edges of one round touch pairwise disjoint nodes and can be updated
concurrently without locks.
"""

import logging
from typing import Dict, List, Sequence, Tuple

from model import GraphicalModel

logger = logging.getLogger(__name__)

POOL_ORDER = "lexicographic"


class EdgeSchedule:
    """Ordered rounds of edge indices; each round is a matching"""

    def __init__(self, rounds: List[List[int]], pool_order: str = POOL_ORDER):
        self.rounds = rounds
        self.pool_order = pool_order

    def __len__(self) -> int:
        return len(self.rounds)

    def __iter__(self):
        return iter(self.rounds)

    def edge_order(self) -> List[int]:
        """Rounds concatenated: the sequential processing order"""
        return [e for matching in self.rounds for e in matching]

    def __repr__(self) -> str:
        return f"EdgeSchedule(rounds={len(self.rounds)})"


def greedy_matching(edges: Sequence[Tuple[int, int]], num_nodes: int) -> Tuple[list, list]:
    """
    Maximal matching by a single greedy scan

    Args:
        edges: Candidate edges (any hashable payload after the two endpoints
            is kept, so (u, v, index) triples work too)
        num_nodes: Number of nodes

    Returns:
        (matched edges, remaining edges), both in input order
    """
    used = [False] * num_nodes
    matched, remaining = [], []
    for edge in edges:
        u, v = edge[0], edge[1]
        if used[u] or used[v]:
            remaining.append(edge)
        else:
            used[u] = used[v] = True
            matched.append(edge)
    return matched, remaining


def compute_schedule(model: GraphicalModel) -> EdgeSchedule:
    """
    Queue of greedy matchings covering every edge exactly once

    The pool starts in lexicographic edge order and keeps its order across
    passes, which fixes the schedule (and parallel results) deterministically.

    Args:
        model: Graphical model

    Returns:
        EdgeSchedule of edge indices
    """
    pool = sorted((u, v, e) for e, (u, v) in enumerate(model.edges))
    rounds = []
    while pool:
        matched, pool = greedy_matching(pool, model.num_nodes)
        rounds.append([e for _, _, e in matched])
    logger.debug(f"Schedule: {len(rounds)} rounds for {model.num_edges} edges")
    return EdgeSchedule(rounds)


def schedule_stats(schedule: EdgeSchedule, num_nodes: int) -> Dict:
    """
    Round count and widths of a schedule

    Args:
        schedule: Edge schedule
        num_nodes: Number of nodes in the model

    Returns:
        {"rounds", "max_width", "mean_width"}; max_width bounds the
        attainable parallel speed-up
    """
    widths = [len(matching) for matching in schedule.rounds]
    return {
        "rounds": len(widths),
        "max_width": max(widths) if widths else 0,
        "mean_width": (sum(widths) / len(widths)) if widths else 0.0,
    }


def is_valid_schedule(schedule: EdgeSchedule, model: GraphicalModel) -> bool:
    """Matching property per round and exact cover of the edge set"""
    seen = []
    for matching in schedule.rounds:
        if not matching:
            return False
        nodes = set()
        for e in matching:
            u, v = model.edges[e]
            if u in nodes or v in nodes:
                return False
            nodes.update((u, v))
        seen.extend(matching)
    return sorted(seen) == list(range(model.num_edges))
