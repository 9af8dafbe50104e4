#!/usr/bin/env python3
"""
Synthetic Instance Generator
Deterministic benchmark models (fully connected, Potts grids, random
sparse graphs) and seeded graph sparsification for the density ablation.

All randomness comes from a splitmix64 stream so that the same arguments
produce bit-identical models on every platform.
"""

import argparse
import logging
import math
import sys
from itertools import combinations
from typing import List

import numpy as np

from model import GraphicalModel

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1


class SplitMix64:
    """splitmix64 generator over a 64-bit unsigned state"""

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Float in [0, 1) from the top 53 bits"""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def uniforms(self, count: int) -> np.ndarray:
        return np.array([self.uniform() for _ in range(count)], dtype=np.float64)

    def randbelow(self, n: int) -> int:
        """Integer in [0, n); modulo reduction of one 64-bit draw"""
        return self.next_u64() % n

    def shuffle(self, items: list) -> None:
        """Fisher-Yates shuffle in place"""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]


def _random_tables(rng: SplitMix64, label_counts, edges):
    # Unaries by node then label, then pairwise by edge and row-major
    unary = [rng.uniforms(count) for count in label_counts]
    pairwise = [
        rng.uniforms(label_counts[u] * label_counts[v]).reshape(label_counts[u], label_counts[v])
        for u, v in edges
    ]
    return unary, pairwise


def gen_complete(n: int, labels: int, seed: int) -> GraphicalModel:
    """
    Fully connected model with i.i.d. uniform [0, 1) costs

    Args:
        n: Number of nodes (>= 1)
        labels: Labels per node (>= 1)
        seed: splitmix64 seed

    Returns:
        GraphicalModel on the complete graph K_n
    """
    if n < 1 or labels < 1:
        raise ValueError("gen_complete requires n >= 1 and labels >= 1")
    label_counts = [labels] * n
    edges = list(combinations(range(n), 2))
    unary, pairwise = _random_tables(SplitMix64(seed), label_counts, edges)
    return GraphicalModel(label_counts, edges, unary, pairwise)


def gen_potts_grid(rows: int, cols: int, labels: int, lam: float, seed: int) -> GraphicalModel:
    """
    4-connected grid with uniform [0, 1) unaries and Potts pairwise costs

    Args:
        rows: Grid rows
        cols: Grid columns
        labels: Labels per node
        lam: Cost of disagreeing neighbors (>= 0)
        seed: splitmix64 seed

    Returns:
        GraphicalModel; node (r, c) has index r * cols + c

    Raises:
        ValueError: If the grid is empty or lam is negative
    """
    if rows < 1 or cols < 1 or labels < 1:
        raise ValueError("gen_potts_grid requires rows >= 1, cols >= 1 and labels >= 1")
    if not lam >= 0.0:
        raise ValueError(f"gen_potts_grid requires lam >= 0, got {lam}")
    n = rows * cols
    edges = []
    for node in range(n):
        r, c = divmod(node, cols)
        if c + 1 < cols:
            edges.append((node, node + 1))
        if r + 1 < rows:
            edges.append((node, node + cols))
    edges.sort()
    rng = SplitMix64(seed)
    unary = [rng.uniforms(labels) for _ in range(n)]
    potts = lam * (1.0 - np.eye(labels))
    pairwise = [potts for _ in edges]
    return GraphicalModel([labels] * n, edges, unary, pairwise)


def sparsify(model: GraphicalModel, keep_fraction: float, seed: int) -> GraphicalModel:
    """
    Keep a seeded random subset of the edges

    round(keep_fraction * |E|) edges survive (half rounds up), at least one
    when the model has any. Node count and unary tables are unchanged and
    surviving edges keep their lexicographic order.

    Args:
        model: Source model
        keep_fraction: Fraction in (0, 1]
        seed: splitmix64 seed for the shuffle

    Returns:
        Sparsified GraphicalModel
    """
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    m = model.num_edges
    keep = int(math.floor(keep_fraction * m + 0.5))
    if m >= 1:
        keep = max(1, keep)

    order = list(range(m))
    SplitMix64(seed).shuffle(order)
    kept = sorted(order[:keep], key=lambda e: model.edges[e])
    return GraphicalModel(
        model.label_counts,
        [model.edges[e] for e in kept],
        model.unary,
        [model.pairwise[e] for e in kept],
    )


def gen_random(n: int, max_labels: int, density: float, seed: int) -> GraphicalModel:
    """
    Fuzz instance: random label counts in [1, max_labels], complete graph
    sparsified to `density`

    Args:
        n: Number of nodes
        max_labels: Upper bound on labels per node
        density: Fraction of edges kept, in (0, 1]
        seed: splitmix64 seed

    Returns:
        GraphicalModel
    """
    if n < 1 or max_labels < 1:
        raise ValueError("gen_random requires n >= 1 and max_labels >= 1")
    rng = SplitMix64(seed)
    label_counts = [1 + rng.randbelow(max_labels) for _ in range(n)]
    edges = list(combinations(range(n), 2))
    unary, pairwise = _random_tables(rng, label_counts, edges)
    full = GraphicalModel(label_counts, edges, unary, pairwise)
    if density >= 1.0:
        return full
    return sparsify(full, density, rng.next_u64())


def parse_arguments(argv: List[str] = None):
    """Parses command-line arguments."""
    parser = argparse.ArgumentParser(description="Generate synthetic min-sum model files.")
    parser.add_argument("kind", choices=["complete", "grid", "random"], help="Instance family")
    parser.add_argument("--nodes", type=int, default=10, help="Nodes (complete/random, default: 10)")
    parser.add_argument("--rows", type=int, default=8, help="Grid rows (default: 8)")
    parser.add_argument("--cols", type=int, default=8, help="Grid columns (default: 8)")
    parser.add_argument("--labels", type=int, default=4, help="Labels per node (default: 4)")
    parser.add_argument("--lam", type=float, default=1.0, help="Potts weight (default: 1.0)")
    parser.add_argument("--density", type=float, default=1.0, help="Edge density for random (default: 1.0)")
    parser.add_argument("--keep", type=float, default=1.0, help="Sparsify the result to this fraction")
    parser.add_argument("--seed", type=int, default=0, help="splitmix64 seed (default: 0)")
    parser.add_argument("--out", type=str, required=True, help="Output model file")
    return parser.parse_args(argv)


def build_model(args) -> GraphicalModel:
    """Model described by parsed generator arguments"""
    if args.kind == "complete":
        model = gen_complete(args.nodes, args.labels, args.seed)
    elif args.kind == "grid":
        model = gen_potts_grid(args.rows, args.cols, args.labels, args.lam, args.seed)
    else:
        model = gen_random(args.nodes, args.labels, args.density, args.seed)
    if args.keep < 1.0:
        model = sparsify(model, args.keep, args.seed)
    return model


def main(argv: List[str] = None) -> int:
    from model_io import write_model

    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    args = parse_arguments(argv)
    try:
        model = build_model(args)
    except ValueError as e:
        logger.error(f"Invalid generator arguments: {e}")
        return 1
    write_model(model, args.out)
    logger.info(f"Wrote {args.kind} model ({model.num_nodes} nodes, {model.num_edges} edges) to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
