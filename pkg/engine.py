#!/usr/bin/env python3
"""
BCA Solver Engine
Sequential and matching-parallel dual block-coordinate ascent, convergence
control, oracle-call accounting and primal rounding.
"""

import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from dual import dual_value
from model import GraphicalModel, Labeling, ReparamState, energy, init_reparam
from schedule import EdgeSchedule, compute_schedule, schedule_stats
from updates import RULE_COST, apply_update, normalize_rule

logger = logging.getLogger(__name__)

SEQUENTIAL = "sequential"
PARALLEL = "parallel"
_MODE_ALIASES = {"seq": SEQUENTIAL, "sequential": SEQUENTIAL, "par": PARALLEL, "parallel": PARALLEL}


def normalize_mode(mode: str) -> str:
    """Canonical mode name ('sequential' or 'parallel')"""
    try:
        return _MODE_ALIASES[str(mode).strip().lower()]
    except KeyError:
        raise ValueError(f"Unknown mode: {mode!r} (expected seq or par)")


def load_config(config_file: Optional[str] = None) -> Dict[str, Any]:
    """
    Load solver configuration from file or use defaults

    Args:
        config_file: Path to JSON configuration file

    Returns:
        Configuration dictionary
    """
    default_config = {
        'rule': 'H',
        'mode': SEQUENTIAL,
        'num_workers': 4,

        # Stopping
        'max_normalized_iterations': 1000.0,
        'rel_improvement_threshold': 1e-8,
        'checkpoint_every': 1.0,

        # Metadata only
        'seed': 0,

        'log_level': 'INFO'
    }

    if config_file and os.path.exists(config_file):
        logger.info(f"Loading configuration from {config_file}")
        with open(config_file, 'r') as f:
            user_config = json.load(f)
        default_config.update(user_config)

    return default_config


def save_config(config: Dict[str, Any], path: str) -> None:
    """Write the effective solver settings next to an experiment's outputs"""
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(config, f, indent=2, sort_keys=True)
        f.write("\n")
    logger.debug(f"Solver settings saved to {path}")


@dataclass
class SolveConfig:
    """Typed solver settings"""
    rule: str = 'H'
    mode: str = SEQUENTIAL
    num_workers: int = 1
    max_normalized_iterations: float = 1000.0
    rel_improvement_threshold: float = 1e-8
    checkpoint_every: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.rule = normalize_rule(self.rule)
        self.mode = normalize_mode(self.mode)
        if self.num_workers < 1:
            raise ValueError(f"num_workers must be >= 1, got {self.num_workers}")
        if self.max_normalized_iterations < 0:
            raise ValueError("max_normalized_iterations must be >= 0")
        if self.rel_improvement_threshold < 0:
            raise ValueError("rel_improvement_threshold must be >= 0")
        if self.checkpoint_every < 0:
            raise ValueError("checkpoint_every must be >= 0")

    @classmethod
    def from_config(cls, config: Dict[str, Any]) -> "SolveConfig":
        return cls(
            rule=config.get('rule', 'H'),
            mode=config.get('mode', SEQUENTIAL),
            num_workers=int(config.get('num_workers', 1)),
            max_normalized_iterations=float(config.get('max_normalized_iterations', 1000.0)),
            rel_improvement_threshold=float(config.get('rel_improvement_threshold', 1e-8)),
            checkpoint_every=float(config.get('checkpoint_every', 1.0)),
            seed=int(config.get('seed', 0)),
        )


@dataclass
class Checkpoint:
    normalized_iterations: float
    oracle_calls: int
    dual: float
    wall_time_ms: float
    energy: float = math.inf


@dataclass
class SolveTrace:
    """History of one solve and its final primal/dual pair"""
    checkpoints: List[Checkpoint] = field(default_factory=list)
    final_labeling: Optional[Labeling] = None
    final_energy: float = math.inf
    final_dual: float = -math.inf
    iterations: int = 0
    converged: bool = False
    rule: str = 'H'
    mode: str = SEQUENTIAL
    workers: int = 1
    seed: int = 0
    rounds_in_schedule: int = 0
    max_matching_width: int = 0

    @property
    def gap(self) -> float:
        return self.final_energy - self.final_dual

    @property
    def oracle_calls(self) -> int:
        return self.checkpoints[-1].oracle_calls if self.checkpoints else 0

    @property
    def normalized_iterations(self) -> float:
        return self.checkpoints[-1].normalized_iterations if self.checkpoints else 0.0

    def summary(self) -> Dict[str, Any]:
        return {
            "rule": self.rule,
            "mode": self.mode,
            "workers": self.workers,
            "seed": self.seed,
            "final_dual": self.final_dual,
            "final_energy": self.final_energy,
            "gap": self.gap,
            "rounds_in_schedule": self.rounds_in_schedule,
            "max_matching_width": self.max_matching_width,
            "iterations": self.iterations,
            "oracle_calls": self.oracle_calls,
            "normalized_iterations": self.normalized_iterations,
            "converged": self.converged,
            "labeling": list(self.final_labeling) if self.final_labeling is not None else None,
        }


def _process_edges(state: ReparamState, edges: List[int], rule: str) -> int:
    calls = 0
    for e in edges:
        calls += apply_update(state, e, rule)
    return calls


def _chunks(items: List[int], parts: int) -> List[List[int]]:
    size = max(1, math.ceil(len(items) / parts))
    return [items[i:i + size] for i in range(0, len(items), size)]


def run_iteration(state: ReparamState,
                  schedule: EdgeSchedule,
                  rule: str,
                  mode: str = SEQUENTIAL,
                  workers: int = 1,
                  executor: Optional[ThreadPoolExecutor] = None) -> int:
    """
    Apply the update rule once to every edge of the schedule

    Sequential mode walks the rounds in order. Parallel mode splits each
    round into contiguous chunks, runs them on the worker pool and waits for
    all of them before starting the next round. Edges of a round share no
    node, so both modes produce bit-identical states.

    Args:
        state: Reparametrized state, mutated in place
        schedule: Edge schedule covering the model's edges
        rule: 'U', 'M' or 'H'
        mode: 'sequential' or 'parallel'
        workers: Worker threads for parallel mode
        executor: Optional pool reused across iterations

    Returns:
        Oracle calls spent (rule cost x |E|)
    """
    rule = normalize_rule(rule)
    mode = normalize_mode(mode)

    if mode == SEQUENTIAL or workers <= 1:
        return _process_edges(state, schedule.edge_order(), rule)

    own_executor = executor is None
    if own_executor:
        executor = ThreadPoolExecutor(max_workers=workers)
    calls = 0
    try:
        for matching in schedule.rounds:
            futures = [executor.submit(_process_edges, state, chunk, rule)
                       for chunk in _chunks(matching, workers)]
            # Barrier: the next round reads what this one wrote
            wait(futures)
            calls += sum(future.result() for future in futures)
    finally:
        if own_executor:
            executor.shutdown(wait=True)
    return calls


def round_primal(state: ReparamState) -> Labeling:
    """
    Sequential rounding of the reparametrized costs

    Node u takes the label minimizing its unary plus the pairwise costs to
    already labeled neighbors v < u; ties go to the smallest label.

    Args:
        state: Reparametrized state

    Returns:
        Labeling
    """
    model = state.model
    labels = [0] * model.num_nodes
    for u in range(model.num_nodes):
        cost = state.unary_hat[u].copy()
        for v, e in model.neighbors(u):
            if v >= u:
                continue
            # Edge (v, u) with v < u: u indexes the columns
            cost += state.pairwise_hat[e][labels[v], :]
        labels[u] = int(np.argmin(cost))
    return Labeling(labels)


class BCASolver:
    """Dual block-coordinate ascent on one model with a fixed edge schedule"""

    def __init__(self, model: GraphicalModel, config: Optional[SolveConfig] = None):
        """
        Initialize the solver

        Args:
            model: Graphical model to solve
            config: Solver settings (defaults if omitted)
        """
        self.model = model
        self.config = config or SolveConfig()
        self.schedule = compute_schedule(model)
        self.state = init_reparam(model)
        self.executor = None
        if self.config.mode == PARALLEL and self.config.num_workers > 1:
            self.executor = ThreadPoolExecutor(max_workers=self.config.num_workers)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        if self.executor is not None:
            self.executor.shutdown(wait=True)
            self.executor = None

    def _new_trace(self) -> SolveTrace:
        stats = schedule_stats(self.schedule, self.model.num_nodes)
        return SolveTrace(
            rule=self.config.rule,
            mode=self.config.mode,
            workers=self.config.num_workers,
            seed=self.config.seed,
            rounds_in_schedule=stats["rounds"],
            max_matching_width=stats["max_width"],
        )

    def _checkpoint(self, trace: SolveTrace, calls: int, start: float) -> float:
        num_edges = self.model.num_edges
        dual = dual_value(self.state)
        labeling = round_primal(self.state)
        value = energy(self.model, labeling)
        if value < trace.final_energy:
            trace.final_labeling, trace.final_energy = labeling, value
        trace.checkpoints.append(Checkpoint(
            normalized_iterations=(calls / num_edges) if num_edges else 0.0,
            oracle_calls=calls,
            dual=dual,
            wall_time_ms=(time.perf_counter() - start) * 1000.0,
            energy=value,
        ))
        trace.final_dual = dual
        logger.debug(f"[{self.config.rule}] calls={calls} dual={dual:.10g} energy={value:.10g}")
        return dual

    def solve(self) -> SolveTrace:
        """
        Iterate until the dual stalls or the iteration cap is hit

        Returns:
            SolveTrace with checkpoints, best rounded labeling and final dual
        """
        config = self.config
        num_edges = self.model.num_edges
        trace = self._new_trace()
        start = time.perf_counter()

        logger.info(f"Solving {self.model} with rule {config.rule} "
                    f"({config.mode}, {len(self.schedule)} rounds)")

        last_dual = self._checkpoint(trace, 0, start)
        if num_edges == 0:
            trace.converged = True
            return trace
        step = RULE_COST[config.rule]
        if step > config.max_normalized_iterations:
            logger.warning(f"Cap of {config.max_normalized_iterations} normalized iterations "
                           f"is below one iteration of rule {config.rule}")
            return trace

        calls = 0
        iterations_since = 0
        last_norm = 0.0
        while True:
            calls += run_iteration(self.state, self.schedule, config.rule, config.mode,
                                   config.num_workers, self.executor)
            trace.iterations += 1
            iterations_since += 1
            norm = calls / num_edges
            # the cap is hard: stop before an iteration that would cross it
            at_cap = norm + step > config.max_normalized_iterations

            if norm - last_norm >= config.checkpoint_every or at_cap:
                dual = self._checkpoint(trace, calls, start)
                improvement = (dual - last_dual) / max(1.0, abs(dual)) / iterations_since
                last_dual, last_norm, iterations_since = dual, norm, 0
                if improvement < config.rel_improvement_threshold:
                    trace.converged = True
                    break
            if at_cap:
                logger.warning(f"Reached {config.max_normalized_iterations} normalized iterations "
                               f"without convergence")
                break

        logger.info(f"Done after {trace.iterations} iterations: dual={trace.final_dual:.10g} "
                    f"energy={trace.final_energy:.10g} gap={trace.gap:.3e}")
        return trace


def solve(model: GraphicalModel, config: Optional[SolveConfig] = None) -> SolveTrace:
    """
    Solve a model from the zero reparametrization

    Args:
        model: Graphical model
        config: Solver settings

    Returns:
        SolveTrace
    """
    with BCASolver(model, config) as solver:
        return solver.solve()


def iterations_to_reach(trace: SolveTrace, target: float) -> float:
    """Normalized iterations of the first checkpoint with dual >= target (inf if never)"""
    for point in trace.checkpoints:
        if point.dual >= target:
            return point.normalized_iterations
    return math.inf
