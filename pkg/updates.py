#!/usr/bin/env python3
"""
Edge-wise BCA Updates
Message passing plus the uniform, MPLP and MPLP++ (handshake) update rules.

Every rule maps the aggregated edge cost g_uv(s,t) = pairwise(s,t) + unary_u(s)
+ unary_v(t) to new unary vectors; the new pairwise table is whatever is
left of g. Oracle calls (full passes over a |Y_u| x |Y_v| table) are
counted here so callers never have to know the per-rule costs.
"""

import logging
from dataclasses import dataclass
from typing import Dict

import numpy as np

from model import ReparamState

logger = logging.getLogger(__name__)

# Message directions
TO_U = "v->u"   # result indexed by labels of u: min over t
TO_V = "u->v"   # result indexed by labels of v: min over s

UNIFORM = "U"
MPLP = "M"
MPLPPP = "H"
RULES = (UNIFORM, MPLP, MPLPPP)

# Oracle calls per edge update
RULE_COST: Dict[str, int] = {UNIFORM: 1, MPLP: 2, MPLPPP: 3}

RULE_NAMES = {UNIFORM: "uniform", MPLP: "mplp", MPLPPP: "mplp++"}


def normalize_rule(rule: str) -> str:
    """
    Canonical rule letter

    Args:
        rule: 'u', 'm', 'h' in any case, or a full rule name

    Returns:
        One of 'U', 'M', 'H'

    Raises:
        ValueError: If the rule is unknown
    """
    key = str(rule).strip()
    for letter, name in RULE_NAMES.items():
        if key.upper() == letter or key.lower() == name:
            return letter
    raise ValueError(f"Unknown update rule: {rule!r} (expected one of u, m, h)")


@dataclass
class AggregatedEdgeCost:
    """g_uv as a dense |Y_u| x |Y_v| table"""
    table: np.ndarray

    @property
    def shape(self):
        return self.table.shape


@dataclass
class UpdateResult:
    """New unaries and residual pairwise table produced by one rule"""
    new_unary_u: np.ndarray
    new_unary_v: np.ndarray
    new_pairwise: np.ndarray
    oracle_calls: int


def pass_message(pairwise: np.ndarray, addend: np.ndarray, direction: str) -> np.ndarray:
    """
    One message: min over the far endpoint of pairwise + addend

    Args:
        pairwise: |Y_u| x |Y_v| table
        addend: Vector over the labels being minimized out
        direction: TO_U computes min_t [pairwise(s,t) + addend(t)];
            TO_V computes min_s [pairwise(s,t) + addend(s)]

    Returns:
        Message vector; costs exactly one oracle call

    Raises:
        ValueError: On dimension mismatch or unknown direction
    """
    pairwise = np.asarray(pairwise, dtype=np.float64)
    addend = np.asarray(addend, dtype=np.float64)
    if pairwise.ndim != 2 or addend.ndim != 1:
        raise ValueError("pass_message expects a 2-D table and a 1-D addend")
    if direction == TO_U:
        if addend.size != pairwise.shape[1]:
            raise ValueError(f"Addend of length {addend.size} does not match {pairwise.shape[1]} columns")
        return np.min(pairwise + addend[np.newaxis, :], axis=1)
    if direction == TO_V:
        if addend.size != pairwise.shape[0]:
            raise ValueError(f"Addend of length {addend.size} does not match {pairwise.shape[0]} rows")
        return np.min(pairwise + addend[:, np.newaxis], axis=0)
    raise ValueError(f"Unknown message direction: {direction!r}")


def _residual(g: np.ndarray, new_u: np.ndarray, new_v: np.ndarray) -> np.ndarray:
    return g - new_u[:, np.newaxis] - new_v[np.newaxis, :]


def update_uniform(g: AggregatedEdgeCost) -> UpdateResult:
    """Uniform update: both unaries become half of the global minimum of g"""
    table = g.table
    row_min = pass_message(table, np.zeros(table.shape[1]), TO_U)
    half = 0.5 * np.min(row_min)
    new_u = np.full(table.shape[0], half)
    new_v = np.full(table.shape[1], half)
    return UpdateResult(new_u, new_v, _residual(table, new_u, new_v), RULE_COST[UNIFORM])


def update_mplp(g: AggregatedEdgeCost) -> UpdateResult:
    """MPLP update: half row minima to u, half column minima to v"""
    table = g.table
    new_u = 0.5 * pass_message(table, np.zeros(table.shape[1]), TO_U)
    new_v = 0.5 * pass_message(table, np.zeros(table.shape[0]), TO_V)
    return UpdateResult(new_u, new_v, _residual(table, new_u, new_v), RULE_COST[MPLP])


def update_mplppp(g: AggregatedEdgeCost) -> UpdateResult:
    """
    MPLP++ (handshake) update in its three-message form

    u takes half its row minima, v takes everything left in its columns,
    then u takes whatever is left in its rows. Afterwards every row and
    every column of the residual pairwise table has minimum zero.
    """
    table = g.table
    new_u = 0.5 * pass_message(table, np.zeros(table.shape[1]), TO_U)
    new_v = pass_message(table, -new_u, TO_V)
    new_u = new_u + pass_message(table - new_u[:, np.newaxis], -new_v, TO_U)
    return UpdateResult(new_u, new_v, _residual(table, new_u, new_v), RULE_COST[MPLPPP])


def update_mplppp_literal(g: AggregatedEdgeCost) -> UpdateResult:
    """Handshake as four minimizations: MPLP first, then push row/column slack"""
    table = g.table
    new_u = 0.5 * pass_message(table, np.zeros(table.shape[1]), TO_U)
    new_v = 0.5 * pass_message(table, np.zeros(table.shape[0]), TO_V)
    new_v = new_v + np.min(_residual(table, new_u, new_v), axis=0)
    new_u = new_u + np.min(_residual(table, new_u, new_v), axis=1)
    return UpdateResult(new_u, new_v, _residual(table, new_u, new_v), 4)


_UPDATES = {
    UNIFORM: update_uniform,
    MPLP: update_mplp,
    MPLPPP: update_mplppp,
}


def update(g: AggregatedEdgeCost, rule: str) -> UpdateResult:
    """Run the update rule named by `rule` on g"""
    return _UPDATES[normalize_rule(rule)](g)


def aggregate(state: ReparamState, edge: int) -> AggregatedEdgeCost:
    """Materialize g_uv for one edge of the current state"""
    u, v = state.edges[edge]
    table = (state.pairwise_hat[edge]
             + state.unary_hat[u][:, np.newaxis]
             + state.unary_hat[v][np.newaxis, :])
    return AggregatedEdgeCost(table)


def apply_result(state: ReparamState, edge: int, result: UpdateResult) -> None:
    """Write a result into the state in place"""
    u, v = state.edges[edge]
    state.unary_hat[u][:] = result.new_unary_u
    state.unary_hat[v][:] = result.new_unary_v
    state.pairwise_hat[edge][:, :] = result.new_pairwise


def _fused_uniform(pairwise, unary_u, unary_v):
    row_min = pass_message(pairwise, unary_v, TO_U) + unary_u
    half = 0.5 * np.min(row_min)
    pairwise += (unary_u - half)[:, np.newaxis]
    pairwise += (unary_v - half)[np.newaxis, :]
    unary_u[:] = half
    unary_v[:] = half


def _fused_mplp(pairwise, unary_u, unary_v):
    new_u = 0.5 * (pass_message(pairwise, unary_v, TO_U) + unary_u)
    new_v = 0.5 * (pass_message(pairwise, unary_u, TO_V) + unary_v)
    pairwise += (unary_u - new_u)[:, np.newaxis]
    pairwise += (unary_v - new_v)[np.newaxis, :]
    unary_u[:] = new_u
    unary_v[:] = new_v


def apply_update(state: ReparamState, edge: int, rule: str, fused: bool = True) -> int:
    """
    Apply one BCA update to an edge of the state

    Only the two endpoint unary vectors and the edge's pairwise table are
    written; the caller must hold exclusive access to them.

    Args:
        state: Reparametrized state, mutated in place
        edge: Edge index
        rule: 'U', 'M' or 'H'
        fused: Stream the uniform and MPLP rules over the pairwise table
            instead of materializing g

    Returns:
        Oracle calls spent (1, 2 or 3)
    """
    rule = normalize_rule(rule)
    if fused and rule in (UNIFORM, MPLP):
        u, v = state.edges[edge]
        fuse = _fused_uniform if rule == UNIFORM else _fused_mplp
        fuse(state.pairwise_hat[edge], state.unary_hat[u], state.unary_hat[v])
        return RULE_COST[rule]

    result = update(aggregate(state, edge), rule)
    apply_result(state, edge, result)
    return result.oracle_calls


def dominates(a: UpdateResult, b: UpdateResult, tol: float = 1e-9) -> bool:
    """
    Componentwise dominance of output unaries

    Args:
        a: Candidate dominating result
        b: Candidate dominated result
        tol: Slack allowed per component

    Returns:
        True iff a's unaries are >= b's unaries (minus tol) in every component
    """
    if a.new_unary_u.shape != b.new_unary_u.shape or a.new_unary_v.shape != b.new_unary_v.shape:
        raise ValueError("Results have different dimensions")
    return bool(
        np.all(a.new_unary_u >= b.new_unary_u - tol)
        and np.all(a.new_unary_v >= b.new_unary_v - tol)
    )
