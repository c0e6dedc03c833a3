"""Brute-force exact inference over the enumerated joint distribution.

Everything here is deliberately naive: the full joint table is built once and
every query is an array reduction over it.  It is the ground truth the
learners are checked against, so it shares no code with them beyond the
data model.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .model import Assignment, FactorGraph, Scope, ValidationError, VariableSpec, as_scope, markov_blanket

DEFAULT_CAP = 2 ** 24


class CapExceeded(RuntimeError):
    """The requested enumeration is larger than the configured cap."""


def _check_cap(size: int, cap: int | None) -> None:
    if cap is None:
        cap = DEFAULT_CAP
    if size > cap:
        raise CapExceeded(f"joint table would have {size} cells, cap is {cap}")


@dataclass(frozen=True, eq=False)
class JointTable:
    variables: tuple[VariableSpec, ...]
    log_probs: np.ndarray
    log_partition: float | None = None

    def __post_init__(self):
        log_probs = np.array(self.log_probs, dtype=np.float64)
        shape = tuple(v.cardinality for v in self.variables)
        if log_probs.shape != shape:
            raise ValidationError(f"table shape {log_probs.shape} does not match {shape}")
        if not np.all(np.isfinite(log_probs)):
            raise ValidationError("joint table must be strictly positive")
        log_probs.setflags(write=False)
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "log_probs", log_probs)

    @classmethod
    def from_probs(cls, variables: Sequence[VariableSpec], probs) -> "JointTable":
        """Build from probabilities given as a shaped table or a flat row-major list."""
        variables = tuple(variables)
        probs = np.asarray(probs, dtype=np.float64)
        shape = tuple(v.cardinality for v in variables)
        if probs.ndim == 1 and probs.size == int(np.prod(shape)):
            probs = probs.reshape(shape)
        if np.any(probs <= 0):
            raise ValidationError("joint table must be strictly positive")
        total = probs.sum()
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"joint table sums to {total}, not 1")
        return cls(variables, np.log(probs / total))

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return self.log_probs.shape

    def log_prob(self, x: Sequence[int]) -> float:
        return float(self.log_probs[tuple(x)])


def joint_table(graph: FactorGraph, cap: int | None = None) -> JointTable:
    """Enumerate the normalized Gibbs distribution of ``graph``.

    ``cap`` limits the number of table cells; ``None`` means ``DEFAULT_CAP``.
    """
    shape = graph.cardinalities
    _check_cap(graph.state_space_size(), cap)
    score = np.zeros(shape)
    for f in graph.factors:
        score = score + _expand(f.log_values, f.scope, graph.n)
    log_z = float(logsumexp(score))
    return JointTable(graph.variables, score - log_z, log_z)


def _expand(table: np.ndarray, scope: Scope, n: int, within: Scope | None = None) -> np.ndarray:
    """Reshape a table over ``scope`` so it broadcasts against a table over ``within``."""
    within = tuple(range(n)) if within is None else within
    pos = {v: a for a, v in enumerate(scope)}
    shape = [table.shape[pos[v]] if v in pos else 1 for v in within]
    return table.reshape(shape)


def _check_ids(joint: JointTable, ids: Iterable[int]) -> Scope:
    scope = as_scope(ids)
    bad = [i for i in scope if not 0 <= i < joint.n]
    if bad:
        raise ValidationError(f"unknown variable id(s) {bad}")
    return scope


def log_marginal(joint: JointTable, scope: Iterable[int]) -> np.ndarray:
    """Log marginal table over ``scope`` (sorted ids), summed in log space."""
    scope = _check_ids(joint, scope)
    others = tuple(i for i in range(joint.n) if i not in scope)
    if not others:
        return joint.log_probs
    return logsumexp(joint.log_probs, axis=others)


def marginal(joint: JointTable, scope: Iterable[int]) -> np.ndarray:
    return np.exp(log_marginal(joint, scope))


def log_conditional(joint: JointTable, target: Iterable[int], given: Assignment) -> np.ndarray:
    """Table of ``log P(target | given)`` over ``val(target)``."""
    target = _check_ids(joint, target)
    given_scope = _check_ids(joint, given.scope)
    if set(target) & set(given_scope):
        raise ValidationError(f"target {target} overlaps conditioning scope {given_scope}")
    given.validate(joint.variables)
    union = tuple(sorted(target + given_scope))
    table = log_marginal(joint, union)
    gv = given.as_dict()
    table = table[tuple(gv[v] if v in gv else slice(None) for v in union)]
    return table - logsumexp(table)


def conditional(joint: JointTable, target: Iterable[int], given: Assignment) -> np.ndarray:
    return np.exp(log_conditional(joint, target, given))


def min_conditional_gamma(joint: JointTable) -> float:
    """Smallest single-variable conditional ``P(x_i | x_{-i})`` over all i and x."""
    gamma = np.inf
    for i in range(joint.n):
        cond = joint.log_probs - logsumexp(joint.log_probs, axis=i, keepdims=True)
        gamma = min(gamma, float(np.exp(cond.min())))
    return gamma


def _check_layout(p: JointTable, q: JointTable) -> None:
    if p.cardinalities != q.cardinalities:
        raise ValidationError(
            f"joint layouts differ: {p.cardinalities} vs {q.cardinalities}")


def kl(p: JointTable, q: JointTable) -> float:
    """``D(p || q)`` in nats."""
    _check_layout(p, q)
    value = float(np.sum(p.probs * (p.log_probs - q.log_probs)))
    return max(value, 0.0)


def symmetric_kl(p: JointTable, q: JointTable) -> float:
    _check_layout(p, q)
    value = float(np.sum((p.probs - q.probs) * (p.log_probs - q.log_probs)))
    return max(value, 0.0)


def normalized_kl(p: JointTable, q: JointTable) -> float:
    return kl(p, q) / p.n


def normalized_symmetric_kl(p: JointTable, q: JointTable) -> float:
    return symmetric_kl(p, q) / p.n


def conditional_entropy(joint: JointTable, x: Iterable[int], y: Iterable[int] = ()) -> float:
    """``H(X | Y)`` in nats.

    Variables of ``x`` that also appear in ``y`` are fully determined and
    drop out, so ``H(X | Y) = 0`` whenever ``X`` is contained in ``Y``.
    """
    y = _check_ids(joint, y)
    x = tuple(i for i in _check_ids(joint, x) if i not in y)
    if not x:
        return 0.0
    union = tuple(sorted(x + y))
    log_xy = log_marginal(joint, union)
    log_y = _expand(log_marginal(joint, y), y, joint.n, within=union) if y else logsumexp(log_xy)
    value = -float(np.sum(np.exp(log_xy) * (log_xy - log_y)))
    return max(value, 0.0)


def entropy(joint: JointTable, x: Iterable[int]) -> float:
    return conditional_entropy(joint, x, ())


def local_log_conditional(graph: FactorGraph, scope: Iterable[int],
                          given: Iterable[int], given_values: Sequence[int]) -> np.ndarray:
    """Exact ``log P(scope | given = given_values)`` computed from adjacent factors only.

    Valid whenever ``given`` contains the Markov blanket of ``scope``: the
    factors touching ``scope`` then involve no other variables, and the rest
    of the graph cancels in the normalization.  No enumeration of the joint.
    """
    scope = as_scope(scope)
    given = as_scope(given)
    if set(scope) & set(given):
        raise ValidationError("scope and conditioning set overlap")
    missing = set(markov_blanket(graph, scope)) - set(given)
    if missing:
        raise ValidationError(
            f"conditioning set {given} misses blanket variables {sorted(missing)}")
    gv = dict(zip(given, (int(v) for v in given_values)))
    shape = tuple(graph.variables[i].cardinality for i in scope)
    table = np.zeros(shape)
    touching = sorted({j for i in scope for j in graph.factors_touching(i)})
    for j in touching:
        f = graph.factors[j]
        part = f.log_values[tuple(gv[v] if v in gv else slice(None) for v in f.scope)]
        sub = tuple(v for v in f.scope if v not in gv)
        table = table + _expand(part, sub, graph.n, within=scope)
    return table - logsumexp(table)
