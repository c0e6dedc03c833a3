"""Canonical factors relative to a fixed baseline assignment.

For a scope ``D`` the log canonical factor at ``d`` is the alternating sum,
over all subsets ``U`` of ``D``, of ``log P`` at ``d`` with the variables
outside ``U`` reset to their baseline values.  The full-instantiation form
queries the joint; the Markov-blanket form queries ``P(D | Y = y_baseline)``.
Both reduce to the same combination step once the distribution has been
queried on ``val(D)``, which is what :func:`signed_subset_sum` implements.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from .model import (Assignment, Factor, FactorGraph, Scope, ValidationError, all_assignments,
                    as_scope, scope_closure, scope_key)
from .oracle import JointTable, local_log_conditional, log_conditional


class DistributionAccess(Protocol):
    """Query surface shared by the true distribution and the empirical one."""

    cardinalities: tuple[int, ...]

    def log_prob(self, x: Sequence[int]) -> float:
        """``log P(X = x)`` for a full assignment."""

    def log_conditional(self, scope: Scope, given: Scope, given_values: Sequence[int]) -> np.ndarray:
        """Table of ``log P(scope = d | given = given_values)`` over ``val(scope)``."""


class OracleAccess:
    """Exact queries against an enumerated joint table."""

    def __init__(self, joint: JointTable):
        self.joint = joint
        self.cardinalities = joint.cardinalities

    def log_prob(self, x):
        return self.joint.log_prob(x)

    def log_conditional(self, scope, given, given_values):
        return log_conditional(self.joint, scope, Assignment(given, tuple(given_values)))


class LocalAccess:
    """Exact conditionals from adjacent factors; no joint is ever built.

    Only conditioning sets that contain the Markov blanket are answerable.
    """

    def __init__(self, graph: FactorGraph):
        self.graph = graph
        self.cardinalities = graph.cardinalities

    def log_prob(self, x):
        raise NotImplementedError("full-assignment probabilities need the partition function")

    def log_conditional(self, scope, given, given_values):
        return local_log_conditional(self.graph, scope, given, given_values)


@dataclass(frozen=True, eq=False)
class CanonicalFactor:
    """A canonical factor plus the baseline and conditioning set it was computed with.

    ``given`` is ``None`` for the full-instantiation form and a (possibly
    empty) scope for the Markov-blanket form.
    """
    factor: Factor
    baseline: tuple[int, ...]
    given: Scope | None = None

    @property
    def scope(self) -> Scope:
        return self.factor.scope

    @property
    def log_values(self) -> np.ndarray:
        return self.factor.log_values

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.factor.log_values)))


def _subset_order(r: int) -> list[int]:
    return sorted(range(1 << r), key=lambda u: (bin(u).count("1"), u))


def signed_subset_sum(table: np.ndarray, base: Sequence[int]) -> np.ndarray:
    """Alternating subset sum of a log table over ``val(D)``.

    ``table[d']`` must hold the log probability queried at ``d'``; ``base`` is
    the baseline restricted to ``D``.  Entries of ``d`` that put any variable
    at its baseline value are returned as exactly 0: their terms pair up with
    opposite signs, so they are skipped instead of summed.
    """
    shape = table.shape
    r = len(shape)
    order = _subset_order(r)
    out = np.zeros(shape)
    for d in all_assignments(shape):
        if any(d[a] == base[a] for a in range(r)):
            continue
        terms = []
        for u in order:
            idx = tuple(d[a] if (u >> a) & 1 else base[a] for a in range(r))
            value = float(table[idx])
            terms.append(value if (r - bin(u).count("1")) % 2 == 0 else -value)
        out[d] = math.fsum(terms)
    return out


def _finite_or_raise(table: np.ndarray, scope: Scope, given) -> None:
    if not np.all(np.isfinite(table)):
        raise ValidationError(
            f"non-finite log probability for scope {scope} given {given}")


def _check_baseline(baseline: Sequence[int], cards: Sequence[int]) -> tuple[int, ...]:
    baseline = tuple(int(v) for v in baseline)
    if len(baseline) != len(cards):
        raise ValidationError(f"baseline has {len(baseline)} values for {len(cards)} variables")
    for i, (v, c) in enumerate(zip(baseline, cards)):
        if not 0 <= v < c:
            raise ValidationError(f"baseline value {v} out of range for variable {i}")
    return baseline


def canonical_factor(access: DistributionAccess, scope: Iterable[int],
                     baseline: Sequence[int]) -> CanonicalFactor:
    """Full-instantiation canonical factor: every term is a joint probability."""
    scope = as_scope(scope)
    if not scope:
        raise ValidationError("canonical factor scope must be non-empty")
    baseline = _check_baseline(baseline, access.cardinalities)
    shape = tuple(access.cardinalities[i] for i in scope)
    table = np.empty(shape)
    x = list(baseline)
    for d in all_assignments(shape):
        for i, v in zip(scope, d):
            x[i] = v
        table[d] = access.log_prob(x)
    _finite_or_raise(table, scope, None)
    values = signed_subset_sum(table, [baseline[i] for i in scope])
    return CanonicalFactor(Factor(scope, values), baseline, None)


def mb_canonical_factor(access: DistributionAccess, scope: Iterable[int], given: Iterable[int],
                        baseline: Sequence[int]) -> CanonicalFactor:
    """Markov-blanket canonical factor: terms are ``log P(D | Y = y_baseline)``."""
    scope = as_scope(scope)
    given = as_scope(given)
    if not scope:
        raise ValidationError("canonical factor scope must be non-empty")
    if set(scope) & set(given):
        raise ValidationError(f"scope {scope} overlaps conditioning set {given}")
    baseline = _check_baseline(baseline, access.cardinalities)
    table = np.asarray(access.log_conditional(scope, given, [baseline[i] for i in given]))
    _finite_or_raise(table, scope, given)
    values = signed_subset_sum(table, [baseline[i] for i in scope])
    return CanonicalFactor(Factor(scope, values), baseline, given)


def reconstruct(factors: Sequence[CanonicalFactor], baseline_log_prob: float,
                scopes: Sequence[Sequence[int]] | None = None) -> Callable[[Sequence[int]], float]:
    """Return ``x -> log P(baseline) + sum_j log f*_j(x)``.

    When the source ``scopes`` are given, the factor scopes must be exactly
    their closure.
    """
    if not factors:
        raise ValidationError("no canonical factors to reconstruct from")
    baseline = factors[0].baseline
    if any(f.baseline != baseline for f in factors):
        raise ValidationError("canonical factors were computed against different baselines")
    if scopes is not None:
        want = set(scope_closure(scopes))
        have = {f.scope for f in factors}
        missing = sorted(want - have, key=scope_key)
        if missing:
            raise ValidationError(f"missing closure scopes {missing}")
        extra = sorted(have - want, key=scope_key)
        if extra:
            raise ValidationError(f"scopes {extra} are not in the closure")
    tables = [(f.scope, f.log_values) for f in factors]

    def log_prob(x: Sequence[int]) -> float:
        return baseline_log_prob + math.fsum(float(t[tuple(x[i] for i in s)]) for s, t in tables)

    return log_prob


def reconstruct_table(factors: Sequence[CanonicalFactor], baseline_log_prob: float,
                      cardinalities: Sequence[int]) -> np.ndarray:
    """Dense log table of :func:`reconstruct` over all full assignments."""
    fn = reconstruct(factors, baseline_log_prob)
    out = np.empty(tuple(cardinalities))
    for x in all_assignments(cardinalities):
        out[x] = fn(x)
    return out
