"""Closed-form parameter learning for a known factor graph structure.

Each closure scope gets its Markov-blanket canonical factor estimated from
counts, conditioning on the blanket taken from the given structure.  The
learned model is the unnormalized product of those factors; nothing here
evaluates a partition function.
"""
from __future__ import annotations

import graphlib
import math
from decimal import ROUND_CEILING, Context, Decimal, localcontext
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .canonical import CanonicalFactor, DistributionAccess, mb_canonical_factor
from .model import (FactorGraph, Scope, ValidationError, VariableSpec, as_scope, markov_blanket,
                    scope_closure)
from .oracle import JointTable, joint_table
from .sampling import Dataset, EmpiricalAccess, ZeroCount


@dataclass(frozen=True)
class ClipConfig:
    """Strict or clipped probability estimates.

    In clipped mode every estimate below ``gamma ** (k + b)`` is raised to
    that floor.  ``k`` and ``b`` default to the bounds of the structure being
    learned when left unset.
    """
    mode: str = "strict"
    gamma: float | None = None
    k: int | None = None
    b: int | None = None

    def __post_init__(self):
        if self.mode not in ("strict", "clipped"):
            raise ValidationError(f"unknown clip mode {self.mode!r}")
        if self.mode == "clipped":
            if self.gamma is None or not 0.0 < self.gamma <= 0.5:
                raise ValidationError("clipped mode needs gamma in (0, 0.5]")

    @property
    def clipped(self) -> bool:
        return self.mode == "clipped"

    def resolved(self, k: int, b: int) -> "ClipConfig":
        return replace(self, k=self.k if self.k is not None else k,
                       b=self.b if self.b is not None else b)

    @property
    def log_floor(self) -> float | None:
        if not self.clipped:
            return None
        if self.k is None or self.b is None:
            raise ValidationError("clip floor needs both k and b")
        return (self.k + self.b) * math.log(self.gamma)


STRICT = ClipConfig()


def clip_log_prob(log_p_hat, clip: ClipConfig) -> float:
    """Raise an estimated log probability to the clip floor.

    A :class:`ZeroCount` (or ``-inf``) stands for an estimate of zero.
    """
    floor = clip.log_floor
    if floor is None:
        raise ValidationError("clip_log_prob needs a clipped configuration")
    if isinstance(log_p_hat, ZeroCount) or log_p_hat is None:
        return floor
    return max(float(log_p_hat), floor)


@dataclass(frozen=True, eq=False)
class LearnedModel:
    variables: tuple[VariableSpec, ...]
    baseline: tuple[int, ...]
    canonical_factors: tuple[CanonicalFactor, ...]
    log_partition: float | None = None
    blanket_choices: tuple = field(default=(), repr=False)

    @property
    def scopes(self) -> list[Scope]:
        return [f.scope for f in self.canonical_factors]

    def factor(self, scope) -> CanonicalFactor | None:
        scope = as_scope(scope)
        for f in self.canonical_factors:
            if f.scope == scope:
                return f
        return None

    def to_graph(self) -> FactorGraph:
        return FactorGraph(self.variables, tuple(f.factor for f in self.canonical_factors))

    def log_score(self, x: Sequence[int]) -> float:
        """Unnormalized log score; differences between assignments are always meaningful."""
        return math.fsum(f.factor.value_at(x) for f in self.canonical_factors)

    def log_prob(self, x: Sequence[int]) -> float:
        if self.log_partition is None:
            raise ValidationError("model is unnormalized; call normalize_if_small first")
        return self.log_score(x) - self.log_partition

    def joint(self, cap: int | None = None) -> JointTable:
        return joint_table(self.to_graph(), cap=cap)


def _diagnose(err: ZeroCount, scope: Scope, blanket: Scope) -> ZeroCount:
    return ZeroCount(
        f"insufficient data for scope {scope} with blanket {blanket}: {err}", scope, blanket)


def factor_graph_parameter_learn(scopes: Sequence[Sequence[int]], data: Dataset | None,
                                 baseline: Sequence[int], clip: ClipConfig | None = None, *,
                                 access: DistributionAccess | None = None,
                                 variables: Sequence[VariableSpec] | None = None) -> LearnedModel:
    """Estimate every closure-scope canonical factor given its structural blanket.

    ``access`` replaces the empirical distribution (for example with the true
    one); otherwise counts from ``data`` are used, strict or clipped per
    ``clip``.
    """
    scopes = [as_scope(s) for s in scopes]
    if variables is None:
        if data is None:
            raise ValidationError("need data or explicit variables")
        variables = data.variables
    variables = tuple(variables)
    n = len(variables)
    for s in scopes:
        if not s or any(not 0 <= i < n for i in s):
            raise ValidationError(f"invalid scope {s} for {n} variables")
    closure = scope_closure(scopes)
    k = max(len(s) for s in scopes)
    b = max(len(markov_blanket(scopes, s, n)) for s in closure)
    clip = (clip or STRICT).resolved(k, b)
    if access is None:
        if data is None:
            raise ValidationError("need data when no access object is supplied")
        access = EmpiricalAccess(data, clip.log_floor)
    baseline = tuple(int(v) for v in baseline)
    factors = []
    for scope in closure:
        blanket = markov_blanket(scopes, scope, n)
        try:
            factors.append(mb_canonical_factor(access, scope, blanket, baseline))
        except ZeroCount as err:
            raise _diagnose(err, scope, blanket) from err
    return LearnedModel(variables, baseline, tuple(factors))


def normalize_if_small(model: LearnedModel, cap: int | None = None) -> LearnedModel:
    """Fill in the log partition function by enumeration (raises ``CapExceeded``)."""
    joint = joint_table(model.to_graph(), cap=cap)
    return replace(model, log_partition=joint.log_partition)


def _check_positive(**kwargs) -> None:
    for name, value in kwargs.items():
        if not value > 0 or not math.isfinite(value):
            raise ValidationError(f"{name} must be positive and finite, got {value}")


def _dec(x) -> Decimal:
    """Decimal view of an argument, read as the literal it prints as (0.1 means 1/10)."""
    return Decimal(repr(x)) if isinstance(x, float) else Decimal(x)


def _ceil(value: Decimal) -> int:
    return int(value.to_integral_value(rounding=ROUND_CEILING))


BOUND_CONTEXT = Context(prec=60)


def parameter_sample_bound(epsilon: float, delta: float, k: int, b: int, gamma: float,
                           J: int, v: int) -> int:
    """Samples sufficient for symmetric KL at most ``J * epsilon`` w.p. ``1 - delta``.

    Natural log throughout; the result is the ceiling of the bound, evaluated
    in 60-digit decimal arithmetic so that large counts are exact integers.
    """
    _check_positive(epsilon=epsilon, delta=delta, k=k, J=J)
    if not 0 < delta < 1:
        raise ValidationError("delta must lie in (0, 1)")
    if not 0 < gamma <= 0.5:
        raise ValidationError("gamma must lie in (0, 0.5]")
    if b < 0 or v < 2:
        raise ValidationError("need b >= 0 and v >= 2")
    with localcontext(BOUND_CONTEXT):
        eps, dlt, gam = _dec(epsilon), _dec(delta), _dec(gamma)
        lead = (1 + eps / 2 ** (2 * k + 2)) ** 2
        scale = Decimal(2) ** (4 * k + 3) / (gam ** (k + b) * eps ** 2)
        log_term = (Decimal(2) ** (k + 2) * J * Decimal(v) ** (k + b) / dlt).ln()
        return _ceil(lead * scale * log_term)


def bn_clipped_mle(parent_sets: Sequence[Sequence[int]], data: Dataset, epsilon: float) -> list[np.ndarray]:
    """Maximum-likelihood CPTs clipped into ``[epsilon/4, 1 - epsilon/4]``.

    CPT ``i`` has shape ``(*parent cardinalities, card_i)`` with parents in
    increasing id order.  Parent configurations never seen in the data get a
    uniform row.  Rows are renormalized after clipping.
    """
    if not 0 < epsilon < 2:
        raise ValidationError("epsilon must lie in (0, 2)")
    n = data.n
    if len(parent_sets) != n:
        raise ValidationError(f"need one parent set per variable ({n})")
    parents = [as_scope(p) for p in parent_sets]
    for i, ps in enumerate(parents):
        if i in ps or any(not 0 <= p < n for p in ps):
            raise ValidationError(f"invalid parent set {ps} for variable {i}")
    try:
        tuple(graphlib.TopologicalSorter({i: ps for i, ps in enumerate(parents)}).static_order())
    except graphlib.CycleError as err:
        raise ValidationError(f"parent sets contain a cycle: {err.args[1]}") from None
    lo, hi = epsilon / 4, 1 - epsilon / 4
    cpts = []
    for i, ps in enumerate(parents):
        family = tuple(sorted(ps + (i,)))
        counts = np.moveaxis(data.count_table(family).astype(np.float64), family.index(i), -1)
        totals = counts.sum(axis=-1, keepdims=True)
        card = counts.shape[-1]
        with np.errstate(invalid="ignore", divide="ignore"):
            cpt = np.where(totals > 0, counts / np.where(totals > 0, totals, 1), 1.0 / card)
        cpt = np.clip(cpt, lo, hi)
        cpts.append(cpt / cpt.sum(axis=-1, keepdims=True))
    return cpts


def bn_log_prob(parent_sets: Sequence[Sequence[int]], cpts: Sequence[np.ndarray], x: Sequence[int]) -> float:
    """Log probability of a full assignment under a CPT-parameterized network."""
    total = 0.0
    for i, (ps, cpt) in enumerate(zip(parent_sets, cpts)):
        idx = tuple(x[p] for p in as_scope(ps)) + (x[i],)
        total += math.log(cpt[idx])
    return total
