"""Structure learning by conditional-entropy blanket search.

For every candidate scope of size at most ``k`` the learner picks the
candidate blanket (size at most ``b``, disjoint from the scope) with the
smallest plug-in conditional entropy, estimates the Markov-blanket canonical
factor against it, and zeroes entries whose magnitude is within the
threshold ``epsilon / 2**(k + 2)``.  Factors left all-ones are dropped.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from decimal import Decimal, localcontext
from math import comb
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .canonical import CanonicalFactor, DistributionAccess, mb_canonical_factor
from .model import Factor, Scope, ValidationError, as_scope
from .oracle import JointTable, _expand, conditional_entropy, log_marginal
from .params import BOUND_CONTEXT, STRICT, ClipConfig, LearnedModel, _ceil, _check_positive, _dec
from .sampling import Dataset, EmpiricalAccess, ZeroCount


@dataclass(frozen=True)
class CandidateSets:
    factor_scopes: tuple[Scope, ...]
    blankets: tuple[Scope, ...]


@dataclass(frozen=True)
class BlanketChoice:
    scope: Scope
    chosen_blanket: Scope
    entropy: float


def _scopes_up_to(n: int, lo: int, hi: int) -> tuple[Scope, ...]:
    return tuple(s for r in range(lo, hi + 1) for s in itertools.combinations(range(n), r))


def enumerate_candidates(n: int, k: int, b: int) -> CandidateSets:
    """All non-empty scopes of size <= k and all blankets of size <= b (empty included)."""
    if not 1 <= k <= n:
        raise ValidationError(f"need 1 <= k <= n, got k={k}, n={n}")
    if not 0 <= b <= n:
        raise ValidationError(f"need 0 <= b <= n, got b={b}, n={n}")
    return CandidateSets(_scopes_up_to(n, 1, k), _scopes_up_to(n, 0, b))


def candidate_counts(n: int, k: int, b: int) -> tuple[int, int]:
    return sum(comb(n, i) for i in range(1, k + 1)), sum(comb(n, i) for i in range(b + 1))


def empirical_conditional_entropy(data: Dataset, x: Sequence[int], y: Sequence[int] = ()) -> float:
    """Plug-in ``H(X | Y)`` from counts, in nats; unobserved cells contribute 0."""
    x, y = as_scope(x), as_scope(y)
    if set(x) & set(y):
        raise ValidationError(f"{x} and {y} overlap")
    union = tuple(sorted(x + y))
    counts = data.count_table(union).astype(np.float64)
    x_axes = tuple(a for a, v in enumerate(union) if v in x)
    c_y = counts.sum(axis=x_axes, keepdims=True)
    mask = counts > 0
    c_y = np.broadcast_to(c_y, counts.shape)
    terms = counts[mask] * (np.log(counts[mask]) - np.log(c_y[mask]))
    return max(-math.fsum(terms.tolist()) / data.m, 0.0)


def default_tie_tolerance(m: int) -> float:
    """Entropy gap below which candidate blankets count as tied: ``ln(m) / m``."""
    return math.log(m) / m if m > 1 else 0.0


def best_markov_blanket(data: Dataset, scope: Sequence[int], candidates: CandidateSets,
                        tie_tolerance: float | None = None) -> BlanketChoice:
    """Argmin of the plug-in ``H(scope | Y)`` over disjoint candidate blankets.

    Every candidate within ``tie_tolerance`` of the minimum counts as tied;
    ties go to the smaller blanket, then to canonical order.  The plug-in
    estimate never increases when a variable is added to ``Y``, so without a
    tolerance the largest blanket would always win on near-independent data.
    """
    scope = as_scope(scope)
    if scope not in candidates.factor_scopes:
        raise ValidationError(f"{scope} is not a candidate factor scope")
    tol = default_tie_tolerance(data.m) if tie_tolerance is None else tie_tolerance
    members = set(scope)
    scored = [(empirical_conditional_entropy(data, scope, y), y)
              for y in candidates.blankets if not members.intersection(y)]
    best = min(h for h, _ in scored)
    h, y = min(((h, y) for h, y in scored if h <= best + tol), key=lambda t: (len(t[1]), t[1]))
    return BlanketChoice(scope, y, h)


def threshold_factor(cf: CanonicalFactor, threshold: float) -> CanonicalFactor | None:
    """Zero every log entry with magnitude <= ``threshold``; ``None`` if nothing survives."""
    values = np.where(np.abs(cf.log_values) <= threshold, 0.0, cf.log_values)
    if not np.any(values):
        return None
    return replace(cf, factor=Factor(cf.scope, values))


def structure_threshold(epsilon: float, k: int) -> float:
    return epsilon / 2 ** (k + 2)


def factor_graph_structure_learn(data: Dataset, k: int, b: int, baseline: Sequence[int],
                                 epsilon: float, clip: ClipConfig | None = None, *,
                                 tie_tolerance: float | None = None,
                                 access: DistributionAccess | None = None) -> LearnedModel:
    """Learn scopes and parameters from samples alone.

    The returned model carries only the surviving factors; the blanket chosen
    for every candidate scope is kept in ``blanket_choices``.
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    candidates = enumerate_candidates(data.n, k, b)
    clip = (clip or STRICT).resolved(k, b)
    if access is None:
        access = EmpiricalAccess(data, clip.log_floor)
    baseline = tuple(int(v) for v in baseline)
    threshold = structure_threshold(epsilon, k)
    choices, kept = [], []
    for scope in candidates.factor_scopes:
        choice = best_markov_blanket(data, scope, candidates, tie_tolerance)
        choices.append(choice)
        try:
            cf = mb_canonical_factor(access, scope, choice.chosen_blanket, baseline)
        except ZeroCount as err:
            raise ZeroCount(
                f"insufficient data for scope {scope} with chosen blanket "
                f"{choice.chosen_blanket}: {err}", scope, choice.chosen_blanket) from err
        cf = threshold_factor(cf, threshold)
        if cf is not None:
            kept.append(cf)
    return LearnedModel(data.variables, baseline, tuple(kept), blanket_choices=tuple(choices))


def structure_sample_bound(epsilon: float, delta: float, k: int, b: int, gamma: float,
                           v: int, n: int) -> int:
    """Samples sufficient for the structure learner's ``J * epsilon`` guarantee.

    Natural log, ceiling, 60-digit decimal arithmetic as for the parameter bound.
    """
    _check_positive(epsilon=epsilon, delta=delta, k=k, b=b, n=n)
    if not 0 < delta < 1:
        raise ValidationError("delta must lie in (0, 1)")
    if not 0 < gamma <= 0.5:
        raise ValidationError("gamma must lie in (0, 0.5]")
    if v < 2:
        raise ValidationError("v must be at least 2")
    with localcontext(BOUND_CONTEXT):
        eps, dlt, gam = _dec(epsilon), _dec(delta), _dec(gamma)
        lead = (1 + eps * gam ** (k + b) / 2 ** (2 * k + 3)) ** 2
        scale = Decimal(v) ** (2 * k + 2 * b) * Decimal(2) ** (8 * k + 19) / (gam ** (6 * k + 6 * b) * eps ** 4)
        log_term = (8 * k * b * Decimal(n) ** (k + b) * Decimal(v) ** (k + b) / dlt).ln()
        return _ceil(lead * scale * log_term)


def blanket_quality_bound(lambda1: float, lambda2: float, entropy_gap: float) -> float:
    """``sqrt(2 gap) / (lambda2 sqrt(lambda1))``: log-conditional error of a near-blanket."""
    _check_positive(lambda1=lambda1, lambda2=lambda2)
    if entropy_gap < 0:
        raise ValidationError("entropy gap must be non-negative")
    return math.sqrt(2 * entropy_gap) / (lambda2 * math.sqrt(lambda1))


def blanket_quality_check(joint: JointTable, scope: Sequence[int], chosen: Sequence[int],
                          blanket: Sequence[int]) -> tuple[float, float]:
    """Measured and bounded error of conditioning ``scope`` on ``chosen`` instead of everything.

    ``blanket`` is any set that screens ``scope`` off from the rest.  The
    conditioning set of the minimum probabilities is ``chosen`` joined with
    the part of ``blanket`` it misses, which screens ``scope`` off as well.
    Returns ``(max |log P(x | rest) - log P(x | chosen)|, bound)``.
    """
    scope, chosen, blanket = as_scope(scope), as_scope(chosen), as_scope(blanket)
    n = joint.n
    rest = tuple(i for i in range(n) if i not in scope)
    cover = tuple(sorted(set(chosen) | set(blanket)))
    gap = conditional_entropy(joint, scope, chosen) - conditional_entropy(joint, scope, rest)
    gap = max(gap, 0.0)

    def cond(given):
        union = tuple(sorted(scope + given))
        lj = log_marginal(joint, union)
        ax = tuple(a for a, v in enumerate(union) if v in scope)
        return union, lj - logsumexp(lj, axis=ax, keepdims=True)

    u_rest, c_rest = cond(rest)
    u_chosen, c_chosen = cond(chosen)
    c_chosen_full = _expand(c_chosen, u_chosen, n, within=u_rest)
    measured = float(np.max(np.abs(c_rest - c_chosen_full)))
    lambda1 = float(np.exp(log_marginal(joint, cover).min())) if cover else 1.0
    _, c_cover = cond(cover)
    lambda2 = float(np.exp(c_cover.min()))
    return measured, blanket_quality_bound(lambda1, lambda2, gap)

