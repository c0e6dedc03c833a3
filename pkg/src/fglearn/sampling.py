"""Sample generation and the empirical distribution.

Every random stream comes from NumPy's Philox4x64-10 counter-based bit
generator keyed directly with the integer seed (counter starts at zero), so
a dataset is a pure function of its inputs.
"""
from __future__ import annotations

import threading
from typing import Iterable, Sequence

import numpy as np

from .model import Assignment, FactorGraph, Scope, ValidationError, VariableSpec, as_scope
from .oracle import JointTable


class ZeroCount(LookupError):
    """An empirical query hit a zero count, so its log is undefined."""

    def __init__(self, message: str, scope: Scope = (), given: Scope = ()):
        super().__init__(message)
        self.scope = scope
        self.given = given


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed)))


class Dataset:
    """Full-assignment samples with a lazily built, thread-safe count cache."""

    def __init__(self, variables: Sequence[VariableSpec], rows, seed: int | None = None):
        self.variables = tuple(variables)
        rows = np.array(rows, dtype=np.int64, ndmin=2)
        if rows.shape[0] < 1:
            raise ValidationError("a dataset needs at least one row")
        if rows.shape[1] != len(self.variables):
            raise ValidationError(
                f"rows have {rows.shape[1]} columns for {len(self.variables)} variables")
        cards = np.array(self.cardinalities)
        if np.any(rows < 0) or np.any(rows >= cards):
            raise ValidationError("row value out of range for its variable")
        rows.setflags(write=False)
        self.rows = rows
        self.seed = seed
        self._counts: dict[Scope, np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def m(self) -> int:
        return self.rows.shape[0]

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(v.cardinality for v in self.variables)

    def head(self, m: int) -> "Dataset":
        """The first ``m`` rows as a dataset of their own."""
        return Dataset(self.variables, self.rows[:m], self.seed)

    def count_table(self, scope: Iterable[int]) -> np.ndarray:
        """Dense table of counts over ``val(scope)``."""
        scope = as_scope(scope)
        table = self._counts.get(scope)
        if table is not None:
            return table
        with self._lock:
            table = self._counts.get(scope)
            if table is None:
                table = self._build_counts(scope)
                self._counts[scope] = table
        return table

    def _build_counts(self, scope: Scope) -> np.ndarray:
        bad = [i for i in scope if not 0 <= i < self.n]
        if bad:
            raise ValidationError(f"unknown variable id(s) {bad}")
        if not scope:
            return np.array(self.m, dtype=np.int64)
        shape = tuple(self.cardinalities[i] for i in scope)
        codes = np.ravel_multi_index(tuple(self.rows[:, i] for i in scope), shape)
        table = np.bincount(codes, minlength=int(np.prod(shape))).reshape(shape)
        table.setflags(write=False)
        return table

    def count(self, event: Assignment) -> int:
        event.validate(self.variables)
        return int(self.count_table(event.scope)[tuple(event.values)])


def exact_sample(joint: JointTable, m: int, seed: int) -> Dataset:
    """``m`` IID draws by inverse CDF over the enumerated joint."""
    if m < 1:
        raise ValidationError("m must be at least 1")
    rng = make_rng(seed)
    cdf = np.cumsum(joint.probs.ravel())
    u = rng.random(m) * cdf[-1]
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
    rows = np.stack(np.unravel_index(idx, joint.cardinalities), axis=1)
    return Dataset(joint.variables, rows, seed)


def gibbs_sample(graph: FactorGraph, m: int, burn_in: int = 100, thinning: int = 1,
                 seed: int = 0, chains: int = 1) -> Dataset:
    """Systematic-scan single-site Gibbs sampling.

    ``chains`` independent chains advance in lockstep; after ``burn_in``
    sweeps each chain contributes one row every ``thinning`` sweeps.  Each
    site update reads only the factors adjacent to that variable.
    """
    if m < 1:
        raise ValidationError("m must be at least 1")
    if burn_in < 1 or thinning < 1 or chains < 1:
        raise ValidationError("burn_in, thinning and chains must all be at least 1")
    rng = make_rng(seed)
    cards = graph.cardinalities
    state = np.stack([rng.integers(0, c, size=chains) for c in cards], axis=1) if cards else \
        np.zeros((chains, 0), dtype=np.int64)
    plan = []
    for i in range(graph.n):
        parts = []
        for j in graph.factors_touching(i):
            f = graph.factors[j]
            parts.append((f.scope, f.log_values))
        plan.append(parts)

    def sweep():
        for i in range(graph.n):
            logits = np.zeros((chains, cards[i]))
            own = np.arange(cards[i])[None, :]
            for scope, table in plan[i]:
                idx = tuple(own if v == i else state[:, v][:, None] for v in scope)
                logits += table[idx]
            logits -= logits.max(axis=1, keepdims=True)
            cdf = np.cumsum(np.exp(logits), axis=1)
            u = rng.random(chains)[:, None] * cdf[:, -1:]
            state[:, i] = np.minimum((cdf <= u).sum(axis=1), cards[i] - 1)

    for _ in range(burn_in):
        sweep()
    rows = []
    collected = 0
    while collected < m:
        for _ in range(thinning):
            sweep()
        rows.append(state.copy())
        collected += chains
    return Dataset(graph.variables, np.concatenate(rows, axis=0)[:m], seed)


def empirical_log_prob(data: Dataset, event: Assignment) -> float:
    """``log`` of the empirical frequency of ``event``."""
    c = data.count(event)
    if c == 0:
        raise ZeroCount(f"no sample matches {event.as_dict()}", event.scope)
    return float(np.log(c) - np.log(data.m))


def empirical_log_conditional(data: Dataset, event: Assignment, given: Assignment,
                              log_floor: float | None = None) -> float:
    """``log P_hat(event | given)`` from counts.

    With ``log_floor`` set (clipped mode) estimates below the floor, and
    zero counts, are raised to it instead of failing.
    """
    if set(event.scope) & set(given.scope):
        raise ValidationError("event and conditioning assignment overlap")
    joint = Assignment.from_mapping({**event.as_dict(), **given.as_dict()})
    num = data.count(joint)
    den = data.count(given)
    if num == 0 or den == 0:
        if log_floor is not None:
            return float(log_floor)
        raise ZeroCount(
            f"zero count for {event.as_dict()} given {given.as_dict()}", event.scope, given.scope)
    value = float(np.log(num) - np.log(den))
    return value if log_floor is None else max(value, float(log_floor))


class EmpiricalAccess:
    """Distribution access backed by sample counts.

    ``log_floor`` switches on clipping: every probability estimate below
    ``exp(log_floor)``, zero counts included, is raised to it.
    """

    def __init__(self, data: Dataset, log_floor: float | None = None):
        self.data = data
        self.log_floor = log_floor
        self.cardinalities = data.cardinalities

    def log_prob(self, x):
        event = Assignment.full(x)
        if self.log_floor is None:
            return empirical_log_prob(self.data, event)
        c = self.data.count(event)
        if c == 0:
            return float(self.log_floor)
        return max(float(np.log(c) - np.log(self.data.m)), float(self.log_floor))

    def log_conditional(self, scope, given, given_values):
        scope, given = as_scope(scope), as_scope(given)
        union = tuple(sorted(scope + given))
        gv = dict(zip(given, given_values))
        counts = self.data.count_table(union)[tuple(gv[v] if v in gv else slice(None) for v in union)]
        den = int(counts.sum())
        if self.log_floor is not None:
            if den == 0:
                return np.full(counts.shape, float(self.log_floor))
            with np.errstate(divide="ignore"):
                est = np.log(counts) - np.log(den)
            return np.maximum(est, float(self.log_floor))
        if den == 0:
            raise ZeroCount(
                f"no sample has blanket {given} at its baseline values {tuple(given_values)} "
                f"(scope {scope})", scope, given)
        if np.any(counts == 0):
            raise ZeroCount(
                f"empty cell in counts for scope {scope} given blanket {given} at baseline", scope, given)
        return np.log(counts) - np.log(den)
