"""Discrete factor graph data model.

Factors are stored in log space: a factor over scope ``(i, j)`` is a dense
``float64`` array of shape ``(card_i, card_j)`` laid out row-major, so the
last scope variable varies fastest once flattened.  Scopes are tuples of
strictly increasing variable ids.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

Scope = tuple[int, ...]


class ValidationError(ValueError):
    """Raised when a model object or argument violates its contract."""


def as_scope(ids: Iterable[int]) -> Scope:
    """Return ``ids`` as a sorted, duplicate-free tuple of ints."""
    ids = [int(i) for i in ids]
    scope = tuple(sorted(set(ids)))
    if len(scope) != len(ids):
        raise ValidationError(f"repeated variable in scope {ids}")
    return scope


def scope_key(scope: Sequence[int]) -> tuple:
    """Canonical total order on scopes: size first, then lexicographic."""
    return (len(scope), tuple(scope))


@dataclass(frozen=True)
class VariableSpec:
    id: int
    cardinality: int
    name: str | None = None

    def __post_init__(self):
        if self.cardinality < 2:
            raise ValidationError(
                f"variable {self.id} has cardinality {self.cardinality} < 2")

    @property
    def label(self) -> str:
        return self.name if self.name else f"X{self.id}"


def binary_variables(n: int) -> tuple[VariableSpec, ...]:
    return tuple(VariableSpec(i, 2) for i in range(n))


@dataclass(frozen=True)
class Assignment:
    """Values for the variables of ``scope``, in scope order."""
    scope: Scope
    values: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "scope", tuple(int(i) for i in self.scope))
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if len(self.scope) != len(self.values):
            raise ValidationError("assignment scope and values differ in length")
        if any(a >= b for a, b in zip(self.scope, self.scope[1:])):
            raise ValidationError(f"assignment scope {self.scope} not strictly increasing")

    @classmethod
    def full(cls, values: Sequence[int]) -> "Assignment":
        return cls(tuple(range(len(values))), tuple(values))

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, int]) -> "Assignment":
        scope = tuple(sorted(mapping))
        return cls(scope, tuple(mapping[i] for i in scope))

    def as_dict(self) -> dict[int, int]:
        return dict(zip(self.scope, self.values))

    def restrict(self, scope: Iterable[int]) -> "Assignment":
        lookup = self.as_dict()
        scope = as_scope(scope)
        try:
            return Assignment(scope, tuple(lookup[i] for i in scope))
        except KeyError as err:
            raise ValidationError(f"variable {err.args[0]} not in assignment scope") from None

    def validate(self, variables: Sequence[VariableSpec]) -> None:
        for i, v in zip(self.scope, self.values):
            if not 0 <= i < len(variables):
                raise ValidationError(f"unknown variable id {i}")
            if not 0 <= v < variables[i].cardinality:
                raise ValidationError(
                    f"value {v} out of range for variable {i} "
                    f"(cardinality {variables[i].cardinality})")

    def __len__(self) -> int:
        return len(self.scope)


@dataclass(frozen=True, eq=False)
class Factor:
    """A positive factor, held as a dense table of natural-log values."""
    scope: Scope
    log_values: np.ndarray

    def __post_init__(self):
        scope = tuple(int(i) for i in self.scope)
        if not scope:
            raise ValidationError("factor scope must be non-empty")
        if any(a >= b for a, b in zip(scope, scope[1:])):
            raise ValidationError(f"factor scope {scope} not strictly increasing")
        table = np.array(self.log_values, dtype=np.float64, order="C")
        if table.ndim != len(scope):
            raise ValidationError(
                f"table has {table.ndim} axes for a scope of size {len(scope)}")
        if any(s < 2 for s in table.shape):
            raise ValidationError("every scope variable needs at least two values")
        if not np.all(np.isfinite(table)):
            raise ValidationError(f"non-finite log value in factor over {scope}")
        table.setflags(write=False)
        object.__setattr__(self, "scope", scope)
        object.__setattr__(self, "log_values", table)

    @classmethod
    def from_values(cls, scope: Sequence[int], values, cardinalities: Sequence[int] | None = None):
        """Build from positive (not log) values."""
        values = np.asarray(values, dtype=np.float64)
        if cardinalities is not None:
            values = values.reshape(tuple(cardinalities))
        if np.any(values <= 0):
            raise ValidationError("factor values must be strictly positive")
        return cls(tuple(scope), np.log(values))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.log_values.shape

    def value_at(self, x: Sequence[int]) -> float:
        """Log value at the restriction of a full assignment ``x``."""
        return float(self.log_values[tuple(x[i] for i in self.scope)])

    def is_trivial(self, atol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.log_values) <= atol))

    def __eq__(self, other):
        if not isinstance(other, Factor):
            return NotImplemented
        return self.scope == other.scope and np.array_equal(self.log_values, other.log_values)

    def __hash__(self):
        return hash((self.scope, self.log_values.tobytes()))


@dataclass(frozen=True)
class FactorGraph:
    variables: tuple[VariableSpec, ...]
    factors: tuple[Factor, ...] = ()
    _adjacency: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        variables = tuple(self.variables)
        factors = tuple(self.factors)
        for pos, var in enumerate(variables):
            if var.id != pos:
                raise ValidationError(f"variable ids must be dense: got {var.id} at {pos}")
        adjacency = [[] for _ in variables]
        for j, f in enumerate(factors):
            for axis, i in enumerate(f.scope):
                if not 0 <= i < len(variables):
                    raise ValidationError(f"factor {j} references unknown variable {i}")
                if f.shape[axis] != variables[i].cardinality:
                    raise ValidationError(
                        f"factor {j} axis {axis} has length {f.shape[axis]}, "
                        f"variable {i} has cardinality {variables[i].cardinality}")
                adjacency[i].append(j)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "_adjacency", tuple(tuple(a) for a in adjacency))

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(v.cardinality for v in self.variables)

    @property
    def scopes(self) -> list[Scope]:
        return [f.scope for f in self.factors]

    @property
    def max_scope_size(self) -> int:
        """The bound ``k`` on factor scope size."""
        return max((len(f.scope) for f in self.factors), default=0)

    @property
    def max_blanket_size(self) -> int:
        """The bound ``b``: largest Markov blanket over the closure of the factor scopes.

        Subsets of a scope can have larger blankets than the scope itself (the
        middle of a chain), and those are the blankets the learner conditions on.
        """
        if not self.factors:
            return 0
        return max(len(markov_blanket(self, s)) for s in scope_closure(self.scopes))

    def factors_touching(self, i: int) -> tuple[int, ...]:
        return self._adjacency[i]

    def state_space_size(self) -> int:
        return int(np.prod(self.cardinalities, dtype=object))

    def with_factors(self, factors: Iterable[Factor]) -> "FactorGraph":
        return FactorGraph(self.variables, tuple(factors))


ScopeSource = Union[FactorGraph, Sequence[Sequence[int]]]


def _scopes_of(source: ScopeSource) -> list[Scope]:
    if isinstance(source, FactorGraph):
        return source.scopes
    return [as_scope(s) for s in source]


def markov_blanket(source: ScopeSource, target: Iterable[int], n: int | None = None) -> Scope:
    """Union of every scope meeting ``target``, minus ``target`` itself.

    ``source`` is a factor graph or a plain list of scopes; with a list of
    scopes the variable count ``n`` is used to validate ``target``.
    """
    target = set(int(i) for i in target)
    if isinstance(source, FactorGraph):
        n = source.n
    if n is not None:
        bad = [i for i in target if not 0 <= i < n]
        if bad:
            raise ValidationError(f"unknown variable id(s) {sorted(bad)}")
    blanket: set[int] = set()
    for scope in _scopes_of(source):
        if target.intersection(scope):
            blanket.update(scope)
    return tuple(sorted(blanket - target))


def scope_closure(scopes: Sequence[Sequence[int]]) -> list[Scope]:
    """All non-empty subsets of the given scopes, deduplicated, in canonical order."""
    if not scopes:
        raise ValidationError("scope list must be non-empty")
    closure: set[Scope] = set()
    for s in scopes:
        s = as_scope(s)
        if not s:
            raise ValidationError("empty scope in input")
        for r in range(1, len(s) + 1):
            closure.update(itertools.combinations(s, r))
    return sorted(closure, key=scope_key)


def sigma_restrict(kept: Iterable[int], d: Assignment, baseline: Sequence[int] | Assignment) -> Assignment:
    """Keep ``d`` on ``kept``; every other variable of ``d``'s scope takes its baseline value."""
    if isinstance(baseline, Assignment):
        if baseline.scope != tuple(range(len(baseline.scope))):
            raise ValidationError("baseline must be a full assignment")
        baseline = baseline.values
    kept = set(int(i) for i in kept)
    if not kept.issubset(d.scope):
        raise ValidationError(f"kept set {sorted(kept)} is not a subset of {d.scope}")
    values = tuple(v if i in kept else int(baseline[i]) for i, v in zip(d.scope, d.values))
    return Assignment(d.scope, values)


def unnormalized_score(graph: FactorGraph, x: Sequence[int] | Assignment) -> float:
    """Sum of the log factor values at the full assignment ``x``."""
    if isinstance(x, Assignment):
        if x.scope != tuple(range(graph.n)):
            raise ValidationError("score needs a full assignment")
        x.validate(graph.variables)
        x = x.values
    elif len(x) != graph.n:
        raise ValidationError(f"expected {graph.n} values, got {len(x)}")
    return float(sum(f.value_at(x) for f in graph.factors))


def all_assignments(cardinalities: Sequence[int]):
    """Iterate over ``val`` of a scope in row-major order."""
    return itertools.product(*(range(c) for c in cardinalities))
