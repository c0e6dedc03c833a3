"""Model generators and scripted experiments evaluated against the oracle."""
from __future__ import annotations

import csv
import math
import os
import time
from dataclasses import dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from .canonical import OracleAccess, canonical_factor, mb_canonical_factor
from .model import Factor, FactorGraph, Scope, ValidationError, VariableSpec, markov_blanket, scope_closure, scope_key
from .oracle import JointTable, joint_table, min_conditional_gamma, normalized_symmetric_kl, symmetric_kl
from .params import ClipConfig, LearnedModel, factor_graph_parameter_learn
from .sampling import Dataset, exact_sample, gibbs_sample, make_rng
from .structure import enumerate_candidates, factor_graph_structure_learn

FAMILIES = ("chain", "grid", "star", "random", "chain-triple")


def _grid_shape(n: int, rows: int | None) -> tuple[int, int]:
    if rows is None:
        rows = max((r for r in range(2, math.isqrt(n) + 1) if n % r == 0), default=None)
        if rows is None:
            raise ValidationError(f"grid needs n = rows * cols with both >= 2, got n={n}")
    if rows < 2 or n % rows or n // rows < 2:
        raise ValidationError(f"n={n} is not a {rows}-row rectangle")
    return rows, n // rows


def family_scopes(family: str, n: int, *, rng=None, k: int = 2, degree: int = 3,
                  rows: int | None = None, n_factors: int | None = None) -> list[Scope]:
    if family == "chain":
        if n < 2:
            raise ValidationError("a chain needs at least two variables")
        return [(i, i + 1) for i in range(n - 1)]
    if family == "chain-triple":
        if n < 4:
            raise ValidationError("chain-triple needs at least four variables")
        c = n // 2 - 1
        return [(i, i + 1) for i in range(n - 1)] + [(c, c + 1, c + 2)]
    if family == "star":
        if n < 2:
            raise ValidationError("a star needs a hub and at least one leaf")
        return [(0, i) for i in range(1, n)]
    if family == "grid":
        r, c = _grid_shape(n, rows)
        scopes = []
        for i in range(r):
            for j in range(c):
                v = i * c + j
                if j + 1 < c:
                    scopes.append((v, v + 1))
                if i + 1 < r:
                    scopes.append((v, v + c))
        return sorted(scopes, key=scope_key)
    if family == "random":
        if rng is None:
            raise ValidationError("random family needs an RNG")
        if not 1 <= k <= n:
            raise ValidationError(f"need 1 <= k <= n, got k={k}")
        target = n if n_factors is None else n_factors
        deg = [0] * n
        chosen: set[Scope] = set()
        for _ in range(50 * n):
            if len(chosen) >= target:
                break
            open_vars = [i for i in range(n) if deg[i] < degree]
            size = int(rng.integers(1, k + 1))
            if len(open_vars) < size:
                continue
            scope = tuple(sorted(int(i) for i in rng.choice(open_vars, size=size, replace=False)))
            if scope in chosen:
                continue
            chosen.add(scope)
            for i in scope:
                deg[i] += 1
        if not chosen:
            raise ValidationError("random family produced no factors")
        return sorted(chosen, key=scope_key)
    raise ValidationError(f"unknown family {family!r}; choose from {FAMILIES}")


def generate_model(family: str, n: int, max_cardinality: int = 2, strength: float = 3.0,
                   seed: int = 0, **options) -> FactorGraph:
    """Seeded graph whose log factor entries are uniform on ``[0, ln strength]``."""
    if max_cardinality < 2:
        raise ValidationError("max_cardinality must be at least 2")
    if strength < 1:
        raise ValidationError("strength must be at least 1")
    rng = make_rng(seed)
    if max_cardinality == 2:
        cards = [2] * n
    else:
        cards = [int(c) for c in rng.integers(2, max_cardinality + 1, size=n)]
    variables = tuple(VariableSpec(i, c) for i, c in enumerate(cards))
    scopes = family_scopes(family, n, rng=rng, **options)
    hi = math.log(strength)
    factors = [Factor(s, rng.uniform(0.0, hi, size=tuple(cards[i] for i in s)) if hi > 0
                      else np.zeros(tuple(cards[i] for i in s))) for s in scopes]
    return FactorGraph(variables, tuple(factors))


# ---------------------------------------------------------------------------
# oracle-side diagnostics


def oracle_canonical(joint: JointTable, scopes: Iterable[Scope], baseline) -> dict[Scope, np.ndarray]:
    access = OracleAccess(joint)
    return {s: canonical_factor(access, s, baseline).log_values for s in scopes}


def nontrivial_scopes(joint: JointTable, scopes: Iterable[Scope], baseline, atol: float = 1e-9) -> set[Scope]:
    return {s for s, t in oracle_canonical(joint, scopes, baseline).items() if np.max(np.abs(t)) > atol}


@dataclass(frozen=True)
class Calibration:
    epsilon: float
    threshold: float
    noise_floor: float
    smallest_signal: float

    @property
    def feasible(self) -> bool:
        return 3 * self.noise_floor < self.smallest_signal


def calibrate_epsilon(joint: JointTable, m: int, k: int, b: int, baseline, seed: int,
                      clip: ClipConfig | None = None, atol: float = 1e-9) -> Calibration:
    """Place the threshold between 3x the measured noise floor and the weakest true signal.

    The noise floor is the largest learned ``|log f|`` entry over scopes whose
    true canonical factor is trivial, on a calibration sample of size ``m``
    drawn with ``seed``.  The threshold is the geometric mean of the two ends.
    """
    candidates = enumerate_candidates(joint.n, k, b).factor_scopes
    truth = oracle_canonical(joint, candidates, baseline)
    signal = [np.abs(t)[np.abs(t) > atol].min() for t in truth.values() if np.max(np.abs(t)) > atol]
    smallest = float(min(signal)) if signal else math.inf
    data = exact_sample(joint, m, seed)
    raw = factor_graph_structure_learn(data, k, b, baseline, epsilon=1e-300, clip=clip)
    noise = 0.0
    for cf in raw.canonical_factors:
        if np.max(np.abs(truth[cf.scope])) <= atol:
            noise = max(noise, cf.max_abs())
    lo = 3 * noise
    if math.isinf(smallest):
        threshold = max(lo, 1e-12) * 2
    else:
        threshold = math.sqrt(max(lo, 1e-300) * smallest)
    return Calibration(threshold * 2 ** (k + 2), threshold, noise, smallest)


def learner_blankets(model: LearnedModel, given_scopes: Sequence[Scope] | None) -> dict[Scope, Scope]:
    """Conditioning set used for every scope the learner estimated."""
    if model.blanket_choices:
        return {c.scope: c.chosen_blanket for c in model.blanket_choices}
    n = len(model.variables)
    return {s: markov_blanket(given_scopes, s, n) for s in scope_closure(given_scopes)}


def graceful_degradation_bound(joint: JointTable, true_scopes: Sequence[Scope], model: LearnedModel,
                               given_scopes: Sequence[Scope] | None = None) -> dict[str, float]:
    """Oracle evaluation of the error bound for a learner facing a misspecified structure.

    Terms, each a sum of per-scope maxima of absolute log differences:
    ``estimation`` (learned factor vs. the true factor under the learner's
    conditioning set), ``blanket`` (that factor vs. the true canonical factor,
    for scopes whose conditioning set is not the true blanket) and
    ``omitted`` (true canonical factors over scopes the learner never
    estimates).  ``total`` is twice their sum.
    """
    baseline = model.baseline
    access = OracleAccess(joint)
    n = joint.n
    blankets = learner_blankets(model, given_scopes)
    learned = {cf.scope: cf.log_values for cf in model.canonical_factors}
    estimation = blanket_term = omitted = 0.0
    for scope, y in blankets.items():
        target = mb_canonical_factor(access, scope, y, baseline).log_values
        got = learned.get(scope, np.zeros_like(target))
        estimation += float(np.max(np.abs(got - target)))
        if tuple(y) != markov_blanket(true_scopes, scope, n):
            exact = canonical_factor(access, scope, baseline).log_values
            blanket_term += float(np.max(np.abs(target - exact)))
    for scope in scope_closure(true_scopes):
        if scope not in blankets:
            omitted += canonical_factor(access, scope, baseline).max_abs()
    return {"estimation": estimation, "blanket": blanket_term, "omitted": omitted,
            "total": 2 * (estimation + blanket_term + omitted)}


# ---------------------------------------------------------------------------
# config-driven experiments

KINDS = ("curve", "recovery", "degradation")
METRICS = ("sym-kl", "normalized-sym-kl", "recovery", "runtime-seconds", "degradation-bound", "epsilon")


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    seed: int
    m: int
    metric: str
    value: float

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValidationError(f"unknown metric {self.metric!r}")
        if not math.isfinite(self.value) or self.value < 0:
            raise ValidationError(f"metric {self.metric} has invalid value {self.value}")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    kind: str = "curve"
    learner: str = "params"
    family: str = "chain"
    n: int = 8
    k: int = 2
    b: int = 2
    max_cardinality: int = 2
    strength: float = 3.0
    m_schedule: tuple[int, ...] = (1000,)
    seeds: tuple[int, ...] = (1,)
    model_seed: int | None = None
    model_file: str | None = None
    epsilon: float | str = "auto"
    mode: str = "clipped"
    gamma: float | None = None
    calibration_seed: int = 0
    sampler: str = "exact"
    burn_in: int = 100
    thinning: int = 1
    chains: int = 1
    record_runtime: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"kind must be one of {KINDS}")
        if self.learner not in ("params", "struct"):
            raise ValidationError("learner must be 'params' or 'struct'")
        if not self.seeds:
            raise ValidationError("seed list must be non-empty")
        ms = self.m_schedule
        if not ms or any(a >= b for a, b in zip(ms, ms[1:])) or ms[0] < 1:
            raise ValidationError("m schedule must be positive and strictly increasing")
        if self.model_file is not None and not os.path.exists(self.model_file):
            raise ValidationError(f"model file {self.model_file} does not exist")
        if self.epsilon != "auto" and not (isinstance(self.epsilon, float) and self.epsilon > 0):
            raise ValidationError("epsilon must be 'auto' or a positive number")
        if self.sampler not in ("exact", "gibbs"):
            raise ValidationError("sampler must be 'exact' or 'gibbs'")


def parse_config(text: str, base_dir: str | None = None) -> ExperimentConfig:
    """Parse ``key = value`` lines; lists are comma-separated."""
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().replace("-", "_"), value.strip()
        if not sep or key not in types:
            raise ValidationError(f"line {lineno}: unknown or malformed setting {raw.strip()!r}")
        try:
            if key in ("m_schedule", "seeds"):
                values[key] = tuple(int(float(v)) for v in value.split(","))
            elif key in ("n", "k", "b", "max_cardinality", "calibration_seed", "burn_in", "thinning", "chains"):
                values[key] = int(value)
            elif key == "model_seed":
                values[key] = None if value.lower() == "none" else int(value)
            elif key in ("strength",):
                values[key] = float(value)
            elif key == "gamma":
                values[key] = None if value.lower() in ("none", "oracle") else float(value)
            elif key == "epsilon":
                values[key] = "auto" if value == "auto" else float(value)
            elif key == "record_runtime":
                if value.lower() not in ("yes", "no", "true", "false"):
                    raise ValueError(value)
                values[key] = value.lower() in ("yes", "true")
            elif key == "model_file":
                values[key] = os.path.join(base_dir, value) if base_dir and not os.path.isabs(value) else value
            else:
                values[key] = value
        except ValueError:
            raise ValidationError(f"line {lineno}: bad value for {key}: {value!r}") from None
    if "experiment" not in values:
        raise ValidationError("config needs an 'experiment' id")
    return ExperimentConfig(**values)


def _model_for(config: ExperimentConfig, seed: int) -> FactorGraph:
    from .io import read_graph
    if config.model_file is not None:
        return read_graph(config.model_file)
    model_seed = seed if config.model_seed is None else config.model_seed
    return generate_model(config.family, config.n, config.max_cardinality, config.strength, model_seed)


def _sample(config: ExperimentConfig, graph: FactorGraph, joint: JointTable, m: int, seed: int) -> Dataset:
    if config.sampler == "gibbs":
        return gibbs_sample(graph, m, config.burn_in, config.thinning, seed, config.chains)
    return exact_sample(joint, m, seed)


def _clip(config: ExperimentConfig, joint: JointTable) -> ClipConfig:
    if config.mode == "strict":
        return ClipConfig()
    gamma = config.gamma if config.gamma is not None else min(min_conditional_gamma(joint), 0.5)
    return ClipConfig("clipped", gamma)


def run_experiment(config: ExperimentConfig) -> list[ResultRow]:
    """Run every (seed, m) cell of a config; rows sorted by (seed, m).

    Wall-clock rows (learning call only) are emitted only with
    ``record_runtime``, since they would make repeated runs differ.
    """
    rows: list[ResultRow] = []
    exp = config.experiment
    max_m = config.m_schedule[-1]
    calibrations: dict[tuple, object] = {}
    for seed in config.seeds:
        graph = _model_for(config, seed)
        joint = joint_table(graph)
        clip = _clip(config, joint)
        baseline = (0,) * graph.n
        true_scopes = graph.scopes
        given = [s for s in true_scopes if len(s) <= config.k]
        data_all = _sample(config, graph, joint, max_m, seed)
        for m in config.m_schedule:
            data = data_all.head(m)
            epsilon = config.epsilon
            if config.learner == "struct" and epsilon == "auto":
                key = (config.model_seed if config.model_seed is not None else seed, m)
                if key not in calibrations:
                    calibrations[key] = calibrate_epsilon(
                        joint, m, config.k, config.b, baseline, config.calibration_seed, clip)
                epsilon = calibrations[key].epsilon
                rows.append(ResultRow(exp, seed, m, "epsilon", epsilon))
            start = time.perf_counter()
            if config.learner == "params":
                model = factor_graph_parameter_learn(given, data, baseline, clip)
            else:
                model = factor_graph_structure_learn(data, config.k, config.b, baseline, epsilon, clip)
            elapsed = time.perf_counter() - start
            learned = model.joint()
            if config.record_runtime:
                rows.append(ResultRow(exp, seed, m, "runtime-seconds", elapsed))
            rows.append(ResultRow(exp, seed, m, "sym-kl", symmetric_kl(joint, learned)))
            rows.append(ResultRow(exp, seed, m, "normalized-sym-kl", normalized_symmetric_kl(joint, learned)))
            if config.kind == "recovery":
                cands = enumerate_candidates(graph.n, config.k, config.b).factor_scopes
                truth = nontrivial_scopes(joint, cands, baseline)
                rows.append(ResultRow(exp, seed, m, "recovery", float(set(model.scopes) == truth)))
            if config.kind == "degradation":
                bound = graceful_degradation_bound(joint, true_scopes, model,
                                                   given if config.learner == "params" else None)
                rows.append(ResultRow(exp, seed, m, "degradation-bound", bound["total"]))
    return sorted(rows, key=lambda r: (r.seed, r.m))


RESULT_HEADER = ("experiment", "seed", "m", "metric", "value")


def write_results(rows: Sequence[ResultRow], path: str | os.PathLike) -> None:
    """Append rows to a CSV result table, writing the header for a new file."""
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if new:
            writer.writerow(RESULT_HEADER)
        for r in rows:
            writer.writerow((r.experiment, r.seed, r.m, r.metric, format(r.value, ".17g")))


def mean_metric(rows: Sequence[ResultRow], metric: str) -> dict[int, float]:
    """Mean of ``metric`` over seeds, keyed by m."""
    acc: dict[int, list[float]] = {}
    for r in rows:
        if r.metric == metric:
            acc.setdefault(r.m, []).append(r.value)
    return {m: float(np.mean(v)) for m, v in sorted(acc.items())}
